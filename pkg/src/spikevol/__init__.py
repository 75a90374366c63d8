"""Synthetic wheat-spike volume estimation benchmark.

Procedurally generated spike meshes with exactly known volume stand in for
structured-light scans.  Orthographic silhouette masks feed two calibrated
baselines (pixel area, circular-cross-section geometric reconstruction) and
from-scratch neural regressors (MLP, LSTM with per-step deep supervision)
trained with an inverse-frequency weighted MSE.  Evaluation covers
multi-view ablations and a field-domain fine-tuning flow.
"""

__version__ = "0.1.0"
