"""Calibration curves mapping raw baseline signals to volume.

Per view count and signal (mean pixel area or raw geometric volume), a
linear, quadratic, or exponential curve is least-squares fitted on the
training spikes.  Exponential fits start from the log-linear solution and
are refined by Gauss-Newton on the original residuals.  Negative curve
outputs clamp to zero and are flagged.
"""

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError, NumericError

KINDS = ("linear", "quadratic", "exponential")
_N_COEFFS = {"linear": 2, "quadratic": 3, "exponential": 2}


@dataclass
class CalibrationCurve:
    """Fitted raw-signal -> volume mapping.

    coefficients: (a0, a1) or (a0, a1, a2) for polynomials; (a, b) for
    a * exp(b * x).
    """

    kind: str
    coefficients: tuple
    fitted_r2: float
    view_count: int = 1
    signal: str = "area"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown curve kind '{self.kind}'")
        self.coefficients = tuple(float(c) for c in self.coefficients)
        if len(self.coefficients) != _N_COEFFS[self.kind]:
            raise DataError(
                f"{self.kind} curve needs {_N_COEFFS[self.kind]} coefficients, "
                f"got {len(self.coefficients)}"
            )


class Applied(NamedTuple):
    volume: np.ndarray
    clamped: np.ndarray


def _evaluate(curve, x):
    x = np.asarray(x, float)
    c = curve.coefficients
    if curve.kind == "linear":
        return c[0] + c[1] * x
    if curve.kind == "quadratic":
        return c[0] + c[1] * x + c[2] * x * x
    return c[0] * np.exp(c[1] * x)


def apply_curve(curve, raw):
    """Evaluate the curve; negative outputs clamp to 0 with a flag."""
    scalar = np.isscalar(raw)
    y = _evaluate(curve, raw)
    y = np.atleast_1d(y)
    clamped = y < 0
    y = np.where(clamped, 0.0, y)
    if scalar:
        return Applied(volume=float(y[0]), clamped=bool(clamped[0]))
    return Applied(volume=y, clamped=clamped)


def r_squared(y, pred):
    y = np.asarray(y, float)
    pred = np.asarray(pred, float)
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise NumericError("R^2 undefined for constant targets")
    return 1.0 - ss_res / ss_tot


def _fit_polynomial(xs, ys, degree, signal):
    design = np.vander(xs, degree + 1, increasing=True)
    if np.linalg.matrix_rank(design) < degree + 1:
        raise NumericError(f"singular normal equations for signal '{signal}'")
    coef, *_ = np.linalg.lstsq(design, ys, rcond=None)
    return tuple(coef)


def _fit_exponential(xs, ys, max_iter=50, tol=1e-10):
    if np.any(ys <= 0):
        raise DataError("exponential fit requires positive targets")
    b, log_a = np.polyfit(xs, np.log(ys), 1)
    a = float(np.exp(log_a))
    b = float(b)
    for _ in range(max_iter):
        e = np.exp(np.clip(b * xs, -700, 700))
        resid = ys - a * e
        jac = np.stack([e, a * xs * e], axis=1)
        try:
            step, *_ = np.linalg.lstsq(jac, resid, rcond=None)
        except np.linalg.LinAlgError:
            break
        a_new, b_new = a + step[0], b + step[1]
        rel = max(abs(step[0]) / max(abs(a), 1e-300),
                  abs(step[1]) / max(abs(b), 1e-300))
        a, b = float(a_new), float(b_new)
        if rel < tol:
            break
    return (a, b)


def fit_curve(xs, ys, kind, view_count=1, signal="area"):
    """Least-squares fit of one curve family; fitted_r2 is on the fit data."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise DataError("xs and ys must be equal-length 1D arrays")
    need = _N_COEFFS.get(kind)
    if need is None:
        raise DataError(f"unknown curve kind '{kind}'")
    if len(xs) < need + 1:
        raise DataError(
            f"{kind} fit needs at least {need + 1} points, got {len(xs)}"
        )
    if kind == "exponential":
        coeffs = _fit_exponential(xs, ys)
    else:
        coeffs = _fit_polynomial(xs, ys, need - 1, signal)
    curve = CalibrationCurve(
        kind=kind, coefficients=coeffs, fitted_r2=0.0,
        view_count=view_count, signal=signal,
    )
    curve.fitted_r2 = r_squared(ys, _evaluate(curve, xs))
    return curve


def select_best(curves, r2s=None):
    """Pick the highest-R^2 curve; quadratic wins ties, then fixed kind order.

    Pass validation R^2 values to select on held-out data; otherwise the
    fitted R^2 stored on each curve is used.
    """
    curves = list(curves)
    if not curves:
        raise DataError("no candidate curves")
    if r2s is None:
        r2s = [c.fitted_r2 for c in curves]
    r2s = list(r2s)
    if len(r2s) != len(curves):
        raise DataError("r2s length mismatch")
    best = max(
        range(len(curves)),
        key=lambda i: (r2s[i], curves[i].kind == "quadratic", -KINDS.index(curves[i].kind)),
    )
    return curves[best]


def curve_to_json(curve):
    return json.dumps(
        {
            "kind": curve.kind,
            "coefficients": [repr(c) for c in curve.coefficients],
            "fitted_r2": repr(curve.fitted_r2),
            "view_count": curve.view_count,
            "signal": curve.signal,
        },
        indent=2,
    )


def curve_from_json(text):
    doc = json.loads(text)
    return CalibrationCurve(
        kind=doc["kind"],
        coefficients=tuple(float(c) for c in doc["coefficients"]),
        fitted_r2=float(doc["fitted_r2"]),
        view_count=int(doc["view_count"]),
        signal=doc["signal"],
    )


def save_curve(curve, path):
    with open(path, "w") as fh:
        fh.write(curve_to_json(curve) + "\n")
    return path


def load_curve(path):
    with open(path) as fh:
        return curve_from_json(fh.read())
