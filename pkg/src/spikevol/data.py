"""Dataset manifests: one row per spike with its measured volume and view files.

Indoor rows carry six views in capture order (side, front, side, front,
oblique, oblique); field rows carry a single side view.  The CSV schema is
fixed: spike_id,genotype,stage,domain,volume_mm3,view1..view6 with empty
cells beyond view1 for field rows.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError

MANIFEST_HEADER = [
    "spike_id", "genotype", "stage", "domain", "volume_mm3",
    "view1", "view2", "view3", "view4", "view5", "view6",
]

VIEW_LABELS = ("side", "front", "side", "front", "oblique", "oblique")
VIEW_AZIMUTHS = (0.0, 90.0, 180.0, 270.0, 45.0, 225.0)

# canonical evaluation subsets: first side; side+front; both sides+fronts; all
CANONICAL_VIEW_INDEX = {1: (0,), 2: (0, 1), 4: (0, 1, 2, 3), 6: (0, 1, 2, 3, 4, 5)}


@dataclass
class ManifestRow:
    spike_id: str
    genotype: str
    stage: str
    domain: str
    volume_mm3: float
    views: tuple

    def __post_init__(self):
        if self.domain not in ("indoor", "field"):
            raise DataError(f"unknown domain '{self.domain}'")
        expected = 6 if self.domain == "indoor" else 1
        if len(self.views) != expected:
            raise DataError(
                f"{self.domain} row '{self.spike_id}' needs {expected} views, "
                f"got {len(self.views)}"
            )
        if not self.volume_mm3 > 0:
            raise DataError(f"row '{self.spike_id}' has non-positive volume")


def save_manifest(rows, path):
    ids = [r.spike_id for r in rows]
    if len(set(ids)) != len(ids):
        raise DataError("duplicate spike_id in manifest")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for r in rows:
            views = list(r.views) + [""] * (6 - len(r.views))
            writer.writerow(
                [r.spike_id, r.genotype, r.stage, r.domain, repr(r.volume_mm3)] + views
            )
    return path


def load_manifest(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise DataError(f"unexpected manifest header in {path}")
        for rec in reader:
            views = tuple(v for v in rec[5:] if v)
            rows.append(
                ManifestRow(
                    spike_id=rec[0],
                    genotype=rec[1],
                    stage=rec[2],
                    domain=rec[3],
                    volume_mm3=float(rec[4]),
                    views=views,
                )
            )
    return rows


def split_by_genotype(rows, ratios=(0.7, 0.1, 0.2), seed=0):
    """Genotype-disjoint train/val/test split targeting spike-count ratios.

    Genotypes are shuffled by the seed, then each is assigned to the split
    where it fits best: tightest non-negative remaining deficit first,
    largest relative deficit when every split would overshoot.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError("split ratios must sum to 1")
    by_geno = {}
    for r in rows:
        by_geno.setdefault(r.genotype, []).append(r)
    genotypes = sorted(by_geno)
    if len(genotypes) < 3:
        raise DataError(f"need at least 3 genotypes to split, got {len(genotypes)}")
    rng = np.random.default_rng(seed)
    order = [genotypes[i] for i in rng.permutation(len(genotypes))]

    total = len(rows)
    targets = [ratio * total for ratio in ratios]
    counts = [0, 0, 0]
    assign = {}
    for g in order:
        size = len(by_geno[g])
        deficits = [targets[i] - counts[i] for i in range(3)]
        fits = [(deficits[i] - size, i) for i in range(3) if deficits[i] - size >= 0]
        if fits:
            _, best = min(fits)
        else:
            _, best = max(
                (deficits[i] / targets[i] if targets[i] > 0 else -np.inf, -i)
                for i in range(3)
            )
            best = -best
        assign[g] = best
        counts[best] += size

    splits = ([], [], [])
    for r in rows:
        splits[assign[r.genotype]].append(r)
    got = {g for part in splits for g in {r.genotype for r in part}}
    for a, b in ((0, 1), (0, 2), (1, 2)):
        ga = {r.genotype for r in splits[a]}
        gb = {r.genotype for r in splits[b]}
        if ga & gb:
            raise DataError(f"genotype leak across splits: {sorted(ga & gb)}")
    assert got == set(genotypes)
    return splits
