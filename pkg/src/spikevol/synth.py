"""Procedural spike-like meshes with exactly known volume, plus dataset assembly.

A spike is a closed swept tube: elliptical cross-sections follow a smooth
axis through the phenotype's control points, modulated by per-spikelet
bumps whose lateral offsets alternate sides (the frontal silhouette is
therefore at least as wide as the lateral one for asymmetry > 1).  Awns
are slender closed prisms attached at spikelet stations.  The surface is
watertight by construction, so the tetrahedron-sum volume is its exact
ground truth.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import maskio
from .data import VIEW_AZIMUTHS, VIEW_LABELS, ManifestRow, save_manifest
from .errors import ConfigError, DataError
from .mesh import TriangleMesh, concat_meshes, mesh_signed_volume
from .ply import save_ply
from .primitives import cone as cone_mesh
from .render import ViewSpec, fit_image_size, render_mask, salt_and_pepper

STAGE_SCALES = {"flowering": 0.85, "grainfill": 1.0, "maturity": 0.95}
STAGE_ORDER = ("flowering", "grainfill", "maturity")


@dataclass
class SpikePhenotype:
    """Everything that determines one spike mesh.

    spikelet_radius_profile holds the per-spikelet base radius in mm;
    asymmetry > 1 widens the frontal (x) extent relative to the lateral
    (y) extent and drives the alternating lobe offsets.  noise adds
    seed-driven relative radius jitter; with noise = 0 the mesh is
    independent of rng_seed.
    """

    genotype_id: str
    axis_control_points: np.ndarray
    spikelet_count: int
    spikelet_radius_profile: np.ndarray
    awn_density: int = 0
    rng_seed: int = 0
    asymmetry: float = 1.2
    lobe_depth: float = 0.15
    tip_radius: float = 0.4
    noise: float = 0.0
    awn_length: float = 14.0
    awn_width: float = 0.18

    def __post_init__(self):
        self.axis_control_points = np.asarray(self.axis_control_points, float).reshape(-1, 3)
        self.spikelet_radius_profile = np.asarray(self.spikelet_radius_profile, float)
        if self.spikelet_count < 3:
            raise DataError(f"spikelet_count must be >= 3, got {self.spikelet_count}")
        if len(self.spikelet_radius_profile) != self.spikelet_count:
            raise DataError("radius profile length must equal spikelet_count")
        if np.any(self.spikelet_radius_profile <= 0):
            raise DataError("spikelet radii must be positive")
        if self.awn_density < 0:
            raise DataError("awn_density must be >= 0")


def _axis_spline(control, n):
    seg = np.linalg.norm(np.diff(control, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)])
    spline = CubicSpline(t, control, axis=0)
    tt = np.linspace(0.0, t[-1], n)
    centers = spline(tt)
    tangents = spline(tt, 1)
    tangents /= np.linalg.norm(tangents, axis=1, keepdims=True)
    return centers, tangents


def _frames(tangents):
    """Per-ring (u, w) with u the frontal (x-like) width direction."""
    xhat = np.array([1.0, 0.0, 0.0])
    u = xhat - tangents * (tangents @ xhat)[:, None]
    bad = np.linalg.norm(u, axis=1) < 1e-9
    u[bad] = np.array([0.0, 1.0, 0.0])
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    w = np.cross(tangents, u)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return u, w


def _close_tube(rings):
    """Triangulate a ring stack into a closed, outward-oriented surface."""
    n_rings, segs, _ = rings.shape
    verts = rings.reshape(-1, 3)
    cap0 = rings[0].mean(axis=0)
    cap1 = rings[-1].mean(axis=0)
    verts = np.vstack([verts, cap0[None, :], cap1[None, :]])
    c0 = n_rings * segs
    c1 = c0 + 1
    faces = []
    for r in range(n_rings - 1):
        base = r * segs
        for i in range(segs):
            j = (i + 1) % segs
            a, b = base + i, base + j
            c, d = base + segs + i, base + segs + j
            faces += [(a, b, d), (a, d, c)]
    last = (n_rings - 1) * segs
    for i in range(segs):
        j = (i + 1) % segs
        faces.append((c0, j, i))
        faces.append((c1, last + i, last + j))
    return TriangleMesh(verts, np.asarray(faces, np.int64))


def _awn_prism(base, direction, length, width, up_hint):
    """Slender closed triangular prism from `base` along `direction`."""
    d = direction / np.linalg.norm(direction)
    side = np.cross(d, up_hint)
    if np.linalg.norm(side) < 1e-9:
        side = np.cross(d, np.array([1.0, 0.0, 0.0]))
    side /= np.linalg.norm(side)
    other = np.cross(d, side)
    tri = [
        base + side * width,
        base - side * (width / 2) + other * (width * 0.866),
        base - side * (width / 2) - other * (width * 0.866),
    ]
    bot = np.asarray(tri)
    top = bot + d * length
    verts = np.vstack([bot, top])
    faces = np.asarray([
        (0, 2, 1), (3, 4, 5),
        (0, 1, 4), (0, 4, 3),
        (1, 2, 5), (1, 5, 4),
        (2, 0, 3), (2, 3, 5),
    ])
    return TriangleMesh(verts, faces)


def generate_spike(phenotype, rings_per_spikelet=9, segments=32):
    """Closed spike mesh; bit-identical for identical (phenotype, seed)."""
    ph = phenotype
    control = ph.axis_control_points
    if len(control) < 2:
        raise DataError("need at least 2 axis control points")
    gaps = np.linalg.norm(np.diff(control, axis=0), axis=1)
    max_r = float(ph.spikelet_radius_profile.max())
    if np.any(gaps < max_r):
        raise DataError(
            "self-intersecting axis: consecutive control points closer than "
            f"the largest radius ({max_r:.2f} mm)"
        )

    n_rings = max(ph.spikelet_count * rings_per_spikelet, 96)
    centers, tangents = _axis_spline(control, n_rings)
    u, w = _frames(tangents)
    s = np.linspace(0.0, 1.0, n_rings)

    stations = (np.arange(ph.spikelet_count) + 0.5) / ph.spikelet_count
    base = np.interp(s, stations, ph.spikelet_radius_profile)
    # taper the closed ends down to the tip radius
    edge = 0.5 / ph.spikelet_count
    ramp = np.clip(s / edge, 0.0, 1.0) * np.clip((1.0 - s) / edge, 0.0, 1.0)
    base = ph.tip_radius + (base - ph.tip_radius) * np.sqrt(ramp)

    sigma = 0.35 / ph.spikelet_count
    bumps = np.zeros(n_rings)
    offsets = np.zeros(n_rings)
    rng = np.random.default_rng(np.random.PCG64(ph.rng_seed))
    jitter = 1.0 + ph.noise * rng.standard_normal(ph.spikelet_count)
    for k, sk in enumerate(stations):
        g = np.exp(-(((s - sk) / sigma) ** 2))
        bumps += jitter[k] * g
        offsets += ((-1.0) ** k) * jitter[k] * g
    radial = base * (1.0 + ph.lobe_depth * bumps)
    a = np.sqrt(ph.asymmetry)
    rx = radial * a
    ry = radial / a
    off = (ph.asymmetry - 1.0) * base * 0.8 * offsets

    ang = np.linspace(0.0, 2.0 * np.pi, segments, endpoint=False)
    ca, sa = np.cos(ang), np.sin(ang)
    rings = (
        centers[:, None, :]
        + (off[:, None] + rx[:, None] * ca[None, :])[:, :, None] * u[:, None, :]
        + (ry[:, None] * sa[None, :])[:, :, None] * w[:, None, :]
    )
    mesh = _close_tube(rings)

    if ph.awn_density > 0:
        awns = []
        zhat = np.array([0.0, 0.0, 1.0])
        for k, sk in enumerate(stations):
            i = int(round(sk * (n_rings - 1)))
            sign = (-1.0) ** k
            tip = centers[i] + u[i] * (off[i] + sign * rx[i] * 0.9)
            for m in range(ph.awn_density):
                tilt = 0.25 + 0.15 * rng.random()
                direction = tangents[i] + u[i] * sign * tilt + zhat * 0.2
                length = ph.awn_length * (0.7 + 0.6 * rng.random())
                awns.append(
                    _awn_prism(tip, direction, length, ph.awn_width, w[i])
                )
        mesh = concat_meshes(mesh, *awns)
    return mesh


def scan_scene(spike, apex_height=12.0, base_radius=9.0, center_xy=(0.0, 0.0),
               gap=0.5, segments=48):
    """Spike standing above its scan cone, merged into one mesh.

    Returns (scene_mesh, cone_base_z).  The cone apex sits `gap` mm below
    the spike so the clip-and-cap removal is exact.
    """
    z_min = spike.vertices[:, 2].min()
    apex_z = z_min - gap
    base_z = apex_z - apex_height
    stand = cone_mesh(
        base_radius=base_radius,
        height=apex_height,
        segments=segments,
        base_center=(center_xy[0], center_xy[1], base_z),
    )
    return concat_meshes(spike, stand), float(base_z)


@dataclass
class GenerationConfig:
    """Knobs of the synthetic dataset generator."""

    n_genotypes: int = 10
    spikes_per_genotype: int = 5
    domain: str = "indoor"
    master_seed: int = 0
    gsd: float = 0.1
    mask_format: str = "png"
    store_meshes: bool = True
    noise_rate: float = 0.002
    awn_density: int = 2
    margin_frac: float = 0.20
    length_range: tuple = (42.0, 75.0)
    radius_range: tuple = (3.2, 5.8)
    asymmetry_range: tuple = (1.1, 1.45)
    ring_noise: float = 0.05

    def __post_init__(self):
        if self.domain not in ("indoor", "field"):
            raise ConfigError(f"unknown domain '{self.domain}'")
        if self.n_genotypes < 2:
            raise ConfigError("need at least 2 genotypes")
        if self.mask_format not in ("png", "pgm"):
            raise ConfigError(f"unknown mask format '{self.mask_format}'")


def _genotype_params(cfg, g_index):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, 7, g_index]))
    length = rng.uniform(*cfg.length_range)
    radius = rng.uniform(*cfg.radius_range)
    count = int(rng.integers(12, 19))
    asym = rng.uniform(*cfg.asymmetry_range)
    lobe = rng.uniform(0.10, 0.22)
    envelope = np.sin(np.pi * (0.15 + 0.70 * (np.arange(count) + 0.5) / count)) ** 0.5
    profile = radius * envelope * (1.0 + rng.uniform(-0.08, 0.08, size=count))
    bow = rng.uniform(0.0, 0.10) * length
    return dict(
        length=length, profile=profile, count=count,
        asymmetry=asym, lobe_depth=lobe, bow=bow,
    )


def _spike_phenotype(cfg, g_index, s_index, base):
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.master_seed, 11, g_index, s_index])
    )
    stage = STAGE_ORDER[s_index % 3]
    scale = STAGE_SCALES[stage] * rng.uniform(0.94, 1.06)
    length = base["length"] * scale
    phi = rng.uniform(0.0, 2.0 * np.pi)
    amp = base["bow"] * rng.uniform(0.6, 1.4)
    zs = np.linspace(0.0, length, 5)
    bow_shape = np.sin(np.pi * zs / length)
    control = np.stack(
        [amp * bow_shape * np.cos(phi), amp * bow_shape * np.sin(phi), zs], axis=1
    )
    profile = base["profile"] * scale * rng.uniform(0.96, 1.04)
    seed = int(
        np.random.SeedSequence([cfg.master_seed, 13, g_index, s_index]).generate_state(1)[0]
    )
    phenotype = SpikePhenotype(
        genotype_id=f"g{g_index:03d}",
        axis_control_points=control,
        spikelet_count=base["count"],
        spikelet_radius_profile=profile,
        awn_density=cfg.awn_density if cfg.domain == "field" else 0,
        rng_seed=seed,
        asymmetry=base["asymmetry"],
        lobe_depth=base["lobe_depth"],
        noise=cfg.ring_noise,
    )
    return phenotype, stage


def make_dataset(cfg, out_dir):
    """Generate meshes, render view masks, and write the manifest CSV.

    Indoor spikes get six views in capture order; field spikes a single
    side view with awns present and salt-and-pepper mask noise.  Awns are
    forced off for the indoor domain (they are removed before indoor
    imaging).  Identical configs produce byte-identical manifests.
    """
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    if cfg.store_meshes:
        (out / "meshes").mkdir(exist_ok=True)

    azimuths = VIEW_AZIMUTHS if cfg.domain == "indoor" else VIEW_AZIMUTHS[:1]
    rows = []
    for g in range(cfg.n_genotypes):
        base = _genotype_params(cfg, g)
        for sidx in range(cfg.spikes_per_genotype):
            phenotype, stage = _spike_phenotype(cfg, g, sidx, base)
            spike = generate_spike(phenotype)
            volume = mesh_signed_volume(spike).volume
            spike_id = f"{phenotype.genotype_id}_s{sidx:03d}"

            views = [ViewSpec(azimuth=az, gsd=cfg.gsd) for az in azimuths]
            size = fit_image_size(spike, views, margin_frac=cfg.margin_frac)
            views = [replace(v, image_size=size) for v in views]

            noise_rng = np.random.default_rng(
                np.random.SeedSequence([cfg.master_seed, 17, g, sidx])
            )
            paths = []
            for vi, view in enumerate(views):
                m = render_mask(spike, view)
                if cfg.domain == "field":
                    m = salt_and_pepper(m, cfg.noise_rate, noise_rng)
                rel = f"masks/{spike_id}_v{vi}_{VIEW_LABELS[vi]}.{cfg.mask_format}"
                maskio.save_mask(m, out / rel)
                paths.append(rel)
            if cfg.store_meshes:
                save_ply(spike, out / f"meshes/{spike_id}.ply")
            rows.append(
                ManifestRow(
                    spike_id=spike_id,
                    genotype=phenotype.genotype_id,
                    stage=stage,
                    domain=cfg.domain,
                    volume_mm3=float(volume),
                    views=tuple(paths),
                )
            )
    manifest_path = out / "manifest.csv"
    save_manifest(rows, manifest_path)
    with open(out / "generation_config.json", "w") as fh:
        json.dump(
            {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(cfg).items()},
            fh, indent=2, sort_keys=True,
        )
    return manifest_path, rows
