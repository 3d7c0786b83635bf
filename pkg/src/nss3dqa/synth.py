"""Deterministic synthetic models and distortions for tests and demos.

Canonical shapes (plane, line, sphere, grid mesh, icosahedron) with
seeded color patterns stand in for external databases; the distortions
are reproducible proxies for the degradations quality databases apply.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .evaluation import DatasetManifest, ManifestRow, write_manifest
from .model_io import ColoredMesh, ColoredPointCloud, Model, write_ply

SHAPES = ("plane", "line", "sphere", "grid-mesh", "icosahedron")
COLOR_PATTERNS = ("uniform", "gradient", "random")


@dataclass
class SynthSpec:
    shape: str
    count: int = 1000
    color_pattern: str = "gradient"
    seed: int = 0
    extent: float = 1.0  # plane/line size or sphere radius

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.color_pattern not in COLOR_PATTERNS:
            raise ValueError(f"unknown color pattern {self.color_pattern!r}")
        if self.count < 10:
            raise ValueError("count must be >= 10")


def _colors(pattern, positions, rng):
    n = len(positions)
    if pattern == "uniform":
        return np.tile(np.array([180, 120, 60], dtype=np.uint8), (n, 1))
    if pattern == "random":
        return rng.integers(0, 256, size=(n, 3), dtype=np.int64).astype(np.uint8)
    # gradient along x, inverted along y
    x = positions[:, 0]
    y = positions[:, 1]
    span_x = x.max() - x.min() or 1.0
    span_y = y.max() - y.min() or 1.0
    r = np.round((x - x.min()) / span_x * 255.0)
    g = np.round((y - y.min()) / span_y * 255.0)
    b = 255.0 - r
    return np.stack([r, g, b], axis=1).astype(np.uint8)


def _f32(points):
    # Float32-exact coordinates so PLY round-trips reproduce the model.
    return points.astype(np.float32).astype(np.float64)


# Golden-ratio icosahedron, circumradius sqrt(1 + phi^2).
_PHI = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array([
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
], dtype=np.float64)
_ICO_FACES = np.array([
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
], dtype=np.int64)


def generate(spec: SynthSpec) -> Model:
    """Deterministic model for a spec; the seed fixes all randomness."""
    rng = np.random.default_rng(spec.seed)
    if spec.shape == "plane":
        xy = rng.uniform(0.0, spec.extent, size=(spec.count, 2))
        pos = _f32(np.column_stack([xy, np.zeros(spec.count)]))
        return ColoredPointCloud(pos, _colors(spec.color_pattern, pos, rng))
    if spec.shape == "line":
        t = rng.uniform(0.0, spec.extent, size=spec.count)
        pos = _f32(np.column_stack([t, np.zeros(spec.count),
                                    np.zeros(spec.count)]))
        return ColoredPointCloud(pos, _colors(spec.color_pattern, pos, rng))
    if spec.shape == "sphere":
        # Kept in float64 so the radius holds to full precision.
        v = rng.normal(size=(spec.count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        pos = v * spec.extent
        return ColoredPointCloud(pos, _colors(spec.color_pattern, pos, rng))
    if spec.shape == "grid-mesh":
        n = int(np.ceil(np.sqrt(spec.count)))
        xs = np.linspace(0.0, spec.extent, n)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        pos = _f32(np.column_stack([gx.ravel(), gy.ravel(),
                                    np.zeros(n * n)]))
        faces = []
        for i in range(n - 1):
            for j in range(n - 1):
                a = i * n + j
                faces.append((a, a + n, a + 1))
                faces.append((a + 1, a + n, a + n + 1))
        return ColoredMesh(pos, _colors(spec.color_pattern, pos, rng),
                           np.array(faces, dtype=np.int64))
    # icosahedron (count is ignored; the shape has 12 vertices)
    pos = _f32(_ICO_VERTS * (spec.extent / np.linalg.norm(_ICO_VERTS[0])))
    return ColoredMesh(pos, _colors(spec.color_pattern, pos, rng),
                       _ICO_FACES.copy())


DISTORTIONS = ("geometry-gaussian-noise", "downsample", "color-quantize")


def distort(model: Model, kind: str, seed: int = 0, sigma: float = None,
            ratio: float = None, bits: int = None) -> Model:
    """Apply one reproducible distortion and return a new model."""
    rng = np.random.default_rng(seed)
    is_mesh = isinstance(model, ColoredMesh)
    positions = model.vertices if is_mesh else model.positions
    colors = model.vertex_colors if is_mesh else model.colors

    if kind == "geometry-gaussian-noise":
        if sigma is None or sigma <= 0.0:
            raise ValueError("geometry-gaussian-noise needs sigma > 0")
        noisy = positions + rng.normal(0.0, sigma, size=positions.shape)
        if is_mesh:
            return ColoredMesh(noisy, colors.copy(), model.faces.copy())
        return ColoredPointCloud(noisy, colors.copy())

    if kind == "downsample":
        if is_mesh:
            raise ValueError("downsample applies to point clouds only")
        if ratio is None or not 0.0 < ratio <= 1.0:
            raise ValueError("downsample needs ratio in (0, 1]")
        n_keep = int(np.floor(ratio * len(positions)))
        if n_keep < 10:
            raise ValueError(f"ratio {ratio} keeps {n_keep} points (< 10)")
        keep = np.sort(rng.choice(len(positions), size=n_keep, replace=False))
        return ColoredPointCloud(positions[keep].copy(), colors[keep].copy())

    if kind == "color-quantize":
        if bits is None or not 1 <= bits <= 8:
            raise ValueError("color-quantize needs bits in [1, 8]")
        levels = (1 << bits) - 1
        q = np.round(np.round(colors.astype(np.float64) / 255.0 * levels)
                     / levels * 255.0).astype(np.uint8)
        if is_mesh:
            return ColoredMesh(positions.copy(), q, model.faces.copy())
        return ColoredPointCloud(positions.copy(), q)

    raise ValueError(f"unknown distortion kind {kind!r}")


# Synthetic benchmark: MOS = MOS_BASE - MOS_SLOPE * strength_index.
MOS_BASE = 9.0
MOS_SLOPE = 0.8
NOISE_SIGMAS = (0.0, 0.001, 0.002, 0.004, 0.007, 0.011, 0.016, 0.022,
                0.030, 0.040)
QUANT_BITS = (8, 8, 7, 6, 5, 5, 4, 3, 3, 2)


def build_synthetic_benchmark(out_dir, groups=5, count=2000, levels=10,
                              seed=0, mos_scale=10.0) -> DatasetManifest:
    """Write a distorted-model corpus plus its manifest under out_dir.

    Each content group is a distinct clean shape; level s applies
    geometry noise and color quantization of increasing strength, and
    MOS decreases linearly in s.
    """
    if levels > len(NOISE_SIGMAS):
        raise ValueError(f"at most {len(NOISE_SIGMAS)} levels supported")
    os.makedirs(out_dir, exist_ok=True)
    contents = [
        SynthSpec("sphere", count=count, color_pattern="gradient",
                  seed=seed + 1, extent=1.0),
        SynthSpec("plane", count=count, color_pattern="random",
                  seed=seed + 2, extent=1.0),
        SynthSpec("sphere", count=count, color_pattern="random",
                  seed=seed + 3, extent=0.5),
        SynthSpec("plane", count=count, color_pattern="gradient",
                  seed=seed + 4, extent=2.0),
        SynthSpec("sphere", count=count, color_pattern="gradient",
                  seed=seed + 5, extent=2.0),
        SynthSpec("plane", count=count, color_pattern="random",
                  seed=seed + 6, extent=0.5),
    ]
    if groups > len(contents):
        raise ValueError(f"at most {len(contents)} groups supported")
    rows = []
    for gi in range(groups):
        spec = contents[gi]
        clean = generate(spec)
        scale = spec.extent
        for s in range(levels):
            model = clean
            if NOISE_SIGMAS[s] > 0.0:
                model = distort(model, "geometry-gaussian-noise",
                                seed=seed + 100 * gi + s,
                                sigma=NOISE_SIGMAS[s] * scale)
            if QUANT_BITS[s] < 8:
                model = distort(model, "color-quantize", bits=QUANT_BITS[s])
            name = f"group{gi}_level{s}.ply"
            path = os.path.join(out_dir, name)
            with open(path, "wb") as fh:
                fh.write(write_ply(model, "binary_le"))
            rows.append(ManifestRow(path=path,
                                    mos=MOS_BASE - MOS_SLOPE * s,
                                    group=f"group{gi}"))
    manifest = DatasetManifest(rows=rows, mos_scale=mos_scale)
    comment = (f"synthetic benchmark: MOS = {MOS_BASE} - {MOS_SLOPE} * "
               "distortion_strength_index (noise sigma and color "
               "quantization increase with the index)")
    with open(os.path.join(out_dir, "manifest.csv"), "w",
              encoding="utf-8") as fh:
        write_manifest(manifest, fh, comment=comment)
    return manifest
