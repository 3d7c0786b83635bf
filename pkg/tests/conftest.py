import numpy as np
import pytest

from nss3dqa.model_io import ColoredMesh, ColoredPointCloud


def f32_exact(points):
    """Snap coordinates to float32-representable values."""
    return np.asarray(points, dtype=np.float64).astype(np.float32).astype(np.float64)


def random_cloud(rng, n, scale=1.0):
    pos = f32_exact(rng.normal(size=(n, 3)) * scale)
    col = rng.integers(0, 256, size=(n, 3)).astype(np.uint8)
    return ColoredPointCloud(pos, col)


def grid_mesh(n=8, extent=1.0, colors=None):
    xs = np.linspace(0.0, extent, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pos = f32_exact(np.column_stack([gx.ravel(), gy.ravel(), np.zeros(n * n)]))
    faces = []
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j
            faces.append((a, a + n, a + 1))
            faces.append((a + 1, a + n, a + n + 1))
    if colors is None:
        colors = np.full((n * n, 3), 128, dtype=np.uint8)
    return ColoredMesh(pos, colors, np.array(faces, dtype=np.int64))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
