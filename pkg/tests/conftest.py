"""Shared fixtures: the five built-in sheet parts, a seeded generator and small scenes."""

import numpy as np
import pytest

from geom.camera import CameraModel
from geom.cloud import PointCloud
from match3d.registry import builtin_models
from synth.renderer import render
from synth.scene_spec import NoiseSpec
from synth.scenes import framed_pallet_scene

QUIET = NoiseSpec(0.0, 0.0, 0.0)


@pytest.fixture(scope="session")
def models():
    return builtin_models()


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def camera():
    return CameraModel.centered(400.0, 256, 192, (300.0, 2000.0))


@pytest.fixture
def random_cloud(rng):
    def make(n=200, scale=100.0, normals=False, intensities=False):
        points = rng.uniform(-scale, scale, (n, 3))
        nrm = None
        if normals:
            nrm = rng.normal(size=(n, 3))
            nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        inten = rng.uniform(0.0, 1.0, n) if intensities else None
        return PointCloud(points, nrm, inten)
    return make


def flat_grid(nx=30, ny=20, step=2.0, z=0.0, frame_id="camera"):
    """Regular grid on the plane z = const."""
    xs, ys = np.meshgrid(np.arange(nx) * step, np.arange(ny) * step)
    points = np.column_stack([xs.ravel(), ys.ravel(), np.full(xs.size, z)])
    return PointCloud(points, frame_id=frame_id)


@pytest.fixture(scope="session")
def pallet_render():
    """Noise-free framed pallet with the plate at a seeded pose: (spec, image, cloud, truth)."""
    spec = framed_pallet_scene(seed=3, model_id="plate", noise=QUIET)
    image, cloud, gt = render(spec)
    return spec, image, cloud, gt


@pytest.fixture(scope="session")
def noisy_pallet_render():
    spec = framed_pallet_scene(seed=11, model_id="plate")
    image, cloud, gt = render(spec)
    return spec, image, cloud, gt
