import numpy as np
import pytest

from rangenoise.planescene import SynthesisConfig, synth_plane
from rangenoise.rangeimg import CameraIntrinsics, PlaneSceneSpec


@pytest.fixture
def K():
    return CameraIntrinsics(525.0, 525.0, 320.0, 240.0, 640, 480)


@pytest.fixture
def small_K():
    return CameraIntrinsics(200.0, 200.0, 80.0, 60.0, 160, 120)


@pytest.fixture
def frontal_spec():
    return PlaneSceneSpec(1000.0, 0.0)


@pytest.fixture
def angled_spec():
    return PlaneSceneSpec(1000.0, 30.0)


@pytest.fixture
def frontal_img(K, frontal_spec):
    return synth_plane(SynthesisConfig(frontal_spec, K))


@pytest.fixture
def angled_img(K, angled_spec):
    return synth_plane(SynthesisConfig(angled_spec, K))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
