import numpy as np
import pytest

from dispersar import (
    SphereSpec,
    Target,
    TargetSet,
    make_gotcha_geometry,
    reflectivity_spectrum,
    synthesize_data,
)

# paper-scene coordinates in k0-scaled units
SINGLE_TARGET_K0 = (273.713, -346.167)
THREE_TARGETS_K0 = (
    (140.882, 40.252),
    (-40.252, -140.882),
    (-161.008, 161.008),
)
THREE_TARGET_SPHERES = ((0.8, 1.8), (1.2, 1.4), (1.8, 1.4))

SEED = 13


@pytest.fixture(scope="session")
def gotcha():
    return make_gotcha_geometry()


@pytest.fixture(scope="session")
def sphere_spectrum_cache(gotcha):
    cache = {}

    def get(k0_alpha, n_rel, n_max=32):
        key = (k0_alpha, n_rel, n_max)
        if key not in cache:
            sphere = SphereSpec(radius=k0_alpha / gotcha.k0, n_rel=n_rel, n_max=n_max)
            cache[key] = reflectivity_spectrum(sphere, gotcha.omegas, gotcha.wave_speed)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def single_target_scene(gotcha, sphere_spectrum_cache):
    """Noiseless data for the single dispersive target used throughout."""
    k0 = gotcha.k0
    position = np.array([SINGLE_TARGET_K0[0] / k0, SINGLE_TARGET_K0[1] / k0, 0.0])
    spectrum = sphere_spectrum_cache(1.4, 1.4)
    targets = TargetSet((Target(position, spectrum),))
    return position, spectrum, synthesize_data(gotcha, targets)


@pytest.fixture(scope="session")
def three_target_scene(gotcha, sphere_spectrum_cache):
    k0 = gotcha.k0
    positions = np.array([[x / k0, y / k0, 0.0] for x, y in THREE_TARGETS_K0])
    spectra = [sphere_spectrum_cache(ka, nr) for ka, nr in THREE_TARGET_SPHERES]
    targets = TargetSet(tuple(Target(p, s) for p, s in zip(positions, spectra)))
    return positions, spectra, synthesize_data(gotcha, targets)
