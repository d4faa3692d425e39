import numpy as np
import pytest

from ppskit.jsd import FilterProfile, JsdGrid


def separable_rect_jsd(n_s=64, n_i=64):
    """Flat rectangular amplitude, exactly rank 1 on the grid."""
    axis_s = np.arange(n_s, dtype=float)
    axis_i = np.arange(n_i, dtype=float)
    return JsdGrid(np.ones((n_s, n_i)), axis_s, axis_i)


def rect_fraction_filter(axis, fraction):
    """Ideal bandpass transmitting exactly the first `fraction` of grid points."""
    n_pass = int(round(fraction * axis.size))
    t = np.zeros(axis.size)
    t[:n_pass] = 1.0
    return FilterProfile(axis, t), n_pass / axis.size


def random_jsd(rng, n_s=16, n_i=16, complex_phase=True):
    re = rng.standard_normal((n_s, n_i))
    im = rng.standard_normal((n_s, n_i)) if complex_phase else 0.0
    values = re + 1j * im
    axis_s = np.linspace(-1.0, 1.0, n_s)
    axis_i = np.linspace(-2.0, 2.0, n_i)
    return JsdGrid(values, axis_s, axis_i)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
