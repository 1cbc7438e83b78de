"""Spectral calculus and quadrature on the periodic grid."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvlab.grid import (
    Field2D,
    NonFiniteSymbol,
    PeriodicGrid,
    SpectralMultiplier,
    apply_multiplier,
    d,
    d_bar,
    integrate,
    laplacian,
)


@pytest.fixture(scope="module")
def unit_pi_grid():
    return PeriodicGrid(np.pi, 64)


def test_grid_validation():
    with pytest.raises(ValueError):
        PeriodicGrid(1.0, 48)  # not a power of two
    with pytest.raises(ValueError):
        PeriodicGrid(1.0, 4)  # too small
    with pytest.raises(ValueError):
        PeriodicGrid(-1.0, 16)


def test_plane_wave_derivatives(unit_pi_grid):
    f = Field2D.from_function(unit_pi_grid, lambda x, y: np.exp(1j * x))
    for op in (d_bar, d):
        out = op(f)
        assert np.max(np.abs(out.samples - 0.5j * f.samples)) < 1e-12


def test_constant_derivatives(unit_pi_grid):
    c = Field2D.from_function(unit_pi_grid, lambda x, y: 2.3 + 0 * x)
    for op in (d, d_bar, laplacian):
        assert op(c).norm_max() < 1e-12


def test_laplacian_plane_wave(unit_pi_grid):
    f = Field2D.from_function(unit_pi_grid, lambda x, y: np.exp(1j * (x + 2 * y)))
    out = laplacian(f)
    assert np.max(np.abs(out.samples + 5.0 * f.samples)) < 1e-11


def test_mixed_derivative_identity(unit_pi_grid):
    f = Field2D.from_function(
        unit_pi_grid, lambda x, y: np.exp(1j * (2 * x - y)) + 0.3 * np.exp(1j * (x + 3 * y))
    )
    lhs1 = d(d_bar(f))
    lhs2 = d_bar(d(f))
    rhs = laplacian(f) * 0.25
    assert (lhs1 - rhs).norm_max() < 1e-12 * f.norm_max()
    assert (lhs2 - rhs).norm_max() < 1e-12 * f.norm_max()


def test_identity_multiplier_roundtrip(unit_pi_grid):
    rng = np.random.default_rng(7)
    f = Field2D(unit_pi_grid, rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64)))
    out = apply_multiplier(f, SpectralMultiplier(lambda xi, eta: np.ones_like(xi), 1.0))
    assert (out - f).norm_max() <= 1e-13 * f.norm_max()


def test_multiplier_negative_laplacian(unit_pi_grid):
    f = Field2D.from_function(unit_pi_grid, lambda x, y: np.exp(1j * x))
    m = SpectralMultiplier(lambda xi, eta: -(xi**2 + eta**2))
    out = apply_multiplier(f, m)
    assert np.max(np.abs(out.samples + f.samples)) < 1e-12


def test_multiplier_anisotropy_symbol(unit_pi_grid):
    # symbol (xi^2 - eta^2)/(xi^2 + eta^2) on a single mode
    xi0, eta0 = 1.0, 2.0
    f = Field2D.from_function(unit_pi_grid, lambda x, y: np.exp(1j * (xi0 * x + eta0 * y)))
    with np.errstate(invalid="ignore"):
        m = SpectralMultiplier(lambda xi, eta: (xi**2 - eta**2) / (xi**2 + eta**2), 0.0)
    out = apply_multiplier(f, m)
    expect = (xi0**2 - eta0**2) / (xi0**2 + eta0**2)
    assert np.max(np.abs(out.samples - expect * f.samples)) < 1e-12


def test_multiplier_nonfinite_symbol(unit_pi_grid):
    f = Field2D.zeros(unit_pi_grid)
    bad = SpectralMultiplier(lambda xi, eta: 1.0 / (xi - xi))  # nan everywhere
    with pytest.raises(NonFiniteSymbol):
        apply_multiplier(f, bad)


def test_integrate_constant():
    g = PeriodicGrid(1.0, 16)
    one = Field2D.from_function(g, lambda x, y: 1.0 + 0 * x)
    assert integrate(one) == pytest.approx(4.0)


def test_integrate_oscillation(unit_pi_grid):
    f = Field2D.from_function(unit_pi_grid, lambda x, y: np.exp(1j * x))
    assert abs(integrate(f)) < 1e-12


def test_integrate_gaussian_quadrature_oracle():
    # reference from the 1-D radial quadrature of exp(-r^2) * 2 pi r
    import scipy.integrate as si

    oracle = si.quad(lambda r: np.exp(-(r**2)) * 2 * np.pi * r, 0, 20, epsabs=1e-14)[0]
    g = PeriodicGrid(8.0, 256)
    f = Field2D.from_function(g, lambda x, y: np.exp(-(x**2 + y**2)))
    assert abs(integrate(f) - oracle) < 1e-10
    assert oracle == pytest.approx(np.pi, abs=1e-12)


def test_parseval():
    g = PeriodicGrid(2.0, 128)
    rng = np.random.default_rng(3)
    f = Field2D(g, rng.standard_normal((128, 128)) + 1j * rng.standard_normal((128, 128)))
    phys = f.norm_l2()
    spec = np.sqrt(np.sum(np.abs(f.fft()) ** 2) * g.spacing**2) / g.n
    assert abs(phys - spec) < 1e-12 * phys


@settings(max_examples=20, deadline=None)
@given(
    a=st.floats(-2, 2),
    b=st.floats(-2, 2),
    mx=st.integers(-5, 5),
    my=st.integers(-5, 5),
)
def test_multiplier_composition(a, b, mx, my):
    """Applying s1 then s2 equals one application of s1*s2."""
    g = PeriodicGrid(np.pi, 32)
    f = Field2D.from_function(g, lambda x, y: np.exp(1j * (mx * x + my * y)))
    s1 = SpectralMultiplier(lambda xi, eta: a + xi, 0.1)
    s2 = SpectralMultiplier(lambda xi, eta: b - eta, -0.2)
    s12 = SpectralMultiplier(lambda xi, eta: (a + xi) * (b - eta), 0.1 * -0.2)
    two = apply_multiplier(apply_multiplier(f, s1), s2)
    one = apply_multiplier(f, s12)
    assert (two - one).norm_max() < 1e-10 * max(f.norm_max(), 1.0)


def test_real_tag_enforcement():
    g = PeriodicGrid(1.0, 16)
    with pytest.raises(ValueError):
        Field2D(g, np.full((16, 16), 1.0 + 1e-6j), real_tagged=True)
    Field2D(g, np.full((16, 16), 1.0 + 0j), real_tagged=True)  # fine


def test_nyquist_keeps_real_fields_real():
    from nvlab.grid import dx, dy

    g = PeriodicGrid(1.0, 32)
    rng = np.random.default_rng(11)
    f = Field2D(g, rng.standard_normal((32, 32)).astype(complex))
    for op in (dx, dy):
        out = op(f)
        assert np.max(np.abs(out.samples.imag)) < 1e-12 * np.max(np.abs(out.samples.real))
