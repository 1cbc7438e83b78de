"""Closed-form solutions, fixtures, and the residual oracle."""

import numpy as np
import pytest

from nvlab.errors import (
    DegenerateParams,
    DomainZero,
    GridTooSmall,
    NonPositiveSigma,
    SingularPoint,
)
from nvlab.grid import Field2D, PeriodicGrid, integrate, laplacian
from nvlab.solutions import (
    LambdaBumpSpec,
    conductivity_fixture,
    dispersion,
    ema_solutions,
    group_velocity,
    hirota,
    hirota_interaction_coefficient,
    kdv_reduction_check,
    kdv_ring,
    kdv_soliton,
    lambda_bump,
    nv_residual,
    phase_velocity,
)


# ----------------------------------------------------------------------
# Dispersion
# ----------------------------------------------------------------------


def test_dispersion_values():
    assert dispersion(1, 0) == pytest.approx(-0.25)
    assert dispersion(np.sqrt(3), 1) == pytest.approx(0.0, abs=1e-14)


def test_group_velocity():
    assert group_velocity(1, 0) == pytest.approx((-0.75, 0.0))


def test_phase_velocity():
    cp = phase_velocity(1, 0)
    assert cp == pytest.approx((-0.25, 0.0))
    with pytest.raises(DomainZero):
        phase_velocity(0, 0)


# ----------------------------------------------------------------------
# Line soliton and planar reduction
# ----------------------------------------------------------------------


def test_soliton_peak_rides_the_crest():
    sol = kdv_soliton(1.3)
    for t in (0.0, 0.7, 2.0):
        q, u1, u2 = sol.evaluator(1.3 * t, 0.4, t)
        assert q == pytest.approx(-2 * 1.3)
        assert u1 == pytest.approx(q)
        assert u2 == 0.0


def test_soliton_residual():
    sol = kdv_soliton(1.0)
    xs = np.linspace(-8, 8, 9)
    res = nv_residual(sol, xs + 1.0 * 0.4, np.full_like(xs, 0.3), t=0.4)
    assert res < 1e-4


def test_kappa_at_pi_over_3():
    # the directional speed factor reverses sign at alpha = pi/3
    assert np.cos(3 * np.pi / 3) == pytest.approx(-1.0)


def test_kdv_reduction_residual():
    # v(t,s) solving v_t = -v''' + 6 v v': the rescaled-soliton family
    def v(t, s):
        c = 4.0
        return -0.5 * c / np.cosh(0.5 * np.sqrt(c) * (s - c * t)) ** 2

    res = kdv_reduction_check(np.pi / 6, v, np.linspace(-4, 4, 7), t=0.1)
    assert res < 1e-4


# ----------------------------------------------------------------------
# Ring
# ----------------------------------------------------------------------


def test_ring_profile_values():
    g = PeriodicGrid(50.0, 512)
    f = kdv_ring(g)
    assert np.min(f.samples.real) == pytest.approx(-0.5, abs=1e-6)
    x, y = g.meshgrid()
    r = np.hypot(x, y)
    at_center = f.samples.real[np.argmin(np.abs(g.axis())), np.argmin(np.abs(g.axis()))]
    assert abs(at_center - (-0.5 / np.cosh(10.0) ** 2)) < 1e-12
    assert abs(-0.5 / np.cosh(10.0) ** 2) < 1e-8


def test_ring_is_radial():
    g = PeriodicGrid(50.0, 256)
    f = kdv_ring(g)
    s = f.samples.real
    # reflection about the origin maps index j to (n - j) mod n
    reflected = np.roll(s[::-1, :], 1, axis=0)
    assert np.max(np.abs(s - reflected)) < 1e-12
    assert np.max(np.abs(s - s.T)) < 1e-12


def test_ring_grid_too_small():
    with pytest.raises(GridTooSmall):
        kdv_ring(PeriodicGrid(30.0, 256))


# ----------------------------------------------------------------------
# Bilinear-method solitons
# ----------------------------------------------------------------------


def test_hirota_one_soliton_value_at_origin():
    sol = hirota(1, {"C": 1.0, "k": 1.0})
    q, u1, u2 = sol.evaluator(0.0, 0.0, 0.0)
    assert q == pytest.approx(0.5)
    assert u1 == pytest.approx(0.5) and u2 == pytest.approx(0.5)


def test_hirota_zero_amplitude():
    sol = hirota(1, {"C": 0.0})
    q, _, _ = sol.evaluator(0.3, -0.8, 1.1)
    assert q == 0.0


def test_hirota_interaction_coefficient():
    assert hirota_interaction_coefficient(1.0, 2.0) == pytest.approx(1.0 / 9.0)
    with pytest.raises(DegenerateParams):
        hirota(2, {"k1": 1.0, "k2": -1.0})


def test_hirota_solutions_are_planar():
    rng = np.random.default_rng(4)
    for sol in (hirota(1), hirota(2, {"k1": 0.8, "k2": 1.7})):
        for _ in range(5):
            x, y, t = rng.uniform(-2, 2, 3)
            s = rng.uniform(-1, 1)
            q1 = sol.evaluator(x, y, t)[0]
            q2 = sol.evaluator(x + s, y - s, t)[0]  # same x + y
            assert q1 == pytest.approx(q2, abs=1e-13)


def test_hirota_residuals():
    xs = np.linspace(-3, 3, 7)
    ys = np.linspace(-2.5, 2.5, 7)
    for sol in (hirota(1), hirota(2, {"k1": 1.0, "k2": 2.0})):
        assert nv_residual(sol, xs, ys, t=0.3) < 1e-4


# ----------------------------------------------------------------------
# Extended-mapping solutions
# ----------------------------------------------------------------------


def test_ema_static_w_component():
    sol = ema_solutions("static")
    _, _, w = sol.evaluator(0.0, 0.5, 0.0)
    y, x = 0.5, 0.0
    assert w == pytest.approx(8 * y * (1 - np.tanh(x + y * y) ** 2))
    # odd tanh^2 factor vanishes along y -> 0 limit of the formula
    assert 8 * 0.0 * (1 - np.tanh(0.0) ** 2) == 0.0


def test_ema_singular_set():
    sol = ema_solutions("static")
    with pytest.raises(SingularPoint):
        sol.evaluator(0.3, 0.0, 0.0)
    with pytest.raises(SingularPoint):
        sol.evaluator(0.3, 1.0 / np.sqrt(12.0), 0.0)


def test_ema_breather_periodicity():
    sol = ema_solutions("breather")
    a = sol.evaluator(0.7, 0.9, 1.234)
    b = sol.evaluator(0.7, 0.9, 1.234 + 2 * np.pi)
    for u, v in zip(a, b):
        assert u == pytest.approx(v, abs=1e-12)


@pytest.mark.parametrize("kind", ["static", "breather"])
def test_ema_residuals(kind):
    sol = ema_solutions(kind)
    xs = np.linspace(-3, 3, 7)
    ys = np.linspace(0.5, 3.0, 6)
    X, Y = np.meshgrid(xs, ys)
    assert nv_residual(sol, X.ravel(), Y.ravel(), t=0.4) < 1e-4


def test_ema_aux_pair_solves_dbar_system():
    # (u1)_x - (u2)_y = q_x and (u2)_x + (u1)_y = -q_y for (u1,u2)=(v,w)
    sol = ema_solutions("static")
    h = 1e-4

    def at(x, y):
        return sol.evaluator(x, y, 0.0)

    x0, y0 = 0.8, 1.1
    q_x = (at(x0 + h, y0)[0] - at(x0 - h, y0)[0]) / (2 * h)
    q_y = (at(x0, y0 + h)[0] - at(x0, y0 - h)[0]) / (2 * h)
    v_x = (at(x0 + h, y0)[1] - at(x0 - h, y0)[1]) / (2 * h)
    v_y = (at(x0, y0 + h)[1] - at(x0, y0 - h)[1]) / (2 * h)
    w_x = (at(x0 + h, y0)[2] - at(x0 - h, y0)[2]) / (2 * h)
    w_y = (at(x0, y0 + h)[2] - at(x0, y0 - h)[2]) / (2 * h)
    assert v_x - w_y == pytest.approx(q_x, abs=1e-6)
    assert w_x + v_y == pytest.approx(-q_y, abs=1e-6)


# ----------------------------------------------------------------------
# Scattering fixtures
# ----------------------------------------------------------------------


def test_conductivity_fixture_identity():
    pot, sigma = conductivity_fixture(grid=PeriodicGrid(2.0, 256))
    root = Field2D(sigma.grid, np.sqrt(sigma.samples.real).astype(complex))
    resid = laplacian(root).samples.real - pot.q.samples.real * root.samples.real
    x, y = sigma.grid.meshgrid()
    inside = np.hypot(x, y) <= 1.0
    assert np.max(np.abs(resid[inside])) < 1e-8
    assert pot.classification_hint == "critical"
    assert abs(integrate(pot.q)) > 1e-3  # mass is generally nonzero


def test_conductivity_sigma_one_gives_zero():
    g = PeriodicGrid(2.0, 128)
    ones = Field2D.from_function(g, lambda x, y: 1.0 + 0 * x, real=True)
    pot, _ = conductivity_fixture(kind="custom", sigma_field=ones)
    assert pot.q.norm_max() == 0.0


def test_conductivity_requires_positive_sigma():
    g = PeriodicGrid(2.0, 128)
    bad = Field2D.from_function(g, lambda x, y: -1.0 + 0 * x, real=True)
    with pytest.raises(NonPositiveSigma):
        conductivity_fixture(kind="custom", sigma_field=bad)


def test_lambda_bump_family():
    zero = lambda_bump(LambdaBumpSpec(lam=0.0))
    assert zero.q.norm_max() == 0.0
    assert zero.classification_hint == "critical"
    assert lambda_bump(LambdaBumpSpec(lam=-5.0)).classification_hint == "supercritical"
    assert lambda_bump(LambdaBumpSpec(lam=5.0)).classification_hint == "subcritical"


def test_lambda_bump_mass_is_linear():
    m1 = integrate(lambda_bump(LambdaBumpSpec(lam=1.0)).q)
    m5 = integrate(lambda_bump(LambdaBumpSpec(lam=5.0)).q)
    assert m5 == pytest.approx(5.0 * m1, rel=1e-12)


def test_lambda_bump_profile_shape():
    spec = LambdaBumpSpec(lam=1.0)
    r = np.array([0.0, 0.5, 0.99, 1.0, 1.3])
    w = spec.bump(r)
    assert w[0] == 1.0
    assert np.all(w[-2:] == 0.0)
    assert np.all(np.diff(w[:3]) < 0)
