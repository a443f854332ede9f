import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracns.grid import Field, GridSpec, forward_transform, gradient_spectral, inverse_transform, make_preset
from fracns.mild import (
    BlowUpError,
    ForcingSpec,
    SolverConfig,
    Trajectory,
    bilinear_B,
    duhamel_force,
    duhamel_integral,
    estimate_CB,
    free_evolution,
    picard_iterate,
    pressure_gradient,
    projected_divergence,
    recover_pressure,
    smallness_threshold,
    tensor_divergence,
    time_march_oracle,
)

G2 = GridSpec(2, 32)
G3 = GridSpec(3, 16)


def test_config_validation():
    with pytest.raises(ValueError, match=r"alpha out of \(0.5, 1\]"):
        SolverConfig(1.2, 1.0, 5, G2)
    with pytest.raises(ValueError):
        SolverConfig(0.8, -1.0, 5, G2)
    with pytest.raises(ValueError):
        SolverConfig(0.8, 1.0, 1, G2)
    with pytest.raises(ValueError, match="budget"):
        SolverConfig(0.8, 1.0, 1000, GridSpec(3, 64), memory_budget=1e6)
    assert SolverConfig(0.8, 1.0, 5, G2).digest() == SolverConfig(0.8, 1.0, 5, G2).digest()


@pytest.mark.parametrize("alpha", [0.75, 1.0])
def test_taylor_green_exact(alpha):
    u0 = make_preset("taylor_green_2d", G2)
    traj, rep = picard_iterate(SolverConfig(alpha, 1.0, 6, G2), u0)
    assert rep.converged
    for i, t in enumerate(traj.times):
        assert np.allclose(traj.physical(i).data, np.exp(-(2**alpha) * t) * u0.data, atol=1e-13)


def test_beltrami_rate_alpha_independent():
    u0 = make_preset("abc_beltrami_3d", G3)
    for alpha in (0.6, 1.0):
        traj, rep = picard_iterate(SolverConfig(alpha, 1.0, 5, G3), u0)
        assert np.allclose(traj.physical(-1).data, np.exp(-1.0) * u0.data, atol=1e-13)
        assert traj.divergence_defect() < 1e-13


def test_nonlinearity_vanishes_on_exact_solutions():
    for name, g in (("taylor_green_2d", G2), ("abc_beltrami_3d", G3)):
        U = forward_transform(make_preset(name, g))
        assert projected_divergence(U, U).max_modulus() < 1e-13


def test_taylor_green_pressure():
    g = GridSpec(2, 32)
    u = forward_transform(make_preset("taylor_green_2d", g))
    x, y = g.mesh()
    P = inverse_transform(recover_pressure(u)).data[0]
    assert np.allclose(P, -(np.cos(2 * x) + np.cos(2 * y)) / 4, atol=1e-14)


def test_beltrami_pressure_gradient():
    u = make_preset("abc_beltrami_3d", G3)
    half_sq = forward_transform(Field(G3, (0.5 * np.sum(u.data**2, axis=0))[None]))
    expected = inverse_transform(gradient_spectral(half_sq)).data
    got = inverse_transform(pressure_gradient(forward_transform(u))).data
    assert np.allclose(got, expected, atol=1e-12)


def test_duhamel_exact_for_linear_in_time_forcing():
    cfg = SolverConfig(0.8, 2.0, 5, G2)
    lam = cfg.symbol
    t = cfg.times
    f = np.ones((cfg.n_t, 1) + G2.shape) * (1.0 + 0.5 * t)[:, None, None, None]
    out = duhamel_integral(cfg, f.astype(complex))
    # int_0^t e^{-lam (t-s)} (1 + s/2) ds
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = np.where(lam > 0,
                         (1 + 0.5 * t[:, None, None, None]) / lam - 0.5 / lam**2
                         - (1 / lam - 0.5 / lam**2) * np.exp(-lam * t[:, None, None, None]),
                         t[:, None, None, None] + 0.25 * t[:, None, None, None] ** 2)
    assert np.allclose(out.real, exact, rtol=1e-11, atol=1e-13)


def test_forcing_kinds():
    cfg = SolverConfig(0.8, 1.0, 3, G3)
    assert ForcingSpec().spectral(cfg) is None
    analytic = ForcingSpec(kind="analytic", decay=1.0, seed=3).spectral(cfg)
    assert np.abs(analytic[-1]).max() == pytest.approx(np.exp(-1.0) * np.abs(analytic[0]).max())
    tensor = ForcingSpec(kind="tensor", preset="bump").tensor(cfg)
    assert tensor.shape == (3, 3, 3) + G3.shape
    with pytest.raises(ValueError):
        ForcingSpec(kind="magnetic")
    with pytest.raises(ValueError):
        ForcingSpec(kind="analytic", data=np.zeros((2, 4))).spectral(cfg)


def test_tensor_divergence_of_identity_is_gradient():
    x = G3.mesh()
    phi = np.sin(x[0]) * np.cos(x[1])
    tensor = np.eye(3)[:, :, None, None, None] * phi
    div = inverse_transform(tensor_divergence(G3, tensor)).data
    grad = inverse_transform(gradient_spectral(forward_transform(Field(G3, phi[None])))).data
    assert np.allclose(div, grad, atol=1e-13)


def test_force_matches_time_marcher_without_nonlinearity():
    cfg = SolverConfig(0.9, 1.0, 41, G2)
    force = ForcingSpec(kind="analytic", seed=5, amplitude=0.3)
    zero = Field(G2, np.zeros((2,) + G2.shape))
    a = duhamel_force(cfg, force)
    b = time_march_oracle(cfg, zero, force, substeps=4, nonlinear=False)
    assert np.abs(a.coeffs - b.coeffs).max() < 2 * cfg.dt * np.abs(a.coeffs).max()


def test_picard_agrees_with_oracle_first_order():
    u0 = make_preset("random_divfree", G3, amplitude=0.5, seed=1)
    errs = []
    for n_t in (6, 11):
        cfg = SolverConfig(0.8, 0.5, n_t, G3)
        traj, _ = picard_iterate(cfg, u0)
        m = time_march_oracle(cfg, u0)
        errs.append(max(np.abs(traj.physical(i).data - m.physical(i).data).max() for i in range(n_t)))
        assert errs[-1] <= 5 * cfg.dt**2
    assert 1.5 < errs[0] / errs[1] < 2.6


def test_picard_reports_divergence():
    u0 = make_preset("random_divfree", G3, amplitude=200.0, seed=2)
    traj, rep = picard_iterate(SolverConfig(0.8, 1.0, 6, G3, max_iter=30), u0)
    assert traj is None and rep.failed and not rep.verdict
    assert rep.to_dict()["contracting"] is False


def test_picard_projects_non_solenoidal_data():
    u0 = make_preset("gradient_field", G3)
    with pytest.warns(UserWarning, match="not divergence-free"):
        traj, rep = picard_iterate(SolverConfig(0.8, 0.5, 3, G3), u0)
    assert rep.preprojected
    assert traj.sup_norm() < 1e-13


def test_time_marcher_blow_up_detected():
    u0 = make_preset("random_divfree", G2, amplitude=1e4, seed=0)
    with pytest.raises(BlowUpError):
        time_march_oracle(SolverConfig(0.6, 5.0, 3, G2), u0)


@given(st.floats(0.1, 3.0), st.integers(0, 100))
def test_bilinear_is_quadratic(c, seed):
    cfg = SolverConfig(0.8, 0.5, 3, G2)
    e = free_evolution(cfg, forward_transform(make_preset("random_divfree", G2, seed=seed)))
    a = bilinear_B(cfg, e, e)
    b = bilinear_B(cfg, e * c, e * c)
    assert np.allclose(b.coeffs, c**2 * a.coeffs, atol=1e-12 * max(1.0, np.abs(b.coeffs).max()))


def test_trajectory_shape_checked():
    with pytest.raises(ValueError):
        Trajectory(G2, np.array([0.0, 1.0]), np.zeros((3, 2) + G2.shape, dtype=complex))


def test_cb_and_threshold():
    cfg = SolverConfig(0.8, 1.0, 5, G3)
    cb = estimate_CB(cfg, 2, seed=0)
    assert cb > 0
    assert smallness_threshold(cb) == pytest.approx(1 / (4 * cb))
    assert smallness_threshold(0.0) == np.inf
