from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracns.grid import Field, GridSpec, forward_transform, make_preset
from fracns.mild import ForcingSpec, SolverConfig, Trajectory, free_evolution
from fracns.operators import RadiusLadder, maximal_bound_check
from fracns.theorems import (
    E_script_norm,
    ET_norm,
    check_thm1_exponents,
    l1_time_norm,
    smallness_verdict,
    space_norms,
    thm2_exponents,
    time_sup_field,
    verify_prop_thm1,
    verify_prop_thm2,
)
from fracns.varlp import SpaceDomain, TimeDomain, VariableExponent, lebesgue_norm


def _const(p0, T=1.0, n=11):
    return VariableExponent.constant(p0, TimeDomain(T, n))


def test_admissibility_table():
    assert check_thm1_exponents(1.0, 6.0, _const(5.0)).admissible
    assert not check_thm1_exponents(1.0, 6.0, _const(3.0)).admissible
    assert not check_thm1_exponents(0.6, 10.0, _const(5.0)).admissible


def test_boundary_case_is_rejected_exactly():
    # alpha = 1, q = 6, p = 4: 1/4 + 1/4 = 1/2 exactly, so the strict inequality fails
    ex = check_thm1_exponents(1.0, 6.0, _const(4.0))
    assert not ex.admissible
    assert ex.margins["main"] == Fraction(0)


def test_violations_are_listed():
    ex = check_thm1_exponents(0.5, 2.0, _const(1.5))
    assert len(ex.violations) >= 2
    assert "alpha" in ex.violations[0]


@given(st.floats(0.55, 1.0), st.floats(2.1, 40.0), st.floats(2.1, 40.0))
def test_derived_indices_when_admissible(alpha, q, p0):
    ex = check_thm1_exponents(alpha, q, _const(p0))
    if ex.admissible:
        assert 0 < ex.beta < 1
        assert np.all(ex.r < ex.p_conj)
        assert np.allclose(1 / ex.r, 1 - 2 / p0 + ex.beta)


def test_sinusoidal_time_exponent():
    p = VariableExponent.sinusoidal(5.0, 0.5, TimeDomain(2.0, 33))
    ex = check_thm1_exponents(1.0, 6.0, p)
    assert ex.admissible
    assert ex.to_dict()["p_minus"] == pytest.approx(4.5)


def test_ET_norm_of_static_trajectory():
    g = GridSpec(2, 16)
    u = make_preset("taylor_green_2d", g)
    T, n = 2.0, 9
    traj = Trajectory(g, np.linspace(0, T, n), np.repeat(forward_transform(u).coeffs[None], n, axis=0))
    p = _const(4.0, T, n)
    # ||1||_{L^4(0, T)} ||u||_q
    assert ET_norm(traj, p, 3.0) == pytest.approx(T**0.25 * lebesgue_norm(u, 3.0, SpaceDomain(g)), rel=1e-10)
    with pytest.raises(ValueError):
        ET_norm(traj, _const(4.0, 1.0, n), 3.0)


def test_E_script_norm_takes_time_sup():
    g = GridSpec(2, 16)
    u0 = make_preset("taylor_green_2d", g)
    cfg = SolverConfig(1.0, 1.0, 5, g)
    e0 = free_evolution(cfg, forward_transform(u0))
    assert np.allclose(time_sup_field(e0).data[0], u0.magnitude())
    p = VariableExponent.constant(4.0, SpaceDomain(g))
    assert E_script_norm(e0, p, 1.0) == pytest.approx(max(lebesgue_norm(u0, 4.0, SpaceDomain(g)),
                                                          lebesgue_norm(u0, 3.0, SpaceDomain(g))))


def test_l1_time_norm_trapezoid():
    assert l1_time_norm(np.ones(5), 2.0) == pytest.approx(2.0)
    assert l1_time_norm(np.linspace(0, 1, 11), 1.0) == pytest.approx(0.5)


def test_thm2_exponents_require_p_above_two():
    g = GridSpec(2, 8)
    with pytest.raises(ValueError):
        thm2_exponents(0.8, VariableExponent.constant(1.8, SpaceDomain(g)))
    ex = thm2_exponents(0.8, VariableExponent.constant(4.0, SpaceDomain(g)))
    assert ex.frak == pytest.approx(5.0) and ex.tensor_frak == pytest.approx(2.5)
    assert ex.tensor_p.p_minus == 2.0


def test_initial_ratio_below_maximal_ratio():
    # sup_t |S_t u0| <= M u0 pointwise, so the initial-data ratio sits below the maximal ratio
    g = GridSpec(3, 16)
    u0 = make_preset("bump", g)
    u0 = Field(g, np.concatenate([u0.data, 0 * u0.data, 0 * u0.data]))
    cfg = SolverConfig(0.8, 1.0, 9, g)
    e0 = free_evolution(cfg, forward_transform(u0))
    p = VariableExponent.constant(4.0, SpaceDomain(g))
    ratio = lebesgue_norm(time_sup_field(e0), 4.0, SpaceDomain(g)) / lebesgue_norm(u0, 4.0, SpaceDomain(g))
    bound = maximal_bound_check(Field(g, u0.data[:1]), p, RadiusLadder.complete(g))
    assert 1.0 - 1e-12 <= ratio <= bound


def test_prop_thm1_small_sweep():
    g = GridSpec(3, 8, 2 * np.pi * 10)
    u0 = make_preset("random_divfree", g, seed=1, k_peak=1.0)
    force = ForcingSpec(kind="analytic", seed=2, options={"k_peak": 1.0})
    rep = verify_prop_thm1(SolverConfig(1.0, 1.0, 9, g), u0, force, {"kind": "constant", "p0": 5.0}, 6.0,
                           [0.5, 1.0, 2.0])
    assert rep.predicted["initial"] == pytest.approx(0.2)
    assert rep.relative_slope_error("initial") < 0.25
    assert len(rep.rows()) == 3 and rep.notes
    with pytest.raises(ValueError, match="inadmissible"):
        verify_prop_thm1(SolverConfig(1.0, 1.0, 9, g), u0, force, {"kind": "constant", "p0": 3.0}, 6.0, [1.0])


def test_prop_thm2_T_uniform():
    g = GridSpec(3, 8, 1.0)
    bump = make_preset("bump", g, radius=0.3).data[0]
    tensor = np.zeros((3, 3) + g.shape)
    tensor[0, 1] = tensor[1, 0] = bump
    p = VariableExponent.constant(4.0, SpaceDomain(g))
    rep = verify_prop_thm2(SolverConfig(0.8, 1.0, 5, g), make_preset("random_divfree", g, seed=3), tensor, p,
                           [2.0, 8.0])
    assert all(abs(s) < 0.05 for s in rep.slopes.values())


def test_smallness_verdicts():
    v2 = smallness_verdict(2, {"initial": 0.1, "force": 0.0}, 1.0, {"initial": 1.0})
    assert v2.verdict and v2.threshold == 0.25
    assert not smallness_verdict(2, {"initial": 0.25}, 1.0, {"initial": 1.0}).verdict
    v1 = smallness_verdict(1, {"initial": 0.01, "force": 0.0}, 1.0, {"initial": 1.0}, 4.0, 6.0)
    assert 0 < v1.T_max < np.inf
    at = smallness_verdict(1, {"initial": 0.01}, 1.0, {"initial": 1.0}, 4.0, 6.0, T=v1.T_max * 0.99)
    beyond = smallness_verdict(1, {"initial": 0.01}, 1.0, {"initial": 1.0}, 4.0, 6.0, T=v1.T_max * 1.01)
    assert at.verdict and not beyond.verdict
    assert smallness_verdict(1, {}, 1.0, {}, 4.0, 6.0).T_max == np.inf
    with pytest.raises(ValueError):
        smallness_verdict(1, {}, 1.0, {})


def test_space_norms_shape():
    g = GridSpec(2, 8)
    traj = Trajectory(g, np.linspace(0, 1, 3), np.zeros((3, 2) + g.shape, dtype=complex))
    assert np.all(space_norms(traj, 2.0) == 0)


def _single_mode(g, amp=1.0):
    x = g.mesh()
    data = np.zeros((g.d,) + g.shape)
    data[1] = amp * np.sin(x[0])
    return Field(g, data)


def test_ET_norm_single_mode_closed_form():
    # |k| = 1, so ||S_t u0||_2 = c e^{-t} whatever alpha is
    g = GridSpec(2, 16)
    u0 = _single_mode(g, 0.7)
    c = lebesgue_norm(u0, 2.0, SpaceDomain(g))
    cfg = SolverConfig(0.75, 1.0, 801, g)
    traj = free_evolution(cfg, forward_transform(u0))
    exact = c * ((1 - np.exp(-4.0)) / 4) ** 0.25
    assert ET_norm(traj, _const(4.0, 1.0, 801), 2.0) == pytest.approx(exact, rel=1e-5)


def test_ET_norm_of_zero_is_zero():
    g = GridSpec(2, 8)
    traj = Trajectory(g, np.linspace(0, 1, 4), np.zeros((4, 2) + g.shape, dtype=complex))
    assert ET_norm(traj, _const(3.0, 1.0, 4), 2.0) == 0.0


@given(st.floats(2.5, 12.0), st.integers(0, 50))
def test_ET_norm_constant_exponent_is_classical(p0, seed):
    g = GridSpec(2, 8)
    cfg = SolverConfig(0.8, 1.5, 7, g)
    traj = free_evolution(cfg, forward_transform(make_preset("random_divfree", g, seed=seed)))
    s = space_norms(traj, 3.0)
    w = np.full(7, cfg.T / 6)
    w[[0, -1]] /= 2
    classical = np.sum(w * s**p0) ** (1 / p0)
    assert ET_norm(traj, _const(p0, 1.5, 7), 3.0) == pytest.approx(classical, rel=1e-10)


@given(st.floats(0.55, 1.0), st.floats(2.1, 30.0), st.floats(2.1, 30.0), st.floats(0.0, 10.0))
def test_admissibility_monotone_in_q_and_p(alpha, q, p0, bump):
    # larger q or larger p only shrinks 2/p + 3/(2 alpha q)
    if check_thm1_exponents(alpha, q, _const(p0)).admissible:
        assert check_thm1_exponents(alpha, q + bump, _const(p0)).admissible
        assert check_thm1_exponents(alpha, q, _const(p0 + bump)).admissible


def test_small_beltrami_verdict_and_contraction():
    from fracns.mild import estimate_CB, picard_iterate

    g = GridSpec(3, 8)
    u0 = make_preset("abc_beltrami_3d", g, amplitude=1e-3)
    cfg = SolverConfig(0.8, 1.0, 5, g)
    p = VariableExponent.constant(4.0, SpaceDomain(g))
    traj, rep = picard_iterate(cfg, u0)
    assert rep.converged and rep.verdict
    e0 = free_evolution(cfg, forward_transform(u0))
    norm = lambda tr: E_script_norm(tr, p, 0.8)  # noqa: E731
    c_b = estimate_CB(cfg, 2, seed=0, norm=norm)
    v = smallness_verdict(2, {"initial": E_script_norm(e0, p, 0.8), "force": 0.0}, c_b, {"initial": 1.0})
    assert v.verdict
