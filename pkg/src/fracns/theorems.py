"""Hypothesis checks and norm monitors for the two existence theorems.

Theorem 1 (local in time): ``u0`` in ``L^q``, force in ``L^1_t L^q_x`` and the
working space ``E_T = L^{p(.)}_t([0, T], L^q_x)``.  Theorem 2 (global): the
working space ``L^{p(.)}_x(L^inf_t)`` intersected with ``L^{3/(2 alpha - 1)}_x(L^inf_t)``
and a force ``f = div(F)``.

Every "there exists C" becomes a measured ratio.  T-sweeps regress the
log-ratios against ``log T`` and compare the slope with the one implied by
the T-factors of the estimates.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .grid import Field, GridSpec, inverse_transform
from .mild import (
    ForcingSpec,
    SolverConfig,
    Trajectory,
    bilinear_B,
    duhamel_force,
    free_evolution,
    prepare_initial,
)
from .varlp import (
    SpaceDomain,
    TimeDomain,
    VariableExponent,
    exponent_from_config,
    lebesgue_norm,
    luxemburg_norm,
    mixed_norm,
)


def _exact(x: float) -> Fraction:
    """Decimal reading of a float, so ``0.6`` is ``3/5`` rather than its binary neighbour."""
    return Fraction(repr(float(x)))


# --- Theorem 1 exponents ------------------------------------------------


@dataclass(frozen=True)
class Thm1Exponents:
    alpha: float
    q: float
    p: VariableExponent
    beta: float
    p_conj: np.ndarray
    p_tilde: np.ndarray
    r: np.ndarray
    admissible: bool
    margins: dict
    violations: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "q": self.q,
            "p_minus": self.p.p_minus,
            "p_plus": self.p.p_plus,
            "beta": self.beta,
            "admissible": self.admissible,
            "margins": {k: float(v) for k, v in self.margins.items()},
            "violations": list(self.violations),
            "note": "Theorem 1 arithmetic uses the three-dimensional indices throughout",
        }


def check_thm1_exponents(alpha: float, q: float, p: VariableExponent) -> Thm1Exponents:
    """Admissibility of ``(alpha, q, p(.))`` in exact rational arithmetic.

    Conditions: ``1/2 < alpha <= 1``, ``p- > 2``, ``q > 3/(2 alpha - 1)`` and
    ``alpha/p(t) + 3/(2q) < alpha - 1/2`` at every sample.  Derived indices:
    ``beta = 1 - 1/(2 alpha) - 3/(2 alpha q)``, ``1/p~ = 1 - 2/p``,
    ``1/r = 1/p~ + beta`` and ``p' = p/(p - 1)``.
    """
    a, qq = _exact(alpha), _exact(q)
    samples = sorted({_exact(v) for v in np.unique(p.values)})
    half = Fraction(1, 2)
    violations = []
    margins = {"alpha_low": a - half, "alpha_high": 1 - a, "p_minus": samples[0] - 2}
    if not half < a <= 1:
        violations.append("alpha must lie in (1/2, 1]")
    if samples[0] <= 2:
        violations.append("p- must exceed 2")
    if a > half:
        q_min = 3 / (2 * a - 1)
        margins["q"] = qq - q_min
        if not qq > q_min:
            violations.append(f"q must exceed 3/(2 alpha - 1) = {float(q_min):.6g}")
    worst = min((a - half) - (a / s + Fraction(3) / (2 * qq)) for s in samples)
    margins["main"] = worst
    if not worst > 0:
        violations.append("alpha/p(t) + 3/(2q) < alpha - 1/2 fails")
    beta = 1 - 1 / (2 * a) - Fraction(3) / (2 * a * qq)
    pv = p.values
    inv_tilde = 1 - 2 / pv
    r = 1 / (inv_tilde + float(beta))
    return Thm1Exponents(float(alpha), float(q), p, float(beta), pv / (pv - 1), 1 / inv_tilde, r,
                         not violations, margins, tuple(violations))


@dataclass(frozen=True)
class Thm2Exponents:
    alpha: float
    p: VariableExponent
    frak: float
    tensor_p: VariableExponent
    tensor_frak: float


def thm2_exponents(alpha: float, p: VariableExponent) -> Thm2Exponents:
    """Spatial exponents of Theorem 2; the tensor space uses ``p/2``, so ``p- > 2`` is needed here."""
    if not 0.5 < alpha <= 1:
        raise ValueError(f"alpha out of (0.5, 1]: {alpha}")
    if p.p_minus <= 2:
        raise ValueError("the tensor exponent p/2 must exceed 1, so p- > 2 is required")
    frak = 3.0 / (2 * alpha - 1)
    return Thm2Exponents(alpha, p, frak, p.derived(p.values / 2, kind="half"), frak / 2)


# --- norms --------------------------------------------------------------


def _magnitude_series(traj: Trajectory) -> list[np.ndarray]:
    return [inverse_transform(traj.snapshot(i)).magnitude() for i in range(len(traj.times))]


def space_norms(traj: Trajectory, q: float) -> np.ndarray:
    """``t_i -> ||u(t_i)||_{L^q_x}``."""
    dv = traj.grid.cell_volume
    return np.array([float((np.sum(m**q) * dv) ** (1 / q)) for m in _magnitude_series(traj)])


def ET_norm(traj: Trajectory, p: VariableExponent, q: float) -> float:
    """Luxemburg norm in time (exponent ``p`` on ``[0, T]``) of ``||u(t)||_{L^q_x}``."""
    if not 1 < q < np.inf:
        raise ValueError("q must lie in (1, inf)")
    dom = p.domain
    if not isinstance(dom, TimeDomain) or dom.n != len(traj.times) or not np.isclose(dom.T, traj.times[-1]):
        raise ValueError("time exponent domain does not match the trajectory nodes")
    return luxemburg_norm(space_norms(traj, q), p)


def time_sup_field(traj: Trajectory) -> Field:
    """``x -> max_i |u(t_i, x)|``."""
    return Field(traj.grid, np.max(np.stack(_magnitude_series(traj)), axis=0)[None])


def E_script_norm(traj: Trajectory, p: VariableExponent, alpha: float) -> float:
    """``max(||sup_t |u|||_{p(.)}, ||sup_t |u|||_{3/(2 alpha - 1)})``."""
    return mixed_norm(time_sup_field(traj), p, 3.0 / (2 * alpha - 1))


def l1_time_norm(values: np.ndarray, T: float) -> float:
    """Trapezoid ``int_0^T`` of node values (the time measure used throughout)."""
    return float(np.sum(TimeDomain(T, len(values)).weights * values))


# --- reports ------------------------------------------------------------


@dataclass
class BoundReport:
    """Per-T ratio tables with fitted and predicted log-log slopes."""

    theorem: int
    times: list
    ratios: dict
    t_factors: dict
    slopes: dict = field(default_factory=dict)
    predicted: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def relative_slope_error(self, key: str) -> float:
        return abs(self.slopes[key] - self.predicted[key]) / abs(self.predicted[key])

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        out = []
        for i, T in enumerate(self.times):
            row = {"T": T}
            row.update({k: v[i] for k, v in self.ratios.items()})
            out.append(row)
        return out


def _slope(times, values) -> float:
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        return float("nan")
    return float(np.polyfit(np.log(times), np.log(values), 1)[0])


def _thm1_factor(T: float, p: VariableExponent) -> float:
    return max(T ** (1 / p.p_minus), T ** (1 / p.p_plus))


def verify_prop_thm1(base: SolverConfig, u0: Field, forcing: ForcingSpec, p_spec: dict, q: float,
                     times) -> BoundReport:
    """Theorem 1 ratios over a sweep of horizons ``T``.

    For each ``T`` the solver config is ``base`` with that horizon and the
    time exponent is ``p_spec`` built on ``[0, T]``.  Ratios:
    ``||S_t u0||_{E_T} / ||u0||_q``, ``||Duhamel f||_{E_T} / ||f||_{L^1_t L^q_x}``
    and ``||B(e0, e0)||_{E_T} / ||e0||_{E_T}^2`` with ``e0 = S_t u0``.  The
    T-factors are ``max(T^{1/p-}, T^{1/p+})`` for the first two and
    ``(1 + T)`` times that for the third.
    """
    times = [float(T) for T in times]
    U0, _ = prepare_initial(u0)
    u0_norm = lebesgue_norm(Field(u0.grid, inverse_transform(U0).data), q, SpaceDomain(u0.grid))
    ratios = {"initial": [], "force": [], "bilinear": []}
    factors = {"initial": [], "force": [], "bilinear": []}
    notes = []
    for T in times:
        cfg = SolverConfig(base.alpha, T, base.n_t, base.grid, base.dealias, base.tol, base.max_iter, base.nu)
        p = exponent_from_config(p_spec, TimeDomain(T, cfg.n_t))
        ex = check_thm1_exponents(base.alpha, q, p)
        if not ex.admissible:
            raise ValueError(f"inadmissible Theorem 1 exponents: {', '.join(ex.violations)}")
        e0 = free_evolution(cfg, U0)
        ratios["initial"].append(ET_norm(e0, p, q) / u0_norm if u0_norm > 0 else 0.0)
        pf = forcing.spectral(cfg)
        if pf is None:
            ratios["force"].append(0.0)
        else:
            f_traj = Trajectory(cfg.grid, cfg.times, pf)
            f_norms = space_norms(f_traj, q)
            l1 = l1_time_norm(f_norms, T)
            notes.append({"T": T, "force_L1t_Lq": l1, "force_Lpt_Lq": luxemburg_norm(f_norms, p)})
            ratios["force"].append(ET_norm(duhamel_force(cfg, forcing), p, q) / l1 if l1 > 0 else 0.0)
        e0_norm = ET_norm(e0, p, q)
        b = bilinear_B(cfg, e0, e0)
        ratios["bilinear"].append(ET_norm(b, p, q) / e0_norm**2 if e0_norm > 0 else 0.0)
        base_factor = _thm1_factor(T, p)
        factors["initial"].append(base_factor)
        factors["force"].append(base_factor)
        factors["bilinear"].append((1 + T) * base_factor)
    rep = BoundReport(1, times, ratios, factors, notes=notes)
    for key in ratios:
        rep.slopes[key] = _slope(times, ratios[key])
        rep.predicted[key] = _slope(times, factors[key])
        scaled = [r / f for r, f in zip(ratios[key], factors[key])]
        rep.constants[key] = max(scaled)
    return rep


def verify_prop_thm2(base: SolverConfig, u0: Field, tensor: np.ndarray, p: VariableExponent, times,
                     u_static: bool = True) -> BoundReport:
    """Theorem 2 ratios over a sweep of horizons; they should not depend on ``T``.

    ``tensor`` holds static physical samples ``F[j, k, ...]``.  Ratios:
    ``||S_t u0||_E / mixed(u0)``, ``||Duhamel div F||_E / mixed(sup_t |F|)``
    (with exponents ``p/2`` and ``3/(2(2 alpha - 1))``) and
    ``||B(u, u)||_E / ||u||_E^2``; ``u`` is the static trajectory
    ``u(t) = u0`` when ``u_static`` and ``S_t u0`` otherwise.
    """
    ex = thm2_exponents(base.alpha, p)
    if not isinstance(p.domain, SpaceDomain) or p.domain.grid != base.grid:
        raise ValueError("spatial exponent must live on the solver grid")
    times = [float(T) for T in times]
    U0, _ = prepare_initial(u0)
    u0_mixed = mixed_norm(Field(u0.grid, inverse_transform(U0).data), p, ex.frak)
    f_mag = Field(base.grid, np.sqrt(np.sum(np.asarray(tensor) ** 2, axis=(0, 1)))[None])
    f_mixed = mixed_norm(f_mag, ex.tensor_p, ex.tensor_frak)
    forcing = ForcingSpec(kind="tensor", data=np.asarray(tensor))
    ratios = {"initial": [], "force": [], "bilinear": []}
    for T in times:
        cfg = SolverConfig(base.alpha, T, base.n_t, base.grid, base.dealias, base.tol, base.max_iter, base.nu)
        e0 = free_evolution(cfg, U0)
        ratios["initial"].append(E_script_norm(e0, p, base.alpha) / u0_mixed if u0_mixed > 0 else 0.0)
        force_traj = duhamel_force(cfg, forcing)
        ratios["force"].append(E_script_norm(force_traj, p, base.alpha) / f_mixed if f_mixed > 0 else 0.0)
        u = Trajectory(cfg.grid, cfg.times, np.repeat(U0.coeffs[None], cfg.n_t, axis=0)) if u_static else e0
        u_norm = E_script_norm(u, p, base.alpha)
        b = bilinear_B(cfg, u, u)
        ratios["bilinear"].append(E_script_norm(b, p, base.alpha) / u_norm**2 if u_norm > 0 else 0.0)
    ones = {k: [1.0] * len(times) for k in ratios}
    rep = BoundReport(2, times, ratios, ones)
    for key in ratios:
        rep.slopes[key] = _slope(times, ratios[key])
        rep.predicted[key] = 0.0
        rep.constants[key] = max(ratios[key])
    return rep


# --- smallness ----------------------------------------------------------


@dataclass(frozen=True)
class SmallnessVerdict:
    theorem: int
    verdict: bool
    lhs: float
    threshold: float
    T_max: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def smallness_verdict(theorem: int, norms: dict, c_b: float, constants: dict,
                      p_minus: float | None = None, p_plus: float | None = None,
                      T: float | None = None) -> SmallnessVerdict:
    """Banach-Picard smallness with measured constants.

    Theorem 2: ``C_init ||u0|| + C_force ||F|| < 1 / (4 C_B)`` (strict).
    Theorem 1: with ``F(T) = max(T^{1/p-}, T^{1/p+})`` the condition at
    horizon ``T`` is ``4 C_B (1 + T) F(T) * F(T) (C_init ||u0|| + C_force ||f||) < 1``;
    the left side increases with ``T``, so the largest admissible ``T`` is
    found by bisection and reported (``inf`` for zero data).  If ``T`` is
    given, the verdict refers to that horizon.
    """
    data = constants.get("initial", 0.0) * norms.get("initial", 0.0) + \
        constants.get("force", 0.0) * norms.get("force", 0.0)
    if theorem == 2:
        threshold = np.inf if c_b == 0 else 1.0 / (4.0 * c_b)
        return SmallnessVerdict(2, bool(data < threshold), float(data), float(threshold))
    if theorem != 1:
        raise ValueError("theorem must be 1 or 2")
    if p_minus is None or p_plus is None:
        raise ValueError("Theorem 1 needs p- and p+")

    def factor(t):
        return max(t ** (1 / p_minus), t ** (1 / p_plus))

    def lhs(t):
        return 4.0 * c_b * (1 + t) * factor(t) ** 2 * data

    if data == 0 or c_b == 0:
        t_max = np.inf
    else:
        lo, hi = 0.0, 1.0
        while lhs(hi) < 1:
            lo, hi = hi, hi * 2
            if hi > 1e12:
                break
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if lhs(mid) < 1:
                lo = mid
            else:
                hi = mid
        t_max = lo
    horizon = T if T is not None else t_max
    value = 0.0 if not np.isfinite(horizon) else lhs(horizon)
    return SmallnessVerdict(1, bool(value < 1), float(value), 1.0, float(t_max))
