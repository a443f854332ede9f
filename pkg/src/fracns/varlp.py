"""Variable-exponent Lebesgue spaces on discrete measure spaces.

A :class:`Domain` is a finite set of sample points with nonnegative weights.
Spatial domains put the cell volume on every grid node (midpoint rule);
time domains on ``[0, T]`` use trapezoid weights over nodes that include both
end points.  Every norm below is the exact norm of the resulting discrete
measure space, so no quadrature error is mixed into inequality checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

from .grid import Field, GridSpec

REL_TOL = 1e-12
RELATION_TOL = 1e-12


# --- domains ------------------------------------------------------------


@dataclass(frozen=True)
class SpaceDomain:
    """Nodes of a periodic grid, each weighted by the cell volume."""

    grid: GridSpec

    @property
    def shape(self) -> tuple[int, ...]:
        return self.grid.shape

    @property
    def dim(self) -> int:
        return self.grid.d

    @property
    def period(self) -> float:
        return self.grid.length

    @property
    def measure(self) -> float:
        return self.grid.volume

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.shape, self.grid.cell_volume)

    @property
    def min_separation(self) -> float:
        return self.grid.spacing

    def points(self) -> np.ndarray:
        """Coordinates, shape ``shape + (dim,)``."""
        return np.moveaxis(self.grid.mesh(), 0, -1)


@dataclass(frozen=True)
class TimeDomain:
    """``n`` equispaced nodes on ``[0, T]`` (end points included), trapezoid weights."""

    T: float
    n: int

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n < 2:
            raise ValueError(f"need at least 2 time nodes, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,)

    @property
    def dim(self) -> int:
        return 1

    @property
    def period(self) -> float:
        return self.T

    @property
    def measure(self) -> float:
        return self.T

    @property
    def step(self) -> float:
        return self.T / (self.n - 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.step)
        w[[0, -1]] *= 0.5
        return w

    @property
    def min_separation(self) -> float:
        return self.step

    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n)[:, None]


Domain = Union[SpaceDomain, TimeDomain]


def interval_domain(n: int, length: float = 1.0) -> SpaceDomain:
    """``n`` cells of ``[0, length)``; handy for one-dimensional oracles."""
    return SpaceDomain(GridSpec(1, n, length))


# --- exponents ----------------------------------------------------------


Rule = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class VariableExponent:
    """Exponent ``p(.)`` sampled on a domain.

    Build instances with the class constructors (:meth:`constant`,
    :meth:`sinusoidal`, :meth:`log_tail`, :meth:`table`) or
    :func:`exponent_from_config`.  ``rule`` maps points of shape ``(..., dim)``
    to exponent values and lets :func:`check_log_holder` probe ``p`` off the
    grid; table exponents have no rule.
    """

    values: np.ndarray
    domain: Domain
    kind: str
    params: dict = field(default_factory=dict)
    p_inf: float | None = None
    rule: Rule | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.shape:
            raise ValueError(f"exponent samples have shape {values.shape}, domain wants {self.domain.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("exponent must be finite")
        if values.min() <= 1:
            raise ValueError(f"exponent must exceed 1 everywhere, min is {values.min()}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def p_minus(self) -> float:
        return float(self.values.min())

    @property
    def p_plus(self) -> float:
        return float(self.values.max())

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """``p`` at arbitrary points (last axis = coordinates)."""
        if self.rule is None:
            raise ValueError(f"{self.kind} exponent is only defined on its samples")
        return self.rule(np.asarray(x, dtype=float))

    def derived(self, values: np.ndarray, kind: str, rule: Rule | None = None,
                p_inf: float | None = None) -> VariableExponent:
        """New exponent on the same domain."""
        return VariableExponent(values, self.domain, kind, {"parent": self.kind}, p_inf, rule)

    # constructors

    @classmethod
    def constant(cls, p0: float, domain: Domain) -> VariableExponent:
        p0 = float(p0)
        rule = lambda x: np.full(np.shape(x)[:-1], p0)  # noqa: E731
        return cls(np.full(domain.shape, p0), domain, "constant", {"p0": p0}, p0, rule)

    @classmethod
    def sinusoidal(cls, p0: float, a: float, domain: Domain) -> VariableExponent:
        """``p0 + a sin(2 pi x_1 / L)`` with ``L`` the period of the domain."""
        if not abs(a) < p0 - 1:
            raise ValueError(f"need |a| < p0 - 1, got a={a}, p0={p0}")
        L = domain.period
        rule = lambda x: p0 + a * np.sin(2 * np.pi * x[..., 0] / L)  # noqa: E731
        return cls(rule(domain.points()), domain, "sinusoidal", {"p0": p0, "a": a}, None, rule)

    @classmethod
    def log_tail(cls, p_inf: float, b: float, domain: Domain) -> VariableExponent:
        """``1/p(x) = 1/p_inf + b / log(e + |x|)``."""
        inv_inf = 1.0 / p_inf
        if not (0 < inv_inf < 1 and 0 < inv_inf + b < 1):
            raise ValueError(f"log_tail exponent leaves (1, inf): p_inf={p_inf}, b={b}")

        def rule(x):
            return 1.0 / (inv_inf + b / np.log(np.e + np.linalg.norm(x, axis=-1)))

        return cls(rule(domain.points()), domain, "log_tail", {"p_inf": p_inf, "b": b}, float(p_inf), rule)

    @classmethod
    def table(cls, values: np.ndarray, domain: Domain, p_inf: float | None = None) -> VariableExponent:
        return cls(np.asarray(values, dtype=float), domain, "table", {}, p_inf, None)


def exponent_from_config(spec: dict, domain: Domain) -> VariableExponent:
    """Build an exponent from ``{"kind": ..., params...}``.

    Tables give either inline ``values`` or a ``path`` to a one-component
    FNSV file whose grid must match the domain.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "constant":
        return VariableExponent.constant(spec["p0"], domain)
    if kind == "sinusoidal":
        return VariableExponent.sinusoidal(spec["p0"], spec["a"], domain)
    if kind == "log_tail":
        return VariableExponent.log_tail(spec["p_inf"], spec["b"], domain)
    if kind == "table":
        if "path" in spec:
            from .fieldio import read_field

            f = read_field(spec["path"])
            if f.components != 1:
                raise ValueError("exponent table must have one component")
            if not isinstance(domain, SpaceDomain) or f.grid != domain.grid:
                raise ValueError("exponent table grid does not match the domain")
            values = f.data[0]
        else:
            values = np.asarray(spec["values"], dtype=float).reshape(domain.shape)
        return VariableExponent.table(values, domain, spec.get("p_inf"))
    raise ValueError(f"unknown exponent kind {kind!r}")


# --- modular and norms --------------------------------------------------


def _magnitudes(f, domain: Domain) -> np.ndarray:
    """Pointwise Euclidean magnitude of ``f`` on the samples of ``domain``."""
    if isinstance(f, Field):
        if not isinstance(domain, SpaceDomain) or f.grid != domain.grid:
            raise ValueError("field grid does not match the exponent domain")
        return f.magnitude()
    arr = np.asarray(f, dtype=float)
    if arr.shape == domain.shape:
        return np.abs(arr)
    if arr.shape[1:] == domain.shape:
        return np.sqrt(np.sum(arr**2, axis=0))
    raise ValueError(f"samples of shape {arr.shape} do not match domain shape {domain.shape}")


def modular(f, p: VariableExponent) -> float:
    """``sum w_i |f_i|^{p_i}``."""
    mag = _magnitudes(f, p.domain)
    if not np.all(np.isfinite(mag)):
        raise ValueError("field must be finite")
    return float(np.sum(p.domain.weights * mag**p.values))


def luxemburg_norm(f, p: VariableExponent) -> float:
    """``inf{lam > 0 : modular(f / lam) <= 1}``.

    Works with ``g(mu) = log modular(f e^{-mu})``, which is convex and
    strictly decreasing.  The bracket starts from ``modular(f)^{1/p+}`` and
    ``modular(f)^{1/p-}``, which already enclose the root.  Newton steps taken
    from the left end never overshoot a convex decreasing root; any step that
    leaves the bracket is replaced by bisection.  The returned value is the
    upper end of a bracket of relative width ``<= 1e-12``, so
    ``modular(f / norm) <= 1``.
    """
    mag = _magnitudes(f, p.domain)
    if not np.all(np.isfinite(mag)):
        raise ValueError("field must be finite")
    nz = mag > 0
    if not nz.any():
        return 0.0
    base = np.log(p.domain.weights[nz]) + p.values[nz] * np.log(mag[nz])
    expo = p.values[nz]

    def g(mu, slope=False):
        z = base - expo * mu
        top = z.max()
        e = np.exp(z - top)
        total = e.sum()
        val = top + np.log(total)
        return (val, -float(np.dot(e, expo)) / total) if slope else val

    log_rho = g(0.0)
    ends = (log_rho / p.p_plus, log_rho / p.p_minus)
    lo, hi = min(ends) - 1e-9, max(ends) + 1e-9
    step = 1e-9
    while g(lo) < 0:
        step *= 2
        lo -= step
    step = 1e-9
    while g(hi) > 0:
        step *= 2
        hi += step
    x, after_newton = lo, False
    while hi - lo > REL_TOL:
        val, der = g(x, slope=True)
        if val > 0:
            lo = x
        else:
            hi = x
        if hi - lo <= REL_TOL:
            break
        newton = x - val / der if val > 0 else np.nan
        if lo < newton < hi:
            # land just right of the Newton point, then probe just left of it
            x, after_newton = min(newton + 0.5 * REL_TOL, 0.5 * (newton + hi)), True
        elif after_newton and val <= 0:
            x, after_newton = max(hi - 0.9 * REL_TOL, 0.5 * (lo + hi)), False
        else:
            x, after_newton = 0.5 * (lo + hi), False
    return float(np.exp(hi))


def lebesgue_norm(f, p0: float, domain: Domain) -> float:
    """Classical ``L^{p0}`` norm on the same discrete measure."""
    mag = _magnitudes(f, domain)
    nz = mag > 0
    if not nz.any():
        return 0.0
    return float(np.exp(logsumexp(np.log(domain.weights[nz]) + p0 * np.log(mag[nz])) / p0))


def mixed_norm(f, p: VariableExponent, frak_p: float) -> float:
    """``max(||f||_{p(.)}, ||f||_{frak_p})``."""
    if not 1 < frak_p < np.inf:
        raise ValueError(f"mixed exponent must lie in (1, inf), got {frak_p}")
    return max(luxemburg_norm(f, p), lebesgue_norm(f, frak_p, p.domain))


def conjugate_exponent(p: VariableExponent) -> VariableExponent:
    """Pointwise ``p' = p / (p - 1)``."""
    if p.p_minus <= 1:
        raise ValueError("conjugate exponent needs p- > 1")

    def conj(v):
        return v / (v - 1.0)

    rule = None if p.rule is None else (lambda x: conj(p.rule(x)))
    p_inf = None if p.p_inf is None else conj(p.p_inf)
    return p.derived(conj(p.values), kind="conjugate", rule=rule, p_inf=p_inf)


# --- log-Hoelder estimates ----------------------------------------------


@dataclass(frozen=True)
class LogHolderReport:
    c1: float
    c2: float | None
    samples: int
    worst_pair: tuple[np.ndarray, np.ndarray]
    worst_far: np.ndarray | None

    @property
    def c2_applicable(self) -> bool:
        return self.c2 is not None


def _random_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_log_holder(p: VariableExponent, pair_samples: int, seed: int = 0) -> LogHolderReport:
    """Monte-Carlo estimates of the two log-Hoelder constants.

    ``C1`` is the sup of ``|1/p(x) - 1/p(y)| log(e + 1/|x - y|)`` over random
    pairs whose separation is log-uniform between ``1e-8 L`` and ``L``.
    ``C2`` is the sup of ``|1/p(x) - 1/p_inf| log(e + |x|)`` over points with
    log-uniform radius in ``[1, 1e8]``; it is ``None`` when ``p_inf`` is
    undefined.  Table exponents only have node values, so their pairs are
    drawn among nodes.
    """
    if pair_samples < 1:
        raise ValueError("pair_samples must be >= 1")
    rng = np.random.default_rng(seed)
    dom = p.domain
    dim, L = dom.dim, dom.period
    if p.rule is not None:
        x = rng.uniform(0, L, (pair_samples, dim))
        sep = L * 10.0 ** rng.uniform(-8, 0, pair_samples)
        y = x + sep[:, None] * _random_directions(rng, pair_samples, dim)
        px, py = p.evaluate(x), p.evaluate(y)
    else:
        pts = dom.points().reshape(-1, dim)
        flat = p.values.ravel()
        i = rng.integers(0, flat.size, pair_samples)
        j = rng.integers(0, flat.size, pair_samples)
        j = np.where(i == j, (j + 1) % flat.size, j)
        x, y, px, py = pts[i], pts[j], flat[i], flat[j]
    dist = np.linalg.norm(x - y, axis=1)
    c1_terms = np.abs(1 / px - 1 / py) * np.log(np.e + 1 / dist)
    k = int(np.argmax(c1_terms))
    c1 = float(c1_terms[k])

    c2, worst_far = None, None
    if p.p_inf is not None:
        if p.rule is not None:
            radius = 10.0 ** rng.uniform(0, 8, pair_samples)
            z = radius[:, None] * _random_directions(rng, pair_samples, dim)
            if isinstance(dom, TimeDomain):
                z = np.abs(z)
            pz = p.evaluate(z)
        else:
            z = dom.points().reshape(-1, dim)
            pz = p.values.ravel()
        c2_terms = np.abs(1 / pz - 1 / p.p_inf) * np.log(np.e + np.linalg.norm(z, axis=1))
        m = int(np.argmax(c2_terms))
        c2, worst_far = float(c2_terms[m]), z[m]
    return LogHolderReport(c1, c2, pair_samples, (x[k], y[k]), worst_far)


# --- inequality checks --------------------------------------------------


def holder_product_check(f, g, p: VariableExponent, q: VariableExponent, r: VariableExponent) -> float:
    """``||fg||_{p(.)} / (||f||_{q(.)} ||g||_{r(.)})``, requiring ``1/p = 1/q + 1/r``.

    Returns 0 when either factor vanishes.
    """
    for e in (q, r):
        if e.domain != p.domain:
            raise ValueError("exponents live on different domains")
    gap = np.max(np.abs(1 / p.values - 1 / q.values - 1 / r.values))
    if gap > RELATION_TOL:
        raise ValueError(f"exponent relation 1/p = 1/q + 1/r violated by {gap:.3e}")
    fm, gm = _magnitudes(f, p.domain), _magnitudes(g, p.domain)
    denom = luxemburg_norm(fm, q) * luxemburg_norm(gm, r)
    if denom == 0:
        return 0.0
    return luxemburg_norm(fm * gm, p) / denom


@dataclass(frozen=True)
class DualityReport:
    sup_estimate: float
    norm: float
    optimizer_value: float
    best_random: float

    @property
    def ratio(self) -> float:
        """Empirical ``sup / norm``; at least 1 when the lower bound holds."""
        return self.sup_estimate / self.norm if self.norm > 0 else 0.0

    @property
    def holds(self) -> bool:
        return self.sup_estimate >= (1 - 1e-6) * self.norm


def duality_lower_bound(f, p: VariableExponent, trials: int = 16, seed: int = 0) -> DualityReport:
    """Lower estimate of ``sup {int |f| g : ||g||_{p'(.)} <= 1}``.

    Candidates are the near-optimizer ``|f / ||f|| |^{p - 1}`` and ``trials``
    random nonnegative functions, each rescaled to unit ``p'`` norm.
    """
    mag = _magnitudes(f, p.domain)
    norm = luxemburg_norm(mag, p)
    if norm == 0:
        return DualityReport(0.0, 0.0, 0.0, 0.0)
    pc = conjugate_exponent(p)
    w = p.domain.weights

    def pairing(g):
        gn = luxemburg_norm(g, pc)
        return float(np.sum(w * mag * g)) / gn if gn > 0 else 0.0

    opt = pairing((mag / norm) ** (p.values - 1))
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        g = rng.random(p.domain.shape) ** rng.uniform(0.2, 5.0)
        best = max(best, pairing(g))
    return DualityReport(max(opt, best), norm, opt, best)


@dataclass(frozen=True)
class EmbeddingReport:
    applicable: bool
    ratio: float | None
    bound: float

    @property
    def holds(self) -> bool | None:
        return None if not self.applicable else self.ratio <= self.bound * (1 + 1e-12)


def embedding_check(f, q1: VariableExponent, q2: VariableExponent) -> EmbeddingReport:
    """``||f||_{q1(.)} / ||f||_{q2(.)}`` against ``1 + |X|`` when ``q1 <= q2``."""
    if q1.domain != q2.domain:
        raise ValueError("exponents live on different domains")
    bound = 1.0 + q1.domain.measure
    if np.any(q1.values > q2.values):
        return EmbeddingReport(False, None, bound)
    denom = luxemburg_norm(f, q2)
    ratio = 0.0 if denom == 0 else luxemburg_norm(f, q1) / denom
    return EmbeddingReport(True, ratio, bound)


@dataclass(frozen=True)
class UnitNormReport:
    value: float
    scale: float

    @property
    def ratio(self) -> float:
        return self.value / self.scale


def unit_norm_time(p: VariableExponent) -> UnitNormReport:
    """``||1||_{p(.)}`` on ``[0, T]`` and its scale ``max(T^{1/p-}, T^{1/p+})``."""
    dom = p.domain
    if not isinstance(dom, TimeDomain):
        raise ValueError("unit_norm_time needs an exponent on a time domain")
    T = dom.T
    value = luxemburg_norm(np.ones(dom.shape), p)
    return UnitNormReport(value, max(T ** (1 / p.p_minus), T ** (1 / p.p_plus)))
