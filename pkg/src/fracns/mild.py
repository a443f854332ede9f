"""Mild solutions of the fractional Navier-Stokes system on a periodic box.

The unknown is a whole trajectory on the uniform time grid ``t_i = i T/(n_t-1)``
and solves

    e = e0 - B(e, e),   e0(t) = S_t u0 + int_0^t S_{t-s} P f(s) ds,
    B(u, v)(t) = int_0^t S_{t-s} P div(u (x) v)(s) ds,

with ``S_t`` the multiplier ``exp(-nu t |xi|^{2 alpha})`` and ``P`` the Leray
projector.  Every time integral uses the exponential product trapezoid rule:
the integrand is interpolated linearly between nodes and multiplied by the
exact semigroup factor, so piecewise-linear integrands are integrated exactly
and stiff modes stay stable.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .grid import (
    Field,
    GridSpec,
    SpectralField,
    dealias,
    divergence_spectral,
    forward_transform,
    gradient_spectral,
    inverse_transform,
    make_preset,
)
from .operators import leray_project

DIV_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Time grid, grid and iteration controls."""

    alpha: float
    T: float
    n_t: int
    grid: GridSpec
    dealias: bool = True
    tol: float = 1e-10
    max_iter: int = 50
    nu: float = 1.0
    memory_budget: float = 2e9

    def __post_init__(self):
        if not 0.5 < self.alpha <= 1:
            raise ValueError(f"alpha out of (0.5, 1]: {self.alpha}")
        if not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T}")
        if self.n_t < 2:
            raise ValueError(f"need at least 2 time nodes, got {self.n_t}")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tolerance must be positive and max_iter >= 1")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        need = 16.0 * self.n_t * self.grid.d * self.grid.size
        if need > self.memory_budget:
            raise ValueError(f"trajectory needs {need:.3g} bytes, budget is {self.memory_budget:.3g}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t)

    @property
    def dt(self) -> float:
        return self.T / (self.n_t - 1)

    @property
    def symbol(self) -> np.ndarray:
        """``nu |xi|^{2 alpha}``."""
        return self.nu * self.grid.k_squared**self.alpha

    def digest(self) -> str:
        payload = asdict(self)
        payload["grid"] = asdict(self.grid)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class Trajectory:
    """Spectral snapshots ``coeffs[i, component, ...]`` at ``times[i]``."""

    grid: GridSpec
    times: np.ndarray
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        expect = (len(self.times), self.grid.d) + self.grid.shape
        if self.coeffs.shape != expect:
            raise ValueError(f"trajectory coefficients have shape {self.coeffs.shape}, expected {expect}")

    def snapshot(self, i: int) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[i])

    def physical(self, i: int) -> Field:
        return inverse_transform(self.snapshot(i))

    def sup_norm(self) -> float:
        """Working norm: sup over nodes of the largest coefficient modulus."""
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def divergence_defect(self) -> float:
        """Largest relative spectral divergence over the snapshots."""
        worst = 0.0
        for i in range(len(self.times)):
            F = self.snapshot(i)
            scale = F.max_modulus()
            if scale > 0:
                worst = max(worst, divergence_spectral(F).max_modulus() / scale)
        return worst

    def _like(self, coeffs: np.ndarray) -> Trajectory:
        return Trajectory(self.grid, self.times, coeffs, dict(self.meta))

    def __add__(self, other: Trajectory) -> Trajectory:
        return self._like(self.coeffs + other.coeffs)

    def __sub__(self, other: Trajectory) -> Trajectory:
        return self._like(self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> Trajectory:
        return self._like(self.coeffs * c)

    __rmul__ = __mul__


# --- forcing ------------------------------------------------------------


@dataclass(frozen=True)
class ForcingSpec:
    """External force.

    ``kind="zero"``: no force.  ``kind="analytic"``: ``f(t) = amplitude *
    exp(-decay t) * w`` with ``w`` the field preset ``preset`` (Leray-projected
    before use).  ``kind="tensor"``: ``f = div(F)`` with ``F_jk = amplitude *
    exp(-decay t) * w_j w_k``, or ``amplitude * exp(-decay t) * w (e_1 e_2 + e_2 e_1)``
    when the preset is scalar.  Either kind may instead carry explicit
    physical samples in ``data``, shaped ``(n_t, d, ...)`` or ``(n_t, d, d,
    ...)``, or without the leading time axis for a static force.
    """

    kind: str = "zero"
    preset: str = "random_divfree"
    amplitude: float = 1.0
    seed: int = 0
    decay: float = 0.0
    data: np.ndarray | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zero", "analytic", "tensor"):
            raise ValueError(f"unknown forcing kind {self.kind!r}")

    def _time_stack(self, config: SolverConfig, static: np.ndarray, rank: int) -> np.ndarray:
        arr = np.asarray(static, dtype=float)
        tail = (config.grid.d,) * rank + config.grid.shape
        if arr.shape == tail:
            profile = np.exp(-self.decay * config.times)
            return profile.reshape((-1,) + (1,) * arr.ndim) * arr[None]
        if arr.shape == (config.n_t,) + tail:
            return arr
        raise ValueError(f"forcing data has shape {arr.shape}, expected {tail} or {(config.n_t,) + tail}")

    def tensor(self, config: SolverConfig) -> np.ndarray | None:
        """Physical tensor samples ``(n_t, d, d, ...)`` for the tensor kind."""
        if self.kind != "tensor":
            return None
        if self.data is not None:
            return self._time_stack(config, self.data, 2)
        w = make_preset(self.preset, config.grid, seed=self.seed, **self.options).data
        if w.shape[0] == 1:
            shear = np.zeros((config.grid.d, config.grid.d) + (1,) * config.grid.d)
            shear[0, 1] = shear[1, 0] = 1.0
            return self._time_stack(config, self.amplitude * shear * w[0], 2)
        return self._time_stack(config, self.amplitude * w[:, None] * w[None, :], 2)

    def spectral(self, config: SolverConfig) -> np.ndarray | None:
        """``P f`` at every node, shape ``(n_t, d, ...)``; ``None`` when there is no force."""
        grid = config.grid
        if self.kind == "zero":
            return None
        if self.kind == "tensor":
            F = self.tensor(config)
            return np.stack([leray_project(tensor_divergence(grid, F[i])).coeffs for i in range(config.n_t)])
        if self.data is not None:
            phys = self._time_stack(config, self.data, 1)
        else:
            w = make_preset(self.preset, grid, amplitude=self.amplitude, seed=self.seed, **self.options).data
            phys = self._time_stack(config, w, 1)
        return np.stack([leray_project(forward_transform(Field(grid, phys[i]))).coeffs for i in range(config.n_t)])


def tensor_divergence(grid: GridSpec, tensor: np.ndarray) -> SpectralField:
    """``(div F)_j = sum_k d_k F_jk`` for physical samples ``tensor[j, k, ...]``."""
    d = grid.d
    hat = forward_transform(Field(grid, tensor.reshape((d * d,) + grid.shape))).coeffs.reshape((d, d) + grid.shape)
    kd = grid.derivative_wavenumbers
    return SpectralField(grid, np.stack([sum(1j * kd[k] * hat[j, k] for k in range(d)) for j in range(d)]))


# --- semigroup and time integrals ---------------------------------------


def semigroup_apply(alpha: float, t: float, F: SpectralField, nu: float = 1.0) -> SpectralField:
    """Multiply by ``exp(-nu t |xi|^{2 alpha})``."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return SpectralField(F.grid, F.coeffs * np.exp(-nu * t * F.grid.k_squared**alpha))


def _phi_weights(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``phi1 = (1 - e^{-z})/z`` and ``psi = (1 - (1+z) e^{-z})/z^2`` with series near 0."""
    small = z < 0.1
    zs = np.where(small, 1.0, z)
    phi1 = np.where(z > 0, -np.expm1(-zs) / zs, 1.0)
    psi = (1.0 - (1.0 + zs) * np.exp(-zs)) / zs**2
    series = np.zeros_like(z)
    term = np.ones_like(z)
    fact = 2.0
    for n in range(12):
        series += term * (n + 1) / fact
        term = term * (-z)
        fact *= n + 3
    psi = np.where(small, series, psi)
    phi1 = np.where(small, _phi1_series(z), phi1)
    return phi1, psi


def _phi1_series(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    term = np.ones_like(z)
    fact = 1.0
    for n in range(12):
        out += term / fact
        term = term * (-z)
        fact *= n + 2
    return out


def duhamel_integral(config: SolverConfig, integrand: np.ndarray) -> np.ndarray:
    """``D(t_i) = int_0^{t_i} S_{t_i - s} f(s) ds`` for node samples ``integrand[i]``.

    ``D_i = e^{-z} D_{i-1} + dt (psi(z) f_{i-1} + (phi1(z) - psi(z)) f_i)`` with
    ``z = dt nu |xi|^{2 alpha}``: exact when ``f`` is linear between nodes.
    """
    z = config.dt * config.symbol
    decay = np.exp(-z)
    phi1, psi = _phi_weights(z)
    w_prev, w_curr = config.dt * psi, config.dt * (phi1 - psi)
    out = np.zeros_like(integrand)
    for i in range(1, config.n_t):
        out[i] = decay * out[i - 1] + w_prev * integrand[i - 1] + w_curr * integrand[i]
    return out


def duhamel_force(config: SolverConfig, forcing: ForcingSpec) -> Trajectory:
    """``int_0^t S_{t-s} P f(s) ds`` at every node."""
    shape = (config.n_t, config.grid.d) + config.grid.shape
    pf = forcing.spectral(config)
    coeffs = np.zeros(shape, dtype=complex) if pf is None else duhamel_integral(config, pf)
    return Trajectory(config.grid, config.times, coeffs, {"config": config.digest()})


def free_evolution(config: SolverConfig, u0: SpectralField) -> Trajectory:
    """``S_t u0`` at every node."""
    sym = config.symbol
    coeffs = np.stack([u0.coeffs * np.exp(-t * sym) for t in config.times])
    return Trajectory(config.grid, config.times, coeffs, {"config": config.digest()})


# --- nonlinearity -------------------------------------------------------


def projected_divergence(u: SpectralField, v: SpectralField, dealiased: bool = True) -> SpectralField:
    """``P div(u (x) v)`` with ``(u (x) v)_jk = u_j v_k``; products formed on the grid."""
    grid = u.grid
    d = grid.d
    if dealiased:
        u, v = dealias(u), dealias(v)
    up, vp = inverse_transform(u).data, inverse_transform(v).data
    prod = up[:, None] * vp[None, :]
    div = tensor_divergence(grid, prod)
    if dealiased:
        div = dealias(div)
    return leray_project(div)


def bilinear_B(config: SolverConfig, u: Trajectory, v: Trajectory) -> Trajectory:
    """``B(u, v)(t) = int_0^t S_{t-s} P div(u (x) v)(s) ds`` at every node."""
    for traj in (u, v):
        if traj.grid != config.grid or len(traj.times) != config.n_t:
            raise ValueError("trajectory does not match the solver grid or time nodes")
    integrand = np.stack([
        projected_divergence(u.snapshot(i), v.snapshot(i), config.dealias).coeffs for i in range(config.n_t)
    ])
    return Trajectory(config.grid, config.times, duhamel_integral(config, integrand), {"config": config.digest()})


# --- Picard iteration ---------------------------------------------------


@dataclass
class PicardReport:
    iterations: int
    increments: list
    ratios: list
    delta: float
    c_b: float
    final_norm: float
    converged: bool
    failed: bool
    preprojected: bool = False
    message: str = ""

    @property
    def verdict(self) -> bool:
        """Final working norm within ``2 delta``."""
        return (not self.failed) and self.final_norm <= 2 * self.delta * (1 + 1e-9)

    @property
    def contracting(self) -> bool:
        return (not self.failed) and all(r < 1 for r in self.ratios)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict
        out["contracting"] = self.contracting
        return out


def prepare_initial(u0: Field) -> tuple[SpectralField, bool]:
    """Transform ``u0``; Leray-project it (and warn) if its divergence is not negligible."""
    U = forward_transform(u0)
    scale = U.max_modulus()
    if scale > 0 and divergence_spectral(U).max_modulus() > DIV_TOL * scale:
        warnings.warn("initial data is not divergence-free; projecting it", stacklevel=3)
        return leray_project(U), True
    return U, False


def picard_iterate(config: SolverConfig, u0: Field, forcing: ForcingSpec | None = None,
                   norm: Callable[[Trajectory], float] | None = None) -> tuple[Trajectory | None, PicardReport]:
    """Iterate ``e_{k+1} = e0 - B(e_k, e_k)`` from ``e_0 = e0``.

    Stops when the working-norm increment is ``<= tol`` or after ``max_iter``
    iterations.  Increments growing for three consecutive iterations (or a
    non-finite iterate) count as divergence: the report is flagged and no
    trajectory is returned.  ``norm`` is the working norm used for
    ``delta``, the increments and the ``2 delta`` verdict (default: sup over
    nodes of the largest coefficient modulus).  ``c_b`` records the largest
    observed ``||B(e_k, e_k)|| / ||e_k||^2``.
    """
    forcing = forcing or ForcingSpec()
    norm = norm or Trajectory.sup_norm
    U0, projected = prepare_initial(u0)
    e0 = free_evolution(config, U0) + duhamel_force(config, forcing)
    delta = norm(e0)
    e = e0
    increments, ratios = [], []
    c_b, growth = 0.0, 0
    for k in range(1, config.max_iter + 1):
        nxt = e0 - bilinear_B(config, e, e)
        if not np.all(np.isfinite(nxt.coeffs)):
            return None, PicardReport(k, increments, ratios, delta, c_b, float("inf"), False, True,
                                      projected, "non-finite iterate")
        size = norm(e)
        if size > 0:
            c_b = max(c_b, norm(e0 - nxt) / size**2)
        inc = norm(nxt - e)
        if increments:
            prev = increments[-1]
            ratios.append(inc / prev if prev > 0 else 0.0)
            growth = growth + 1 if inc > prev else 0
        increments.append(inc)
        e = nxt
        if inc <= config.tol:
            e.meta["picard_iterations"] = k
            return e, PicardReport(k, increments, ratios, delta, c_b, norm(e), True, False, projected)
        if growth >= 3:
            return None, PicardReport(k, increments, ratios, delta, c_b, norm(e), False, True,
                                      projected, "increments grew for 3 consecutive iterations")
    return e, PicardReport(config.max_iter, increments, ratios, delta, c_b, norm(e), False, False,
                           projected, "max_iter reached")


# --- independent oracle -------------------------------------------------


class BlowUpError(FloatingPointError):
    pass


def time_march_oracle(config: SolverConfig, u0: Field, forcing: ForcingSpec | None = None,
                      substeps: int = 1, nonlinear: bool = True) -> Trajectory:
    """Exponential Euler: ``u <- S_h [u + h (P f - P div(u (x) u))]`` with ``h = dt / substeps``.

    The force is taken at the start of each step, linearly interpolated
    between nodes.  Snapshots are stored at the solver nodes.
    """
    forcing = forcing or ForcingSpec()
    U, _ = prepare_initial(u0)
    pf = forcing.spectral(config)
    h = config.dt / substeps
    step = np.exp(-h * config.symbol)
    start = max(U.max_modulus(), 0.0 if pf is None else config.T * float(np.abs(pf).max()), 1e-300)
    out = np.empty((config.n_t, config.grid.d) + config.grid.shape, dtype=complex)
    out[0] = U.coeffs
    u = U.coeffs
    for i in range(1, config.n_t):
        for s in range(substeps):
            rhs = np.zeros_like(u)
            if pf is not None:
                theta = s / substeps
                rhs += (1 - theta) * pf[i - 1] + theta * pf[i]
            if nonlinear:
                F = SpectralField(config.grid, u)
                rhs -= projected_divergence(F, F, config.dealias).coeffs
            u = step * (u + h * rhs)
            peak = float(np.max(np.abs(u)))
            if not np.isfinite(peak) or peak > 1e6 * start:
                raise BlowUpError(f"time marcher blew up near t = {config.times[i - 1] + (s + 1) * h:.4g}")
        out[i] = u
    return Trajectory(config.grid, config.times, out, {"config": config.digest(), "oracle": "exp-euler"})


# --- pressure and C_B ---------------------------------------------------


def recover_pressure(u: SpectralField) -> SpectralField:
    """``P^ = (xi (x) xi / |xi|^2) : (u (x) u)^``, zero mode 0.

    With this sign ``grad P`` is the gradient part of ``div(u (x) u)``, so
    ``div(u (x) u) - grad P`` is divergence-free.
    """
    grid = u.grid
    d = grid.d
    if u.components != d:
        raise ValueError(f"pressure needs {d} components")
    up = inverse_transform(u).data
    hat = forward_transform(Field(grid, (up[:, None] * up[None, :]).reshape((d * d,) + grid.shape)))
    hat = hat.coeffs.reshape((d, d) + grid.shape)
    k = [np.broadcast_to(x, grid.shape) for x in grid.wavenumbers]
    k2 = grid.k_squared
    safe = np.where(k2 > 0, k2, 1.0)
    P = sum(k[j] * k[m] * hat[j, m] for j in range(d) for m in range(d)) / safe
    P = np.where(k2 > 0, P, 0.0)
    return SpectralField(grid, P[None])


def pressure_gradient(u: SpectralField) -> SpectralField:
    return gradient_spectral(recover_pressure(u))


def estimate_CB(config: SolverConfig, trials: int, seed: int = 0,
                norm: Callable[[Trajectory], float] | None = None) -> float:
    """``max ||B(e, e)|| / ||e||^2`` over random divergence-free semigroup trajectories.

    Trial ``i`` starts from ``random_divfree`` with seed ``seed + i``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    norm = norm or Trajectory.sup_norm
    best = 0.0
    for i in range(trials):
        w = forward_transform(make_preset("random_divfree", config.grid, seed=seed + i))
        e = free_evolution(config, w)
        size = norm(e)
        if size == 0:
            continue
        e = e * (1.0 / size)
        best = max(best, norm(bilinear_B(config, e, e)))
    return best


def smallness_threshold(c_b: float) -> float:
    """``1 / (4 C_B)``."""
    return np.inf if c_b == 0 else 1.0 / (4.0 * c_b)
