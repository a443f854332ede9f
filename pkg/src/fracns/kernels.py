"""Fractional heat kernel, its gradient, the Oseen-type kernel and their estimates.

The radial kernel in ``R^d`` is synthesised from its symbol,

    g_t(r) = c_d int_0^inf exp(-t rho^{2 alpha}) rho^{d-1} Omega_d(rho r) d rho,

with ``Omega_1 = cos``, ``Omega_2 = J_0``, ``Omega_3(x) = sin(x)/x`` and
``c_1 = 1/pi``, ``c_2 = 1/(2 pi)``, ``c_3 = 1/(2 pi^2)``.  Two quadrature
routes are used, both evaluated at the requested ``t`` (no rescaling):

* small ``u = r t^{-1/(2 alpha)}``: composite Gauss-Legendre panels on the
  real axis, geometrically graded towards 0 (where ``rho^{2 alpha}`` is not
  smooth) and no wider than ``pi / r``;
* large ``u``: the oscillatory factor is written as ``exp(i rho r)`` (a
  Hankel function when ``d = 2``) and the ray is rotated to
  ``rho = s exp(i theta)``, which turns oscillation into exponential decay.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .grid import GridSpec, SpectralField

TAIL = 36.84  # exp(-36.84) < 1e-16
SWITCH_U = 4.0
_GL_ORDER = 20


def _check_args(alpha: float, t: float, d: int) -> None:
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")


_C = {1: 1 / np.pi, 2: 1 / (2 * np.pi), 3: 1 / (2 * np.pi**2)}


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1), 0.5 * w


def _panel_rule(b: float, width: float, grade: int = 24, ratio: float = 0.25):
    """Nodes and weights on ``[0, b]``: graded panels near 0, then panels of ``<= width``."""
    x, w = _gauss_legendre(_GL_ORDER)
    w0 = min(width, b)
    edges = [w0 * ratio**k for k in range(grade, 0, -1)] + [w0]
    rest = b - w0
    if rest > 0:
        count = int(np.ceil(rest / width))
        edges += list(w0 + rest * np.arange(1, count + 1) / count)
    edges = np.array([0.0] + edges)
    lo, h = edges[:-1], np.diff(edges)
    nodes = (lo[:, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def _real_route(alpha: float, t: float, r: float, d: int, deriv: bool) -> float:
    rho_max = (TAIL / t) ** (1 / (2 * alpha))
    width = rho_max / 16
    if r > 0:
        width = min(width, np.pi / r)
    rho, w = _panel_rule(rho_max, width)
    decay = np.exp(-t * rho ** (2 * alpha))
    x = rho * r
    if not deriv:
        omega = {1: np.cos(x), 2: special.j0(x), 3: np.sinc(x / np.pi)}[d]
        return _C[d] * float(np.sum(w * decay * rho ** (d - 1) * omega))
    if r == 0:
        return 0.0
    omega = {1: np.sin(x), 2: special.j1(x), 3: special.spherical_jn(1, x)}[d]
    return -_C[d] * float(np.sum(w * decay * rho**d * omega))


def _contour_route(alpha: float, t: float, r: float, d: int, deriv: bool) -> float:
    theta = min(np.pi / (8 * alpha), 0.45 * np.pi)
    rot = np.exp(1j * theta)
    s_max = min(40 / (r * np.sin(theta)), (40 / (t * np.cos(2 * alpha * theta))) ** (1 / (2 * alpha)))
    width = min(s_max / 32, np.pi / (r * np.cos(theta)))
    s, w = _panel_rule(s_max, width)
    z = s * rot
    damp = np.exp(-t * z ** (2 * alpha) + 1j * z * r)
    w = w * rot
    if d == 1:
        if not deriv:
            return float(np.sum(w * damp).real / np.pi)
        return float(-np.sum(w * damp * z).imag / np.pi)
    if d == 2:
        # hankel1e(n, x) = H_n^(1)(x) exp(-i x); the exp(i z r) factor sits in ``damp``
        if not deriv:
            return float(np.sum(w * damp * z * special.hankel1e(0, z * r)).real / (2 * np.pi))
        return float(-np.sum(w * damp * z**2 * special.hankel1e(1, z * r)).real / (2 * np.pi))
    g = float(np.sum(w * damp * z).imag) / (2 * np.pi**2 * r)
    if not deriv:
        return g
    return -g / r + float(np.sum(w * damp * z**2).real) / (2 * np.pi**2 * r)


def _radial(alpha: float, t: float, r, d: int, deriv: bool, route: str | None):
    _check_args(alpha, t, d)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    scale = t ** (1 / (2 * alpha))
    out = np.empty(r_arr.shape)
    for idx, rv in np.ndenumerate(r_arr):
        use = route or ("real" if rv / scale <= SWITCH_U else "contour")
        if use == "contour" and rv == 0:
            use = "real"
        fn = _real_route if use == "real" else _contour_route
        out[idx] = fn(alpha, t, float(rv), d, deriv)
    return out if out.ndim else float(out)


def heat_kernel_radial(alpha: float, t: float, r, d: int = 3, route: str | None = None):
    """Fractional heat kernel ``g_t^alpha`` at radius ``r`` in ``R^d``.

    ``route`` forces ``"real"`` or ``"contour"`` quadrature (used to
    cross-check the two); by default the route is chosen from
    ``r t^{-1/(2 alpha)}``.
    """
    return _radial(alpha, t, r, d, False, route)


def grad_heat_kernel(alpha: float, t: float, r, d: int = 3, route: str | None = None):
    """Radial derivative ``d g_t^alpha / d r`` (so ``|grad g| = |value|``)."""
    return _radial(alpha, t, r, d, True, route)


@dataclass(frozen=True)
class KernelProfile:
    """Radial evaluator of ``g_t^alpha`` at fixed ``(alpha, t, d)``."""

    alpha: float
    t: float
    d: int = 3

    def __post_init__(self):
        _check_args(self.alpha, self.t, self.d)

    def __call__(self, r):
        return heat_kernel_radial(self.alpha, self.t, r, self.d)

    def grad(self, r):
        return grad_heat_kernel(self.alpha, self.t, r, self.d)


# --- Oseen-type kernel --------------------------------------------------


@dataclass(frozen=True)
class OseenProfile:
    """``K_t^alpha`` as a lattice sum over ``|xi| <= rho_max`` for a periodic box of side ``box``.

    Values are indexed ``[point, j, h, k]`` and equal the inverse transform of
    ``exp(-t |xi|^{2 alpha}) (delta_jk - xi_j xi_k / |xi|^2) i xi_h``.  The sum
    is an exact trigonometric evaluation of the periodic synthesis, so the
    only approximation is the box itself; points must lie in the core
    ``|x|_inf <= box / core_factor``.
    """

    alpha: float
    t: float
    box: float
    core_factor: float = 32.0

    def __post_init__(self):
        _check_args(self.alpha, self.t, 3)
        if not self.box > 0:
            raise ValueError("box must be positive")

    @property
    def rho_max(self) -> float:
        return (TAIL / self.t) ** (1 / (2 * self.alpha))

    def _slabs(self):
        """Yield ``(xi_1, weights)`` per lattice plane; ``weights`` is ``(modes, 27)``."""
        dk = 2 * np.pi / self.box
        m = int(np.floor(self.rho_max / dk))
        k = np.arange(-m, m + 1) * dk
        k2d, k3d = np.meshgrid(k, k, indexing="ij")
        for k1 in k:
            k2 = k1**2 + k2d**2 + k3d**2
            keep = (k2 <= self.rho_max**2) & (k2 > 0)
            if not keep.any():
                continue
            xi = np.stack([np.full(keep.sum(), k1), k2d[keep], k3d[keep]], axis=1)
            q = k2[keep]
            amp = np.exp(-self.t * q**self.alpha)
            proj = np.eye(3)[None] - xi[:, :, None] * xi[:, None, :] / q[:, None, None]
            w = amp[:, None, None, None] * proj[:, :, None, :] * xi[:, None, :, None]
            yield xi, w.reshape(len(q), 27)

    def _check_core(self, x: np.ndarray) -> None:
        if np.any(np.abs(x) > self.box / self.core_factor * (1 + 1e-12)):
            raise ValueError(f"points outside the reliable core |x|_inf <= {self.box / self.core_factor}")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != 3:
            raise ValueError("Oseen kernel points must be 3-vectors")
        self._check_core(x)
        acc = np.zeros((len(x), 27))
        # K = L^-3 sum e P_jk (i xi_h) e^{i xi x} = -L^-3 sum e P_jk xi_h sin(xi x)
        for xi, w in self._slabs():
            acc += np.sin(x @ xi.T) @ w
        return (-acc / self.box**3).reshape(len(x), 3, 3, 3)

    def on_axis(self, r) -> np.ndarray:
        """Values at ``(r, 0, 0)``; sums each lattice plane first, so it is cheap."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        self._check_core(r[:, None])
        k1s, planes = [], []
        for xi, w in self._slabs():
            k1s.append(xi[0, 0])
            planes.append(w.sum(axis=0))
        acc = np.sin(np.outer(r, k1s)) @ np.array(planes)
        return (-acc / self.box**3).reshape(len(r), 3, 3, 3)


def _default_box(reach: float, core_factor: float) -> float:
    return float(2.0 ** np.ceil(np.log2(max(reach, 1e-300) * core_factor)))


def oseen_kernel(alpha: float, t: float, x, box: float | None = None, core_factor: float = 32.0) -> np.ndarray:
    """``K_t^alpha(x)`` with shape ``(points, j, h, k)``.

    The default box is the smallest power of two that keeps every point in
    the core ``|x|_inf <= box / core_factor``.  Points on the first axis use
    the plane-summed evaluation.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if box is None:
        box = _default_box(float(np.abs(x).max()), core_factor)
    prof = OseenProfile(alpha, t, box, core_factor)
    if np.all(x[:, 1:] == 0):
        return prof.on_axis(x[:, 0])
    return prof(x)


# --- decay and smoothing ------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    kernel: str
    alpha: float
    times: tuple[float, ...]
    radii: dict
    slice_sups: tuple[float, ...]

    @property
    def constant(self) -> float:
        return max(self.slice_sups)

    @property
    def drift(self) -> float:
        return max(self.slice_sups) / min(self.slice_sups) - 1.0

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "alpha": self.alpha,
            "times": list(self.times),
            "slice_sups": list(self.slice_sups),
            "constant": self.constant,
            "drift": self.drift,
        }


def verify_decay(kernel: str, alpha: float, times, radii, d: int = 3, core_factor: float = 32.0) -> DecayReport:
    """Per-``t`` sups of ``|k(t, x)| (t^{1/(2 alpha)} + |x|)^{d+1}``.

    ``radii`` is either an array used for every ``t`` or a callable
    ``t -> radii``.  ``kernel`` is ``"grad_heat"`` (any ``d``) or ``"oseen"``
    (``d = 3``, points on the first axis; the Frobenius norm is rotation
    invariant, so an axis suffices).  ``core_factor`` sets the Oseen lattice
    box relative to the largest radius.
    """
    if kernel not in ("grad_heat", "oseen"):
        raise ValueError(f"unknown kernel {kernel!r}")
    times = tuple(float(t) for t in times)
    if not times:
        raise ValueError("times must be nonempty")
    sups, used = [], {}
    for t in times:
        r = np.asarray(radii(t) if callable(radii) else radii, dtype=float)
        if r.size == 0 or np.any(r <= 0):
            raise ValueError("radii must be nonempty and positive")
        if kernel == "grad_heat":
            mag = np.abs(grad_heat_kernel(alpha, t, r, d))
            power = d + 1
        else:
            pts = np.zeros((r.size, 3))
            pts[:, 0] = r
            mag = np.sqrt(np.sum(oseen_kernel(alpha, t, pts, core_factor=core_factor) ** 2, axis=(1, 2, 3)))
            power = 4
        weighted = mag * (t ** (1 / (2 * alpha)) + r) ** power
        if not np.all(np.isfinite(weighted)):
            raise FloatingPointError("non-finite kernel values")
        sups.append(float(weighted.max()))
        used[t] = r
    return DecayReport(kernel, alpha, times, used, tuple(sups))


@dataclass(frozen=True)
class RateReport:
    times: np.ndarray
    ratios: np.ndarray
    slope: float
    predicted: float

    @property
    def relative_error(self) -> float:
        if self.predicted == 0:
            return abs(self.slope)
        return abs(self.slope - self.predicted) / abs(self.predicted)


def _fit_slope(times, values) -> float:
    return float(np.polyfit(np.log(times), np.log(values), 1)[0])


def predicted_rate(alpha: float, nu: float, r: float, p: float, d: int) -> float:
    return -nu / (2 * alpha) - d / (2 * alpha) * (1 / r - 1 / p)


def smoothing_estimate(alpha: float, nu: float, r: float, p: float, phi, times) -> RateReport:
    """Log-log slope of ``||(-Delta)^{nu/2} g_t * phi||_p / ||phi||_r`` over ``times``.

    ``phi`` is a one-component :class:`~fracns.grid.Field` on a periodic
    grid (spectral multiplier ``|xi|^nu exp(-t |xi|^{2 alpha})``, periodic
    norms).
    """
    if not 1 <= r <= p <= np.inf:
        raise ValueError("need 1 <= r <= p <= inf")
    from .grid import Field, forward_transform, inverse_transform

    grid = phi.grid
    F = forward_transform(phi)
    if np.any(np.abs(F.coeffs[:, ~grid.dealias_mask]) > 1e-10 * max(F.max_modulus(), 1e-300)):
        import warnings

        warnings.warn("phi is not band-limited on its grid; aliasing may bias the rate", stacklevel=2)
    times = np.asarray(times, dtype=float)

    def lp(v, q):
        a = np.abs(v)
        return float(a.max()) if np.isinf(q) else float((np.sum(a**q) * grid.cell_volume) ** (1 / q))

    base = lp(phi.data[0], r)
    ratios = []
    for t in times:
        mult = grid.k_magnitude**nu * np.exp(-t * grid.k_squared**alpha)
        out = inverse_transform(SpectralField(grid, F.coeffs * mult)).data[0]
        ratios.append(lp(out, p) / base)
    ratios = np.array(ratios)
    return RateReport(times, ratios, _fit_slope(times, ratios), predicted_rate(alpha, nu, r, p, grid.d))


def smoothing_sup_radial(alpha: float, profile, times, d: int = 3, support: float = 1.0) -> RateReport:
    """``||g_t * phi||_inf / ||phi||_1`` in ``R^d`` for a radial, radially decreasing ``phi >= 0``.

    Both factors are radially decreasing, so the sup of the convolution
    sits at the origin, where it equals ``|S^{d-1}| int g_t(s) phi(s) s^{d-1} ds``.
    ``profile`` must vanish beyond ``support``.
    """
    s, w = _panel_rule(support, support / 64)
    jac = s ** (d - 1)
    phi = np.asarray(profile(s), dtype=float)
    mass = float(np.sum(w * phi * jac))
    times = np.asarray(times, dtype=float)
    ratios = np.array([float(np.sum(w * heat_kernel_radial(alpha, t, s, d) * phi * jac)) / mass for t in times])
    return RateReport(times, ratios, _fit_slope(times, ratios), predicted_rate(alpha, 0.0, 1.0, np.inf, d))


def l2_operator_rate(alpha: float, nu: float, times) -> RateReport:
    """Slope of the ``L^2 -> L^2`` norm of ``(-Delta)^{nu/2} g_t *`` on ``R^d``.

    By Plancherel this norm is ``sup_rho rho^nu exp(-t rho^{2 alpha})``; the
    sup is taken numerically on a dense radial grid.
    """
    times = np.asarray(times, dtype=float)
    ratios = []
    for t in times:
        rho = np.geomspace(1e-6, (TAIL / t) ** (1 / (2 * alpha)), 200001)
        ratios.append(float(np.max(rho**nu * np.exp(-t * rho ** (2 * alpha)))))
    ratios = np.array(ratios)
    return RateReport(times, ratios, _fit_slope(times, ratios), -nu / (2 * alpha))


# --- time integral ------------------------------------------------------


def time_integral(alpha: float, r: float) -> float:
    """``int_0^inf ds / (s^{1/(2 alpha)} + r)^4``."""
    if not r > 0:
        raise ValueError("r must be positive")
    knee = r ** (2 * alpha)

    def f(s):
        return 1.0 / (s ** (1 / (2 * alpha)) + r) ** 4

    head = integrate.quad(f, 0, knee, epsabs=0, epsrel=1e-13, limit=200)[0]
    tail = integrate.quad(f, knee, np.inf, epsabs=0, epsrel=1e-13, limit=200)[0]
    return head + tail


def time_integral_constant(alpha: float, r: float = 1.0) -> float:
    """``c_alpha`` recovered as ``time_integral(alpha, r) * r^{4 - 2 alpha}``."""
    return time_integral(alpha, r) * r ** (4 - 2 * alpha)


def time_integral_closed_form(alpha: float) -> float:
    """``2 alpha B(2 alpha, 4 - 2 alpha) = 2 alpha Gamma(2 alpha) Gamma(4 - 2 alpha) / 6``."""
    return 2 * alpha * special.gamma(2 * alpha) * special.gamma(4 - 2 * alpha) / 6


# --- periodic semigroup -------------------------------------------------


def semigroup_symbol(grid: GridSpec, alpha: float, t: float) -> np.ndarray:
    """``exp(-t |xi|^{2 alpha})`` on the lattice of ``grid``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return np.exp(-t * grid.k_squared**alpha)


def apply_semigroup(F: SpectralField, alpha: float, t: float) -> SpectralField:
    return SpectralField(F.grid, F.coeffs * semigroup_symbol(F.grid, alpha, t))


def semigroup_check(alpha: float, t: float, s: float, F: SpectralField) -> float:
    """``max |S_t S_s F - S_{t+s} F| / max |F|``."""
    a = apply_semigroup(apply_semigroup(F, alpha, s), alpha, t)
    b = apply_semigroup(F, alpha, t + s)
    scale = F.max_modulus()
    return float(np.max(np.abs(a.coeffs - b.coeffs)) / scale) if scale > 0 else 0.0
