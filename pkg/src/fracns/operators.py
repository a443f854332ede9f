"""Maximal function, Riesz transforms and potentials, and the Leray projector.

Boundedness checks return plain ratios; callers aggregate them over seeded
ensembles (see :func:`ensemble_report`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import gamma

from .grid import Field, GridSpec, SpectralField, forward_transform, inverse_transform, reflect
from .varlp import VariableExponent, luxemburg_norm, mixed_norm

# --- spectral multipliers -----------------------------------------------


def leray_project(F: SpectralField) -> SpectralField:
    """Projection onto divergence-free fields, multiplier ``delta_jk - xi_j xi_k / |xi|^2``.

    Uses the derivative wavenumber so that the projected field has exactly
    zero spectral divergence.  Modes where that wavenumber vanishes (the mean
    and pure-Nyquist modes) pass through unchanged.  The output is the
    Hermitian part of the projected coefficients, which for real input only
    removes rounding.
    """
    grid = F.grid
    if F.components != grid.d:
        raise ValueError(f"Leray projection needs {grid.d} components, got {F.components}")
    kd = [np.broadcast_to(k, grid.shape) for k in grid.derivative_wavenumbers]
    k2 = grid.kd_squared
    safe = np.where(k2 > 0, k2, 1.0)
    kdotu = sum(kd[j] * F.coeffs[j] for j in range(grid.d)) / safe
    out = np.stack([F.coeffs[j] - kd[j] * kdotu for j in range(grid.d)])
    # cancellation (e.g. projecting a gradient) leaves rounding noise that is
    # not Hermitian relative to its own size; symmetrising removes it
    out = 0.5 * (out + np.conj(reflect(out, grid.d)))
    return SpectralField(grid, out)


def riesz_transform(F: SpectralField, j: int) -> SpectralField:
    """``j``-th Riesz transform (1-based), multiplier ``-i xi_j / |xi|``; zero mode to 0."""
    grid = F.grid
    if not 1 <= j <= grid.d:
        raise ValueError(f"Riesz index must lie in 1..{grid.d}, got {j}")
    kd = grid.derivative_wavenumbers[j - 1]
    mag = np.sqrt(grid.kd_squared)
    symbol = np.where(mag > 0, -1j * kd / np.where(mag > 0, mag, 1.0), 0.0)
    return SpectralField(grid, F.coeffs * symbol)


def riesz_constant(d: int, beta: float) -> float:
    """``c`` with ``FT(|x|^{beta-d}) = c |xi|^{-beta}`` in ``R^d``."""
    return np.pi ** (d / 2) * 2.0**beta * gamma(beta / 2) / gamma((d - beta) / 2)


def _unit_sphere_area(d: int) -> float:
    return 2 * np.pi ** (d / 2) / gamma(d / 2)


# --- maximal function ---------------------------------------------------


@dataclass(frozen=True)
class RadiusLadder:
    """Sorted radii used for the discrete maximal function."""

    radii: tuple[float, ...]

    def __post_init__(self):
        if not self.radii:
            raise ValueError("radius ladder is empty")
        object.__setattr__(self, "radii", tuple(sorted(float(r) for r in self.radii)))

    @classmethod
    def geometric(cls, grid: GridSpec, r0: float | None = None, ratio: float = 2.0) -> RadiusLadder:
        """``{r0 * ratio^k}`` intersected with ``[spacing, L/2]``."""
        r = grid.spacing if r0 is None else r0
        radii = []
        while r <= grid.length / 2 * (1 + 1e-12):
            if r >= grid.spacing * (1 - 1e-12):
                radii.append(r)
            r *= ratio
        return cls(tuple(radii))

    @classmethod
    def complete(cls, grid: GridSpec) -> RadiusLadder:
        """Every distinct minimum-image node distance; ball averages are then exhaustive."""
        h2 = np.fft.fftfreq(grid.n, d=1.0 / grid.n) ** 2
        sq = np.unique(sum(np.meshgrid(*[h2] * grid.d, indexing="ij")).ravel())
        return cls(tuple(np.sqrt(sq[sq > 0]) * grid.spacing))


def _min_image_distance(grid: GridSpec) -> np.ndarray:
    idx = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    r2 = sum(np.broadcast_to(grid._axis(idx**2, j), grid.shape) for j in range(grid.d))
    return np.sqrt(r2) * grid.spacing


def maximal_function(f: Field, ladder: RadiusLadder, centered: bool = True) -> Field:
    """Discrete Hardy-Littlewood maximal function of ``|f|`` with periodic wrap.

    ``centered=True`` takes the sup of centred ball averages over the ladder
    radii (radius 0 included, so ``M f >= |f|``).  ``centered=False`` takes,
    for each radius, the largest average over balls whose centre node lies
    within that radius of ``x``, i.e. over balls containing ``x``.
    """
    grid = f.grid
    values = f.magnitude()
    dist = _min_image_distance(grid)
    vhat = np.fft.rfftn(values)
    result = values.copy()
    for r in ladder.radii:
        inside = dist <= r * (1 + 1e-12)
        ball = inside / np.count_nonzero(inside)
        avg = np.fft.irfftn(vhat * np.fft.rfftn(ball), s=grid.shape, axes=tuple(range(grid.d)))
        if not centered:
            avg = ndimage.maximum_filter(avg, footprint=np.fft.fftshift(inside), mode="wrap")
        np.maximum(result, avg, out=result)
    return Field(grid, np.maximum(result, 0.0))


def maximal_bound_check(f: Field, p: VariableExponent, ladder: RadiusLadder | None = None) -> float:
    """``||M f||_{p(.)} / ||f||_{p(.)}`` (0 when ``f = 0``)."""
    if p.p_minus <= 1:
        raise ValueError(f"maximal bound needs p- > 1, got {p.p_minus}")
    ladder = ladder or RadiusLadder.geometric(f.grid)
    denom = luxemburg_norm(f, p)
    if denom == 0:
        return 0.0
    return luxemburg_norm(maximal_function(f, ladder), p) / denom


def conv_radial_bound_check(profile, f: Field) -> dict:
    """Pointwise margin of ``|phi * f| <= ||phi||_1 M f`` for a radial profile.

    ``profile`` maps a distance array to values of ``phi``; it is sampled on
    the minimum-image distance of the grid.  ``M`` uses every discrete radius,
    so by the layer-cake decomposition of ``phi`` the inequality holds exactly
    on the grid up to rounding.
    """
    grid = f.grid
    dist = _min_image_distance(grid)
    phi = np.asarray(profile(dist), dtype=float)
    if np.any(phi < 0):
        raise ValueError("profile must be nonnegative")
    _require_radially_decreasing(dist, phi)
    axes = tuple(range(1, grid.d + 1))
    conv = np.fft.irfftn(np.fft.rfftn(f.data, axes=axes) * np.fft.rfftn(phi)[None],
                         s=grid.shape, axes=axes) * grid.cell_volume
    conv_mag = np.sqrt(np.sum(conv**2, axis=0))
    phi_l1 = float(phi.sum() * grid.cell_volume)
    mf = maximal_function(f, RadiusLadder.complete(grid)).data[0]
    margin = conv_mag - phi_l1 * mf
    scale = max(float(conv_mag.max()), 1e-300)
    return {
        "phi_l1": phi_l1,
        "max_margin": float(margin.max()),
        "relative_margin": float(margin.max()) / scale,
        "holds": bool(margin.max() <= 1e-10 * scale),
    }


def _require_radially_decreasing(dist: np.ndarray, phi: np.ndarray) -> None:
    shell = np.round(dist.ravel() / dist.ravel()[dist.ravel() > 0].min(), 8)
    keys, inverse = np.unique(shell, return_inverse=True)
    hi = np.full(keys.size, -np.inf)
    lo = np.full(keys.size, np.inf)
    np.maximum.at(hi, inverse, phi.ravel())
    np.minimum.at(lo, inverse, phi.ravel())
    tol = 1e-13 * max(float(hi.max()), 1e-300)
    if np.any(hi - lo > tol) or np.any(hi[1:] > lo[:-1] + tol):
        raise ValueError("profile is not radially decreasing on the grid")


# --- Riesz potential ----------------------------------------------------


def _self_cell_integral(grid: GridSpec, beta: float) -> float:
    """Integral of ``|y|^{beta-d}`` over the ball whose volume is one cell."""
    d = grid.d
    vd = np.pi ** (d / 2) / gamma(d / 2 + 1)
    rho = (grid.cell_volume / vd) ** (1.0 / d)
    return _unit_sphere_area(d) * rho**beta / beta


def _check_beta(beta: float, d: int) -> None:
    if not 0 < beta < d:
        raise ValueError(f"Riesz potential order must lie in (0, {d}), got {beta}")


def _power(r2: np.ndarray, e: float) -> np.ndarray:
    """``r2^e`` with ``0^e := 0``; common exponents avoid the generic ``pow``."""
    r2[r2 == 0] = np.inf
    if e == -0.5:
        return 1.0 / np.sqrt(r2)
    if e == -1.0:
        return 1.0 / r2
    return r2**e


def riesz_potential_direct(f: Field, beta: float, block: int = 2**22) -> Field:
    """``I_beta f(x) = sum_y |f(y)| |x - y|^{beta - d} dV`` over the primary box.

    No periodic images.  The singular cell uses the exact integral over the
    ball of one cell volume.  Only nonzero sources are visited; ``block``
    caps the number of (target, source) pairs held in memory at once.
    """
    grid = f.grid
    _check_beta(beta, grid.d)
    dens = f.magnitude().ravel()
    pts = grid.mesh().reshape(grid.d, -1)
    src = np.flatnonzero(dens)
    out = np.zeros(grid.size)
    if src.size == 0:
        return Field(grid, out.reshape(grid.shape))
    w = dens[src] * grid.cell_volume
    spts = pts[:, src]
    chunk = max(1, block // src.size)
    for start in range(0, grid.size, chunk):
        x = pts[:, start:start + chunk]
        r2 = np.zeros((x.shape[1], src.size))
        for j in range(grid.d):
            r2 += (x[j][:, None] - spts[j][None, :]) ** 2
        kern = _power(r2, (beta - grid.d) / 2)
        out[start:start + chunk] = kern @ w
    self_term = _self_cell_integral(grid, beta) * dens
    return Field(grid, (out + self_term).reshape(grid.shape))


def riesz_potential_fft(f: Field, beta: float, pad: int = 1) -> Field:
    """Fast path: multiplier ``c |xi|^{-beta}`` on ``|f|``, zero mode annihilated.

    ``pad > 1`` embeds ``f`` in a box ``pad`` times larger (zeros outside)
    before transforming, which pushes the periodic images away; the result
    is cropped back to the original box.
    """
    grid = f.grid
    _check_beta(beta, grid.d)
    if pad < 1:
        raise ValueError("pad must be >= 1")
    big = GridSpec(grid.d, grid.n * pad, grid.length * pad)
    core = tuple(slice(0, grid.n) for _ in range(grid.d))
    dens = np.zeros((1,) + big.shape)
    dens[(0,) + core] = f.magnitude()
    F = forward_transform(Field(big, dens))
    kmag = big.k_magnitude
    symbol = np.where(kmag > 0, riesz_constant(grid.d, beta) * np.where(kmag > 0, kmag, 1.0) ** -beta, 0.0)
    out = inverse_transform(SpectralField(big, F.coeffs * symbol)).data
    return Field(grid, out[(slice(None),) + core])


def riesz_direct_vs_fft(f: Field, beta: float, pad: int = 4) -> float:
    """Relative sup-distance between the two potentials, both taken modulo their mean."""
    a = riesz_potential_direct(f, beta).data[0]
    b = riesz_potential_fft(f, beta, pad).data[0]
    a = a - a.mean()
    b = b - b.mean()
    return float(np.max(np.abs(a - b)) / np.max(np.abs(a)))


def gaussian_blobs(grid: GridSpec, seed: int, count: int = 3) -> Field:
    """Sum of ``count`` Gaussians centred in the middle quarter of the box.

    Widths lie in ``[L/14, L/10]``, so on grids with ``N >= 32`` the
    spectrum is below ``1e-7`` at the Nyquist modes (effectively
    band-limited) and the tails are below ``1e-4`` of the peak at the box
    boundary.
    """
    rng = np.random.default_rng(seed)
    L = grid.length
    x = grid.mesh()
    out = np.zeros(grid.shape)
    for _ in range(count):
        centre = L / 2 + rng.uniform(-L / 8, L / 8, grid.d)
        width = rng.uniform(L / 14, L / 10)
        r2 = sum((x[j] - centre[j]) ** 2 for j in range(grid.d))
        out += rng.uniform(0.5, 1.5) * np.exp(-r2 / (2 * width**2))
    return Field(grid, out[None])


def sobolev_exponent(p: VariableExponent, beta: float, d: int) -> VariableExponent:
    """``q`` with ``1/q = 1/p - beta/d`` pointwise."""
    inv = 1.0 / p.values - beta / d
    if np.any(inv <= 0):
        raise ValueError("1/p - beta/d must stay positive")
    return p.derived(1.0 / inv, kind="sobolev")


def riesz_potential_bound_check(f: Field, beta: float, p: VariableExponent) -> float:
    """``||I_beta f||_{q(.)} / ||f||_{p(.)}`` with ``1/q = 1/p - beta/d``."""
    d = f.grid.d
    _check_beta(beta, d)
    if not beta < d / p.p_plus:
        raise ValueError(f"need beta < d/p+ = {d / p.p_plus}")
    q = sobolev_exponent(p, beta, d)
    denom = luxemburg_norm(f, p)
    if denom == 0:
        return 0.0
    return luxemburg_norm(riesz_potential_direct(f, beta), q) / denom


def mixed_riesz_check(f: Field, beta: float, p: VariableExponent, frak_p: float,
                      rho: VariableExponent) -> float:
    """``||I_beta f||_{rho(.)} / max(||f||_{p(.)}, ||f||_{frak_p})``."""
    d = f.grid.d
    if not 1 < frak_p < np.inf:
        raise ValueError("constant exponent must lie in (1, inf)")
    if not 0 < beta < min(d / p.p_plus, d / frak_p):
        raise ValueError(f"need 0 < beta < min(d/p+, d/frak_p) = {min(d / p.p_plus, d / frak_p)}")
    if rho.p_minus <= 1:
        raise ValueError("target exponent must exceed 1")
    denom = mixed_norm(f, p, frak_p)
    if denom == 0:
        return 0.0
    return luxemburg_norm(riesz_potential_direct(f, beta), rho) / denom


def thm2_riesz_preset(p: VariableExponent, alpha: float) -> dict:
    """Exponents of the tensor/bilinear estimate: input ``p/2``, ``beta = 2 alpha - 1``,
    ``frak_p = 3 / (2 (2 alpha - 1))``, target ``rho = p``."""
    return {
        "beta": 2 * alpha - 1,
        "p": p.derived(p.values / 2, kind="half"),
        "frak_p": 3.0 / (2 * (2 * alpha - 1)),
        "rho": p,
    }


# --- ensembles ----------------------------------------------------------


def ensemble_report(operator: str, preset: str, seed: int, ratios) -> dict:
    """Summarise per-seed ratios; ``drift`` compares the first half with the whole."""
    ratios = [float(r) for r in ratios]
    half = ratios[: max(1, len(ratios) // 2)]
    sup_all, sup_half = max(ratios), max(half)
    return {
        "operator": operator,
        "exponent_preset": preset,
        "ensemble_size": len(ratios),
        "seed": seed,
        "ratio_sup": sup_all,
        "drift": sup_all / sup_half if sup_half > 0 else 1.0,
        "ratios": ratios,
    }
