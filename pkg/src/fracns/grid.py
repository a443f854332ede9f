"""Uniform periodic grids, real <-> spectral transforms and analytic presets.

Conventions
-----------
* Physical samples live on the nodes ``x_i = i * L / N`` of ``[0, L)^d``.
  Arrays are indexed ``[component, i_1, ..., i_d]``.
* The forward transform carries the ``1/N^d`` factor, so the stored
  coefficients are Fourier-series coefficients: a constant field ``c`` has
  coefficient ``c`` at ``xi = 0`` and ``sin(2 pi x_1 / L)`` has two conjugate
  coefficients of modulus ``1/2``.  The inverse transform is an unnormalised
  sum.  Parseval therefore reads
  ``sum |f|^2 * cell_volume == L^d * sum |F|^2``.
* First-order (odd) multipliers use the *derivative wavenumber*, which is the
  lattice wavenumber with the Nyquist entry set to zero on every axis.  This
  keeps every odd multiplier Hermitian on even grids.  Even multipliers
  (``|xi|^{2 alpha}``, ``|xi|^{-beta}``) use the true lattice wavenumber.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

HERMITIAN_TOL = 1e-12

PRESETS = ("taylor_green_2d", "abc_beltrami_3d", "random_divfree", "gradient_field", "bump")


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[0, length)^d`` with ``n`` points per axis."""

    d: int
    n: int
    length: float = 2 * np.pi

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"points per axis must be even and >= 4, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"box length must be positive, got {self.length}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    @property
    def volume(self) -> float:
        return self.length**self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def dealias_cutoff(self) -> int:
        return self.n // 3

    def _axis(self, values: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * self.d
        shape[axis] = self.n
        return values.reshape(shape)

    @cached_property
    def mode_numbers(self) -> tuple[np.ndarray, ...]:
        """Integer lattice indices ``k_j`` per axis, broadcastable."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)
        return tuple(self._axis(k, j) for j in range(self.d))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers ``2 pi k_j / L`` per axis, broadcastable."""
        return tuple(2 * np.pi * k / self.length for k in self.mode_numbers)

    @cached_property
    def derivative_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers with the Nyquist entry zeroed (for odd multipliers)."""
        out = []
        for k in self.wavenumbers:
            kd = k.copy()
            kd[np.abs(kd) >= np.pi * self.n / self.length * (1 - 1e-14)] = 0.0
            out.append(kd)
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(np.broadcast_to(k, self.shape) ** 2 for k in self.wavenumbers)

    @cached_property
    def k_magnitude(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def kd_squared(self) -> np.ndarray:
        return sum(np.broadcast_to(k, self.shape) ** 2 for k in self.derivative_wavenumbers)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for k in self.mode_numbers:
            mask &= np.abs(k) <= self.dealias_cutoff
        return mask

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Node coordinates per axis, broadcastable."""
        x = np.arange(self.n) * self.spacing
        return tuple(self._axis(x, j) for j in range(self.d))

    def mesh(self) -> np.ndarray:
        """Dense node coordinates, shape ``(d,) + shape``."""
        return np.stack([np.broadcast_to(x, self.shape) for x in self.coordinates()])


@dataclass(frozen=True)
class Field:
    """Real samples of an ``m``-component field on a grid."""

    grid: GridSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.shape == self.grid.shape:
            data = data[None]
        if data.shape[1:] != self.grid.shape:
            raise ValueError(f"samples of shape {data.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "data", data)

    @property
    def components(self) -> int:
        return self.data.shape[0]

    def magnitude(self) -> np.ndarray:
        """Pointwise Euclidean norm over components."""
        if self.components == 1:
            return np.abs(self.data[0])
        return np.sqrt(np.sum(self.data**2, axis=0))

    def __add__(self, other: Field) -> Field:
        _check_same_grid(self.grid, other.grid)
        return Field(self.grid, self.data + other.data)

    def __sub__(self, other: Field) -> Field:
        _check_same_grid(self.grid, other.grid)
        return Field(self.grid, self.data - other.data)

    def __mul__(self, c: float) -> Field:
        return Field(self.grid, c * self.data)

    __rmul__ = __mul__


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a real field, shape ``(m,) + grid.shape``."""

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape == self.grid.shape:
            coeffs = coeffs[None]
        if coeffs.shape[1:] != self.grid.shape:
            raise ValueError(f"coefficients of shape {coeffs.shape} do not fit grid {self.grid.shape}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    def max_modulus(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def __add__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        _check_same_grid(self.grid, other.grid)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: complex) -> SpectralField:
        return SpectralField(self.grid, c * self.coeffs)

    __rmul__ = __mul__


def _check_same_grid(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


def _spatial_axes(grid: GridSpec) -> tuple[int, ...]:
    return tuple(range(-grid.d, 0))


def reflect(coeffs: np.ndarray, d: int) -> np.ndarray:
    """Return ``G`` with ``G[..., xi] = coeffs[..., -xi]`` on the periodic lattice."""
    axes = tuple(range(-d, 0))
    return np.roll(np.flip(coeffs, axis=axes), 1, axis=axes)


def hermitian_defect(F: SpectralField) -> float:
    """Largest ``|F(xi) - conj F(-xi)|`` relative to the largest modulus."""
    scale = F.max_modulus()
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(F.coeffs - np.conj(reflect(F.coeffs, F.grid.d))))) / scale


def forward_transform(f: Field) -> SpectralField:
    """Fourier coefficients of ``f`` (forward transform carries ``1/N^d``)."""
    if not np.all(np.isfinite(f.data)):
        bad = int(np.count_nonzero(~np.isfinite(f.data)))
        raise ValueError(f"field contains {bad} non-finite samples")
    coeffs = np.fft.fftn(f.data, axes=_spatial_axes(f.grid), norm="forward")
    return SpectralField(f.grid, coeffs)


def inverse_transform(F: SpectralField, tol: float = HERMITIAN_TOL) -> Field:
    """Real field with coefficients ``F``; rejects non-Hermitian input."""
    defect = hermitian_defect(F)
    if defect > tol:
        raise ValueError(f"coefficients are not Hermitian (relative defect {defect:.3e} > {tol:g})")
    values = np.fft.ifftn(F.coeffs, axes=_spatial_axes(F.grid), norm="forward")
    scale = F.max_modulus()
    residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
    if scale > 0 and residue > tol * scale * F.grid.size:
        raise ValueError(f"imaginary residue {residue:.3e} too large for a real field")
    return Field(F.grid, values.real.copy())


def divergence_spectral(F: SpectralField) -> SpectralField:
    """Spectral divergence ``sum_j i xi_j F_j``."""
    if F.components != F.grid.d:
        raise ValueError(f"divergence needs {F.grid.d} components, got {F.components}")
    kd = F.grid.derivative_wavenumbers
    out = sum(1j * kd[j] * F.coeffs[j] for j in range(F.grid.d))
    return SpectralField(F.grid, np.broadcast_to(out, F.grid.shape)[None].copy())


def gradient_spectral(F: SpectralField) -> SpectralField:
    """Spectral gradient of a scalar field."""
    if F.components != 1:
        raise ValueError("gradient needs a scalar field")
    kd = F.grid.derivative_wavenumbers
    return SpectralField(F.grid, np.stack([1j * k * F.coeffs[0] for k in kd]))


def curl_spectral(F: SpectralField) -> SpectralField:
    """Spectral curl of a 3-component field in 3D."""
    if F.grid.d != 3 or F.components != 3:
        raise ValueError("curl is defined for 3-component fields in 3D")
    k1, k2, k3 = F.grid.derivative_wavenumbers
    u1, u2, u3 = F.coeffs
    return SpectralField(F.grid, np.stack([
        1j * (k2 * u3 - k3 * u2),
        1j * (k3 * u1 - k1 * u3),
        1j * (k1 * u2 - k2 * u1),
    ]))


def dealias(F: SpectralField) -> SpectralField:
    """2/3-rule truncation: zero every mode with some ``|k_j| > N // 3``."""
    return SpectralField(F.grid, np.where(F.grid.dealias_mask, F.coeffs, 0.0))


def parseval_energy(F: SpectralField) -> float:
    """``L^d * sum |F|^2``, equal to ``sum |f|^2 * cell_volume``."""
    return float(F.grid.volume * np.sum(np.abs(F.coeffs) ** 2))


# --- deterministic seed expansion ---------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the splitmix64 generator started at ``seed``."""
    state = np.uint64(seed % 2**64) + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix64_uniform(seed: int, count: int) -> np.ndarray:
    """Uniform doubles in ``[0, 1)`` from the top 53 bits of splitmix64."""
    return (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53


# --- presets -------------------------------------------------------------

def bump_profile(r: np.ndarray, radius: float) -> np.ndarray:
    """Unnormalised smooth compactly supported profile ``exp(-1/(1-(r/R)^2))``."""
    s = np.asarray(r, dtype=float) / radius
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def make_preset(name: str, grid: GridSpec, amplitude: float = 1.0, seed: int = 0,
                **options) -> Field:
    """Analytic test fields.

    ``bump`` accepts ``radius`` (default ``L/8``) and ``center`` (default the
    box centre); its grid integral equals ``amplitude``.  ``random_divfree``
    accepts ``k_peak`` (lattice units, default 3) and is scaled so that its
    largest pointwise magnitude equals ``amplitude``.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESETS}")
    xt = [2 * np.pi * x / grid.length for x in grid.coordinates()]

    if name == "taylor_green_2d":
        if grid.d != 2:
            raise ValueError("taylor_green_2d needs d = 2")
        u1 = np.sin(xt[0]) * np.cos(xt[1])
        u2 = -np.cos(xt[0]) * np.sin(xt[1])
        return Field(grid, amplitude * np.stack([u1, u2]))

    if name == "abc_beltrami_3d":
        if grid.d != 3:
            raise ValueError("abc_beltrami_3d needs d = 3")
        x1, x2, x3 = (np.broadcast_to(x, grid.shape) for x in xt)
        return Field(grid, amplitude * np.stack([
            np.sin(x3) + np.cos(x2),
            np.sin(x1) + np.cos(x3),
            np.sin(x2) + np.cos(x1),
        ]))

    if name == "gradient_field":
        # phi = sum_j (sin x_j + cos(2 x_j)/2) + cos(x_1 + x_2)
        c = 2 * np.pi / grid.length
        comps = []
        for j in range(grid.d):
            g = np.cos(xt[j]) - np.sin(2 * xt[j])
            if grid.d >= 2 and j < 2:
                g = g - np.sin(xt[0] + xt[1])
            comps.append(np.broadcast_to(c * g, grid.shape))
        return Field(grid, amplitude * np.stack(comps))

    if name == "bump":
        radius = options.get("radius", grid.length / 8)
        center = np.broadcast_to(np.asarray(options.get("center", grid.length / 2), float), (grid.d,))
        r2 = sum((x - c0) ** 2 for x, c0 in zip(grid.coordinates(), center))
        prof = np.broadcast_to(bump_profile(np.sqrt(r2), radius), grid.shape)
        mass = prof.sum() * grid.cell_volume
        if mass == 0:
            raise ValueError("bump radius is below the grid resolution")
        return Field(grid, amplitude * prof / mass)

    # random_divfree
    if grid.d < 2:
        raise ValueError("random_divfree needs d >= 2")
    from .operators import leray_project  # local import: operators depends on grid

    k_peak = options.get("k_peak", 3.0)
    noise = 2.0 * splitmix64_uniform(seed, grid.d * grid.size) - 1.0
    F = forward_transform(Field(grid, noise.reshape((grid.d,) + grid.shape)))
    kint2 = sum(np.broadcast_to(k, grid.shape).astype(float) ** 2 for k in grid.mode_numbers)
    envelope = np.exp(-kint2 / (2.0 * k_peak**2)) * grid.dealias_mask
    envelope.flat[0] = 0.0
    F = leray_project(SpectralField(grid, F.coeffs * envelope))
    u = inverse_transform(F)
    peak = float(np.max(u.magnitude()))
    return Field(grid, amplitude * u.data / peak)
