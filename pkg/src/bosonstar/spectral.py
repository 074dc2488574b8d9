"""Periodic Fourier grids, complex fields, and spectral multipliers.

Conventions
-----------
The cubic box is [-L/2, L/2)^3 sampled on an n^3 lattice (n a power of two),
x_i = -L/2 + i*dx with dx = L/n.  The Fourier lattice is k_j = 2*pi*j/L with
integer j in [-n/2, n/2).  The discrete transform approximates the unitary
continuum transform

    fhat(k) = (2*pi)^(-3/2) * integral f(x) exp(-i k.x) dx,

i.e. to_fourier multiplies the raw FFT by dx^3 (2*pi)^(-3/2) and a parity
phase (-1)^(jx+jy+jz) accounting for the box origin at -L/2.  With this
normalization Plancherel holds on the lattice exactly:

    sum |f(x)|^2 dx^3 = sum |fhat(k)|^2 dk^3,    dk = 2*pi/L,

so quadratic functionals evaluated in either space approximate their
continuum integrals directly.

Multipliers act diagonally in Fourier space.  Odd symbols (the boost v.k)
are zeroed on Nyquist rows where the lattice has no -k partner, which keeps
them exactly odd and keeps compositions with even symbols conjugate
symmetric.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as _fft

__all__ = [
    "GridSpec",
    "ComplexField",
    "SpectralMultiplier",
    "to_fourier",
    "to_position",
    "apply_multiplier",
    "kinetic_symbol",
    "boost_symbol",
    "free_symbol",
    "coulomb_symbol",
    "resolvent_symbol",
    "free_symbol_minimum",
    "shift_field",
    "gaussian_field",
    "random_band_limited",
]

_TWO_PI_32 = (2.0 * np.pi) ** 1.5

# Single worker: the sandbox is single-core and serial transforms are
# bitwise reproducible by construction.
_WORKERS = int(os.environ.get("BOSONSTAR_FFT_WORKERS", "1"))


def _fftn(a):
    return _fft.fftn(a, workers=_WORKERS)


def _ifftn(a):
    return _fft.ifftn(a, workers=_WORKERS)


@dataclass(eq=True)
class GridSpec:
    """Cubic periodic grid: n lattice points per axis, box edge length."""

    n: int
    length: float

    def __post_init__(self):
        n = int(self.n)
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"grid n must be a power of two >= 8, got {self.n}")
        self.n = n
        self.length = float(self.length)
        if not np.isfinite(self.length) or self.length <= 0.0:
            raise ValueError(f"box length must be positive, got {self.length}")

    # -- lattice geometry ------------------------------------------------

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.length

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def fourier_weight(self) -> float:
        return self.dk**3

    @property
    def nyquist(self) -> float:
        """Largest axis wavenumber magnitude, pi/dx."""
        return np.pi / self.dx

    @cached_property
    def x_axis(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @cached_property
    def k_axis(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_axis_odd(self) -> np.ndarray:
        """k axis for odd symbols: the unpaired Nyquist entry is zeroed."""
        k = self.k_axis.copy()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.k_axis, self.k_axis, self.k_axis
        return (
            kx[:, None, None] ** 2 + ky[None, :, None] ** 2 + kz[None, None, :] ** 2
        )

    @cached_property
    def radius(self) -> np.ndarray:
        """|x| on the position lattice."""
        x = self.x_axis
        return np.sqrt(
            x[:, None, None] ** 2 + x[None, :, None] ** 2 + x[None, None, :] ** 2
        )

    @cached_property
    def dft_parity(self) -> np.ndarray:
        """(-1)^(jx+jy+jz) on the Fourier lattice (box origin phase)."""
        j = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        s = np.where(j % 2 == 0, 1.0, -1.0)
        return s[:, None, None] * s[None, :, None] * s[None, None, :]

    def index_mesh(self):
        j = np.fft.fftfreq(self.n, d=1.0 / self.n).astype(np.int64)
        return np.meshgrid(j, j, j, indexing="ij")


_SPACES = ("position", "fourier")


@dataclass
class ComplexField:
    """Complex scalar field on a GridSpec, in position or Fourier space.

    values is a C-ordered (n, n, n) complex128 array, z fastest.
    """

    grid: GridSpec
    values: np.ndarray
    space: str = "position"

    def __post_init__(self):
        if self.space not in _SPACES:
            raise ValueError(f"space must be one of {_SPACES}, got {self.space!r}")
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.complex128))
        shape = (self.grid.n,) * 3
        if v.shape != shape:
            raise ValueError(f"field shape {v.shape} does not match grid {shape}")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ValueError("field contains non-finite entries")
        self.values = v

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), self.space)


def to_fourier(f: ComplexField) -> ComplexField:
    """Forward transform; identity if the field is already spectral."""
    if f.space == "fourier":
        return f
    g = f.grid
    coeff = g.cell_volume / _TWO_PI_32
    vals = _fftn(f.values)
    vals *= g.dft_parity
    vals *= coeff
    return ComplexField(g, vals, "fourier")


def to_position(f: ComplexField) -> ComplexField:
    """Inverse transform; identity if the field is already in position space."""
    if f.space == "position":
        return f
    g = f.grid
    coeff = _TWO_PI_32 / g.cell_volume
    vals = _ifftn(f.values * g.dft_parity)
    vals *= coeff
    return ComplexField(g, vals, "position")


# Raw-array transform helpers for inner loops (no ComplexField validation).


def fourier_values(grid: GridSpec, pos_vals: np.ndarray) -> np.ndarray:
    out = _fftn(pos_vals)
    out *= grid.dft_parity
    out *= grid.cell_volume / _TWO_PI_32
    return out


def position_values(grid: GridSpec, four_vals: np.ndarray) -> np.ndarray:
    out = _ifftn(four_vals * grid.dft_parity)
    out *= _TWO_PI_32 / grid.cell_volume
    return out


@dataclass
class SpectralMultiplier:
    """Fourier multiplier: pointwise symbol on the k lattice."""

    grid: GridSpec
    symbol: np.ndarray
    label: str = ""

    def __post_init__(self):
        sym = np.asarray(self.symbol)
        if sym.dtype not in (np.float64, np.complex128):
            sym = sym.astype(np.complex128)
        shape = (self.grid.n,) * 3
        if sym.shape != shape:
            raise ValueError(f"symbol shape {sym.shape} does not match grid {shape}")
        if not np.all(np.isfinite(sym.view(np.float64))):
            raise ValueError(f"symbol {self.label!r} has non-finite entries")
        self.symbol = sym


def apply_multiplier(mult: SpectralMultiplier, f: ComplexField) -> ComplexField:
    """Apply the multiplier; the result is returned in the input's space."""
    if mult.grid != f.grid:
        raise ValueError("multiplier and field live on different grids")
    if f.space == "fourier":
        return ComplexField(f.grid, mult.symbol * f.values, "fourier")
    fhat = to_fourier(f)
    out = ComplexField(f.grid, mult.symbol * fhat.values, "fourier")
    return to_position(out)


def _check_mass(m: float) -> float:
    m = float(m)
    if not np.isfinite(m) or m < 0.0:
        raise ValueError(f"mass must be >= 0, got {m}")
    return m


def _check_velocity(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(3)
    speed = float(np.linalg.norm(v))
    if not speed < 1.0:
        raise ValueError(f"speed must satisfy |v| < 1, got |v| = {speed}")
    return v


def free_symbol_minimum(m: float, v) -> float:
    """Infimum of sqrt(k^2+m^2) - m - v.k over k in R^3.

    Equals (sqrt(1-v^2) - 1) m, attained at k = (m|v|/sqrt(1-v^2)) vhat.
    Nonpositive; zero only for v = 0 or m = 0.
    """
    m = _check_mass(m)
    v = _check_velocity(v)
    speed2 = float(v @ v)
    return (np.sqrt(1.0 - speed2) - 1.0) * m


def kinetic_symbol(grid: GridSpec, m: float) -> SpectralMultiplier:
    """Relativistic kinetic symbol sqrt(k^2 + m^2) - m (rest energy removed)."""
    m = _check_mass(m)
    sym = np.sqrt(grid.k_squared + m * m) - m
    sym[0, 0, 0] = 0.0  # exact at k = 0
    return SpectralMultiplier(grid, sym, f"kinetic(m={m})")


def boost_symbol(grid: GridSpec, v) -> SpectralMultiplier:
    """Boost symbol -v.k, the Fourier representation of i v.grad.

    Odd in k; Nyquist rows are zeroed so the symbol is exactly odd on the
    lattice.
    """
    v = _check_velocity(v)
    kb = grid.k_axis_odd
    sym = -(
        v[0] * kb[:, None, None] + v[1] * kb[None, :, None] + v[2] * kb[None, None, :]
    )
    return SpectralMultiplier(grid, sym, f"boost(v={tuple(v)})")


def free_symbol(grid: GridSpec, m: float, v) -> SpectralMultiplier:
    """Full free symbol sqrt(k^2+m^2) - m - v.k of the boosted operator."""
    kin = kinetic_symbol(grid, m)
    bst = boost_symbol(grid, v)
    return SpectralMultiplier(
        grid, kin.symbol + bst.symbol, f"free(m={m}, v={tuple(np.ravel(v))})"
    )


def coulomb_symbol(grid: GridSpec, r_cut: float | None = None) -> SpectralMultiplier:
    """Symbol of convolution with the truncated Coulomb kernel.

    The kernel is 1/|x| for |x| < r_cut and 0 beyond; its transform is
    4*pi*(1 - cos(|k| r_cut))/|k|^2 with limit 2*pi*r_cut^2 at k = 0.
    The default r_cut = L/2 tiles the box exactly, so the periodic
    convolution reproduces the free-space one for densities supported in a
    ball of radius r_cut/2.
    """
    if r_cut is None:
        r_cut = 0.5 * grid.length
    r_cut = float(r_cut)
    if not (0.0 < r_cut <= 0.5 * grid.length):
        raise ValueError(f"r_cut must lie in (0, L/2], got {r_cut}")
    k2 = grid.k_squared
    kmag = np.sqrt(k2)
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = 4.0 * np.pi * (1.0 - np.cos(kmag * r_cut)) / k2
    sym[0, 0, 0] = 2.0 * np.pi * r_cut**2
    return SpectralMultiplier(grid, sym, f"coulomb(r_cut={r_cut})")


def resolvent_symbol(
    grid: GridSpec, m: float, v, shift: float
) -> SpectralMultiplier:
    """Symbol 1/(sqrt(k^2+m^2) - m - v.k + shift).

    Requires shift > -free_symbol_minimum(m, v) so the denominator is
    positive on the whole lattice.
    """
    shift = float(shift)
    bottom = free_symbol_minimum(m, v)
    if not shift > -bottom:
        raise ValueError(
            f"resolvent shift {shift} must exceed {-bottom} (free symbol bottom)"
        )
    free = free_symbol(grid, m, v)
    denom = free.symbol + shift
    if denom.min() <= 0.0:
        raise ValueError("resolvent denominator not positive on the lattice")
    return SpectralMultiplier(
        grid, 1.0 / denom, f"resolvent(m={m}, v={tuple(np.ravel(v))}, shift={shift})"
    )


def shift_field(f: ComplexField, a) -> ComplexField:
    """Translate: f(x) -> f(x - a) for a real shift vector (sub-lattice ok).

    Implemented by the Fourier phase exp(-i k.a) with Nyquist rows left
    unrotated (keeps real fields real).
    """
    a = np.asarray(a, dtype=np.float64).reshape(3)
    g = f.grid
    kb = g.k_axis_odd
    phase = np.exp(
        -1j
        * (
            a[0] * kb[:, None, None]
            + a[1] * kb[None, :, None]
            + a[2] * kb[None, None, :]
        )
    )
    fhat = to_fourier(f)
    out = ComplexField(g, fhat.values * phase, "fourier")
    return to_position(out) if f.space == "position" else out


def dilate_field(f: ComplexField, factor: int) -> ComplexField:
    """L^2-normalized dilation: f(x) -> factor^{3/2} f(factor x) by lattice lookup.

    For integer factor the stretched coordinate lands exactly on lattice
    points; samples falling outside the box are set to zero rather than
    wrapped, so the result is faithful only for fields that are small near
    the boundary.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("dilation factor must be a positive integer")
    g = f.grid
    vals = f.values if f.space == "position" else to_position(f).values
    n = g.n
    idx = np.arange(n)
    src = factor * idx - (factor - 1) * (n // 2)
    inside = (src >= 0) & (src < n)
    out = np.zeros((n, n, n), dtype=np.complex128)
    sx = src[inside]
    out[np.ix_(inside, inside, inside)] = vals[np.ix_(sx, sx, sx)]
    return ComplexField(g, factor**1.5 * out, "position")


def gaussian_field(
    grid: GridSpec, width: float, amplitude: float = 1.0
) -> ComplexField:
    """Radial Gaussian amplitude * exp(-|x|^2 / (2 width^2)) centered at 0."""
    width = float(width)
    if width <= 0.0:
        raise ValueError("width must be positive")
    vals = amplitude * np.exp(-0.5 * (grid.radius / width) ** 2)
    return ComplexField(grid, vals.astype(np.complex128), "position")


def random_band_limited(
    grid: GridSpec, k_max: float, rng: np.random.Generator, localized: bool = False
) -> ComplexField:
    """Random complex field with spectrum supported in |k| <= k_max.

    Coefficients are iid standard complex Gaussians inside the ball, zero
    outside.  With localized=True the field is multiplied by a Gaussian
    envelope of width L/8 and band-limited again, giving a field that is
    both spatially concentrated and spectrally compact.
    """
    if not 0.0 < k_max <= np.sqrt(3.0) * grid.nyquist:
        raise ValueError("k_max outside the lattice range")
    n = grid.n
    mask = grid.k_squared <= k_max**2
    coeffs = rng.standard_normal((n, n, n)) + 1j * rng.standard_normal((n, n, n))
    coeffs[~mask] = 0.0
    f = to_position(ComplexField(grid, coeffs, "fourier"))
    if localized:
        env = np.exp(-0.5 * (grid.radius / (grid.length / 8.0)) ** 2)
        f = ComplexField(grid, f.values * env, "position")
        fhat = to_fourier(f)
        vals = fhat.values
        vals[~mask] = 0.0
        f = to_position(ComplexField(grid, vals, "fourier"))
    return f
