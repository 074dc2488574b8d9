"""Charge, energy, and gradient functionals for the boosted Hartree model.

The conserved energy in the frame travelling at velocity v is

    E_v(psi) = 1/2 <psi, (sqrt(-Delta+m^2) - m) psi>
             + i/2 <psi, (v.grad) psi>
             - 1/4 integral (|x|^-1 * |psi|^2) |psi|^2 dx,

with charge N(psi) = integral |psi|^2 dx.  All quadratic forms are lattice
sums with the grid measure, so Plancherel makes position and Fourier
evaluations agree to roundoff.  The attractive Coulomb self-interaction is
evaluated through the truncated-kernel multiplier of
:func:`bosonstar.spectral.coulomb_symbol`.

Gradient convention: delta E_v = Re <grad, delta psi>, which makes the
Euler-Lagrange equation of the constrained minimization read
grad = -mu * psi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    ComplexField,
    GridSpec,
    coulomb_symbol,
    fourier_values,
    free_symbol,
    free_symbol_minimum,
    position_values,
    to_fourier,
)

__all__ = [
    "PhysicalParams",
    "EnergyReport",
    "charge",
    "hartree_potential",
    "boosted_energy",
    "nonrelativistic_energy",
    "sobolev_half_norm",
    "energy_gradient",
    "massless_free_form",
    "density_centroid",
]


@dataclass
class PhysicalParams:
    """Mass m >= 0 and travelling-frame velocity v with |v| < 1."""

    m: float
    v: np.ndarray

    def __post_init__(self):
        self.m = float(self.m)
        if not np.isfinite(self.m) or self.m < 0.0:
            raise ValueError(f"mass must be >= 0, got {self.m}")
        v = np.asarray(self.v, dtype=np.float64).reshape(3)
        if not float(np.linalg.norm(v)) < 1.0:
            raise ValueError("|v| must be < 1")
        self.v = v

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))

    @property
    def lorentz_factor_inv(self) -> float:
        """sqrt(1 - v^2)."""
        return float(np.sqrt(1.0 - self.speed**2))

    @property
    def free_bottom(self) -> float:
        """Infimum of the free symbol, (sqrt(1-v^2) - 1) m <= 0."""
        return free_symbol_minimum(self.m, self.v)

    @property
    def multiplier_bound(self) -> float:
        """Strict lower bound (1 - sqrt(1-v^2)) m for the Lagrange multiplier."""
        return -self.free_bottom


@dataclass
class EnergyReport:
    """Scalar functionals of a field at fixed physical parameters.

    kinetic is the rest-frame form <psi, (sqrt(-Delta+m^2)-m) psi>, boost is
    i <psi, (v.grad) psi>, potential the Hartree self-interaction
    integral (|x|^-1 * |psi|^2)|psi|^2.  energy = kinetic/2 - potential/4 and
    energy_boosted = energy + boost/2.  sobolev_half is the squared H^{1/2}
    norm sum (1+|k|^2)^{1/2} |psihat|^2 dk^3.
    """

    charge: float
    kinetic: float
    boost: float
    potential: float
    energy: float
    energy_boosted: float
    sobolev_half: float

    def as_dict(self) -> dict:
        return {
            "charge": self.charge,
            "kinetic": self.kinetic,
            "boost": self.boost,
            "potential": self.potential,
            "energy": self.energy,
            "energy_boosted": self.energy_boosted,
            "sobolev_half": self.sobolev_half,
        }


def charge(f: ComplexField) -> float:
    """Total charge integral |psi|^2, computed in the field's own space."""
    if f.space == "position":
        return float(np.vdot(f.values, f.values).real * f.grid.cell_volume)
    return float(np.vdot(f.values, f.values).real * f.grid.fourier_weight)


def _density(vals: np.ndarray) -> np.ndarray:
    return (vals.real**2 + vals.imag**2).astype(np.float64)


def _potential_values(grid: GridSpec, rho: np.ndarray, wsym: np.ndarray) -> np.ndarray:
    """Position-space Hartree potential of a real density (raw arrays)."""
    rho_hat = fourier_values(grid, rho.astype(np.complex128))
    phi = position_values(grid, wsym * rho_hat)
    return phi.real


def hartree_potential(f: ComplexField, r_cut: float | None = None) -> ComplexField:
    """Potential (truncated |x|^-1 kernel) * |psi|^2, in position space."""
    pos = f if f.space == "position" else _as_position(f)
    wsym = coulomb_symbol(f.grid, r_cut).symbol
    phi = _potential_values(f.grid, _density(pos.values), wsym)
    return ComplexField(f.grid, phi.astype(np.complex128), "position")


def _as_position(f: ComplexField) -> ComplexField:
    from .spectral import to_position

    return to_position(f)


def _form(grid: GridSpec, fhat: np.ndarray, sym: np.ndarray) -> float:
    """Quadratic form sum sym(k) |fhat(k)|^2 dk^3 (sym real)."""
    mag2 = fhat.real**2 + fhat.imag**2
    return float(np.sum(sym * mag2) * grid.fourier_weight)


def boosted_energy(
    f: ComplexField, params: PhysicalParams, r_cut: float | None = None
) -> EnergyReport:
    """Evaluate all energy functionals of the field at the given parameters."""
    g = f.grid
    pos = _as_position(f)
    fhat = to_fourier(pos).values

    m = params.m
    kin_sym = np.sqrt(g.k_squared + m * m) - m
    kin_sym[0, 0, 0] = 0.0
    kinetic = _form(g, fhat, kin_sym)

    kb = g.k_axis_odd
    v = params.v
    boost_sym = -(
        v[0] * kb[:, None, None] + v[1] * kb[None, :, None] + v[2] * kb[None, None, :]
    )
    boost = _form(g, fhat, boost_sym)

    rho = _density(pos.values)
    wsym = coulomb_symbol(g, r_cut).symbol
    phi = _potential_values(g, rho, wsym)
    potential = float(np.sum(phi * rho) * g.cell_volume)

    n = float(np.sum(rho) * g.cell_volume)
    energy = 0.5 * kinetic - 0.25 * potential
    sob = _form(g, fhat, np.sqrt(1.0 + g.k_squared))
    return EnergyReport(
        charge=n,
        kinetic=kinetic,
        boost=boost,
        potential=potential,
        energy=energy,
        energy_boosted=energy + 0.5 * boost,
        sobolev_half=sob,
    )


def nonrelativistic_energy(f: ComplexField, params: PhysicalParams) -> float:
    """Effective-mass energy sqrt(1-v^2)/(4m) int |grad psi|^2 - potential/4.

    Used as a variational upper-bound ingredient; strictly negative at its
    optimal width for any charge.
    """
    if params.m <= 0.0:
        raise ValueError("nonrelativistic energy requires m > 0")
    g = f.grid
    pos = _as_position(f)
    fhat = to_fourier(pos).values
    grad2 = _form(g, fhat, g.k_squared)
    rho = _density(pos.values)
    wsym = coulomb_symbol(g).symbol
    phi = _potential_values(g, rho, wsym)
    potential = float(np.sum(phi * rho) * g.cell_volume)
    return params.lorentz_factor_inv / (4.0 * params.m) * grad2 - 0.25 * potential


def sobolev_half_norm(f: ComplexField) -> float:
    """Squared H^{1/2} norm: sum (1 + |k|^2)^{1/2} |fhat|^2 dk^3."""
    g = f.grid
    fhat = to_fourier(f).values
    return _form(g, fhat, np.sqrt(1.0 + g.k_squared))


def massless_free_form(f: ComplexField, v) -> float:
    """Form <psi, (sqrt(-Delta) + i v.grad) psi> = sum (|k| - v.k)|fhat|^2 dk^3.

    Nonnegative: |k| - v.k >= (1 - |v|)|k| for |v| < 1.
    """
    g = f.grid
    fhat = to_fourier(f).values
    v = np.asarray(v, dtype=np.float64).reshape(3)
    kb = g.k_axis_odd
    sym = np.sqrt(g.k_squared) - (
        v[0] * kb[:, None, None] + v[1] * kb[None, :, None] + v[2] * kb[None, None, :]
    )
    return _form(g, fhat, sym)


def density_centroid(f: ComplexField) -> np.ndarray:
    """Periodic-aware center of the density |psi|^2.

    Uses the circular mean per axis: the angle of sum rho(x) exp(2 pi i x/L)
    mapped back to [-L/2, L/2).  Well defined for localized densities; for a
    near-uniform density the resultant is tiny and the value is arbitrary
    but harmless.
    """
    pos = _as_position(f)
    g = f.grid
    rho = _density(pos.values)
    ang = 2.0 * np.pi * g.x_axis / g.length
    w = np.exp(1j * ang)
    out = np.empty(3)
    for axis, shape in enumerate(
        ((-1, 1, 1), (1, -1, 1), (1, 1, -1))
    ):
        z = np.sum(rho * w.reshape(shape))
        out[axis] = np.angle(z) * g.length / (2.0 * np.pi)
    return out


def energy_gradient(
    f: ComplexField, params: PhysicalParams, r_cut: float | None = None
) -> ComplexField:
    """Unconstrained gradient of E_v: (H0 - Phi) psi with H0 the free operator.

    delta E_v(psi)[h] = Re <grad, h> for real step sizes; on a constrained
    minimizer grad = -mu psi.
    """
    g = f.grid
    pos = _as_position(f)
    fhat = to_fourier(pos).values
    fsym = free_symbol(g, params.m, params.v).symbol
    h0psi = position_values(g, fsym * fhat)
    rho = _density(pos.values)
    wsym = coulomb_symbol(g, r_cut).symbol
    phi = _potential_values(g, rho, wsym)
    return ComplexField(g, h0psi - phi * pos.values, "position")
