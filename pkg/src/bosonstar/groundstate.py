"""Boosted ground states: constrained minimization of E_v at fixed charge.

Two independent solvers are provided.

solve_gradient_flow
    Projected, preconditioned gradient descent on E_v restricted to the
    charge sphere.  The descent direction is the plain E_v gradient
    preconditioned by (free symbol + shift)^-1, followed by renormalization
    to the target charge and a backtracking line search on E_v.

solve_fixed_point
    Damped resolvent iteration of the regularized Euler-Lagrange fixed
    point  Q = (H0 + lam)^-1 [Phi_Q Q + (lam - mu) Q],  renormalized each
    sweep, with the multiplier re-estimated from the Rayleigh quotient.

Both terminate on the relative Euler-Lagrange residual

    || H0 Q - Phi_Q Q + mu Q ||_2 / || Q ||_{H^{1/2}}

and abort with a supercritical diagnostic if the energy dives below the
variational floor -m N / 2 (which cannot happen for subcritical charge).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .functionals import (
    EnergyReport,
    PhysicalParams,
    boosted_energy,
    charge as charge_of,
    density_centroid,
    energy_gradient,
    sobolev_half_norm,
)
from .spectral import (
    ComplexField,
    GridSpec,
    coulomb_symbol,
    fourier_values,
    free_symbol,
    gaussian_field,
    position_values,
    resolvent_symbol,
    shift_field,
    to_position,
)

__all__ = [
    "GroundStateProblem",
    "GroundStateResult",
    "SupercriticalError",
    "init_boosted_gaussian",
    "solve_gradient_flow",
    "solve_fixed_point",
    "lagrange_multiplier",
    "euler_lagrange_residual",
    "canonicalize",
    "renormalize",
]


class SupercriticalError(RuntimeError):
    """Energy fell below the subcritical floor: no minimizer at this charge."""

    def __init__(self, iteration: int, energy: float, floor: float):
        super().__init__(
            f"energy {energy:.6g} fell below the subcritical floor {floor:.6g} "
            f"at iteration {iteration}; charge exceeds the critical charge"
        )
        self.iteration = iteration
        self.energy = energy
        self.floor = floor


@dataclass
class GroundStateProblem:
    """Target of the constrained minimization."""

    params: PhysicalParams
    charge: float
    grid: GridSpec
    tol: float = 1e-8
    max_iter: int = 6000
    init: ComplexField | None = None
    init_width: float | None = None
    r_cut: float | None = None

    def __post_init__(self):
        self.charge = float(self.charge)
        if not np.isfinite(self.charge) or self.charge <= 0.0:
            raise ValueError(f"target charge must be positive, got {self.charge}")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class GroundStateResult:
    field: ComplexField
    mu: float
    report: EnergyReport
    residual: float
    iterations: int
    converged: bool
    method: str
    params: PhysicalParams
    target_charge: float
    termination: str = "converged"
    history: np.ndarray = dataclass_field(
        default_factory=lambda: np.zeros((0, 4))
    )  # columns: iteration, energy_boosted, residual, mu


def renormalize(f: ComplexField, target: float) -> ComplexField:
    """Rescale amplitude so the charge equals the target exactly."""
    n = charge_of(f)
    if n <= 0.0:
        raise ValueError("cannot renormalize a zero field")
    return ComplexField(f.grid, f.values * np.sqrt(target / n), f.space)


def init_boosted_gaussian(problem: GroundStateProblem) -> ComplexField:
    """Gaussian of the target charge, modulated by the travelling phase.

    The phase wavevector is lam_star * v with lam_star = m / sqrt(1 - v^2),
    the plane-wave modulation that minimizes the free energy of a boosted
    wave packet.  The default width is the effective-mass soliton scale
    3.76 sqrt(1-v^2)/(m N) clipped to the resolvable range.
    """
    g = problem.grid
    p = problem.params
    width = problem.init_width
    if width is None:
        if p.m > 0.0:
            width = 3.76 * p.lorentz_factor_inv / (p.m * problem.charge)
        else:
            width = g.length / 10.0
        width = float(np.clip(width, 2.5 * g.dx, g.length / 6.0))
    width = float(width)
    if width < 2.0 * g.dx:
        raise ValueError(
            f"init width {width} under-resolved on dx = {g.dx} (need >= 2 dx)"
        )
    base = gaussian_field(g, width)
    if p.m > 0.0 and p.speed > 0.0:
        lam_star = p.m / p.lorentz_factor_inv
        kvec = lam_star * p.v
        x = g.x_axis
        phase = np.exp(
            1j
            * (
                kvec[0] * x[:, None, None]
                + kvec[1] * x[None, :, None]
                + kvec[2] * x[None, None, :]
            )
        )
        base = ComplexField(g, base.values * phase, "position")
    return renormalize(base, problem.charge)


# ----------------------------------------------------------------------
# shared solver plumbing (raw arrays; ComplexField validation at the edges)


class _Engine:
    def __init__(self, problem: GroundStateProblem):
        self.problem = problem
        g = problem.grid
        p = problem.params
        self.grid = g
        self.fsym = free_symbol(g, p.m, p.v).symbol
        self.wsym = coulomb_symbol(g, problem.r_cut).symbol
        self.sobw = np.sqrt(1.0 + g.k_squared)
        self.dx3 = g.cell_volume
        self.dk3 = g.fourier_weight
        self.floor = -0.5 * p.m * problem.charge * (1.0 + 1e-3)

    def evaluate(self, psi: np.ndarray) -> dict:
        """Transforms, potential, and boosted energy of a (normalized) field."""
        g = self.grid
        psihat = fourier_values(g, psi)
        mag2 = psihat.real**2 + psihat.imag**2
        quad = float(np.sum(self.fsym * mag2) * self.dk3)
        sob = float(np.sum(self.sobw * mag2) * self.dk3)
        rho = psi.real**2 + psi.imag**2
        rhohat = fourier_values(g, rho.astype(np.complex128))
        phi = position_values(g, self.wsym * rhohat).real
        pot = float(np.sum(phi * rho) * self.dx3)
        return {
            "psi": psi,
            "psihat": psihat,
            "rho": rho,
            "phi": phi,
            "quad": quad,
            "pot": pot,
            "sob": sob,
            "ev": 0.5 * quad - 0.25 * pot,
        }

    def gradient(self, st: dict) -> np.ndarray:
        h0psi = position_values(self.grid, self.fsym * st["psihat"])
        return h0psi - st["phi"] * st["psi"]

    def mu_residual(self, st: dict, grad: np.ndarray) -> tuple[float, float]:
        n = self.problem.charge
        mu = -float(np.vdot(st["psi"], grad).real * self.dx3) / n
        r = grad + mu * st["psi"]
        rnorm = float(np.sqrt(np.vdot(r, r).real * self.dx3))
        return mu, rnorm / np.sqrt(st["sob"])

    def normalized(self, psi: np.ndarray) -> np.ndarray:
        n = float(np.vdot(psi, psi).real * self.dx3)
        return psi * np.sqrt(self.problem.charge / n)


def _finalize(
    engine: _Engine,
    psi: np.ndarray,
    iterations: int,
    converged: bool,
    method: str,
    termination: str,
    history: list,
) -> GroundStateResult:
    problem = engine.problem
    f = ComplexField(engine.grid, psi, "position")
    f = canonicalize(f)
    report = boosted_energy(f, problem.params, problem.r_cut)
    mu = lagrange_multiplier(f, problem.params, r_cut=problem.r_cut)
    residual = euler_lagrange_residual(f, problem.params, mu, r_cut=problem.r_cut)
    return GroundStateResult(
        field=f,
        mu=mu,
        report=report,
        residual=residual,
        iterations=iterations,
        converged=converged,
        method=method,
        params=problem.params,
        target_charge=problem.charge,
        termination=termination,
        history=np.asarray(history, dtype=np.float64).reshape(-1, 4),
    )


def solve_gradient_flow(problem: GroundStateProblem) -> GroundStateResult:
    """Preconditioned projected gradient descent on E_v at fixed charge."""
    engine = _Engine(problem)
    g = problem.grid

    # Preconditioner (free symbol + shift)^-1; unit shift unless the symbol
    # bottom makes that nearly singular.
    shift = 1.0
    fmin = float(engine.fsym.min())
    if fmin + shift < 0.5:
        shift = 0.5 - fmin
    pre = 1.0 / (engine.fsym + shift)

    init = problem.init if problem.init is not None else init_boosted_gaussian(problem)
    if init.grid != g:
        raise ValueError("init field lives on a different grid")
    psi = engine.normalized(np.ascontiguousarray(init.values, dtype=np.complex128))
    st = engine.evaluate(psi)

    history = []
    tau = 1.0
    slack = 1e-13
    for it in range(problem.max_iter):
        if st["ev"] < engine.floor:
            raise SupercriticalError(it, st["ev"], engine.floor)
        grad = engine.gradient(st)
        mu, residual = engine.mu_residual(st, grad)
        history.append((it, st["ev"], residual, mu))
        if residual <= problem.tol:
            return _finalize(
                engine, psi, it, True, "gradient_flow", "converged", history
            )
        # Precondition the sphere-projected gradient: grad + mu psi is
        # tangent to the charge sphere, so the line search below descends
        # whenever it is nonzero (the preconditioner is positive definite
        # and Re<grad + mu psi, psi> = 0 kills the radial cross term).
        tangent = grad + mu * psi
        direction = position_values(g, pre * fourier_values(g, tangent))

        accepted = False
        tau = min(tau * 1.3, 1.5)
        allow = st["ev"] + slack * (1.0 + abs(st["ev"]))
        for _ in range(12):
            trial = engine.normalized(psi - tau * direction)
            st_trial = engine.evaluate(trial)
            if st_trial["ev"] <= allow:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            # Roundoff plateau: no step of any size lowers the energy.
            return _finalize(
                engine, psi, it, False, "gradient_flow", "stalled", history
            )
        psi, st = trial, st_trial

    return _finalize(
        engine,
        psi,
        problem.max_iter,
        False,
        "gradient_flow",
        "max_iter",
        history,
    )


def solve_fixed_point(
    problem: GroundStateProblem, damping: float = 0.5
) -> GroundStateResult:
    """Damped resolvent fixed-point iteration for the Euler-Lagrange equation."""
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    engine = _Engine(problem)
    g = problem.grid
    p = problem.params

    shift = 1.0 - p.free_bottom  # margin 1 above the invertibility threshold
    res_sym = resolvent_symbol(g, p.m, p.v, shift).symbol

    init = problem.init if problem.init is not None else init_boosted_gaussian(problem)
    if init.grid != g:
        raise ValueError("init field lives on a different grid")
    psi = engine.normalized(np.ascontiguousarray(init.values, dtype=np.complex128))
    st = engine.evaluate(psi)
    grad = engine.gradient(st)
    mu, residual = engine.mu_residual(st, grad)

    history = []
    reductions = 0
    best_recent = residual
    since_best = 0
    for it in range(problem.max_iter):
        if st["ev"] < engine.floor:
            raise SupercriticalError(it, st["ev"], engine.floor)
        history.append((it, st["ev"], residual, mu))
        if residual <= problem.tol:
            return _finalize(
                engine, psi, it, True, "fixed_point", "converged", history
            )

        rhs = st["phi"] * psi + (shift - mu) * psi
        update = position_values(g, res_sym * fourier_values(g, rhs))
        psi = engine.normalized((1.0 - damping) * psi + damping * update)
        st = engine.evaluate(psi)
        grad = engine.gradient(st)
        mu, residual = engine.mu_residual(st, grad)

        # oscillation watch: residual not improving for a long stretch
        if residual < best_recent * (1.0 - 1e-3):
            best_recent = residual
            since_best = 0
        else:
            since_best += 1
        if since_best >= 60:
            reductions += 1
            since_best = 0
            best_recent = residual
            if reductions > 3:
                return _finalize(
                    engine, psi, it, False, "fixed_point", "oscillation", history
                )
            damping = max(damping * 0.5, 0.05)

    return _finalize(
        engine, psi, problem.max_iter, False, "fixed_point", "max_iter", history
    )


# ----------------------------------------------------------------------
# multiplier, residual, gauge fixing


def lagrange_multiplier(
    f: ComplexField,
    params: PhysicalParams,
    method: str = "rayleigh",
    r_cut: float | None = None,
) -> float:
    """Multiplier of the constrained problem, two independent routes.

    rayleigh:          mu = -<Q, (H0 - Phi_Q) Q> / N
    energy_identity:   mu = (P/2 - 2 E_v) / N

    The two coincide termwise on the lattice, so their agreement is a
    bookkeeping check rather than a numerical one.
    """
    if method == "rayleigh":
        grad = energy_gradient(f, params, r_cut)
        n = charge_of(f)
        return -float(np.vdot(f.values, grad.values).real * f.grid.cell_volume) / n
    if method == "energy_identity":
        rep = boosted_energy(f, params, r_cut)
        return (0.5 * rep.potential - 2.0 * rep.energy_boosted) / rep.charge
    raise ValueError(f"unknown method {method!r}")


def euler_lagrange_residual(
    f: ComplexField,
    params: PhysicalParams,
    mu: float | None = None,
    r_cut: float | None = None,
) -> float:
    """Relative residual || H0 Q - Phi Q + mu Q ||_2 / || Q ||_{H^{1/2}}."""
    grad = energy_gradient(f, params, r_cut)
    if mu is None:
        n = charge_of(f)
        mu = -float(np.vdot(f.values, grad.values).real * f.grid.cell_volume) / n
    r = grad.values + mu * f.values
    rnorm = float(np.sqrt(np.vdot(r, r).real * f.grid.cell_volume))
    return rnorm / np.sqrt(sobolev_half_norm(f))


def canonicalize(f: ComplexField) -> ComplexField:
    """Fix translation and phase gauge: centroid at the origin, sum real > 0.

    The translation is the circular-mean density centroid (sub-lattice,
    applied as a Fourier shift); the global phase makes sum Q real and
    positive.  For v = 0 ground states the result is real and positive up
    to solver residual.
    """
    pos = f if f.space == "position" else to_position(f)
    a = density_centroid(pos)
    shifted = shift_field(pos, -a) if np.any(a != 0.0) else pos
    s = np.sum(shifted.values)
    if abs(s) > 0.0:
        vals = shifted.values * (np.conj(s) / abs(s))
    else:
        vals = shifted.values
    return ComplexField(f.grid, vals, "position")
