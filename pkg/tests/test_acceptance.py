"""End-to-end verification at working scale: n = 64, L = 20, m = 1.

One test per numbered claim.  Each prints a single [PASS]/[FAIL] line with
the measured quantities next to the tolerance it is held to, so a full run
reads as a checklist.  The thresholds are the contract; nothing here is
tuned to the implementation beyond the stated grid.
"""

import math

import numpy as np
import pytest

from bosonstar import (
    ComplexField,
    EvolutionConfig,
    GridSpec,
    GroundStateProblem,
    PhysicalParams,
    best_constant,
    boosted_energy,
    canonicalize,
    centroid_velocity,
    charge,
    collapse_candidate,
    decay_fit,
    energy_curve,
    energy_gradient,
    evolve,
    gaussian_field,
    green_function_probe,
    mass_zero_scaling_defect,
    nonrelativistic_energy,
    orbit_distance,
    random_band_limited,
    renormalize,
    scaling_probe_field,
    solve_fixed_point,
    solve_gradient_flow,
    stability_experiment,
)

DESK = GridSpec(64, 20.0)
SPEEDS = {0.0: (0.0, 0.0, 0.0), 0.3: (0.3, 0.0, 0.0), 0.6: (0.6, 0.0, 0.0)}


def check(num: int, ok: bool, detail: str) -> None:
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def constants():
    """Sharp interpolation constants at the three speeds."""
    return {
        s: best_constant(DESK, v, tol=1e-8) for s, v in SPEEDS.items()
    }


@pytest.fixture(scope="module")
def states(constants):
    """Ground states at half the critical charge for each speed."""
    out = {}
    for s, v in SPEEDS.items():
        n_half = 0.5 * constants[s].critical_charge
        res = solve_gradient_flow(
            GroundStateProblem(
                params=PhysicalParams(1.0, v), charge=n_half, grid=DESK, tol=1e-8
            )
        )
        assert res.converged, f"ground state at speed {s} did not converge"
        out[s] = res
    return out


def test_criterion_01_sharp_constant_bounds(constants):
    bc = constants[0.0]
    big = best_constant(GridSpec(128, 40.0), (0.0, 0.0, 0.0), tol=1e-8)
    shift = abs(big.critical_charge - bc.critical_charge) / bc.critical_charge
    ok = (
        bc.converged
        and bc.critical_charge > 4.0 / math.pi
        and bc.constant < math.pi / 2.0
        and bc.residual <= 1e-6
        and shift <= 0.01
    )
    check(
        1,
        ok,
        f"threshold charge {bc.critical_charge:.6f} > 4/pi = {4/math.pi:.4f}, "
        f"constant {bc.constant:.6f} < pi/2 = {math.pi/2:.4f}, "
        f"residual {bc.residual:.2e} <= 1e-6, "
        f"box-doubling shift {shift:.3%} <= 1%",
    )


def test_criterion_02_boosted_constant_ordering(constants):
    s0 = constants[0.0].constant
    n0 = constants[0.0].critical_charge
    margins = {}
    for s in (0.3, 0.6):
        sv = constants[s].constant
        nv = constants[s].critical_charge
        margins[s] = min(
            sv - s0,
            s0 / (1.0 - s) - sv,
            n0 - nv,
            nv - (1.0 - s) * n0,
        )
    ok = all(m >= 1e-3 for m in margins.values())
    check(
        2,
        ok,
        "S_0 <= S_v <= S_0/(1-|v|) and (1-|v|) N_c(0) <= N_c(v) <= N_c(0); "
        f"worst slack v=0.3: {margins[0.3]:.4f}, v=0.6: {margins[0.6]:.4f} "
        "(both >= 1e-3)",
    )


def test_criterion_03_multiplier_bound(states):
    rows = []
    ok = True
    for s, res in states.items():
        bound = res.params.multiplier_bound
        ok = ok and res.converged and res.mu > bound
        rows.append(f"v={s}: mu={res.mu:.5f} > {bound:.5f} (margin {res.mu-bound:.5f})")
    check(3, ok, "; ".join(rows))


def test_criterion_04_energy_window(states):
    rows = []
    ok = True
    for s, res in states.items():
        p = res.params
        n_t = res.target_charge
        e = res.report.energy_boosted
        lower = -0.5 * p.m * n_t
        upper = 0.5 * p.free_bottom * n_t  # free_bottom <= 0
        widths = np.geomspace(0.8, 4.0, 12)
        gauss_bound = min(
            0.5 * p.free_bottom * n_t
            + nonrelativistic_energy(renormalize(gaussian_field(DESK, w), n_t), p)
            for w in widths
        )
        ok = ok and (lower <= e < upper) and (e <= gauss_bound)
        rows.append(
            f"v={s}: {lower:.4f} <= E={e:.4f} < {upper:.4f}, "
            f"Gaussian bound {gauss_bound:.4f}"
        )
    check(4, ok, "; ".join(rows))


def test_criterion_05_energy_curve_shape(constants):
    n_c = constants[0.0].critical_charge
    # Six samples inside [0.1, 0.9] N_c.  The top one stays at 0.85 N_c: on
    # this lattice the localized branch terminates between 0.885 and 0.892
    # N_c (the discrete Coulomb kernel is finite at the origin, so the
    # collapse funnel opens slightly below the critical charge; both solver
    # algorithms and 1%-step warm continuation agree on the bracket), and a
    # sample past that end has no minimizer to measure.
    samples = np.linspace(0.1, 0.85, 6) * n_c
    curve = energy_curve(DESK, PhysicalParams(1.0, SPEEDS[0.0]), samples, tol=1e-7)
    ok = (
        curve.truncated_at is None
        and curve.monotone_ok
        and curve.concave_ok
        and curve.subadditive_ok
        and bool(np.all(curve.slopes < 0.0))
        and bool(np.all(curve.second_differences < 0.0))
    )
    check(
        5,
        ok,
        f"6 samples in [{samples[0]:.3f}, {samples[-1]:.3f}]: "
        f"slopes in [{curve.slopes.min():.4f}, {curve.slopes.max():.4f}] all < 0, "
        f"second differences max {curve.second_differences.max():.4f} < 0, "
        f"subadditivity {len(curve.subadditivity)} spot checks pass",
    )


def test_criterion_06_decay_rates(states):
    fits = {s: decay_fit(states[s]) for s in (0.0, 0.3)}
    g_rest = green_function_probe(DESK, PhysicalParams(1.0, SPEEDS[0.0]), mu=1.0)
    g_fast = green_function_probe(DESK, PhysicalParams(1.0, SPEEDS[0.6]), mu=0.3)
    ok = (
        all(f.passed for f in fits.values())
        and g_rest.passed
        and g_rest.rate >= 0.8
        and g_fast.passed
        and g_fast.rate >= 0.1
    )
    check(
        6,
        ok,
        f"state tails v=0: rate {fits[0.0].rate:.3f} >= {0.5*fits[0.0].rate_bound:.3f}, "
        f"v=0.3: rate {fits[0.3].rate:.3f} >= {0.5*fits[0.3].rate_bound:.3f}; "
        f"kernel (v=0, mu=1): rate {g_rest.rate:.3f} >= 0.8; "
        f"kernel (v=0.6, mu=0.3): rate {g_fast.rate:.3f} >= 0.1",
    )


def test_criterion_07_positivity(states):
    q = canonicalize(states[0.0].field)
    min_re = float(np.min(q.values.real))
    im_res = float(
        np.linalg.norm(q.values.imag) / np.linalg.norm(q.values.real)
    )
    ok = min_re > 0.0 and im_res <= 1e-6
    check(
        7,
        ok,
        f"canonicalized rest state: min Re Q = {min_re:.3e} > 0, "
        f"relative imaginary residue {im_res:.2e} <= 1e-6",
    )


def test_criterion_08_gradient_vs_finite_differences():
    p = PhysicalParams(1.0, SPEEDS[0.3])
    worst = 0.0
    eps = 1e-5
    for seed in range(10):
        rng = np.random.default_rng(seed)
        f = renormalize(random_band_limited(DESK, 2.0, rng, localized=True), 1.0)
        h = renormalize(random_band_limited(DESK, 2.0, rng, localized=True), 1.0)
        grad = energy_gradient(f, p)
        predicted = float(
            np.sum((np.conj(grad.values) * h.values).real) * DESK.cell_volume
        )
        e_plus = boosted_energy(
            ComplexField(DESK, f.values + eps * h.values, "position"), p
        ).energy_boosted
        e_minus = boosted_energy(
            ComplexField(DESK, f.values - eps * h.values, "position"), p
        ).energy_boosted
        fd = (e_plus - e_minus) / (2.0 * eps)
        worst = max(worst, abs(predicted - fd) / abs(fd))
    ok = worst <= 1e-6
    check(
        8,
        ok,
        f"10 random band-limited fields: max relative gradient error "
        f"{worst:.2e} <= 1e-6",
    )


def test_criterion_09_conservation_and_convergence_order():
    rng = np.random.default_rng(2024)
    f = renormalize(random_band_limited(DESK, 2.0, rng, localized=True), 0.5)
    p = PhysicalParams(1.0, SPEEDS[0.0])
    drifts = {}
    charge_drift = None
    for dt in (5e-3, 2.5e-3):
        trace = evolve(
            f, EvolutionConfig(dt=dt, t_end=10.0, params=p, record_every=100)
        )
        assert trace.termination == "completed"
        n0, e0 = trace.charge[0], trace.energy[0]
        if dt == 5e-3:
            charge_drift = float(np.max(np.abs(trace.charge - n0)) / n0)
        drifts[dt] = float(np.max(np.abs(trace.energy - e0)) / abs(e0))
    ratio = drifts[5e-3] / drifts[2.5e-3]
    ok = charge_drift <= 1e-8 and drifts[5e-3] <= 1e-4 and ratio >= 3.0
    check(
        9,
        ok,
        f"t=10 at dt=5e-3: charge drift {charge_drift:.2e} <= 1e-8, "
        f"energy drift {drifts[5e-3]:.2e} <= 1e-4; halving dt reduces drift "
        f"{ratio:.2f}x >= 3x",
    )


def test_criterion_10_travelling_wave(states):
    res = states[0.3]
    p = res.params
    trace = evolve(
        res.field,
        EvolutionConfig(dt=5e-3, t_end=5.0, params=p, record_every=25),
        reference=res.field,
    )
    assert trace.termination == "completed"
    sup_d = float(np.nanmax(trace.orbit_distance))
    vel = centroid_velocity(trace, DESK.length)
    vel_err = abs(vel - 0.3) / 0.3
    ok = sup_d <= 5e-3 and vel_err <= 0.02
    check(
        10,
        ok,
        f"boosted state over t in [0,5]: sup orbit distance {sup_d:.2e} <= 5e-3, "
        f"centroid velocity {vel:.5f} within {vel_err:.2%} of 0.3 (<= 2%)",
    )


def test_criterion_11_stability_scaling(states):
    res = states[0.0]
    p = res.params
    sups = {}
    for eps in (0.01, 0.02):
        cfg = EvolutionConfig(dt=5e-3, t_end=5.0, params=p, record_every=25)
        trace = stability_experiment(res, eps, cfg, seed=11)
        assert trace.termination == "completed"
        sups[eps] = float(np.nanmax(trace.orbit_distance))
    ratio = sups[0.02] / sups[0.01]
    gains = {eps: sups[eps] / eps for eps in sups}
    ok = 1.5 <= ratio <= 3.0 and all(g <= 10.0 for g in gains.values())
    check(
        11,
        ok,
        f"sup distances {sups[0.01]:.4e} (eps=0.01), {sups[0.02]:.4e} (eps=0.02): "
        f"ratio {ratio:.2f} in [1.5, 3], gains {gains[0.01]:.2f}, "
        f"{gains[0.02]:.2f} <= K = 10",
    )


def test_criterion_12_blowup_guard_and_contrast():
    p = PhysicalParams(1.0, SPEEDS[0.0])
    # charge 20 keeps the tenth-charge contrast (N = 2) safely below the
    # critical charge (~2.71), so only the hot run is in the collapse regime
    psi0, _width = collapse_candidate(DESK, m=1.0, target_charge=20.0)
    e0 = boosted_energy(psi0, p).energy
    # tail_threshold=1.0 keeps the aliasing channel quiet so the firing is
    # attributable to the growth channel alone, which is what this check
    # certifies; growth is the homogeneous part of the squared H^{1/2} norm
    cfg = EvolutionConfig(
        dt=5e-3, t_end=20.0, params=p, record_every=10,
        tail_threshold=1.0, growth_factor=10.0,
    )
    hot = evolve(psi0, cfg)
    hom = hot.sobolev_half - hot.charge
    growth = float(hom[-1] / hom[0])
    cool = evolve(renormalize(psi0, 2.0), cfg)
    ok = (
        e0 < -0.5 * 20.0
        and hot.termination == "blowup_suspected"
        and hot.guard_time is not None
        and hot.guard_time < 20.0
        and growth >= 10.0
        and cool.termination == "completed"
    )
    check(
        12,
        ok,
        f"datum E={e0:.2f} < -N/2 = -10: guard fired at t={hot.guard_time} "
        f"with H^1/2 growth {growth:.1f}x >= 10x; tenth-charge contrast run "
        f"completed without firing",
    )


def test_criterion_13_solver_cross_check(states):
    gf = states[0.3]
    problem = GroundStateProblem(
        params=gf.params, charge=gf.target_charge, grid=DESK, tol=1e-8
    )
    fp = solve_fixed_point(problem)
    de = abs(gf.report.energy_boosted - fp.report.energy_boosted)
    a = canonicalize(gf.field)
    b = canonicalize(fp.field)
    l2 = float(
        np.sqrt(np.sum(np.abs(a.values - b.values) ** 2) * DESK.cell_volume)
    )
    ok = fp.converged and de <= 1e-7 and l2 <= 1e-5
    check(
        13,
        ok,
        f"independent solvers agree: |dE| = {de:.2e} <= 1e-7, "
        f"field distance (mod symmetry) {l2:.2e} <= 1e-5",
    )


def test_criterion_14_massless_scaling_identity():
    grid = GridSpec(128, 20.0)
    worst = 0.0
    for seed in (7, 42):
        probe = scaling_probe_field(grid, seed=seed)
        for v in SPEEDS.values():
            worst = max(worst, mass_zero_scaling_defect(probe, v, factor=2))
    ok = worst <= 1e-10
    check(
        14,
        ok,
        f"E_v(psi_2) = 2 E_v(psi) at m=0 over 2 probes x 3 boosts: "
        f"max relative defect {worst:.2e} <= 1e-10",
    )
