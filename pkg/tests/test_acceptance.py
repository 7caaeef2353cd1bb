"""One check per acceptance criterion; each prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from uscqec.dynamics import (
    PLUS,
    AdiabaticRamp,
    CavityFieldSpec,
    GateSchedule,
    Propagator,
    QuantumState,
    adiabatic_initialize,
    adiabatic_system,
    build_rabi_hamiltonian,
    evolve_analytic,
    evolve_numeric,
    gate_fidelity,
    gate_fidelity_table,
    omega_from_ghz,
    reference_system,
    solve_kappa,
    state_fidelity,
)
from uscqec.fluxqubit import BiasPoint, ChargeBasisSpec, build_qubit_hamiltonian, standard_params, sweep_bias
from uscqec.graphcode import (
    build_cluster_statevector,
    cluster_stabilizers,
    code_distance,
    five_cycle,
    five_qubit_code,
    lc_orbit_check,
    measure_x,
    steane_code,
    steane_graph,
    transport_five_qubit,
)
from uscqec.noise import NoiseModel, exact_channel_fidelity, fidelity_surface, montecarlo_fidelity
from uscqec.resonator import ResonatorParams, coupling_profile, default_params, degenerate_manifold, mode_equation_roots

W = omega_from_ghz(5.0)
KAPPA = 1 / (4 * math.sqrt(2))


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def test_criterion_01_operating_point(acceptance_line):
    with Timer() as tm:
        k = solve_kappa(1, 2)
        sched = GateSchedule.symmetric(1, 2)
        T = sched.gate_time(W)
    ok = abs(k - KAPPA) < 1e-12 and abs(T - 0.2) < 1e-12 and max(map(abs, sched.residuals())) < 1e-12
    acceptance_line(1, ok, f"kappa = {k:.15f}, T = {T:.12f} ns", tm.seconds)
    assert ok


def test_criterion_02_analytic_equals_numeric(acceptance_line):
    with Timer() as tm:
        s = reference_system(g_over_omega=KAPPA, c_x=0.0, cutoff=15)
        prop = Propagator(build_rabi_hamiltonian(s))
        vac = np.eye(16)[0]
        psi = QuantumState.product([PLUS, PLUS], [vac, vac])
        times = np.random.default_rng(2024).uniform(0, 2 * math.pi / W, 20)
        fids = [state_fidelity(evolve_analytic(s, psi, t).data, evolve_numeric(s, psi, t, prop).data) for t in times]
    worst = 1 - min(fids)
    ok = worst < 1e-8
    acceptance_line(2, ok, f"worst infidelity over 20 times = {worst:.2e}", tm.seconds)
    assert ok


def test_criterion_03_cz_exactness(acceptance_line):
    with Timer() as tm:
        s = reference_system(cutoff=15)
        vac = gate_fidelity(s, CavityFieldSpec.vacuum(), 0.0)
        th = gate_fidelity(s, CavityFieldSpec.thermal(0.015), 0.0)
    ok = vac >= 1 - 1e-6 and abs(th - vac) < 1e-3
    acceptance_line(3, ok, f"vacuum F = {vac:.12f}, |thermal - vacuum| = {abs(th - vac):.1e}", tm.seconds)
    assert ok


def test_criterion_04_cavity_ordering(acceptance_line):
    cxs = [0.05, 0.1, 0.2, 0.3]
    cav = [CavityFieldSpec.coherent(1.0), CavityFieldSpec.coherent(0.5), CavityFieldSpec.coherent(0.25), CavityFieldSpec.vacuum()]
    with Timer() as tm:
        rows = gate_fidelity_table(reference_system(cutoff=15), cav, cxs)
    F = np.array([r[2] for r in rows]).reshape(len(cxs), len(cav))
    slack = np.diff(F, axis=1).max()
    ok = bool(slack <= 1e-4)
    acceptance_line(4, ok, f"largest increase along coherent 1 > 0.5 > 0.25 > vacuum = {slack:.2e}", tm.seconds)
    assert ok


def test_criterion_05_adiabatic(acceptance_line):
    with Timer() as tm:
        res = adiabatic_initialize(adiabatic_system(), AdiabaticRamp(KAPPA * W, 250 / W), check_halving=True)
    ok = res.final_fidelity >= 0.99 and res.halving_change < 1e-6 and tm.seconds < 120
    acceptance_line(5, ok, f"final F = {res.final_fidelity:.8f}, halving change = {res.halving_change:.1e}", tm.seconds)
    assert ok


def test_criterion_06_five_qubit_code(acceptance_line):
    with Timer() as tm:
        g = five_cycle()
        psi = build_cluster_statevector(g).data
        ev = cluster_stabilizers(g).expectations(psi)
        mapped, _, _ = transport_five_qubit()
        same = mapped.same_group(five_qubit_code())
        d = code_distance(five_qubit_code())
    ok = bool(np.all(np.abs(ev - 1) < 1e-9) and same and d == (3, True))
    acceptance_line(6, ok, f"max |<K_i> - 1| = {np.abs(ev - 1).max():.1e}, group equal = {same}, d = {d}", tm.seconds)
    assert ok


def test_criterion_07_steane_code(acceptance_line):
    with Timer() as tm:
        g = steane_graph()
        state = measure_x(cluster_stabilizers(g), g.measure_set).state
        lc = lc_orbit_check(g, steane_code())
        d = code_distance(steane_code())
    ok = bool(state.n == 7 and state.m == 7 and steane_code().n_logical == 1 and lc.found and lc.state.contains_group(steane_code()) and d == (3, True))
    acceptance_line(7, ok, f"[[7,1]] codeword {lc.completion}, LC found = {lc.found}, d = {d}", tm.seconds)
    assert ok


def _monotone(rows, n):
    F = np.array([r[2] for r in rows]).reshape(n, n)
    se = np.array([r[3] for r in rows]).reshape(n, n)
    ok1 = np.all(np.diff(F, axis=0) <= 3 * np.maximum(se[1:], se[:-1]) + 1e-12)
    ok2 = np.all(np.diff(F, axis=1) <= 3 * np.maximum(se[:, 1:], se[:, :-1]) + 1e-12)
    return bool(ok1 and ok2)


def test_criterion_08_montecarlo(acceptance_line):
    with Timer() as tm:
        zero = [montecarlo_fidelity(c, NoiseModel(), 1000, seed=0) for c in ("five-qubit", "steane")]
        ok_zero = all(e.mean == 1.0 and e.std_error == 0.0 for e in zero)
        rng = np.random.default_rng(8)
        within = []
        for k in range(10):
            code = ("pair", "triangle", "line3")[k % 3]
            noise = NoiseModel(*rng.uniform(0, 0.1, 3))
            est = montecarlo_fidelity(code, noise, 5000, seed=100 + k)
            within.append(abs(est.mean - exact_channel_fidelity(code, noise)) <= 3 * est.std_error)
        grid = np.linspace(0, 0.05, 6)
        five = fidelity_surface("five-qubit", grid, grid, 0.01, 5000, seed=1)
        steane = fidelity_surface("steane", grid, grid, 0.01, 1000, seed=2)
        low = max(montecarlo_fidelity(c, NoiseModel(0.005, 0.005, 0.01), 5000, seed=3).mean for c in ("five-qubit", "steane"))
    ok = ok_zero and all(within) and _monotone(five, 6) and _monotone(steane, 6) and low >= 0.75
    detail = f"zero noise exact = {ok_zero}, {sum(within)}/10 within 3 sigma, monotone = {_monotone(five, 6)}/{_monotone(steane, 6)}, F(0.005) = {low:.3f}"
    acceptance_line(8, ok, detail, tm.seconds)
    assert ok


def test_criterion_09_resonator(acceptance_line):
    with Timer() as tm:
        bare = ResonatorParams(0.0125, 4.16e-7, 1.66e-10, 0, 1e-15, 1e-9)
        modes = mode_equation_roots(bare, 2 * math.pi * 40.0)
        m = np.arange(1, len(modes) + 1)
        err = np.max(np.abs(modes.frequencies / (m * math.pi * bare.velocity / bare.length_L * 1e-9) - 1))
        man = degenerate_manifold(default_params(5))
        prof = np.array(man.coupling_profile)
        perr = np.max(np.abs(prof - coupling_profile(5)))
    ok = err < 1e-10 and man.spread < 1e-6 and man.mode_count_M == 6 and perr < 1e-10
    acceptance_line(9, ok, f"harmonic error = {err:.1e}, spread = {man.spread:.1e}, profile error = {perr:.1e}", tm.seconds)
    assert ok


@pytest.mark.slow
def test_criterion_10_flux_qubit(acceptance_line):
    p = standard_params()
    with Timer() as tm:
        # 40 x 40 grid; the f1 step of 0.002 puts one column on the symmetry point,
        # where the transverse peak (about 1e-3 wide in f1) sits
        f1 = 0.46 + 0.002 * np.arange(40)
        surf = sweep_bias(p, np.linspace(0.6, 1.0, 40), f1, jobs=4)
    c = surf.normalized()
    cx, cz = np.abs(c[..., 1]).max(), np.abs(c[..., 3]).max()
    resid = float(surf.reconstruction_residual.max())
    conv = 0.0
    for a in (0.6, 0.8, 1.0):
        for f1 in (0.46, 0.5, 0.54):
            b = BiasPoint(f1)
            e10 = np.linalg.eigvalsh(build_qubit_hamiltonian(standard_params(a), b, ChargeBasisSpec(10)))[:2]
            e12 = np.linalg.eigvalsh(build_qubit_hamiltonian(standard_params(a), b, ChargeBasisSpec(12)))[:2]
            conv = max(conv, float(np.max(np.abs(e10 - e12) / np.abs(e12))))
    ok = cz > 0.99 and cx > 0.99 and resid < 1e-10 and conv < 1e-8 and tm.seconds < 600
    acceptance_line(10, ok, f"max|cz| = {cz:.4f}, max|cx| = {cx:.4f}, residual = {resid:.1e}, cutoff change = {conv:.1e}", tm.seconds)
    assert ok
