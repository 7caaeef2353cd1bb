import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from uscqec.dynamics import (
    CZ,
    HBAR,
    K_B,
    TARGET_FRAME,
    PLUS,
    SZ,
    AdiabaticRamp,
    CavityFieldSpec,
    GateSchedule,
    Propagator,
    QuantumState,
    RabiSystem,
    adiabatic_initialize,
    adiabatic_system,
    analytic_propagator,
    build_rabi_hamiltonian,
    cavity_state,
    default_cutoff,
    dynamics_cz_gate,
    evolve_analytic,
    evolve_numeric,
    gate_fidelity,
    ground_state,
    omega_from_ghz,
    reference_system,
    target_cluster_state,
    solve_kappa,
    state_fidelity,
    thermal_occupation,
    ultrafast_cz,
)
from uscqec.errors import (
    ConditionViolated,
    DimensionGuard,
    TailMassTooLarge,
    TransversalCouplingPresent,
)

W = omega_from_ghz(5.0)
KAPPA = 1 / (4 * math.sqrt(2))


def _random_low_photon_state(system, rng, max_photons=3):
    psi = np.zeros(system.dims, dtype=complex)
    sl = (slice(None),) * system.n_qubits + (slice(0, max_photons + 1),) * system.n_modes
    block = psi[sl]
    psi[sl] = rng.normal(size=block.shape) + 1j * rng.normal(size=block.shape)
    psi = psi.ravel()
    return QuantumState(psi / np.linalg.norm(psi), system.dims, system.n_qubits)


class TestHamiltonian:
    def test_uncoupled_spectrum(self):
        s = RabiSystem((3.0, 4.5), (10.0,), (0.0, 0.0), (0.3, 0.0), (0.9, 1.0), fock_cutoff=4)
        e = np.sort(np.linalg.eigvalsh(build_rabi_hamiltonian(s)))
        ref = sorted(0.5 * (3.0 * a + 4.5 * b) + 10.0 * n for a in (-1, 1) for b in (-1, 1) for n in range(5))
        assert np.allclose(e, ref, atol=1e-12)

    def test_longitudinal_conserves_sz(self):
        s = RabiSystem((7.0,), (10.0,), (2.5,), (0.0,), (1.0,), fock_cutoff=12)
        H = build_rabi_hamiltonian(s)
        sz = np.kron(SZ, np.eye(13))
        assert np.allclose(H @ sz, sz @ H)
        psi = QuantumState.product([PLUS], [np.eye(13)[0]])
        out = evolve_numeric(s, psi, 0.83)
        assert out.expectation(sz) == pytest.approx(psi.expectation(sz), abs=1e-12)

    def test_hermitian_and_sparse_agree(self):
        s = reference_system(c_x=0.3, cutoff=4)
        H = build_rabi_hamiltonian(s)
        Hs = build_rabi_hamiltonian(s, sparse=True)
        assert np.allclose(H, H.conj().T)
        assert np.allclose(Hs.toarray(), H)

    def test_dimension_guard(self):
        s = RabiSystem((1.0,) * 3, (1.0,) * 3, (0.1,) * 3, (0.0,) * 3, (1.0,) * 3, fock_cutoff=9, max_dim=1000)
        with pytest.raises(DimensionGuard):
            build_rabi_hamiltonian(s)

    @pytest.mark.parametrize("bad", [dict(couplings=(0.1,)), dict(mode_freqs=()), dict(couplings=(-0.1, 0.1))])
    def test_validation(self, bad):
        kw = dict(qubit_freqs=(1.0, 1.0), mode_freqs=(1.0,), couplings=(0.1, 0.1), c_x=(0.0, 0.0), c_z=(1.0, 1.0))
        kw.update(bad)
        with pytest.raises(ValueError):
            RabiSystem(**kw)

    def test_ground_state_vs_imaginary_time(self):
        s = reference_system(g_over_omega=KAPPA, cutoff=15)
        e0, psi0 = ground_state(s)
        H = build_rabi_hamiltonian(s, sparse=True).tocsc()
        shifted = H - e0 * sp.identity(s.dimension, format="csc")
        rng = np.random.default_rng(7)
        phi = rng.normal(size=s.dimension) + 1j * rng.normal(size=s.dimension)
        for _ in range(8):
            # one nanosecond of imaginary time per step
            phi = spla.expm_multiply(-shifted, phi)
            phi /= np.linalg.norm(phi)
        assert abs(np.vdot(psi0, phi)) ** 2 > 1 - 1e-8
        assert np.real(np.vdot(phi, H @ phi)) == pytest.approx(e0, abs=1e-8 * abs(e0))


class TestAnalyticPropagator:
    def test_identity_at_zero(self):
        s = reference_system(cutoff=6)
        assert np.allclose(analytic_propagator(s, 0.0), np.eye(s.dimension), atol=1e-14)

    @pytest.mark.parametrize("n", [1, 2])
    def test_modes_disentangle_after_full_periods(self, n):
        s = reference_system(cutoff=6)
        U = analytic_propagator(s, 2 * math.pi * n / W)
        assert np.allclose(U, np.diag(np.diag(U)), atol=1e-10)
        assert np.allclose(np.abs(np.diag(U)), 1.0)

    @pytest.mark.parametrize("kappa", [0.08, 0.13, KAPPA])
    def test_matches_numeric_at_generic_time(self, kappa):
        s = reference_system(g_over_omega=kappa, cutoff=15)
        psi = QuantumState.product([PLUS, PLUS], [np.eye(16)[0]] * 2)
        t = 0.37 * 2 * math.pi / W
        a = evolve_analytic(s, psi, t)
        b = evolve_numeric(s, psi, t)
        assert state_fidelity(a.data, b.data) > 1 - 1e-8

    def test_rejects_transverse(self):
        with pytest.raises(TransversalCouplingPresent):
            analytic_propagator(reference_system(c_x=0.1, cutoff=3), 0.1)

    def test_non_degenerate_modes(self):
        s = RabiSystem((4.0, 6.0), (9.0, 13.0), (1.2, 0.7), (0.0, 0.0), (1.0, 0.8), fock_cutoff=(12, 10))
        psi = _random_low_photon_state(s, np.random.default_rng(1), 2)
        a = evolve_analytic(s, psi, 0.41)
        b = evolve_numeric(s, psi, 0.41)
        assert state_fidelity(a.data, b.data) > 1 - 1e-8


class TestNumericPropagator:
    def test_diagonal_hamiltonian_keeps_populations(self):
        H = np.diag([0.0, 1.3, 2.9, -0.4])
        psi = np.array([0.5, 0.5j, -0.5, 0.5])
        out = Propagator(H).apply_vector(psi, 2.7)
        assert np.allclose(np.abs(out) ** 2, np.abs(psi) ** 2)

    def test_energy_conserved(self):
        s = reference_system(c_x=0.4, cutoff=5)
        H = build_rabi_hamiltonian(s)
        prop = Propagator(H)
        psi = _random_low_photon_state(s, np.random.default_rng(2))
        e0 = psi.expectation(H)
        for t in (0.05, 0.3, 1.1):
            assert prop.apply(psi, t).expectation(H) == pytest.approx(e0, rel=1e-10)

    def test_density_and_vector_agree(self):
        s = reference_system(c_x=0.2, cutoff=4)
        psi = _random_low_photon_state(s, np.random.default_rng(3))
        rho = QuantumState(psi.density(), psi.dims, psi.n_qubits)
        a = evolve_numeric(s, psi, 0.2)
        b = evolve_numeric(s, rho, 0.2)
        assert np.allclose(a.density(), b.data, atol=1e-12)

    def test_negative_time(self):
        s = reference_system(cutoff=2)
        with pytest.raises(ValueError):
            evolve_numeric(s, _random_low_photon_state(s, np.random.default_rng(0), 1), -1.0)

    @pytest.mark.parametrize("t", [0.13, 0.44])
    def test_matches_analytic_when_longitudinal(self, t):
        s = reference_system(cutoff=15)
        psi = _random_low_photon_state(s, np.random.default_rng(4), 2)
        assert state_fidelity(evolve_numeric(s, psi, t).data, evolve_analytic(s, psi, t).data) > 1 - 1e-8


class TestGate:
    def test_operating_point(self):
        assert solve_kappa(1, 2) == pytest.approx(1 / (4 * math.sqrt(2)), abs=1e-15)
        sched = GateSchedule.symmetric(1, 2)
        assert max(abs(r) for r in sched.residuals()) < 1e-15
        assert sched.gate_time(W) == pytest.approx(0.2, rel=1e-12)

    @pytest.mark.parametrize("n,M", [(1, 1), (2, 2), (3, 4)])
    def test_both_conditions_hold(self, n, M):
        k = solve_kappa(n, M)
        GateSchedule((0, 1), n, k, k, M).check(tol=1e-14)

    def test_asymmetric_violates(self):
        with pytest.raises(ConditionViolated):
            GateSchedule((0, 1), 1, 0.2, 0.15, 2).check()

    def test_ground_configuration_only_picks_phase(self):
        r = ultrafast_cz(GateSchedule.symmetric(), reference_system(g_over_omega=KAPPA, cutoff=10))
        assert abs(r.raw[0, 0]) == pytest.approx(1.0)
        assert np.allclose(r.raw, np.diag(np.diag(r.raw)))

    @pytest.mark.parametrize("numeric", [False, True])
    def test_corrected_gate_is_cz(self, numeric):
        r = ultrafast_cz(GateSchedule.symmetric(), reference_system(g_over_omega=KAPPA, cutoff=10), numeric=numeric)
        assert r.residual < 1e-8
        assert r.interaction == pytest.approx(math.pi / 4)

    def test_target_state(self):
        U = dynamics_cz_gate()
        out = TARGET_FRAME @ U @ np.kron(PLUS, PLUS)
        assert abs(np.vdot(target_cluster_state(), out)) ** 2 > 1 - 1e-9

    def test_raw_gate_is_locally_a_cluster(self):
        r = ultrafast_cz(GateSchedule.symmetric(), reference_system(g_over_omega=KAPPA, cutoff=10))
        out = r.raw @ np.kron(PLUS, PLUS)
        # a maximally entangled two-qubit state: reduced state is maximally mixed
        m = out.reshape(2, 2)
        assert np.allclose(m @ m.conj().T, np.eye(2) / 2, atol=1e-12)

    def test_coupling_mismatch(self):
        with pytest.raises(ConditionViolated):
            ultrafast_cz(GateSchedule.symmetric(), reference_system(g_over_omega=0.1, cutoff=4))


class TestCavity:
    def test_vacuum(self):
        rho = cavity_state(CavityFieldSpec.vacuum(), 3)
        assert np.allclose(rho, np.diag([1, 0, 0, 0]))

    def test_coherent_mean_photon(self):
        rho = cavity_state(CavityFieldSpec.coherent(0.5), 15)
        assert np.real(np.trace(rho @ np.diag(np.arange(16)))) == pytest.approx(0.25, abs=1e-10)

    def test_thermal_boltzmann_ratio(self):
        rho = cavity_state(CavityFieldSpec.thermal(0.015), 3, W)
        x = HBAR * W * 1e9 / (K_B * 0.015)
        assert rho[1, 1].real / rho[0, 0].real == pytest.approx(math.exp(-x), rel=1e-10)
        assert x == pytest.approx(16.0, rel=0.01)
        assert thermal_occupation(W, 0.015) == pytest.approx(1 / math.expm1(x))

    def test_tail_guard(self):
        with pytest.raises(TailMassTooLarge):
            cavity_state(CavityFieldSpec.coherent(1.0), 5)

    @pytest.mark.parametrize("spec,cut", [(CavityFieldSpec.coherent(1.0), 15), (CavityFieldSpec.vacuum(), 3), (CavityFieldSpec.thermal(0.015), 3)])
    def test_default_cutoffs(self, spec, cut):
        assert default_cutoff(spec) == cut


class TestGateFidelity:
    def test_exact_without_transverse_coupling(self):
        s = reference_system(cutoff=15)
        assert gate_fidelity(s, CavityFieldSpec.vacuum(), 0.0) >= 1 - 1e-6

    def test_thermal_matches_vacuum(self):
        s = reference_system(cutoff=15)
        for cx in (0.0, 0.1):
            v = gate_fidelity(s, CavityFieldSpec.vacuum(), cx)
            t = gate_fidelity(s, CavityFieldSpec.thermal(0.015), cx)
            assert abs(v - t) < 1e-3

    def test_classical_field_helps(self):
        s = reference_system(cutoff=15)
        assert gate_fidelity(s, CavityFieldSpec.coherent(1.0), 0.1) >= gate_fidelity(s, CavityFieldSpec.vacuum(), 0.1)

    def test_transverse_coupling_hurts(self):
        s = reference_system(cutoff=15)
        f = [gate_fidelity(s, CavityFieldSpec.vacuum(), cx) for cx in (0.0, 0.1, 0.3)]
        assert f[0] > f[1] > f[2]


class TestAdiabatic:
    def test_zero_coupling_is_trivial(self):
        r = adiabatic_initialize(adiabatic_system(cutoff=4), AdiabaticRamp(0.0, 10.0, steps=500), check_halving=False)
        assert np.allclose(r.fidelity, 1.0, atol=1e-12)

    def test_slow_beats_fast(self):
        s = adiabatic_system(cutoff=6)
        g0 = KAPPA * W
        fast = [adiabatic_initialize(s, AdiabaticRamp(g0, 1 / W, steps=k), check_halving=False).final_fidelity for k in (500, 1000)]
        slow = adiabatic_initialize(s, AdiabaticRamp(g0, 250 / W, steps=500), check_halving=False).final_fidelity
        assert fast[0] == pytest.approx(fast[1], abs=1e-6)
        assert fast[0] < slow
        assert slow > 0.99

    @pytest.mark.parametrize("shape", ["linear-in-g", "linear-in-flux"])
    def test_profiles(self, shape):
        r = AdiabaticRamp(2.0, 5.0, shape)
        assert r.profile(0.0) == pytest.approx(2.0)
        assert r.profile(5.0) == pytest.approx(0.0, abs=1e-15)
        assert np.all(np.diff(r.profile(np.linspace(0, 5, 50))) <= 0)

    @pytest.mark.parametrize("kw", [dict(steps=100), dict(shape="cubic"), dict(T_total=-1.0)])
    def test_ramp_validation(self, kw):
        args = dict(g0=1.0, T_total=1.0)
        args.update(kw)
        with pytest.raises(ValueError):
            AdiabaticRamp(**args)
