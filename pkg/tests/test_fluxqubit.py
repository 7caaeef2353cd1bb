import math

import numpy as np
import pytest
import scipy.linalg

from uscqec.errors import BasisMismatch, DimensionGuard
from uscqec.fluxqubit import (
    PAULIS,
    TWO_PI,
    BiasPoint,
    ChargeBasisSpec,
    FluxQubitParams,
    build_qubit_hamiltonian,
    coupling_operator,
    standard_params,
    pauli_decompose,
    potential_energy,
    project_operator,
    qubit_spectrum,
    solve_qubit,
    sweep_bias,
)


def _hermitian(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (A + A.conj().T) / 2


def _potential_by_hand(alpha, beta, f1, f2, f3, p1, p2, px):
    # three junctions plus the coupler pair, written term by term
    d = p2 - p1
    t3 = alpha * math.cos(d + 2 * math.pi * f1)
    t4 = beta * math.cos(d + px + 2 * math.pi * (f1 - f2))
    t5 = beta * math.cos(d + px + 2 * math.pi * (f1 - f2 + f3))
    return -(math.cos(p1) + math.cos(p2) + t3 + t4 + t5)


class TestPotential:
    def test_all_cosines_one(self):
        p = FluxQubitParams(1.0, 1.0, alpha=0.7, beta=0.2)
        assert potential_energy(p, BiasPoint(0.0), 0.0, 0.0, 0.0) == pytest.approx(-3.1, abs=1e-14)

    @pytest.mark.parametrize("phis", [(0.0, 0.0, 0.0), (0.3, -1.1, 0.4), (2.0, 0.5, -0.7)])
    def test_coupler_switched_off(self, phis):
        with_c = FluxQubitParams(1.0, 1.0, alpha=0.8, beta=0.2)
        bias = BiasPoint(0.37, 0.1, 0.5)
        three = -(math.cos(phis[0]) + math.cos(phis[1]) + 0.8 * math.cos(phis[1] - phis[0] + 2 * math.pi * 0.37))
        assert potential_energy(with_c, bias, *phis) == pytest.approx(three, abs=1e-14)

    @pytest.mark.parametrize(
        "alpha,beta,bias,phis",
        [
            (0.8, 0.2, (0.5, 0.0, 0.0), (0.0, 0.0, 0.0)),
            (0.8, 0.1, (0.48, 0.02, 0.3), (0.2, -0.4, 0.05)),
            (0.65, 0.15, (0.51, 0.0, 0.9), (1.3, 2.2, -0.3)),
        ],
    )
    def test_matches_term_by_term_sum(self, alpha, beta, bias, phis):
        p = FluxQubitParams(1.0, 1.0, alpha=alpha, beta=beta)
        got = potential_energy(p, BiasPoint(*bias), *phis)
        assert got == pytest.approx(_potential_by_hand(alpha, beta, *bias, *phis), abs=1e-13)

    def test_half_flux_value(self):
        # alpha junction flips sign at f1 = 1/2, and so does the coupler pair
        p = FluxQubitParams(1.0, 1.0, alpha=0.8, beta=0.2)
        assert potential_energy(p, BiasPoint(0.5), 0.0, 0.0, 0.0) == pytest.approx(-0.8, abs=1e-14)


class TestHamiltonian:
    def test_hermitian(self):
        H = build_qubit_hamiltonian(standard_params(), BiasPoint(0.49), ChargeBasisSpec(6))
        assert np.allclose(H, H.conj().T)

    def test_charging_limit(self):
        p = FluxQubitParams(E_J=1e-7, E_C=10.0, alpha=0.8)
        basis = ChargeBasisSpec(4)
        H = build_qubit_hamiltonian(p, BiasPoint(0.3), basis)
        n1, n2 = basis.charges()
        ci = np.linalg.inv(p.capacitance_matrix())
        parabola = 4 * p.E_C * (ci[0, 0] * n1**2 + 2 * ci[0, 1] * n1 * n2 + ci[1, 1] * n2**2)
        e = np.linalg.eigvalsh(H)
        assert np.allclose(e[:10], np.sort(parabola)[:10], atol=1e-5)

    @pytest.mark.parametrize("f1", [0.47, 0.5, 0.52])
    def test_cutoff_convergence(self, f1):
        p, bias = standard_params(), BiasPoint(f1)
        lo = scipy.linalg.eigh(build_qubit_hamiltonian(p, bias, ChargeBasisSpec(8)), eigvals_only=True, subset_by_index=[0, 1])
        hi = scipy.linalg.eigh(build_qubit_hamiltonian(p, bias, ChargeBasisSpec(12)), eigvals_only=True, subset_by_index=[0, 1])
        assert np.max(np.abs(lo - hi) / np.abs(hi)) < 1e-8

    @pytest.mark.parametrize("alpha", [0.6, 0.8, 1.0])
    @pytest.mark.parametrize("f1", [0.495, 0.5, 0.505])
    def test_qubit_levels_isolated(self, alpha, f1):
        H = build_qubit_hamiltonian(standard_params(alpha), BiasPoint(f1), ChargeBasisSpec(8))
        e = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 2])
        assert e[2] - e[1] > 3 * (e[1] - e[0])

    def test_dimension_guard(self):
        with pytest.raises(DimensionGuard):
            build_qubit_hamiltonian(standard_params(), BiasPoint(0.5), ChargeBasisSpec(200))

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            FluxQubitParams(1.0, 1.0, alpha=1.5)

    def test_basis_from_dimension(self):
        assert ChargeBasisSpec.from_dimension(49).n_max == 3
        with pytest.raises(BasisMismatch):
            ChargeBasisSpec.from_dimension(50)


class TestSpectrum:
    def test_diagonal(self):
        m = qubit_spectrum(np.diag([0.0, 5.0, 100.0]))
        assert m.omega_q == pytest.approx(TWO_PI * 5.0)
        assert m.frequency_ghz == pytest.approx(5.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_hermitian_vs_numpy(self, seed):
        H = _hermitian(np.random.default_rng(seed), 50)
        m = qubit_spectrum(H)
        ref = np.linalg.eigvalsh(H)[:2]
        assert np.allclose(m.energies[:2], ref, atol=1e-10)
        for v, e in zip((m.ground, m.excited), ref):
            assert np.linalg.norm(H @ v - e * v) < 1e-9

    def test_symmetry_point_has_no_tilt(self):
        model, _ = solve_qubit(standard_params(), BiasPoint(0.5))
        e_q = model.energies[1] - model.energies[0]
        assert abs(model.tilt_epsilon) < 1e-8 * e_q
        assert model.gap_delta == pytest.approx(e_q, rel=1e-12)


class TestCoefficients:
    def test_identity_operator(self):
        H = _hermitian(np.random.default_rng(3), 20)
        c = project_operator(qubit_spectrum(H), np.eye(20))
        assert np.allclose(c.as_array(), [1, 0, 0, 0], atol=1e-12)

    @pytest.mark.parametrize("seed", [4, 5, 6])
    def test_decomposition_vs_linear_solve(self, seed):
        rng = np.random.default_rng(seed)
        model = qubit_spectrum(_hermitian(rng, 30))
        op = _hermitian(rng, 30)
        P = model.basis.conj().T @ op @ model.basis
        A = np.array([s.ravel() for s in PAULIS]).T
        ref = np.linalg.solve(A.T.conj() @ A, A.T.conj() @ P.ravel()).real
        c = pauli_decompose(P)
        assert np.allclose(c.as_array(), ref, atol=1e-12)
        assert np.linalg.norm(c.matrix() - P) < 1e-10

    def test_wrong_shape(self):
        model = qubit_spectrum(np.diag([0.0, 1.0, 3.0]))
        with pytest.raises(BasisMismatch):
            project_operator(model, np.eye(4))

    def test_normalised_convention(self):
        _, c = solve_qubit(standard_params(), BiasPoint(0.503))
        n = c.normalized()
        assert n.c_x**2 + n.c_y**2 + n.c_z**2 == pytest.approx(1.0)

    def test_tunable_between_transverse_and_longitudinal(self):
        s = sweep_bias(standard_params(), [0.6, 0.8, 1.0], np.linspace(0.46, 0.54, 17), basis=ChargeBasisSpec(8))
        c = s.normalized()
        assert np.abs(c[..., 3]).max() > 0.99
        assert np.abs(c[..., 1]).max() > 0.99
        assert np.abs(c[..., 2]).max() < 1e-8


class TestSweep:
    def test_single_point_matches_direct_call(self):
        p, basis = standard_params(0.7), ChargeBasisSpec(8)
        s = sweep_bias(p, [0.7], [0.49], basis=basis)
        model, c = solve_qubit(p, BiasPoint(0.49), basis)
        assert s.omega_q[0, 0] == pytest.approx(model.omega_q, rel=1e-12)
        assert np.allclose(s.coefficients[0, 0], c.as_array(), atol=1e-12)
        row = next(s.rows())
        assert row[:3] == pytest.approx((0.7, 0.49, model.omega_q / TWO_PI))

    def test_mirror_symmetry(self):
        f1 = np.array([0.46, 0.48, 0.49])
        basis = ChargeBasisSpec(8)
        left = sweep_bias(standard_params(), [0.7, 0.9], f1, basis=basis)
        right = sweep_bias(standard_params(), [0.7, 0.9], (1 - f1)[::-1], basis=basis)
        assert np.allclose(left.omega_q, right.omega_q[:, ::-1], rtol=1e-10)
        assert np.allclose(np.abs(left.normalized()), np.abs(right.normalized()[:, ::-1]), atol=1e-9)

    def test_transverse_and_longitudinal_trade_off(self):
        s = sweep_bias(standard_params(), [0.8], np.linspace(0.47, 0.53, 25), basis=ChargeBasisSpec(8))
        c = s.normalized()[0]
        assert np.allclose(c[:, 1] ** 2 + c[:, 3] ** 2, 1.0, atol=1e-12)
        assert np.all(np.diff(c[:, 3]) > 0)
        # c_x even and c_z odd about the symmetry point
        assert np.allclose(c[:, 1], c[::-1, 1], atol=1e-9)
        assert np.allclose(c[:, 3], -c[::-1, 3], atol=1e-9)

    def test_dark_partner_of_degenerate_level(self):
        # away from the symmetry point the first excited level is a parity doublet
        p, bias, basis = standard_params(), BiasPoint(0.46), ChargeBasisSpec(8)
        e = np.linalg.eigvalsh(build_qubit_hamiltonian(p, bias, basis))
        assert e[2] - e[1] < 1e-5
        model, c = solve_qubit(p, bias, basis)
        S = basis.exchange()
        assert np.vdot(model.ground, model.ground[S]).real == pytest.approx(np.vdot(model.excited, model.excited[S]).real)
        assert abs(c.c_y) < 1e-10

    def test_parallel_matches_serial(self):
        args = (standard_params(), [0.7, 0.8], [0.49, 0.5])
        a = sweep_bias(*args, basis=ChargeBasisSpec(6))
        b = sweep_bias(*args, basis=ChargeBasisSpec(6), jobs=2)
        assert np.array_equal(a.coefficients, b.coefficients)

    @pytest.mark.parametrize("alphas,f1s", [([], [0.5]), ([0.8], []), ([0.9, 0.7], [0.5])])
    def test_rejects_bad_grids(self, alphas, f1s):
        with pytest.raises(ValueError):
            sweep_bias(standard_params(), alphas, f1s)

    def test_coupling_operator_hermitian(self):
        op = coupling_operator(BiasPoint(0.4, 0.1, 0.2), ChargeBasisSpec(3))
        assert np.allclose(op, op.conj().T)
