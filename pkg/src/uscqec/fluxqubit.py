"""Six-junction flux qubit: charge-basis spectrum and coupling decomposition.

Junctions 1 and 2 have Josephson energy ``E_J``, junction 3 has ``alpha*E_J``,
the two coupler junctions 4 and 5 have ``beta*E_J`` each and the galvanic
junction 6 (shared with the resonator) has ``gamma*E_J``.  Energies are in GHz
(i.e. divided by Planck's constant); angular frequencies are in rad/ns.

The bare qubit is built with the resonator phase slip ``phi_x`` frozen at 0.
Its coupling to the resonator is the first-order coefficient in ``phi_x``,
``sin(phi2 - phi1 + 2*pi*(f1 - f2 + f3/2))``, projected on the two lowest
levels and written as ``c0*1 + cx*sx + cy*sy + cz*sz``.

Qubit basis convention: index 0 is the ground state ``|g>``, index 1 is the
excited state ``|e>``, ``sz = diag(-1, 1)`` so that the qubit Hamiltonian is
``(omega_q/2) sz``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import BasisMismatch, CutoffTooSmall, DegenerateGroundSpace, DimensionGuard

TWO_PI = 2.0 * math.pi
MAX_BASIS_DIM = 10_000

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
PAULIS = (SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True)
class FluxQubitParams:
    E_J: float
    E_C: float
    alpha: float
    beta: float = 0.1
    gamma: float = 0.5

    def __post_init__(self):
        if self.E_J <= 0 or self.E_C <= 0:
            raise ValueError("junction energies must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")

    def capacitance_matrix(self) -> np.ndarray:
        """Capacitance matrix of (phi1, phi2) in units of C_J, with phi_x frozen."""
        s = self.alpha + 2.0 * self.beta
        return np.array([[1.0 + s, -s], [-s, 1.0 + s]])


def standard_params(alpha: float = 0.8, beta: float = 0.1, gamma: float = 0.5) -> FluxQubitParams:
    """E_J/h = 221 GHz and E_C = E_J/32."""
    return FluxQubitParams(E_J=221.0, E_C=221.0 / 32.0, alpha=alpha, beta=beta, gamma=gamma)


@dataclass(frozen=True)
class BiasPoint:
    """External flux frustrations, reduced to [0, 1)."""

    f1: float
    f2: float = 0.0
    f3: float = 0.0

    def __post_init__(self):
        for name in ("f1", "f2", "f3"):
            object.__setattr__(self, name, float(getattr(self, name)) % 1.0)

    @property
    def coupler_phase(self) -> float:
        return TWO_PI * (self.f1 - self.f2 + 0.5 * self.f3)


@dataclass(frozen=True)
class ChargeBasisSpec:
    n_max: int = 10

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")

    @property
    def size(self) -> int:
        return 2 * self.n_max + 1

    @property
    def dimension(self) -> int:
        return self.size**2

    def charges(self):
        n = np.arange(-self.n_max, self.n_max + 1)
        n1, n2 = np.meshgrid(n, n, indexing="ij")
        return n1.ravel(), n2.ravel()

    def index(self, n1, n2):
        return (np.asarray(n1) + self.n_max) * self.size + (np.asarray(n2) + self.n_max)

    def conjugation(self) -> np.ndarray:
        """Permutation taking the index of (n1, n2) to that of (-n1, -n2)."""
        n1, n2 = self.charges()
        return self.index(-n1, -n2)

    def exchange(self) -> np.ndarray:
        """Permutation for (n1, n2) -> (-n2, -n1), the image of (phi1, phi2) -> (-phi2, -phi1)."""
        n1, n2 = self.charges()
        return self.index(-n2, -n1)

    @classmethod
    def from_dimension(cls, dim: int) -> "ChargeBasisSpec":
        size = math.isqrt(dim)
        if size * size != dim or size % 2 == 0 or size < 3:
            raise BasisMismatch(f"dimension {dim} is not a (2*n_max+1)^2 charge basis")
        return cls((size - 1) // 2)


def potential_energy(params: FluxQubitParams, bias: BiasPoint, phi1, phi2, phi_x=0.0):
    """Qubit potential divided by E_J (numpy-broadcasting)."""
    phi1 = np.asarray(phi1, dtype=float)
    phi2 = np.asarray(phi2, dtype=float)
    d = phi2 - phi1
    coupler = 2.0 * params.beta * math.cos(math.pi * bias.f3)
    return -(
        np.cos(phi1)
        + np.cos(phi2)
        + params.alpha * np.cos(d + TWO_PI * bias.f1)
        + coupler * np.cos(d + bias.coupler_phase + phi_x)
    )


def _shift(basis: ChargeBasisSpec, d1: int, d2: int) -> np.ndarray:
    """Matrix of exp(i(d1*phi1 + d2*phi2)): |n1+d1, n2+d2><n1, n2|, truncated."""
    n1, n2 = basis.charges()
    m1, m2 = n1 + d1, n2 + d2
    ok = (np.abs(m1) <= basis.n_max) & (np.abs(m2) <= basis.n_max)
    out = np.zeros((basis.dimension, basis.dimension))
    cols = np.flatnonzero(ok)
    out[basis.index(m1[ok], m2[ok]), cols] = 1.0
    return out


def coupling_operator(bias: BiasPoint, basis: ChargeBasisSpec) -> np.ndarray:
    """sin(phi2 - phi1 + coupler_phase) in the charge basis."""
    e = np.exp(1j * bias.coupler_phase) * _shift(basis, -1, 1)
    return (e - e.conj().T) / 2j


def build_qubit_hamiltonian(
    params: FluxQubitParams,
    bias: BiasPoint,
    basis: ChargeBasisSpec = ChargeBasisSpec(),
    check_convergence: bool = False,
) -> np.ndarray:
    """Charge-basis Hamiltonian (GHz) of the bare qubit.

    With ``check_convergence`` the ground gap is recomputed at ``n_max + 2`` and
    :class:`CutoffTooSmall` is raised when it moves by more than 1e-6 relative.
    """
    if basis.dimension > MAX_BASIS_DIM:
        raise DimensionGuard(f"charge basis dimension {basis.dimension} exceeds {MAX_BASIS_DIM}")
    n1, n2 = basis.charges()
    cinv = np.linalg.inv(params.capacitance_matrix())
    kinetic = 4.0 * params.E_C * (cinv[0, 0] * n1**2 + 2.0 * cinv[0, 1] * n1 * n2 + cinv[1, 1] * n2**2)

    # half of each cosine; the Hermitian conjugate supplies the other half
    ej = params.E_J
    coupler = 2.0 * params.beta * math.cos(math.pi * bias.f3)
    hop = -0.5 * ej * (_shift(basis, 1, 0) + _shift(basis, 0, 1)).astype(complex)
    d = _shift(basis, -1, 1)
    hop -= 0.5 * ej * params.alpha * np.exp(1j * TWO_PI * bias.f1) * d
    hop -= 0.5 * ej * coupler * np.exp(1j * bias.coupler_phase) * d
    H = np.diag(kinetic).astype(complex) + hop + hop.conj().T

    if check_convergence:
        gap = _gap(H)
        bigger = build_qubit_hamiltonian(params, bias, ChargeBasisSpec(basis.n_max + 2))
        gap2 = _gap(bigger)
        if abs(gap2 - gap) > 1e-6 * abs(gap2):
            raise CutoffTooSmall(
                f"ground gap changes by {abs(gap2 - gap) / abs(gap2):.2e} relative "
                f"between n_max={basis.n_max} and n_max={basis.n_max + 2}"
            )
    return H


def _gap(H):
    e = scipy.linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 1])
    return e[1] - e[0]


def converged_basis(params: FluxQubitParams, bias: BiasPoint, start: int = 10, limit: int = 30) -> ChargeBasisSpec:
    """Smallest cutoff >= start (in steps of 2) passing the convergence check."""
    n = start
    while n <= limit:
        try:
            build_qubit_hamiltonian(params, bias, ChargeBasisSpec(n), check_convergence=True)
            return ChargeBasisSpec(n)
        except CutoffTooSmall:
            n += 2
    raise CutoffTooSmall(f"no cutoff up to n_max={limit} converged")


@dataclass(frozen=True)
class QubitModel:
    omega_q: float
    energies: tuple
    ground: np.ndarray = field(repr=False)
    excited: np.ndarray = field(repr=False)
    gap_delta: Optional[float] = None
    tilt_epsilon: Optional[float] = None
    persistent_current_scale: Optional[float] = None

    @property
    def frequency_ghz(self) -> float:
        return self.omega_q / TWO_PI

    @property
    def basis(self) -> np.ndarray:
        return np.column_stack([self.ground, self.excited])


def _fix_phase(v: np.ndarray, conjugation: Optional[np.ndarray]) -> np.ndarray:
    if conjugation is not None:
        # make the vector invariant under charge conjugation + complex conjugation,
        # i.e. a real wavefunction in phase space
        overlap = np.vdot(v[conjugation].conj(), v)
        if abs(overlap) > 1e-6:
            v = v * np.exp(-0.5j * np.angle(overlap))
            k = int(np.argmax(np.abs(v)))
            ref = v[k].real if abs(v[k].real) > 1e-3 * abs(v[k]) else v[k].imag
            return v if ref > 0 else -v
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def qubit_spectrum(
    H: np.ndarray,
    *,
    conjugation: Optional[np.ndarray] = None,
    exchange: Optional[np.ndarray] = None,
    current_operator: Optional[np.ndarray] = None,
    energy_scale: Optional[float] = None,
) -> QubitModel:
    """Two lowest eigenpairs of ``H`` (energies in GHz) as a :class:`QubitModel`.

    ``conjugation`` is the charge-reflection permutation used to fix eigenvector
    phases so that wavefunctions are real in phase space; without it the
    largest-magnitude component is made real positive.  When ``current_operator``
    is given the qubit splitting is resolved into tunnelling gap and flux tilt.

    ``exchange`` is a permutation commuting with ``H``.  If the first excited
    level is degenerate, the member sharing the ground state's parity under it
    is taken; the other members are dark to any operator with that symmetry.
    """
    H = np.asarray(H)
    dim = H.shape[0]
    top = min(4, dim - 1)
    e, v = scipy.linalg.eigh(H, subset_by_index=[0, top])
    scale = energy_scale if energy_scale is not None else float(np.max(np.abs(H)))
    if e[1] - e[0] < 1e-9 * scale:
        raise DegenerateGroundSpace(f"lowest levels split by {e[1] - e[0]:.3e} only")
    excited = v[:, 1]
    block = np.flatnonzero(np.abs(e - e[1]) < 1e-6 * scale)
    if exchange is not None and block.size > 1:
        parity = np.real(np.vdot(v[:, 0], v[exchange, 0]))
        W = v[:, block]
        s_vals, s_vecs = np.linalg.eigh(W.conj().T @ W[exchange])
        excited = W @ s_vecs[:, int(np.argmin(np.abs(s_vals - np.sign(parity))))]
    ground = _fix_phase(v[:, 0], conjugation)
    excited = _fix_phase(excited, conjugation)
    model = QubitModel(
        omega_q=TWO_PI * (e[1] - e[0]),
        energies=tuple(float(x) for x in e[:3]),
        ground=ground,
        excited=excited,
    )
    if current_operator is not None:
        model = resolve_tilt(model, project_operator(model, current_operator))
    return model


@dataclass(frozen=True)
class CouplingCoefficients:
    c_0: float
    c_x: float
    c_y: float
    c_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c_0, self.c_x, self.c_y, self.c_z])

    def matrix(self) -> np.ndarray:
        return sum(c * s for c, s in zip(self.as_array(), PAULIS))

    @property
    def scale(self) -> float:
        """Magnitude of the qubit-dependent part, sqrt(cx^2 + cy^2 + cz^2)."""
        return float(math.sqrt(self.c_x**2 + self.c_y**2 + self.c_z**2))

    def normalized(self) -> "CouplingCoefficients":
        """Coefficients rescaled so that cx^2 + cy^2 + cz^2 = 1.

        The overall magnitude belongs in the coupling strength g_j; this is the
        convention in which |cx|^2 + |cz|^2 = 1.
        """
        s = self.scale
        if s == 0:
            return self
        return CouplingCoefficients(self.c_0 / s, self.c_x / s, self.c_y / s, self.c_z / s)


def pauli_decompose(op2: np.ndarray) -> CouplingCoefficients:
    op2 = np.asarray(op2)
    if op2.shape != (2, 2):
        raise BasisMismatch(f"expected a 2x2 operator, got {op2.shape}")
    c = [0.5 * np.trace(s @ op2) for s in PAULIS]
    # Hermitian input gives real coefficients; keep the real part
    return CouplingCoefficients(*(float(np.real(x)) for x in c))


def project_operator(model: QubitModel, operator: np.ndarray) -> CouplingCoefficients:
    """Pauli coefficients of ``operator`` restricted to the qubit subspace."""
    operator = np.asarray(operator)
    if operator.shape != (model.ground.size, model.ground.size):
        raise BasisMismatch(
            f"operator of shape {operator.shape} does not match eigenvectors of size {model.ground.size}"
        )
    B = model.basis
    return pauli_decompose(B.conj().T @ operator @ B)


def resolve_tilt(model: QubitModel, coeffs: CouplingCoefficients) -> QubitModel:
    """Split the qubit energy into gap and tilt using the current-operator direction.

    In the eigenbasis of the projected current the Hamiltonian reads
    ``(eps*tz + Delta*tx)/2``; the current direction makes angle
    atan2(|c_perp|, c_z) with the energy axis.
    """
    e_q = model.energies[1] - model.energies[0]
    transverse = math.hypot(coeffs.c_x, coeffs.c_y)
    r = math.hypot(transverse, coeffs.c_z)
    if r == 0:
        return replace(model, gap_delta=e_q, tilt_epsilon=0.0, persistent_current_scale=0.0)
    return replace(
        model,
        gap_delta=e_q * transverse / r,
        tilt_epsilon=e_q * coeffs.c_z / r,
        persistent_current_scale=r,
    )


def coupling_coefficients(params: FluxQubitParams, bias: BiasPoint, model: QubitModel) -> CouplingCoefficients:
    basis = ChargeBasisSpec.from_dimension(model.ground.size)
    return project_operator(model, coupling_operator(bias, basis))


def solve_qubit(params: FluxQubitParams, bias: BiasPoint, basis: ChargeBasisSpec = ChargeBasisSpec()):
    """Convenience: Hamiltonian, spectrum (with gap/tilt) and raw coefficients."""
    H = build_qubit_hamiltonian(params, bias, basis)
    op = coupling_operator(bias, basis)
    model = qubit_spectrum(
        H, conjugation=basis.conjugation(), exchange=basis.exchange(), current_operator=op, energy_scale=params.E_J
    )
    return model, project_operator(model, op)


@dataclass
class CoefficientSurface:
    alphas: np.ndarray
    f1s: np.ndarray
    omega_q: np.ndarray
    coefficients: np.ndarray  # (n_alpha, n_f1, 4): raw c0, cx, cy, cz
    gap_delta: np.ndarray
    tilt_epsilon: np.ndarray
    reconstruction_residual: Optional[np.ndarray] = None  # Frobenius norm of P - sum_v c_v sigma_v

    @property
    def shape(self):
        return self.omega_q.shape

    def normalized(self) -> np.ndarray:
        c = self.coefficients
        s = np.linalg.norm(c[..., 1:], axis=-1, keepdims=True)
        return np.divide(c, s, out=np.zeros_like(c), where=s > 0)

    def rows(self, normalized: bool = True):
        c = self.normalized() if normalized else self.coefficients
        for i, a in enumerate(self.alphas):
            for j, f in enumerate(self.f1s):
                yield (float(a), float(f), float(self.omega_q[i, j] / TWO_PI), *map(float, c[i, j]))


def _sweep_row(args):
    params, alpha, f1_grid, template, n_max = args
    p = replace(params, alpha=float(alpha))
    basis = ChargeBasisSpec(n_max)
    conj, exch = basis.conjugation(), basis.exchange()
    out = []
    prev = None
    for f1 in f1_grid:
        bias = replace(template, f1=float(f1))
        try:
            H = build_qubit_hamiltonian(p, bias, basis)
            op = coupling_operator(bias, basis)
            model = qubit_spectrum(H, conjugation=conj, exchange=exch, energy_scale=p.E_J)
        except Exception as exc:  # attach the grid point
            raise type(exc)(f"at alpha={alpha}, f1={f1}: {exc}") from exc
        if prev is not None:
            # keep eigenvector signs continuous along the row
            g, e = model.ground, model.excited
            if np.vdot(prev[0], g).real < 0:
                g = -g
            if np.vdot(prev[1], e).real < 0:
                e = -e
            model = replace(model, ground=g, excited=e)
        prev = (model.ground, model.excited)
        P = model.basis.conj().T @ op @ model.basis
        c = pauli_decompose(P)
        model = resolve_tilt(model, c)
        out.append((model.omega_q, c.as_array(), model.gap_delta, model.tilt_epsilon, np.linalg.norm(P - c.matrix())))
    return out


def sweep_bias(
    params: FluxQubitParams,
    alpha_grid: Sequence[float],
    f1_grid: Sequence[float],
    template: BiasPoint = BiasPoint(0.5),
    basis: ChargeBasisSpec = ChargeBasisSpec(),
    jobs: int = 1,
) -> CoefficientSurface:
    """Spectrum and coupling coefficients over an (alpha, f1) grid.

    Rows of constant alpha are independent tasks; within a row eigenvector
    signs follow the previous grid point so coefficient signs vary smoothly.
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    f1s = np.asarray(f1_grid, dtype=float)
    if alphas.size == 0 or f1s.size == 0:
        raise ValueError("grids must be non-empty")
    if np.any(np.diff(alphas) < 0) or np.any(np.diff(f1s) < 0):
        raise ValueError("grids must be sorted")
    tasks = [(params, a, f1s, template, basis.n_max) for a in alphas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(t) for t in tasks]
    omega = np.array([[r[0] for r in row] for row in rows])
    coeffs = np.array([[r[1] for r in row] for row in rows])
    gap = np.array([[r[2] for r in row] for row in rows])
    tilt = np.array([[r[3] for r in row] for row in rows])
    resid = np.array([[r[4] for r in row] for row in rows])
    return CoefficientSurface(alphas, f1s, omega, coeffs, gap, tilt, resid)
