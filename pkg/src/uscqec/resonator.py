"""Eigenmodes of a coplanar waveguide resonator cut by N coupling junctions.

The resonator of length L is split into N+1 equal segments of length
a = L/(N+1).  Each junction is a linear inductance L_J shunted by the
capacitance (gamma + 2*beta)*C_J.  Boundary conditions: no current at both
ends, current continuity at each junction, and the junction current-flux
relation  -phi'(ja)/l = C_s * d2/dt2(dphi_j) + dphi_j / L_J.

Roots are located with a Wittrick-Williams count on the dynamic stiffness
matrix (number of modes below a trial frequency), so exactly degenerate
manifolds are bracketed with their multiplicity.  Mode shapes come from the
null space of the segment-coefficient boundary system.

SI units inside; frequencies handed out are angular, in rad/ns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.integrate import simpson

from .errors import NotDegenerate, RootBracketingFailure

PHI0_REDUCED = 1.054571817e-34 / (2 * 1.602176634e-19)  # hbar / 2e, Wb
PLANCK = 6.62607015e-34


@dataclass(frozen=True)
class ResonatorParams:
    length_L: float
    induct_per_len_l: float
    cap_per_len_c: float
    N_qubits: int
    C_J: float
    L_J: float
    gamma: float = 0.5
    beta: float = 0.1

    def __post_init__(self):
        if min(self.length_L, self.induct_per_len_l, self.cap_per_len_c, self.C_J, self.L_J) <= 0:
            raise ValueError("resonator parameters must be positive")
        if self.N_qubits < 0:
            raise ValueError("N_qubits must be non-negative")

    @property
    def velocity(self) -> float:
        return 1.0 / math.sqrt(self.induct_per_len_l * self.cap_per_len_c)

    @property
    def impedance(self) -> float:
        return math.sqrt(self.induct_per_len_l / self.cap_per_len_c)

    @property
    def spacing(self) -> float:
        return self.length_L / (self.N_qubits + 1)

    @property
    def shunt_capacitance(self) -> float:
        return (self.gamma + 2.0 * self.beta) * self.C_J

    @property
    def plasma_frequency(self) -> float:
        """1/sqrt(C_J L_J) in rad/s."""
        return 1.0 / math.sqrt(self.C_J * self.L_J)

    @property
    def junction_resonance(self) -> float:
        """Resonance of the shunted junction, 1/sqrt(C_s L_J), rad/s."""
        return 1.0 / math.sqrt(self.shunt_capacitance * self.L_J)

    @property
    def band_frequency(self) -> float:
        """pi v (N+1) / L in rad/s."""
        return math.pi * self.velocity / self.spacing

    def tuned(self) -> "ResonatorParams":
        """Same resonator with L_J chosen so the junction resonance sits on the band."""
        w = self.band_frequency
        return replace(self, L_J=1.0 / (w * w * self.shunt_capacitance))


def default_params(N: int = 5, band_ghz: float = 5.0, E_J_ghz: float = 221.0, gamma: float = 0.5, beta: float = 0.1):
    """Synthetic 50-ohm resonator whose first manifold sits at ``band_ghz``.

    The junction inductance follows from E_J6 = gamma*E_J and the junction
    capacitance is then chosen so that the shunt resonance matches the band.
    """
    l, c = 4.16e-7, 1.66e-10
    v = 1.0 / math.sqrt(l * c)
    L = v * (N + 1) / (2.0 * band_ghz * 1e9)
    L_J = PHI0_REDUCED**2 / (gamma * E_J_ghz * 1e9 * PLANCK)
    w = 2 * math.pi * band_ghz * 1e9
    C_J = 1.0 / (w * w * L_J * (gamma + 2 * beta))
    return ResonatorParams(L, l, c, N, C_J, L_J, gamma, beta)


def _junction_admittance(p: ResonatorParams, w: float) -> float:
    return 1.0 / p.L_J - w * w * p.shunt_capacitance


def dynamic_stiffness(p: ResonatorParams, w: float) -> np.ndarray:
    """Dynamic stiffness matrix on the 2(N+1) segment end fluxes."""
    k = w / p.velocity
    ka = k * p.spacing
    s = math.sin(ka)
    cot, csc = math.cos(ka) / s, 1.0 / s
    block = (k / p.induct_per_len_l) * np.array([[cot, -csc], [-csc, cot]])
    n = 2 * (p.N_qubits + 1)
    K = np.zeros((n, n))
    for seg in range(p.N_qubits + 1):
        K[2 * seg : 2 * seg + 2, 2 * seg : 2 * seg + 2] += block
    y = _junction_admittance(p, w)
    for j in range(p.N_qubits):
        i = 2 * j + 1
        K[i : i + 2, i : i + 2] += y * np.array([[1.0, -1.0], [-1.0, 1.0]])
    return K


def rotated_stiffness(p: ResonatorParams, w: float) -> np.ndarray:
    """Dynamic stiffness in per-segment (sum, difference) end-flux coordinates.

    Segment terms become -tan(ka/2) and cot(ka/2) exactly, avoiding the
    cancellation of cot(ka) against csc(ka) close to the segment poles.
    """
    k = w / p.velocity
    half = 0.5 * k * p.spacing
    n_seg = p.N_qubits + 1
    K = np.zeros((2 * n_seg, 2 * n_seg))
    scale = k / p.induct_per_len_l
    for seg in range(n_seg):
        K[2 * seg, 2 * seg] = -scale * math.tan(half)
        K[2 * seg + 1, 2 * seg + 1] = scale / math.tan(half)
    y = _junction_admittance(p, w)
    r = 1.0 / math.sqrt(2.0)
    for j in range(p.N_qubits):
        v = np.zeros(2 * n_seg)
        # right end of segment j minus left end of segment j + 1
        v[[2 * j, 2 * j + 1, 2 * j + 2, 2 * j + 3]] = [r, -r, -r, -r]
        K += y * np.outer(v, v)
    return K


def mode_count(p: ResonatorParams, w: float) -> int:
    """Number of eigenfrequencies in (0, w), Wittrick-Williams style.

    The inertia of the stiffness matrix is taken block-wise (Haynsworth) in
    per-segment sum/difference coordinates, eliminating the group whose
    segment term is near its pole first; near the band frequency the direct
    eigenvalue count is too ill-conditioned.
    """
    ka = w / p.velocity * p.spacing
    n_seg = p.N_qubits + 1
    clamped = n_seg * math.floor(ka / math.pi)
    K = rotated_stiffness(p, w)
    sums, diffs = np.arange(0, 2 * n_seg, 2), np.arange(1, 2 * n_seg, 2)
    # sum coordinates carry -tan(ka/2), difference coordinates cot(ka/2)
    stiff, soft = (sums, diffs) if abs(math.tan(ka / 2)) > 1.0 else (diffs, sums)
    A = K[np.ix_(stiff, stiff)]
    B = K[np.ix_(stiff, soft)]
    schur = K[np.ix_(soft, soft)] - B.T @ np.linalg.solve(A, B)
    negative = int(np.sum(np.linalg.eigvalsh(A) < 0) + np.sum(np.linalg.eigvalsh(schur) < 0))
    # the uniform (zero-frequency) mode is always counted
    return clamped + negative - 1


def _safe(p: ResonatorParams, w: float) -> float:
    # stay off the segment poles where sin(ka) = 0
    ka = w / p.velocity * p.spacing
    if abs(math.sin(ka)) < 1e-13:
        w *= 1 + 1e-13
    return w


def boundary_matrix(p: ResonatorParams, w: float) -> np.ndarray:
    """Rows: end conditions, current continuity, junction relations.

    Unknowns per segment s: (A_s, B_s) with phi_s = A_s cos(k x) + B_s sin(k x),
    x measured from the segment's left end.  Rows are dimensionless.
    """
    N = p.N_qubits
    k = w / p.velocity
    ka = k * p.spacing
    c, s = math.cos(ka), math.sin(ka)
    lam = p.induct_per_len_l * _junction_admittance(p, w) / k
    M = np.zeros((2 * (N + 1), 2 * (N + 1)))
    M[0, 1] = 1.0
    M[1, 2 * N] = -s
    M[1, 2 * N + 1] = c
    for j in range(1, N + 1):
        left, right = 2 * (j - 1), 2 * j
        r = 2 * j
        M[r, left] = -s
        M[r, left + 1] = c
        M[r, right + 1] = -1.0
        # -phi'/(l) = Y dphi  ->  -B_j - lam (A_{j-1} c + B_{j-1} s - A_j) = 0
        M[r + 1, right + 1] = -1.0
        M[r + 1, left] = -lam * c
        M[r + 1, left + 1] = -lam * s
        M[r + 1, right] = lam
    return M


@dataclass
class EigenmodeSet:
    frequencies: np.ndarray  # rad/ns, ascending
    x: np.ndarray = field(repr=False)  # sample positions, m (segment ends duplicated)
    segment_of_sample: np.ndarray = field(repr=False)
    mode_functions: np.ndarray = field(repr=False)  # (n_modes, n_samples)
    coefficients: np.ndarray = field(repr=False)  # (n_modes, 2(N+1)) segment (A, B)
    flux_drops: np.ndarray  # (n_modes, N)
    residuals: np.ndarray
    effective_masses: Optional[np.ndarray] = None

    @property
    def freqs_ghz(self) -> np.ndarray:
        return self.frequencies / (2 * math.pi)

    def __len__(self):
        return len(self.frequencies)


def _isolate(p: ResonatorParams, lo: float, hi: float, clo: int, chi: int, rtol: float, out: list):
    """Recursive bisection on the mode count; appends (omega, multiplicity)."""
    if chi == clo:
        return
    if chi < clo:
        raise RootBracketingFailure(f"mode count decreased on [{lo:.6e}, {hi:.6e}] rad/s", (lo, hi))
    if hi - lo <= rtol * hi:
        out.append((0.5 * (lo + hi), chi - clo))
        return
    mid = _safe(p, 0.5 * (lo + hi))
    if not lo < mid < hi:
        # interval narrower than the pole guard: resolved as far as it goes
        out.append((0.5 * (lo + hi), chi - clo))
        return
    cm = mode_count(p, mid)
    _isolate(p, lo, mid, clo, cm, rtol, out)
    _isolate(p, mid, hi, cm, chi, rtol, out)


def _segment_samples(p: ResonatorParams, per_segment: int):
    t = np.linspace(0.0, p.spacing, per_segment + 1)
    xs = np.concatenate([s * p.spacing + t for s in range(p.N_qubits + 1)])
    seg = np.repeat(np.arange(p.N_qubits + 1), per_segment + 1)
    local = np.tile(t, p.N_qubits + 1)
    return xs, seg, local


def _shapes(p: ResonatorParams, w: float, coeffs: np.ndarray, per_segment: int):
    k = w / p.velocity
    xs, seg, local = _segment_samples(p, per_segment)
    A = coeffs[:, 0::2][:, seg]
    B = coeffs[:, 1::2][:, seg]
    return xs, seg, A * np.cos(k * local) + B * np.sin(k * local)


def _drops(p: ResonatorParams, w: float, coeffs: np.ndarray) -> np.ndarray:
    ka = w / p.velocity * p.spacing
    A, B = coeffs[:, 0::2], coeffs[:, 1::2]
    return A[:, :-1] * math.cos(ka) + B[:, :-1] * math.sin(ka) - A[:, 1:]


def _mass_gram(p: ResonatorParams, xs, seg, funcs, drops, per_segment):
    n = funcs.shape[0]
    G = np.zeros((n, n))
    for s in range(p.N_qubits + 1):
        sel = seg == s
        prod = funcs[:, None, sel] * funcs[None, :, sel]
        G += p.cap_per_len_c * simpson(prod, x=xs[sel], axis=-1)
    G += p.shunt_capacitance * drops @ drops.T
    return G


def mode_equation_roots(
    params: ResonatorParams,
    max_freq: float,
    samples_per_segment: int = 512,
    rtol: float = 1e-12,
) -> EigenmodeSet:
    """All eigenmodes with angular frequency in (0, max_freq], max_freq in rad/ns.

    The count is scanned on a uniform grid of step band/200, each increase is
    bisected down to ``rtol`` relative width; multiplicities come from the size
    of the count jump.
    """
    if max_freq <= 0:
        raise ValueError("max_freq must be positive")
    p = params
    w_max = max_freq * 1e9
    step = p.band_frequency / 200.0
    grid = np.arange(step, w_max + step, step)
    grid[-1] = min(grid[-1], w_max)
    grid = np.unique(np.concatenate([[step * 1e-3], grid]))
    roots: list = []
    prev_w, prev_c = grid[0], mode_count(p, _safe(p, grid[0]))
    if prev_c != 0:
        raise RootBracketingFailure("modes below the scan start", (0.0, grid[0]))
    for w in grid[1:]:
        w = _safe(p, w)
        c = mode_count(p, w)
        if c != prev_c:
            _isolate(p, prev_w, w, prev_c, c, rtol, roots)
        prev_w, prev_c = w, c

    freqs, coeffs, resid = [], [], []
    for w, mult in roots:
        M = boundary_matrix(p, w)
        _, sv, vt = np.linalg.svd(M)
        null = vt[-mult:]
        # relative residual of the boundary system for each basis vector
        res = np.linalg.norm(M @ null.T, axis=0) / np.linalg.norm(M, 2)
        if mult > 1:
            # orthogonalise the degenerate block with respect to the mass form
            xs, seg, f = _shapes(p, w, null, samples_per_segment)
            G = _mass_gram(p, xs, seg, f, _drops(p, w, null), samples_per_segment)
            evals, evecs = np.linalg.eigh(G)
            null = evecs.T @ null
        freqs.extend([w] * mult)
        coeffs.extend(list(null))
        resid.extend(list(res))

    coeffs = np.array(coeffs).reshape(len(freqs), 2 * (p.N_qubits + 1))
    freqs = np.array(freqs)
    xs, seg, _ = _segment_samples(p, samples_per_segment)
    funcs, drops = [], []
    for i, w in enumerate(freqs):
        _, _, f = _shapes(p, w, coeffs[i : i + 1], samples_per_segment)
        # unit peak amplitude, largest sample positive
        coeffs[i] /= f[0, np.argmax(np.abs(f[0]))]
        funcs.append(_shapes(p, w, coeffs[i : i + 1], samples_per_segment)[2][0])
        drops.append(_drops(p, w, coeffs[i : i + 1])[0])
    modes = EigenmodeSet(
        frequencies=freqs * 1e-9,
        x=xs,
        segment_of_sample=seg,
        mode_functions=np.array(funcs).reshape(len(freqs), xs.size),
        coefficients=coeffs,
        flux_drops=np.array(drops).reshape(len(freqs), p.N_qubits),
        residuals=np.array(resid),
    )
    modes.effective_masses = effective_masses(p, modes)
    return modes


def effective_masses(params: ResonatorParams, modes: EigenmodeSet) -> np.ndarray:
    """m_i = c * integral(r_i^2) + C_s * sum_j (jump of r_i at junction j)^2.

    Integrals use composite Simpson per segment on the stored samples.
    """
    p = params
    out = np.zeros(len(modes))
    for s in range(p.N_qubits + 1):
        sel = modes.segment_of_sample == s
        out += p.cap_per_len_c * simpson(modes.mode_functions[:, sel] ** 2, x=modes.x[sel], axis=-1)
    out += p.shunt_capacitance * np.sum(modes.flux_drops**2, axis=1)
    return out


@dataclass(frozen=True)
class ManifoldSpec:
    degenerate_frequency: float  # rad/ns
    mode_count_M: int
    coupling_profile: tuple
    spread: float  # relative spread of the manifold frequencies


def coupling_profile(N: int) -> np.ndarray:
    """sqrt(2/(N+1)) sin(pi j/(N+1)) for j = 1..N."""
    j = np.arange(1, N + 1)
    return np.sqrt(2.0 / (N + 1)) * np.sin(np.pi * j / (N + 1))


def degenerate_manifold(params: ResonatorParams, window: float = 1e-6) -> ManifoldSpec:
    """Manifold of the N+1 modes around the band frequency.

    ``window`` bounds the relative spread (max - min)/band of those modes;
    :class:`NotDegenerate` is raised when it is exceeded.  Inside the manifold
    the mass-orthogonal basis consists of lattice standing waves; the coupling
    profile is read off the solved nodeless one (flux drops of a single sign),
    normalised to unit length.
    """
    p = params
    band = p.band_frequency
    N = p.N_qubits
    modes = mode_equation_roots(p, 1.25 * band * 1e-9)
    w = modes.frequencies * 1e9
    if w.size < N + 1:
        raise NotDegenerate(f"only {w.size} modes below 1.25 band, need {N + 1}")
    near = np.sort(np.argsort(np.abs(w - band))[: N + 1])
    spread = (w[near].max() - w[near].min()) / band
    if spread > window:
        raise NotDegenerate(f"manifold spread {spread:.3e} exceeds window {window:.1e}")
    profile = np.zeros(N)
    if N:
        drops = modes.flux_drops[near]
        norms = np.linalg.norm(drops, axis=1)
        scale = norms.max()
        nodeless = [
            i for i, d in enumerate(drops)
            if norms[i] > 1e-6 * scale and (np.all(d > 1e-9 * scale) or np.all(d < -1e-9 * scale))
        ]
        if len(nodeless) != 1:
            raise NotDegenerate(f"expected one nodeless manifold mode, found {len(nodeless)}")
        d = drops[nodeless[0]]
        profile = np.abs(d) / np.linalg.norm(d)
    return ManifoldSpec(
        degenerate_frequency=float(np.mean(w[near])) * 1e-9,
        mode_count_M=N + 1,
        coupling_profile=tuple(float(x) for x in profile),
        spread=float(spread),
    )
