"""Monte Carlo fidelity of graph-code construction under depolarizing gate noise.

Every construction prepares |+> on all qubits (single-qubit depolarizing p1
after each preparation), applies CZ over the graph edges (two-qubit
depolarizing p2 after each gate), then X-measures the measure set with
classical flip probability p_m, correcting each recorded -1 by its byproduct.

Depolarizing convention: with probability p one of the 4^k - 1 non-identity
Paulis on the k-qubit support, chosen uniformly.

Three evaluation paths share one per-trial random layout:
``frame``   Pauli-frame propagation, vectorised over trials (the default);
``dense``   statevector trajectories, for validation on small instances;
``channel`` exact density-matrix composition, no sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .graphcode.graphs import GraphSpec, _apply_two_qubit, cluster_stabilizers, five_cycle, measure_x, steane_graph
from .graphcode.pauli import PauliString
from .graphcode.tableau import StabilizerTableau

DRAWS_PER_LOCATION = 2
CZ_DIAG = np.array([1.0, 1.0, 1.0, -1.0])


@dataclass(frozen=True)
class NoiseModel:
    p1: float = 0.0
    p2: float = 0.0
    p_m: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "p_m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class FidelityEstimate:
    mean: float
    std_error: float
    trials: int
    seed: int
    acceptance: Optional[float] = None


# ---------------------------------------------------------------------------
# constructions


@dataclass(frozen=True)
class Construction:
    """Gate sequence of one code: |+> preparations, CZ edges, X measurements."""

    name: str
    graph: GraphSpec
    noisy_corrections: bool = False

    @property
    def n(self) -> int:
        return self.graph.n_vertices

    def locations(self) -> List[Tuple[str, Tuple[int, ...]]]:
        """Noise locations in draw order: ('p1', (q,)) or ('p2', (a, b))."""
        locs = [("p1", (q,)) for q in range(self.n)]
        for a, b in self.graph.edges:
            locs.append(("p2", (a, b)))
            if self.noisy_corrections:
                locs += [("p1", (a,)), ("p1", (b,))]
        return locs

    @property
    def n_draws(self) -> int:
        return DRAWS_PER_LOCATION * len(self.locations()) + 2 * len(self.graph.measure_set)


def _toy_graphs() -> Dict[str, GraphSpec]:
    return {
        "pair": GraphSpec(2, ((0, 1),)),
        "triangle": GraphSpec(3, ((0, 1), (1, 2), (0, 2))),
        "line3": GraphSpec(3, ((0, 1), (1, 2)), (1,)),
    }


def construction(code: str, noisy_corrections: bool = False) -> Construction:
    """Named constructions: five-qubit, steane, and the toys pair, triangle, line3."""
    if code == "five-qubit":
        g = five_cycle()
    elif code == "steane":
        g = steane_graph()
    else:
        toys = _toy_graphs()
        if code not in toys:
            raise ValueError(f"unknown code {code!r}")
        g = toys[code]
    return Construction(code, g, noisy_corrections)


@dataclass
class _Plan:
    byproducts: List[Tuple[np.ndarray, np.ndarray]]
    target: StabilizerTableau
    kept: Tuple[int, ...]


@lru_cache(maxsize=None)
def _plan(graph: GraphSpec) -> _Plan:
    """Byproduct letters per measurement and the ideal post-measurement state."""
    t = cluster_stabilizers(graph)
    ms = graph.measure_set
    if not ms:
        return _Plan([], t, tuple(range(graph.n_vertices)))
    res = measure_x(t, ms, mode="corrected", outcomes=[-1] * len(ms))
    byps = []
    for b in res.byproducts:
        if b is None:
            raise ValueError("measurement outcome is deterministic; no byproduct available")
        byps.append((np.array(b.x, dtype=np.uint8), np.array(b.z, dtype=np.uint8)))
    target = measure_x(t, ms, mode="corrected").state
    return _Plan(byps, target, res.kept)


def target_state(code: str) -> StabilizerTableau:
    """Stabilizer group of the ideal final state of a construction."""
    return _plan(construction(code).graph).target


# ---------------------------------------------------------------------------
# random layout


def trial_uniforms(seed: int, trials: int, n_draws: int) -> np.ndarray:
    """Uniforms of shape (trials, n_draws); row k depends only on (seed, k)."""
    out = np.empty((trials, n_draws))
    for k in range(trials):
        ss = np.random.SeedSequence(seed, spawn_key=(k,))
        out[k] = np.random.Generator(np.random.Philox(ss)).random(n_draws)
    return out


_UNIFORM_CACHE: Dict[Tuple[int, int, int], np.ndarray] = {}


def _uniforms(seed: int, trials: int, n_draws: int) -> np.ndarray:
    key = (int(seed), int(trials), int(n_draws))
    if key not in _UNIFORM_CACHE:
        if len(_UNIFORM_CACHE) > 8:
            _UNIFORM_CACHE.clear()
        _UNIFORM_CACHE[key] = trial_uniforms(*key)
    return _UNIFORM_CACHE[key]


def _sampled_paulis(u_hit: np.ndarray, u_which: np.ndarray, p: float, k: int) -> np.ndarray:
    """Index 0 (no error) or 1..4^k-1 (which Pauli) per trial."""
    hit = u_hit < p
    which = 1 + np.minimum((u_which * (4**k - 1)).astype(np.int64), 4**k - 2)
    return np.where(hit, which, 0)


def _index_bits(idx: np.ndarray, k: int):
    """(x, z) bit arrays of shape (trials, k) for Pauli index idx on k qubits.

    Index digits in base 4, most significant first; digit 0..3 = I, X, Y, Z.
    """
    xs, zs = [], []
    for j in range(k):
        d = (idx // 4 ** (k - 1 - j)) % 4
        xs.append(((d == 1) | (d == 2)).astype(np.uint8))
        zs.append(((d == 2) | (d == 3)).astype(np.uint8))
    return np.stack(xs, axis=-1), np.stack(zs, axis=-1)


# ---------------------------------------------------------------------------
# frame path


def _frame_fidelities(con: Construction, noise: NoiseModel, U: np.ndarray, postselect: bool):
    trials = U.shape[0]
    n = con.n
    plan = _plan(con.graph)
    fx = np.zeros((trials, n), dtype=np.uint8)
    fz = np.zeros((trials, n), dtype=np.uint8)
    col = 0
    for kind, support in con.locations():
        if kind == "p2":
            a, b = support
            # CZ propagation of the existing frame
            fz[:, a] ^= fx[:, b]
            fz[:, b] ^= fx[:, a]
        p = noise.p1 if kind == "p1" else noise.p2
        k = len(support)
        idx = _sampled_paulis(U[:, col], U[:, col + 1], p, k)
        col += DRAWS_PER_LOCATION
        ex, ez = _index_bits(idx, k)
        for j, q in enumerate(support):
            fx[:, q] ^= ex[:, j]
            fz[:, q] ^= ez[:, j]
    accept = np.ones(trials, dtype=bool)
    for m, q in enumerate(con.graph.measure_set):
        flip = (U[:, col] < noise.p_m).astype(np.uint8)
        ideal_minus = (U[:, col + 1] < 0.5).astype(np.uint8)
        col += 2
        wrong = fz[:, q] ^ flip
        bx, bz = plan.byproducts[m]
        fx ^= wrong[:, None] * bx[None, :]
        fz ^= wrong[:, None] * bz[None, :]
        if postselect:
            # recorded +1 requires the ideal outcome to equal the flip pattern
            accept &= ideal_minus == wrong
    kept = list(plan.kept)
    kx, kz = fx[:, kept].astype(np.int64), fz[:, kept].astype(np.int64)
    t = plan.target
    anti = (kx @ t.z.T.astype(np.int64) + kz @ t.x.T.astype(np.int64)) % 2
    fid = (~anti.any(axis=1)).astype(float)
    return fid, accept


# ---------------------------------------------------------------------------
# dense trajectory path

_PAULI_MATS = {
    (0, 0): np.eye(2),
    (1, 0): np.array([[0, 1], [1, 0]], dtype=complex),
    (1, 1): np.array([[0, -1j], [1j, 0]]),
    (0, 1): np.diag([1.0, -1.0]).astype(complex),
}


def _apply_single(psi: np.ndarray, M: np.ndarray, q: int, n: int) -> np.ndarray:
    t = np.tensordot(M, psi.reshape((2,) * n), axes=([1], [q]))
    return np.moveaxis(t, 0, q).reshape(-1)


def _target_vector(con: Construction) -> np.ndarray:
    return _plan(con.graph).target.state_vector()


def _dense_fidelities(con: Construction, noise: NoiseModel, U: np.ndarray, postselect: bool):
    n = con.n
    if n > 12:
        raise ValueError("dense trajectories are limited to 12 qubits")
    plan = _plan(con.graph)
    target = _target_vector(con)
    CZm = np.diag(CZ_DIAG).astype(complex)
    plus = np.array([1.0, 1.0]) / math.sqrt(2.0)
    minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
    fids = np.zeros(U.shape[0])
    accept = np.ones(U.shape[0], dtype=bool)
    locs = con.locations()
    for tr in range(U.shape[0]):
        u = U[tr]
        psi = np.full(2**n, 2.0 ** (-n / 2), dtype=complex)
        col = 0
        for kind, support in locs:
            if kind == "p2":
                psi = _apply_two_qubit(psi, CZm, support[0], support[1], n)
            p = noise.p1 if kind == "p1" else noise.p2
            k = len(support)
            idx = _sampled_paulis(u[col : col + 1], u[col + 1 : col + 2], p, k)
            col += DRAWS_PER_LOCATION
            ex, ez = _index_bits(idx, k)
            for j, q in enumerate(support):
                key = (int(ex[0, j]), int(ez[0, j]))
                if key != (0, 0):
                    psi = _apply_single(psi, _PAULI_MATS[key], q, n)
        outs = []
        for m, q in enumerate(con.graph.measure_set):
            flip = u[col] < noise.p_m
            # actual outcome sampled from the Born rule with the layout's outcome draw
            t = psi.reshape((2,) * n)
            p_plus = np.linalg.norm(np.tensordot(plus, t, axes=([0], [q]))) ** 2
            actual = -1 if u[col + 1] < 1.0 - p_plus else 1
            col += 2
            v = plus if actual == 1 else minus
            psi = _apply_single(psi, np.outer(v, v), q, n)
            psi /= np.linalg.norm(psi)
            recorded = -actual if flip else actual
            outs.append(actual)
            if postselect:
                accept[tr] &= recorded == 1
            elif recorded == -1:
                bx, bz = plan.byproducts[m]
                psi = PauliString(bx, bz).apply_to_vector(psi)
        red = psi.reshape((2,) * n)
        for m, q in sorted(enumerate(con.graph.measure_set), key=lambda e: -e[1]):
            v = plus if outs[m] == 1 else minus
            red = np.tensordot(v, red, axes=([0], [q]))
        red = red.reshape(-1)
        fids[tr] = abs(np.vdot(target, red)) ** 2 / np.vdot(red, red).real
    return fids, accept


# ---------------------------------------------------------------------------
# exact channel path


def _pauli_list(k: int):
    out = []
    for idx in range(1, 4**k):
        ex, ez = _index_bits(np.array([idx]), k)
        out.append([(int(ex[0, j]), int(ez[0, j])) for j in range(k)])
    return out


def _conj(rho: np.ndarray, ops: Sequence[Tuple[np.ndarray, int]], n: int) -> np.ndarray:
    """Apply single-qubit matrices on both sides of rho."""
    t = rho.reshape((2,) * (2 * n))
    for M, q in ops:
        t = np.moveaxis(np.tensordot(M, t, axes=([1], [q])), 0, q)
        t = np.moveaxis(np.tensordot(M.conj(), t, axes=([1], [n + q])), 0, n + q)
    return t.reshape(rho.shape)


def depolarize(state: np.ndarray, support: Sequence[int], p: float, mode: str = "channel", rng=None) -> np.ndarray:
    """Depolarizing channel on ``support`` (1 or 2 qubits) of an n-qubit state.

    ``channel`` takes and returns a density matrix with the exact mixture;
    ``trajectory`` takes a state vector and applies one sampled Pauli.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    k = len(support)
    if k not in (1, 2):
        raise ValueError("support must hold one or two qubits")
    state = np.asarray(state, dtype=complex)
    dim = state.shape[0]
    n = int(round(math.log2(dim)))
    if mode == "trajectory":
        if state.ndim != 1:
            raise ValueError("trajectory mode expects a state vector")
        rng = rng or np.random.default_rng()
        idx = _sampled_paulis(np.array([rng.random()]), np.array([rng.random()]), p, k)
        ex, ez = _index_bits(idx, k)
        out = state
        for j, q in enumerate(support):
            key = (int(ex[0, j]), int(ez[0, j]))
            if key != (0, 0):
                out = _apply_single(out, _PAULI_MATS[key], q, n)
        return out
    if mode != "channel":
        raise ValueError(f"unknown mode {mode!r}")
    rho = np.outer(state, state.conj()) if state.ndim == 1 else state
    if p == 0:
        return rho.copy()
    acc = (1.0 - p) * rho
    w = p / (4**k - 1)
    for letters in _pauli_list(k):
        ops = [(_PAULI_MATS[l], q) for l, q in zip(letters, support) if l != (0, 0)]
        acc = acc + w * _conj(rho, ops, n)
    return acc


def exact_channel_fidelity(code: str, noise: NoiseModel, noisy_corrections: bool = False) -> float:
    """Fidelity of the exact noisy output (density-matrix composition) with the ideal state."""
    con = construction(code, noisy_corrections)
    n = con.n
    if n > 10:
        raise ValueError("exact channel composition is limited to 10 qubits")
    plan = _plan(con.graph)
    CZm = np.diag(CZ_DIAG).astype(complex)
    plus = np.full(2**n, 2.0 ** (-n / 2), dtype=complex)
    rho = np.outer(plus, plus.conj())
    for kind, support in con.locations():
        if kind == "p2":
            a, b = support
            d = np.ones((2,) * n)
            idx = [slice(None)] * n
            idx[a], idx[b] = 1, 1
            d[tuple(idx)] = -1
            d = d.reshape(-1)
            rho = d[:, None] * rho * d[None, :]
        rho = depolarize(rho, support, noise.p1 if kind == "p1" else noise.p2)
    pm = np.array([[1.0, 1.0], [1.0, 1.0]]) / 2.0
    mm = np.array([[1.0, -1.0], [-1.0, 1.0]]) / 2.0
    for m, q in enumerate(con.graph.measure_set):
        bx, bz = plan.byproducts[m]
        B = PauliString(bx, bz).to_matrix()
        parts = []
        for proj, sign in ((pm, 1), (mm, -1)):
            r = _conj(rho, [(proj, q)], n)
            p_wrong = noise.p_m
            # recorded -1 (with probability depending on the flip) triggers B
            p_b = (1.0 - p_wrong) if sign == -1 else p_wrong
            parts.append((1.0 - p_b) * r + p_b * (B @ r @ B.conj().T))
        rho = parts[0] + parts[1]
    # trace out measured qubits
    keep = list(plan.kept)
    t = rho.reshape((2,) * (2 * n))
    for q in sorted(con.graph.measure_set, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + t.ndim // 2)
    d = 2 ** len(keep)
    red = t.reshape(d, d)
    target = plan.target.state_vector()
    return float(np.real(np.vdot(target, red @ target)))


# ---------------------------------------------------------------------------
# public estimator


def montecarlo_fidelity(
    code: str,
    noise: NoiseModel,
    trials: int,
    seed: int = 0,
    path: str = "frame",
    mode: str = "corrected",
    noisy_corrections: bool = False,
) -> FidelityEstimate:
    """Average state fidelity of the noisy construction over ``trials`` runs.

    ``path`` is ``frame`` (Pauli frames), ``dense`` (statevectors) or
    ``channel`` (exact; returns zero standard error).  ``mode="postselect"``
    keeps only trials whose recorded outcomes are all +1 and reports the
    acceptance rate.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if mode not in ("corrected", "postselect"):
        raise ValueError(f"unknown mode {mode!r}")
    if path == "channel":
        if mode != "corrected":
            raise ValueError("channel path supports corrected mode only")
        return FidelityEstimate(exact_channel_fidelity(code, noise, noisy_corrections), 0.0, trials, seed)
    con = construction(code, noisy_corrections)
    U = _uniforms(seed, trials, con.n_draws)
    if path == "frame":
        fid, acc = _frame_fidelities(con, noise, U, mode == "postselect")
    elif path == "dense":
        fid, acc = _dense_fidelities(con, noise, U, mode == "postselect")
    else:
        raise ValueError(f"unknown path {path!r}")
    acceptance = None
    if mode == "postselect":
        acceptance = float(acc.mean())
        fid = fid[acc]
        if fid.size == 0:
            return FidelityEstimate(float("nan"), float("nan"), 0, seed, acceptance)
    mean = float(fid.mean())
    se = float(fid.std(ddof=1) / math.sqrt(fid.size)) if fid.size > 1 else 0.0
    return FidelityEstimate(mean, se, int(fid.size), seed, acceptance)


def fidelity_surface(code: str, p1_grid, p2_grid, p_m: float, trials: int, seed: int = 0, **kw):
    """Rows (p1, p2, mean, std_error, trials) over the grid, common random numbers."""
    rows = []
    for p1 in p1_grid:
        for p2 in p2_grid:
            est = montecarlo_fidelity(code, NoiseModel(p1, p2, p_m), trials, seed, **kw)
            rows.append((float(p1), float(p2), est.mean, est.std_error, est.trials))
    return rows


# ---------------------------------------------------------------------------
# logical-state mixture


@dataclass(frozen=True)
class LogicalStateModel:
    """rho = F |Psi><Psi| + (1 - F) I / 2^nu."""

    F: float
    nu: int

    def eigenvalues(self) -> np.ndarray:
        d = 2**self.nu
        rest = (1.0 - self.F) / d
        return np.concatenate([[self.F + rest], np.full(d - 1, rest)])

    def trace(self) -> float:
        return float(self.eigenvalues().sum())

    def matrix(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi, dtype=complex)
        d = 2**self.nu
        if psi.shape != (d,):
            raise ValueError(f"state must have dimension {d}")
        psi = psi / np.linalg.norm(psi)
        return self.F * np.outer(psi, psi.conj()) + (1.0 - self.F) * np.eye(d) / d


def logical_state_model(F: float, nu: int) -> LogicalStateModel:
    if not 0.0 <= F <= 1.0:
        raise ValueError("F must lie in [0, 1]")
    if nu < 1:
        raise ValueError("nu must be positive")
    return LogicalStateModel(float(F), int(nu))
