"""Local-Clifford equivalence of stabilizer states through graph local complementation.

Any stabilizer state is local-Clifford equivalent to a graph state, and two
graph states are local-Clifford equivalent iff their graphs are related by a
sequence of local complementations.  The search reduces both states to graph
form, walks the local-complementation orbit of one graph breadth first, then
rebuilds and checks the explicit per-qubit Clifford words.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import SearchBudgetExceeded
from .codes import _INVERSE, logical_operators
from .graphs import GraphSpec, cluster_stabilizers, measure_x
from .pauli import PauliString
from .tableau import StabilizerTableau, gf2_solve


def local_complement(A: np.ndarray, v: int) -> np.ndarray:
    """Complement the subgraph induced on the neighbourhood of v."""
    nb = np.nonzero(A[v])[0]
    B = A.copy()
    if nb.size > 1:
        sub = B[np.ix_(nb, nb)] ^ 1
        np.fill_diagonal(sub, 0)
        B[np.ix_(nb, nb)] = sub
    return B


def lc_words(A: np.ndarray, v: int) -> List[List[str]]:
    """Per-qubit gate words realising the local complementation at v (up to Pauli signs)."""
    words: List[List[str]] = [[] for _ in range(A.shape[0])]
    words[v] = ["H", "S", "H"]
    for u in np.nonzero(A[v])[0]:
        words[u] = ["SDG"]
    return words


def _gf2_inverse(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    aug = np.concatenate([np.array(M, dtype=np.uint8) & 1, np.eye(n, dtype=np.uint8)], axis=1)
    for c in range(n):
        piv = np.nonzero(aug[c:, c])[0]
        if piv.size == 0:
            raise ValueError("matrix is singular over GF(2)")
        p = c + piv[0]
        aug[[c, p]] = aug[[p, c]]
        others = np.nonzero(aug[:, c])[0]
        aug[others[others != c]] ^= aug[c]
    return aug[:, n:]


def _rref_pivots(M: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    R = np.array(M, dtype=np.uint8) & 1
    rows, cols = R.shape
    pivots, r = [], 0
    for c in range(cols):
        if r == rows:
            break
        piv = np.nonzero(R[r:, c])[0]
        if piv.size == 0:
            continue
        p = r + piv[0]
        R[[r, p]] = R[[p, r]]
        others = np.nonzero(R[:, c])[0]
        R[others[others != r]] ^= R[r]
        pivots.append(c)
        r += 1
    return R, pivots


def sign_fix(state: StabilizerTableau, target: StabilizerTableau) -> Optional[PauliString]:
    """Pauli P with P state P^dag having the target's signs (same unsigned group)."""
    flips = []
    for g in target.generators:
        s = state.group_sign(g)
        if s is None:
            return None
        flips.append(0 if s == 1 else 1)
    # P anticommutes with g  <=>  g_x . P_z + g_z . P_x = 1
    A = np.concatenate([target.z, target.x], axis=1)
    sol = gf2_solve(A, np.array(flips, dtype=np.uint8))
    if sol is None:
        return None
    n = target.n
    return PauliString(sol[:n], sol[n:])


def to_graph_form(t: StabilizerTableau) -> Tuple[np.ndarray, List[List[str]]]:
    """Adjacency A and per-qubit words W with W(t) equal to the graph state of A."""
    if t.m != t.n:
        raise ValueError("graph form needs a full-rank stabilizer state")
    n = t.n
    words: List[List[str]] = [[] for _ in range(n)]
    S = np.concatenate([t.x, t.z], axis=1)
    R, pivots = _rref_pivots(S[:, :n])
    work = t.copy()
    if len(pivots) < n:
        # rows with empty X part are full rank on the non-pivot columns
        for q in [c for c in range(n) if c not in pivots]:
            work.h(q)
            words[q].append("H")
    X, Z = work.x.astype(np.uint8), work.z.astype(np.uint8)
    B = (_gf2_inverse(X).astype(np.int64) @ Z.astype(np.int64)) % 2
    if not np.array_equal(B, B.T):
        raise RuntimeError("reduced Z block is not symmetric")
    for q in range(n):
        if B[q, q]:
            work.s(q)
            words[q].append("S")
    A = B.astype(np.uint8).copy()
    np.fill_diagonal(A, 0)
    graph_t = cluster_stabilizers(GraphSpec.from_adjacency(A))
    if not work.same_group(graph_t, signs=False):
        raise RuntimeError("graph-form reduction failed")
    P = sign_fix(work, graph_t)
    for q, c in enumerate(P.letters):
        if c != "I":
            words[q].append(c)
    return A, words


def _invert_words(words: Sequence[Sequence[str]]) -> List[List[str]]:
    return [[_INVERSE[g] for g in reversed(w)] for w in words]


def _key(A: np.ndarray) -> bytes:
    return np.packbits(A[np.triu_indices(A.shape[0], 1)]).tobytes()


def lc_orbit(A: np.ndarray, budget: int = 10**6) -> Dict[bytes, Tuple[Optional[bytes], int, np.ndarray]]:
    """Breadth-first local-complementation orbit: key -> (parent key, vertex, graph)."""
    start = _key(A)
    seen = {start: (None, -1, A)}
    queue = deque([A])
    while queue:
        G = queue.popleft()
        kG = _key(G)
        for v in range(G.shape[0]):
            H = local_complement(G, v)
            kH = _key(H)
            if kH not in seen:
                if len(seen) >= budget:
                    raise SearchBudgetExceeded(f"local-complementation orbit exceeds {budget} graphs")
                seen[kH] = (kG, v, H)
                queue.append(H)
    return seen


def _path(orbit, key) -> List[int]:
    seq = []
    while orbit[key][0] is not None:
        parent, v, _ = orbit[key]
        seq.append(v)
        key = parent
    return seq[::-1]


@dataclass
class LCResult:
    found: bool
    lc_sequence: List[int] = field(default_factory=list)
    local_words: Optional[List[List[str]]] = None
    completion: Optional[str] = None
    orbit_size: int = 0
    state: Optional[StabilizerTableau] = None

    def __bool__(self) -> bool:
        return self.found


def _completions(target: StabilizerTableau, n: int):
    if target.m == n:
        return [("none", target)]
    if target.n_logical != 1:
        raise ValueError("target must be a full-rank state or a code with one logical qubit")
    xl, zl = logical_operators(target)
    yl = xl * zl
    yl = PauliString(yl.x, yl.z, yl.phase + 1 if yl.phase % 2 else yl.phase)
    out = []
    for name, op in (("X_L", xl), ("Z_L", zl), ("Y_L", yl)):
        for sign, p in (("+", op), ("-", -op)):
            out.append((sign + name, target.append(p)))
    return out


def measured_state(graph: GraphSpec) -> StabilizerTableau:
    """Graph state with its measure_set X-measured (outcome-corrected), on kept qubits."""
    t = cluster_stabilizers(graph)
    if not graph.measure_set:
        return t
    return measure_x(t, graph.measure_set, mode="corrected").state


def lc_orbit_check(graph: GraphSpec, target: StabilizerTableau, budget: int = 10**6) -> LCResult:
    """Is the (measured) graph state local-Clifford equivalent to a state in the target group?

    For a code target with one logical qubit the state only has to be a
    codeword, so every logical eigenstate (+-X_L, +-Z_L, +-Y_L) is tried.
    The returned words map the measured state onto that codeword exactly.
    """
    state = measured_state(graph)
    if state.n != target.n:
        raise ValueError(f"measured state has {state.n} qubits, target {target.n}")
    A1, W1 = to_graph_form(state)
    orbit = lc_orbit(A1, budget)
    for name, full in _completions(target, state.n):
        A2, W2 = to_graph_form(full)
        k2 = _key(A2)
        if k2 not in orbit:
            continue
        seq = _path(orbit, k2)
        words = [list(w) for w in W1]
        G = A1
        for v in seq:
            for q, w in enumerate(lc_words(G, v)):
                words[q] += w
            G = local_complement(G, v)
        for q, w in enumerate(_invert_words(W2)):
            words[q] += w
        mapped = state.copy().apply_local(words)
        if not mapped.same_group(full, signs=False):
            raise RuntimeError("composed local Cliffords do not reproduce the target group")
        P = sign_fix(mapped, full)
        mapped.pauli(P)
        for q, c in enumerate(P.letters):
            if c != "I":
                words[q].append(c)
        if not (mapped.same_group(full) and mapped.contains_group(target)):
            raise RuntimeError("sign correction failed")
        return LCResult(True, seq, words, name, len(orbit), mapped)
    return LCResult(False, orbit_size=len(orbit))
