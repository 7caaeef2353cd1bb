"""Graph states: specification, stabilizers, dense construction and X measurements.

Vertices are 0-based in the Python API.  The text format (``u v`` per line,
optional ``measure: a b c`` line, ``#`` comments) is 1-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..dynamics import CZ, QuantumState
from ..errors import DimensionGuard, ZeroProjection
from .pauli import PauliString
from .tableau import StabilizerTableau

MAX_DENSE_QUBITS = 12


@dataclass(frozen=True)
class GraphSpec:
    n_vertices: int
    edges: Tuple[Tuple[int, int], ...]
    measure_set: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise ValueError(f"edge ({u}, {v}) outside {self.n_vertices} vertices")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            norm.append((u, v))
        object.__setattr__(self, "edges", tuple(norm))
        ms = tuple(int(q) for q in self.measure_set)
        if len(set(ms)) != len(ms) or any(not 0 <= q < self.n_vertices for q in ms):
            raise ValueError("measure_set must hold distinct valid vertices")
        object.__setattr__(self, "measure_set", ms)

    @property
    def kept(self) -> Tuple[int, ...]:
        return tuple(q for q in range(self.n_vertices) if q not in self.measure_set)

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_vertices, self.n_vertices), dtype=np.uint8)
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1
        return A

    def neighbors(self, v: int) -> List[int]:
        return [int(u) for u in np.nonzero(self.adjacency()[v])[0]]

    @classmethod
    def from_adjacency(cls, A: np.ndarray, measure_set=()) -> "GraphSpec":
        n = A.shape[0]
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if A[i, j]]
        return cls(n, tuple(edges), tuple(measure_set))

    @classmethod
    def parse(cls, text: str, n_vertices: Optional[int] = None) -> "GraphSpec":
        edges, measure = [], []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.lower().startswith("measure:"):
                measure = [int(t) - 1 for t in line.split(":", 1)[1].replace(",", " ").split()]
                continue
            if line.lower().startswith("vertices:"):
                n_vertices = int(line.split(":", 1)[1])
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"cannot parse edge line {raw!r}")
            edges.append((int(parts[0]) - 1, int(parts[1]) - 1))
        n = n_vertices or max([max(e) for e in edges] + measure + [0]) + 1
        return cls(n, tuple(edges), tuple(measure))

    def to_text(self) -> str:
        lines = [f"vertices: {self.n_vertices}"]
        lines += [f"{u + 1} {v + 1}" for u, v in self.edges]
        if self.measure_set:
            lines.append("measure: " + " ".join(str(q + 1) for q in self.measure_set))
        return "\n".join(lines) + "\n"


def five_cycle() -> GraphSpec:
    """Ring 1-2-3-4-5-1, edges listed in the order the gates are applied."""
    return GraphSpec(5, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 0)))


# Hamming [7,4] parity supports (1-based data qubits), one per ancilla 8, 9, 10
HAMMING_SUPPORTS = ((4, 5, 6, 7), (2, 3, 6, 7), (1, 3, 5, 7))


def steane_graph() -> GraphSpec:
    """Ten-vertex, twelve-edge graph; X-measuring vertices 8, 9, 10 leaves a Steane state."""
    edges = []
    for a, supp in zip((7, 8, 9), HAMMING_SUPPORTS):
        edges += [(q - 1, a) for q in supp]
    return GraphSpec(10, tuple(edges), (7, 8, 9))


def cluster_stabilizers(graph: GraphSpec) -> StabilizerTableau:
    """K_i = X_i prod_{j in nb(i)} Z_j, one generator per vertex."""
    A = graph.adjacency()
    return StabilizerTableau(np.eye(graph.n_vertices, dtype=np.uint8), A)


def _apply_two_qubit(psi: np.ndarray, U: np.ndarray, a: int, b: int, n: int) -> np.ndarray:
    t = psi.reshape((2,) * n)
    t = np.tensordot(U.reshape(2, 2, 2, 2), t, axes=([2, 3], [a, b]))
    t = np.moveaxis(t, [0, 1], [a, b])
    return t.reshape(-1)


def build_cluster_statevector(
    graph: GraphSpec,
    gate: Union[str, np.ndarray] = "ideal",
    order: Optional[Sequence[Tuple[int, int]]] = None,
) -> QuantumState:
    """Apply the pair gate over the edges (listed order by default) to |+>^n.

    ``gate`` is ``"ideal"`` for diag(1, 1, 1, -1) or any 4x4 unitary, e.g. the
    phase-corrected gate propagated by the dynamics module.
    """
    n = graph.n_vertices
    if n > MAX_DENSE_QUBITS:
        raise DimensionGuard(f"{n} qubits exceed the dense limit {MAX_DENSE_QUBITS}")
    U = CZ if isinstance(gate, str) and gate == "ideal" else np.asarray(gate, dtype=complex)
    if U.shape != (4, 4):
        raise ValueError("gate must be a 4x4 matrix")
    psi = np.full(2**n, 2.0 ** (-n / 2), dtype=complex)
    for a, b in order if order is not None else graph.edges:
        psi = _apply_two_qubit(psi, U, a, b, n)
    return QuantumState(psi, (2,) * n, n)


# ---------------------------------------------------------------------------
# X-basis measurement


@dataclass
class MeasurementResult:
    """Post-measurement object on the unmeasured qubits (ascending order)."""

    state: Union[StabilizerTableau, np.ndarray]
    outcomes: Tuple[int, ...]
    byproducts: Tuple[Optional[PauliString], ...]
    probability: float
    kept: Tuple[int, ...]


def _choose(rng, outcomes, k, deterministic_sign=None):
    if deterministic_sign is not None:
        return deterministic_sign
    if outcomes is not None:
        return int(outcomes[k])
    if rng is None:
        return 1
    return 1 if rng.random() < 0.5 else -1


def _measure_x_tableau(t: StabilizerTableau, q: int, outcome_hint, postselect: bool):
    """Measure X_q in place; returns (outcome, probability, anticommuting generator)."""
    xq = PauliString.single(t.n, q, "X")
    anti = np.nonzero(~t.commutes_with(xq))[0]
    if anti.size == 0:
        sign = t.group_sign(xq)
        if sign is None:
            # X_q outside the group: the state is not fully specified on q,
            # both outcomes are possible and the measured operator joins the group.
            out = 1 if postselect else outcome_hint(None)
            t_new = t.append(xq if out == 1 else -xq)
            t.x, t.z, t.phase = t_new.x, t_new.z, t_new.phase
            return out, 0.5, None
        if postselect and sign == -1:
            raise ZeroProjection(f"X on qubit {q} is deterministically -1")
        return sign, 1.0, None
    p = anti[0]
    for k in anti[1:]:
        t._rowmul(k, p)
    partner = t.row(p)
    out = 1 if postselect else outcome_hint(None)
    t.x[p] = 0
    t.z[p] = 0
    t.x[p, q] = 1
    t.phase[p] = 0 if out == 1 else 2
    return out, 0.5, partner


def _drop_qubits(t: StabilizerTableau, measured: Sequence[int]) -> StabilizerTableau:
    """Remove X-measured qubits: clear their columns using the ±X_q generators."""
    t = t.copy()
    drop_rows = []
    for q in measured:
        rows = [i for i in range(t.m) if t.x[i, q] and not t.z[i, q] and np.count_nonzero(t.x[i] | t.z[i]) == 1]
        if not rows:
            raise ValueError(f"qubit {q} is not in an X eigenstate")
        r = rows[0]
        for i in range(t.m):
            if i != r and t.x[i, q]:
                t._rowmul(i, r)
        drop_rows.append(r)
    keep_rows = [i for i in range(t.m) if i not in drop_rows]
    keep_cols = [q for q in range(t.n) if q not in measured]
    return StabilizerTableau(t.x[np.ix_(keep_rows, keep_cols)], t.z[np.ix_(keep_rows, keep_cols)], t.phase[keep_rows])


def measure_x(
    target,
    qubits: Sequence[int],
    mode: str = "corrected",
    outcomes: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
    stabilizers: Optional[StabilizerTableau] = None,
) -> MeasurementResult:
    """Measure X on ``qubits`` and return the state of the remaining qubits.

    ``mode="postselect"`` projects every listed qubit on |+> and renormalises;
    ``mode="corrected"`` accepts any outcome (taken from ``outcomes``, drawn
    from ``rng``, or +1 by default) and applies the byproduct Pauli that maps
    the post-measurement state onto the all-plus one.  ``target`` is a
    StabilizerTableau, a QuantumState or a state vector; dense corrected mode
    needs the state's ``stabilizers`` to derive byproducts.
    """
    if mode not in ("postselect", "corrected"):
        raise ValueError(f"unknown measurement mode {mode!r}")
    qubits = [int(q) for q in qubits]
    if isinstance(target, StabilizerTableau):
        return _measure_tableau(target, qubits, mode, outcomes, rng)
    psi = target.data if isinstance(target, QuantumState) else np.asarray(target, dtype=complex)
    if psi.ndim != 1:
        raise ValueError("dense measurement expects a pure state vector")
    return _measure_dense(psi, qubits, mode, outcomes, rng, stabilizers)


def _measure_tableau(t0, qubits, mode, outcomes, rng):
    n = t0.n
    if any(not 0 <= q < n for q in qubits) or len(set(qubits)) != len(qubits):
        raise ValueError("invalid measured qubits")
    t = t0.copy()
    outs, byps, prob = [], [], 1.0
    for k, q in enumerate(qubits):
        hint = lambda _none, k=k: _choose(rng, outcomes, k)
        out, p, partner = _measure_x_tableau(t, q, hint, mode == "postselect")
        prob *= p if mode == "corrected" else (p if partner is not None else 1.0)
        byp = None
        if out == -1 and mode == "corrected" and partner is not None:
            # the anticommuting generator without its factor on q flips the outcome
            xb, zb = list(partner.x), list(partner.z)
            xb[q] = zb[q] = 0
            byp = PauliString(xb, zb)
            t.pauli(byp)
        outs.append(out)
        byps.append(byp)
    kept = tuple(q for q in range(n) if q not in qubits)
    return MeasurementResult(_drop_qubits(t, qubits), tuple(outs), tuple(byps), prob, kept)


_PLUS = np.array([1.0, 1.0]) / np.sqrt(2.0)
_MINUS = np.array([1.0, -1.0]) / np.sqrt(2.0)


def _measure_dense(psi, qubits, mode, outcomes, rng, stabilizers):
    n = int(round(np.log2(psi.size)))
    if 2**n != psi.size:
        raise ValueError("state size is not a power of two")
    if mode == "corrected" and stabilizers is None:
        raise ValueError("corrected dense measurement needs the state's stabilizers")
    t = stabilizers.copy() if stabilizers is not None else None
    state = psi.astype(complex).copy()
    outs, byps, prob = [], [], 1.0
    for k, q in enumerate(qubits):
        proj = {}
        for s, v in ((1, _PLUS), (-1, _MINUS)):
            tt = np.tensordot(v.conj(), state.reshape((2,) * n), axes=([0], [q]))
            proj[s] = np.linalg.norm(tt) ** 2
        if mode == "postselect":
            out = 1
            if proj[1] < 1e-12:
                raise ZeroProjection(f"outcome +1 on qubit {q} has zero probability")
        else:
            out = _choose(rng, outcomes, k)
            if proj[out] < 1e-12:
                out = -out
        prob *= proj[out]
        v = _PLUS if out == 1 else _MINUS
        P = np.outer(v, v.conj())
        st = np.moveaxis(np.tensordot(P, state.reshape((2,) * n), axes=([1], [q])), 0, q).reshape(-1)
        state = st / np.linalg.norm(st)
        byp = None
        if t is not None:
            out_t, _, partner = _measure_x_tableau(t, q, lambda _none: out, False)
            if out_t != out:
                raise ValueError("tableau and dense outcomes disagree")
            if out == -1 and mode == "corrected" and partner is not None:
                xb, zb = list(partner.x), list(partner.z)
                xb[q] = zb[q] = 0
                byp = PauliString(xb, zb)
                state = byp.apply_to_vector(state)
                t.pauli(byp)
        outs.append(out)
        byps.append(byp)
    kept = [q for q in range(n) if q not in qubits]
    # read off the reduced vector: measured qubits sit in known X eigenstates
    tens = state.reshape((2,) * n)
    for q in sorted(qubits, reverse=True):
        k = qubits.index(q)
        v = _PLUS if outs[k] == 1 else _MINUS
        tens = np.tensordot(v.conj(), tens, axes=([0], [q]))
    red = tens.reshape(-1)
    red = red / np.linalg.norm(red)
    return MeasurementResult(red, tuple(outs), tuple(byps), float(prob), tuple(kept))
