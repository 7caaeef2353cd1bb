"""Stabilizer groups as binary symplectic tableaux with phase bits.

Each row is a Hermitian Pauli ``i^k X^x Z^z`` (letter-wise, Y for x=z=1) with
k in {0, 2}.  Clifford conjugations update rows in place; group equality is
decided on the reduced row echelon form, which is unique for a given group.
"""
from __future__ import annotations

from typing import Iterable, List, Optional, Sequence

import numpy as np

from .pauli import PauliString, product_phase


def gf2_rank(M: np.ndarray) -> int:
    A = np.array(M, dtype=np.uint8) & 1
    rank = 0
    rows, cols = A.shape
    for c in range(cols):
        piv = np.nonzero(A[rank:, c])[0]
        if piv.size == 0:
            continue
        p = rank + piv[0]
        A[[rank, p]] = A[[p, rank]]
        others = np.nonzero(A[:, c])[0]
        others = others[others != rank]
        A[others] ^= A[rank]
        rank += 1
        if rank == rows:
            break
    return rank


def gf2_solve(A: np.ndarray, b: np.ndarray) -> Optional[np.ndarray]:
    """One solution x of A x = b over GF(2), or None if inconsistent."""
    A = np.array(A, dtype=np.uint8) & 1
    b = np.array(b, dtype=np.uint8).reshape(-1) & 1
    rows, cols = A.shape
    aug = np.concatenate([A, b[:, None]], axis=1)
    pivots = []
    r = 0
    for c in range(cols):
        piv = np.nonzero(aug[r:, c])[0]
        if piv.size == 0:
            continue
        p = r + piv[0]
        aug[[r, p]] = aug[[p, r]]
        others = np.nonzero(aug[:, c])[0]
        aug[others[others != r]] ^= aug[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    if np.any(aug[r:, -1]):
        return None
    x = np.zeros(cols, dtype=np.uint8)
    for i, c in enumerate(pivots):
        x[c] = aug[i, -1]
    return x


class StabilizerTableau:
    """A list of independent, commuting, Hermitian Pauli generators on n qubits."""

    def __init__(self, x, z, phase=None, validate: bool = True):
        self.x = np.array(x, dtype=np.uint8).reshape(len(x), -1) & 1
        self.z = np.array(z, dtype=np.uint8).reshape(self.x.shape) & 1
        self.phase = np.zeros(len(self.x), dtype=np.int64) if phase is None else np.array(phase, dtype=np.int64) % 4
        if validate:
            self.validate()

    # construction -----------------------------------------------------------

    @classmethod
    def from_paulis(cls, gens: Sequence, n: Optional[int] = None, validate: bool = True) -> "StabilizerTableau":
        ps = [g if isinstance(g, PauliString) else PauliString.from_str(g) for g in gens]
        if not ps:
            return cls(np.zeros((0, n or 0)), np.zeros((0, n or 0)), validate=validate)
        return cls([p.x for p in ps], [p.z for p in ps], [p.phase for p in ps], validate=validate)

    def copy(self) -> "StabilizerTableau":
        return StabilizerTableau(self.x.copy(), self.z.copy(), self.phase.copy(), validate=False)

    @property
    def n(self) -> int:
        return self.x.shape[1]

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def n_logical(self) -> int:
        return self.n - self.m

    def __len__(self) -> int:
        return self.m

    def row(self, i: int) -> PauliString:
        return PauliString(self.x[i], self.z[i], self.phase[i])

    @property
    def generators(self) -> List[PauliString]:
        return [self.row(i) for i in range(self.m)]

    def __repr__(self) -> str:
        return f"StabilizerTableau([{', '.join(str(g) for g in self.generators)}])"

    def symplectic(self) -> np.ndarray:
        return np.concatenate([self.x, self.z], axis=1)

    # checks -----------------------------------------------------------------

    def commutation_matrix(self) -> np.ndarray:
        x, z = self.x.astype(np.int64), self.z.astype(np.int64)
        return (x @ z.T + z @ x.T) % 2

    def validate(self) -> None:
        if np.any(self.phase % 2):
            raise ValueError("generators must be Hermitian (phase +1 or -1)")
        if np.any(self.commutation_matrix()):
            raise ValueError("generators do not commute")
        if gf2_rank(self.symplectic()) != self.m:
            raise ValueError("generators are not independent")

    def commutes_with(self, p: PauliString) -> np.ndarray:
        px, pz = np.array(p.x, dtype=np.int64), np.array(p.z, dtype=np.int64)
        return ((self.x.astype(np.int64) @ pz + self.z.astype(np.int64) @ px) % 2) == 0

    # row algebra --------------------------------------------------------------

    def _rowmul(self, target: int, source: int) -> None:
        """row[target] <- row[source] * row[target]."""
        k = product_phase(self.x[source], self.z[source], self.x[target], self.z[target])
        self.phase[target] = (self.phase[source] + self.phase[target] + k) % 4
        self.x[target] ^= self.x[source]
        self.z[target] ^= self.z[source]

    def canonical(self) -> "StabilizerTableau":
        """Reduced row echelon form over the (x | z) columns, phases tracked."""
        t = self.copy()
        S = t.symplectic()
        r = 0
        for c in range(2 * t.n):
            col = S[:, c]
            piv = [i for i in range(r, t.m) if col[i]]
            if not piv:
                continue
            p = piv[0]
            if p != r:
                for arr in (t.x, t.z, t.phase):
                    arr[[r, p]] = arr[[p, r]]
                S[[r, p]] = S[[p, r]]
            for i in range(t.m):
                if i != r and S[i, c]:
                    t._rowmul(i, r)
                    S[i] ^= S[r]
            r += 1
            if r == t.m:
                break
        return t

    def same_group(self, other: "StabilizerTableau", signs: bool = True) -> bool:
        if self.n != other.n or self.m != other.m:
            return False
        a, b = self.canonical(), other.canonical()
        same = np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z)
        return same and (not signs or np.array_equal(a.phase % 4, b.phase % 4))

    def decompose(self, p: PauliString) -> Optional[np.ndarray]:
        """Generator subset whose product equals p up to phase, or None."""
        v = np.concatenate([np.array(p.x), np.array(p.z)])
        if self.m == 0:
            return np.zeros(0, dtype=np.uint8) if not v.any() else None
        return gf2_solve(self.symplectic().T, v)

    def product_of(self, subset: np.ndarray) -> PauliString:
        out = PauliString.identity(self.n)
        for i in np.nonzero(subset)[0]:
            out = out * self.row(i)
        return out

    def group_sign(self, p: PauliString) -> Optional[int]:
        """+1 / -1 if +p / -p is in the group, None if neither is."""
        sub = self.decompose(p)
        if sub is None:
            return None
        q = self.product_of(sub)
        return 1 if (q.phase - p.phase) % 4 == 0 else -1

    def contains(self, p: PauliString) -> bool:
        return self.group_sign(p) == 1

    def contains_group(self, other: "StabilizerTableau", signs: bool = True) -> bool:
        for g in other.generators:
            s = self.group_sign(g)
            if s is None or (signs and s != 1):
                return False
        return True

    def append(self, p: PauliString) -> "StabilizerTableau":
        return StabilizerTableau(
            np.vstack([self.x, np.array(p.x, dtype=np.uint8)[None]]),
            np.vstack([self.z, np.array(p.z, dtype=np.uint8)[None]]),
            np.append(self.phase, p.phase),
        )

    def weight_distribution(self) -> np.ndarray:
        """Counts of group elements by weight (invariant under local Cliffords)."""
        if self.m > 20:
            raise ValueError("group too large to enumerate")
        counts = np.zeros(self.n + 1, dtype=np.int64)
        for mask in range(1 << self.m):
            sel = np.array([(mask >> i) & 1 for i in range(self.m)], dtype=bool)
            x = np.bitwise_xor.reduce(self.x[sel], axis=0) if sel.any() else np.zeros(self.n, np.uint8)
            z = np.bitwise_xor.reduce(self.z[sel], axis=0) if sel.any() else np.zeros(self.n, np.uint8)
            counts[int(np.count_nonzero(x | z))] += 1
        return counts

    # Clifford conjugation (state -> U state, generators g -> U g U^dag) ----------

    def h(self, q: int) -> "StabilizerTableau":
        y = self.x[:, q] & self.z[:, q]
        self.phase = (self.phase + 2 * y) % 4
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()
        return self

    def s(self, q: int) -> "StabilizerTableau":
        y = self.x[:, q] & self.z[:, q]
        self.phase = (self.phase + 2 * y) % 4
        self.z[:, q] ^= self.x[:, q]
        return self

    def sdg(self, q: int) -> "StabilizerTableau":
        xo = self.x[:, q] & (1 - self.z[:, q])
        self.phase = (self.phase + 2 * xo) % 4
        self.z[:, q] ^= self.x[:, q]
        return self

    def cnot(self, c: int, t: int) -> "StabilizerTableau":
        xc, zc, xt, zt = self.x[:, c], self.z[:, c], self.x[:, t], self.z[:, t]
        flip = xc & zt & (xt ^ zc ^ 1)
        self.phase = (self.phase + 2 * flip) % 4
        self.x[:, t] ^= xc
        self.z[:, c] ^= zt
        return self

    def cz(self, a: int, b: int) -> "StabilizerTableau":
        return self.h(b).cnot(a, b).h(b)

    def pauli(self, p: PauliString) -> "StabilizerTableau":
        """Conjugate by a Pauli: flips the sign of every anticommuting generator."""
        self.phase = (self.phase + 2 * (~self.commutes_with(p)).astype(np.int64)) % 4
        return self

    def apply_gate(self, name: str, q: int) -> "StabilizerTableau":
        name = name.upper()
        if name == "H":
            return self.h(q)
        if name == "S":
            return self.s(q)
        if name in ("SDG", "SD"):
            return self.sdg(q)
        if name in ("X", "Y", "Z"):
            return self.pauli(PauliString.single(self.n, q, name))
        if name == "I":
            return self
        raise ValueError(f"unknown single-qubit gate {name!r}")

    def apply_local(self, words: Sequence[Sequence[str]]) -> "StabilizerTableau":
        """Apply a per-qubit gate word (time-ordered list of names) to each qubit."""
        if len(words) != self.n:
            raise ValueError("need one gate word per qubit")
        for q, word in enumerate(words):
            for g in word:
                self.apply_gate(g, q)
        return self

    # dense cross-checks --------------------------------------------------------

    def expectations(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi, dtype=complex)
        return np.array([np.real(np.vdot(psi, g.apply_to_vector(psi))) for g in self.generators])

    def state_vector(self) -> np.ndarray:
        """The unique +1 joint eigenvector of a full-rank tableau (small n)."""
        if self.m != self.n:
            raise ValueError("tableau does not fix a unique state")
        if self.n > 12:
            raise ValueError("too many qubits for a dense state")
        P = np.eye(2**self.n, dtype=complex)
        for g in self.generators:
            P = 0.5 * (P + g.to_matrix() @ P)
        k = int(np.argmax(np.linalg.norm(P, axis=0)))
        v = P[:, k]
        return v / np.linalg.norm(v)
