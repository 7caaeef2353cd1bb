"""The five-qubit and Steane codes, the local map from cluster to code, and distances."""
from __future__ import annotations

import itertools
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .graphs import HAMMING_SUPPORTS, cluster_stabilizers, five_cycle
from .pauli import PauliString
from .tableau import StabilizerTableau, gf2_rank

_INVERSE = {"H": "H", "S": "SDG", "SDG": "S", "X": "X", "Y": "Y", "Z": "Z", "I": "I"}


def five_qubit_code() -> StabilizerTableau:
    """Cyclic shifts of XZZXI (four independent generators)."""
    return StabilizerTableau.from_paulis(["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"])


def _support_string(n: int, support, letter: str) -> str:
    return "".join(letter if q + 1 in support else "I" for q in range(n))


def steane_code() -> StabilizerTableau:
    """CSS code with X and Z checks on the Hamming [7,4] parity supports."""
    gens = [_support_string(7, s, "X") for s in HAMMING_SUPPORTS]
    gens += [_support_string(7, s, "Z") for s in HAMMING_SUPPORTS]
    return StabilizerTableau.from_paulis(gens)


CODES = {"five-qubit": five_qubit_code, "steane": steane_code}


def code_by_name(name: str) -> StabilizerTableau:
    try:
        return CODES[name]()
    except KeyError:
        raise ValueError(f"unknown code {name!r}; choose from {sorted(CODES)}") from None


def lu_to_code(tableau: StabilizerTableau, word: Sequence[str] = ("S", "H"), inverse: bool = False) -> StabilizerTableau:
    """Conjugate every generator by the same single-qubit word on each qubit.

    ``word`` is time-ordered (default: phase gate, then Hadamard).  With
    ``inverse`` the inverse word is applied, undoing a previous call.
    """
    w = [g.upper() for g in word]
    if inverse:
        w = [_INVERSE[g] for g in reversed(w)]
    return tableau.copy().apply_local([w] * tableau.n)


def cluster_code_operators(cluster: Optional[StabilizerTableau] = None):
    """S'_i = K_i K_{i+1 mod 5} (i = 1..4), X_L = K_5, Z_L = Z1 Z2 Z3 Z4 Z5."""
    K = (cluster or cluster_stabilizers(five_cycle())).generators
    s_prime = [K[i] * K[(i + 1) % 5] for i in range(4)]
    return StabilizerTableau.from_paulis(s_prime), K[4], PauliString.from_str("ZZZZZ")


def transport_five_qubit(word: Sequence[str] = ("S", "H")):
    """Images of S'_1..S'_4 and the two logicals under the local map."""
    code, xl, zl = cluster_code_operators()
    mapped = lu_to_code(code, word)
    logicals = StabilizerTableau.from_paulis([xl, zl], validate=False)
    mapped_logicals = lu_to_code(logicals, word).generators
    return mapped, mapped_logicals[0], mapped_logicals[1]


def gf2_nullspace(A: np.ndarray) -> np.ndarray:
    """Rows spanning {v : A v = 0} over GF(2)."""
    A = np.array(A, dtype=np.uint8) & 1
    rows, cols = A.shape
    R = A.copy()
    pivots = []
    r = 0
    for c in range(cols):
        piv = np.nonzero(R[r:, c])[0] if r < rows else []
        if len(piv) == 0:
            continue
        p = r + piv[0]
        R[[r, p]] = R[[p, r]]
        others = np.nonzero(R[:, c])[0]
        R[others[others != r]] ^= R[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for i, c in enumerate(pivots):
            v[c] = R[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def logical_operators(code: StabilizerTableau) -> Tuple[PauliString, PauliString]:
    """One anticommuting logical pair (X_L, Z_L) for a code with one logical qubit."""
    if code.n_logical != 1:
        raise ValueError("logical pair search needs exactly one logical qubit")
    n = code.n
    # P commutes with g  <=>  g_x . P_z + g_z . P_x = 0
    A = np.concatenate([code.z, code.x], axis=1)
    N = gf2_nullspace(A)
    base = code.symplectic()
    rank = gf2_rank(base)
    outside = [v for v in N if gf2_rank(np.vstack([base, v])) > rank]
    for a, b in itertools.combinations(outside, 2):
        if (a[:n] @ b[n:] + a[n:] @ b[:n]) % 2:
            return PauliString(a[:n], a[n:]), PauliString(b[:n], b[n:])
    raise RuntimeError("no anticommuting logical pair found")


class Distance(NamedTuple):
    value: int
    exact: bool

    def __str__(self) -> str:
        return str(self.value) if self.exact else f"> {self.value - 1}"


def _paulis_of_weight(n: int, w: int):
    letters = np.array([(1, 0), (1, 1), (0, 1)], dtype=np.uint8)
    for support in itertools.combinations(range(n), w):
        for combo in itertools.product(range(3), repeat=w):
            x = np.zeros(n, dtype=np.uint8)
            z = np.zeros(n, dtype=np.uint8)
            for q, c in zip(support, combo):
                x[q], z[q] = letters[c]
            yield x, z


def code_distance(tableau: StabilizerTableau, w_max: int = 3) -> Distance:
    """Minimum weight of a Pauli commuting with every generator but outside the group.

    Exhaustive over all weights up to ``w_max``; if nothing is found the result
    is ``Distance(w_max + 1, exact=False)``, meaning the distance exceeds w_max.
    """
    if tableau.n_logical < 1:
        raise ValueError("a full-rank tableau encodes no logical qubit")
    if tableau.n > 10 or w_max > 3:
        raise ValueError("brute-force distance is limited to n <= 10 and w_max <= 3")
    gx, gz = tableau.x.astype(np.int64), tableau.z.astype(np.int64)
    base = tableau.symplectic()
    rank = gf2_rank(base)
    for w in range(1, w_max + 1):
        cands = list(_paulis_of_weight(tableau.n, w))
        X = np.array([c[0] for c in cands], dtype=np.int64)
        Z = np.array([c[1] for c in cands], dtype=np.int64)
        comm = ((X @ gz.T + Z @ gx.T) % 2 == 0).all(axis=1)
        for i in np.nonzero(comm)[0]:
            v = np.concatenate([X[i], Z[i]]).astype(np.uint8)
            if gf2_rank(np.vstack([base, v])) > rank:
                return Distance(w, True)
    return Distance(w_max + 1, False)
