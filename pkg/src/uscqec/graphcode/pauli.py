"""Pauli strings in binary symplectic form with an explicit i^k phase.

Letters use the computational basis convention ``Z|0> = |0>``; qubit 0 is the
leftmost character and the most significant tensor factor.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

_LETTERS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_NAMES = {v: k for k, v in _LETTERS.items()}
_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}

_MATS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def product_phase(x1, z1, x2, z2):
    """Exponent (mod 4) of i picked up by the letter-wise product P1 P2.

    Vectorised over qubits; returns the sum over positions.
    """
    x1, z1, x2, z2 = (np.asarray(a, dtype=np.int64) for a in (x1, z1, x2, z2))
    g = np.where(
        (x1 == 1) & (z1 == 1),
        z2 - x2,
        np.where(x1 == 1, z2 * (2 * x2 - 1), np.where(z1 == 1, x2 * (1 - 2 * z2), 0)),
    )
    return int(g.sum(axis=-1)) if g.ndim == 1 else g.sum(axis=-1)


@dataclass(frozen=True)
class PauliString:
    """i^phase times a tensor product of I, X, Y, Z."""

    x: tuple
    z: tuple
    phase: int = 0

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(int(v) & 1 for v in self.x))
        object.__setattr__(self, "z", tuple(int(v) & 1 for v in self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)
        if len(self.x) != len(self.z):
            raise ValueError("x and z parts differ in length")

    @classmethod
    def from_str(cls, text: str) -> "PauliString":
        """Parse strings such as ``"XZZXI"``, ``"-YY"`` or ``"+iZ"``."""
        t = text.strip()
        phase = 0
        for prefix, k in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if t.startswith(prefix):
                phase, t = k, t[len(prefix):]
                break
        try:
            bits = [_LETTERS[c] for c in t.upper()]
        except KeyError as exc:
            raise ValueError(f"bad Pauli letter in {text!r}") from exc
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        s = ["I"] * n
        s[qubit] = letter
        return cls.from_str("".join(s))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls((0,) * n, (0,) * n)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def letters(self) -> str:
        return "".join(_NAMES[(a, b)] for a, b in zip(self.x, self.z))

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase] + self.letters

    @property
    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x, self.z) if a or b)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    @property
    def sign(self) -> int:
        if not self.is_hermitian:
            raise ValueError(f"{self} is not Hermitian")
        return 1 if self.phase == 0 else -1

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.n != other.n:
            raise ValueError("Pauli strings act on different numbers of qubits")
        k = self.phase + other.phase + product_phase(self.x, self.z, other.x, other.z)
        x = tuple(a ^ b for a, b in zip(self.x, other.x))
        z = tuple(a ^ b for a, b in zip(self.z, other.z))
        return PauliString(x, z, k)

    def __neg__(self) -> "PauliString":
        return PauliString(self.x, self.z, self.phase + 2)

    def commutes(self, other: "PauliString") -> bool:
        s = sum(a * d + b * c for a, b, c, d in zip(self.x, self.z, other.x, other.z))
        return s % 2 == 0

    def restrict(self, keep: Iterable[int]) -> "PauliString":
        keep = list(keep)
        return PauliString([self.x[q] for q in keep], [self.z[q] for q in keep], self.phase)

    def to_matrix(self) -> np.ndarray:
        out = np.array([[1j**self.phase]], dtype=complex)
        for c in self.letters:
            out = np.kron(out, _MATS[c])
        return out

    def apply_to_vector(self, psi: np.ndarray) -> np.ndarray:
        """P|psi> without forming the 2^n x 2^n matrix."""
        n = self.n
        t = np.asarray(psi, dtype=complex).reshape((2,) * n)
        for q, c in enumerate(self.letters):
            if c != "I":
                t = np.moveaxis(np.tensordot(_MATS[c], t, axes=([1], [q])), 0, q)
        return (1j**self.phase) * t.reshape(-1)
