"""Generalized Pauli (Weyl) operators for qutrits and small dense-matrix helpers.

The shift ``X|s> = |s+1 mod 3>`` and clock ``Z|s> = w^s |s>`` with
``w = exp(2*pi*i/3)`` generate 81 two-qutrit operators
``X^a1 Z^a2 (x) X^b1 Z^b2``.  Inside each factor the matrix product is taken
as written, so ``Z`` acts on a ket first.
"""
from __future__ import annotations

import itertools
from enum import Enum
from functools import lru_cache
from typing import NamedTuple

import numpy as np

OMEGA = np.exp(2j * np.pi / 3)
ATOL = 1e-12


class InvalidLabelError(ValueError):
    pass


class Subset(str, Enum):
    IDENTITY = "Identity"
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"


class PauliLabel(NamedTuple):
    """Exponents ``(a1, a2, b1, b2)`` of ``X^a1 Z^a2 (x) X^b1 Z^b2``."""

    a1: int
    a2: int
    b1: int
    b2: int

    @classmethod
    def parse(cls, text: str) -> "PauliLabel":
        parts = [p for p in text.replace(",", " ").split() if p]
        if len(parts) == 1 and len(parts[0]) == 4:
            parts = list(parts[0])
        if len(parts) != 4:
            raise InvalidLabelError(f"expected four exponents, got {text!r}")
        try:
            return validate_label(cls(*(int(p) for p in parts)))
        except ValueError as exc:
            raise InvalidLabelError(f"bad label {text!r}: {exc}") from None

    @property
    def is_identity(self) -> bool:
        return not any(self)

    def __str__(self) -> str:
        return "".join(str(e) for e in self)


IDENTITY_LABEL = PauliLabel(0, 0, 0, 0)


def validate_label(label) -> PauliLabel:
    label = PauliLabel(*label)
    for e in label:
        if isinstance(e, bool) or not isinstance(e, (int, np.integer)) or not 0 <= e <= 2:
            raise InvalidLabelError(f"exponents must be integers in {{0,1,2}}, got {tuple(label)}")
    return PauliLabel(*(int(e) for e in label))


@lru_cache(maxsize=None)
def _pauli_x() -> np.ndarray:
    x = np.roll(np.eye(3, dtype=complex), 1, axis=0)
    x.flags.writeable = False
    return x


@lru_cache(maxsize=None)
def _pauli_z() -> np.ndarray:
    z = np.diag(OMEGA ** np.arange(3)).astype(complex)
    z.flags.writeable = False
    return z


def pauli_x() -> np.ndarray:
    """Cyclic shift: column ``s`` has its unit entry in row ``s+1 mod 3``."""
    return _pauli_x().copy()


def pauli_z() -> np.ndarray:
    return _pauli_z().copy()


def single_qutrit_operator(x_power: int, z_power: int) -> np.ndarray:
    return (np.linalg.matrix_power(_pauli_x(), x_power)
            @ np.linalg.matrix_power(_pauli_z(), z_power))


def build_error_operator(label) -> np.ndarray:
    """Return the 9x9 matrix ``X^a1 Z^a2 (x) X^b1 Z^b2`` (qutrit ``a`` is the major index)."""
    a1, a2, b1, b2 = validate_label(label)
    return _error_operator(a1, a2, b1, b2).copy()


@lru_cache(maxsize=None)
def _error_operator(a1: int, a2: int, b1: int, b2: int) -> np.ndarray:
    op = np.kron(single_qutrit_operator(a1, a2), single_qutrit_operator(b1, b2))
    op.flags.writeable = False
    return op


def error_operator_view(label: PauliLabel) -> np.ndarray:
    """Read-only cached operator; avoids the copy on hot paths."""
    return _error_operator(*label)


def classify_label(label) -> Subset:
    a1, a2, b1, b2 = validate_label(label)
    if a1 and b1:
        return Subset.S1
    if a1:
        return Subset.S2
    if b1:
        return Subset.S3
    if a2 or b2:
        return Subset.S4
    return Subset.IDENTITY


def all_labels() -> list[PauliLabel]:
    """All 81 labels in lexicographic order, identity first."""
    return [PauliLabel(*t) for t in itertools.product(range(3), repeat=4)]


def error_labels() -> list[PauliLabel]:
    return [lab for lab in all_labels() if not lab.is_identity]


def subsets() -> dict[Subset, list[PauliLabel]]:
    groups: dict[Subset, list[PauliLabel]] = {s: [] for s in Subset}
    for lab in all_labels():
        groups[classify_label(lab)].append(lab)
    return groups


def subset_counts() -> dict[str, int]:
    return {s.value: len(members) for s, members in subsets().items()}


# dense-matrix utilities

def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def max_norm(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m))) if m.size else 0.0


def unitarity_defect(u: np.ndarray) -> float:
    u = np.asarray(u)
    return max_norm(dagger(u) @ u - np.eye(u.shape[-1]))


def is_unitary(u: np.ndarray, atol: float = ATOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and unitarity_defect(u) <= atol


def hermiticity_defect(a: np.ndarray) -> float:
    return max_norm(a - dagger(a))


def kron_all(*ops: np.ndarray) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def assert_finite(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise FloatingPointError(f"{what} contains NaN or Inf entries")
    return m
