"""Dense n-qutrit pure states and density matrices.

Basis ordering is big-endian ternary: site 0 is the most significant trit, so
the ket ``|t0 t1 ... t(n-1)>`` lives at index ``sum(t_i * 3**(n-1-i))``.
The logical subspace is ``{|0>,|1>}^n``; everything with at least one site in
``|2>`` is leaked.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .algebra import dagger, max_norm

MAX_KET_SITES = 8
MAX_DENSITY_SITES = 6
NORM_ATOL = 1e-10
LEAK_FLOOR = 1e-15


class StateError(ValueError):
    pass


class AllLeakedError(ArithmeticError):
    """Raised when post-selection onto the logical subspace keeps no probability."""


@lru_cache(maxsize=None)
def logical_mask(n: int) -> np.ndarray:
    """Boolean diagonal of the logical projector over the 3**n basis."""
    digits = np.indices((3,) * n).reshape(n, -1)
    mask = np.all(digits < 2, axis=0)
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=None)
def logical_indices(n: int) -> np.ndarray:
    """Positions of the 2**n logical kets, ordered like the binary strings they encode."""
    idx = np.flatnonzero(logical_mask(n))
    idx.flags.writeable = False
    return idx


@lru_cache(maxsize=None)
def leaked_indices(n: int) -> np.ndarray:
    idx = np.flatnonzero(~logical_mask(n))
    idx.flags.writeable = False
    return idx


def _check_sites(n: int, sites: Sequence[int]) -> tuple[int, ...]:
    sites = tuple(int(s) for s in sites)
    if len(set(sites)) != len(sites):
        raise StateError(f"sites must be distinct, got {sites}")
    for s in sites:
        if not 0 <= s < n:
            raise StateError(f"site {s} out of range for n={n}")
    return sites


def apply_local_tensor(psi: np.ndarray, op: np.ndarray, sites: Sequence[int], offset: int = 0) -> np.ndarray:
    """Apply a 3^k x 3^k operator to ``sites`` of a ket tensor of shape ``batch + (3,)*n``.

    ``offset`` is the number of leading batch axes.
    """
    k = len(sites)
    axes = [offset + s for s in sites]
    op_t = np.asarray(op).reshape((3,) * (2 * k))
    out = np.tensordot(op_t, psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the k new axes first
    return np.moveaxis(out, list(range(k)), axes)


@dataclass(frozen=True)
class QutritState:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.n < 1:
            raise StateError("need at least one qutrit")
        if amps.size != 3 ** self.n:
            raise StateError(f"expected {3 ** self.n} amplitudes for n={self.n}, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise StateError("amplitudes must be finite")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return 3 ** self.n

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "QutritState":
        nrm = self.norm()
        if nrm == 0:
            raise StateError("cannot normalize the zero vector")
        return QutritState(self.n, self.amplitudes / nrm)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((3,) * self.n)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_json(self) -> str:
        return json.dumps(state_to_dict(self))


AnyState = Union[QutritState, "DensityMatrix"]


@dataclass(frozen=True)
class DensityMatrix:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.n > MAX_DENSITY_SITES:
            raise StateError(f"density matrices are limited to {MAX_DENSITY_SITES} qutrits")
        m = np.array(self.matrix, dtype=complex)
        d = 3 ** self.n
        if m.shape != (d, d):
            raise StateError(f"expected a {d}x{d} matrix, got {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_state(cls, state: QutritState) -> "DensityMatrix":
        v = state.amplitudes
        return cls(state.n, np.outer(v, v.conj()))

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence[AnyState]) -> "DensityMatrix":
        n = states[0].n
        acc = np.zeros((3 ** n, 3 ** n), dtype=complex)
        for w, s in zip(weights, states):
            rho = s if isinstance(s, DensityMatrix) else cls.from_state(s)
            acc += w * rho.matrix
        return cls(n, acc)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def validate(self, atol: float = NORM_ATOL, eig_floor: float = -1e-9) -> None:
        """Full physicality check; kept out of hot paths."""
        if max_norm(self.matrix - dagger(self.matrix)) > atol:
            raise StateError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > atol:
            raise StateError(f"density matrix trace {self.trace()} != 1")
        if np.linalg.eigvalsh(self.matrix).min() < eig_floor:
            raise StateError("density matrix has a negative eigenvalue")


def basis_state(ternary: str) -> QutritState:
    if not ternary or any(c not in "012" for c in ternary):
        raise StateError(f"basis label must be a non-empty string over '012', got {ternary!r}")
    n = len(ternary)
    if n > MAX_KET_SITES:
        raise StateError(f"kets are limited to {MAX_KET_SITES} qutrits")
    amps = np.zeros(3 ** n, dtype=complex)
    amps[int(ternary, 3)] = 1.0
    return QutritState(n, amps)


def logical_state(n: int, logical_amplitudes) -> QutritState:
    """Embed 2**n amplitudes (binary order) into the 3**n space and normalize."""
    vec = np.asarray(logical_amplitudes, dtype=complex).reshape(-1)
    if vec.size != 2 ** n:
        raise StateError(f"expected {2 ** n} logical amplitudes, got {vec.size}")
    amps = np.zeros(3 ** n, dtype=complex)
    amps[logical_indices(n)] = vec
    return QutritState(n, amps).normalized()


def random_logical_state(n: int, rng: np.random.Generator) -> QutritState:
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return logical_state(n, v)


def apply_local(state: QutritState, op: np.ndarray, sites: Sequence[int]) -> QutritState:
    sites = _check_sites(state.n, sites)
    op = np.asarray(op)
    if op.shape != (3 ** len(sites),) * 2:
        raise StateError(f"operator shape {op.shape} does not match {len(sites)} site(s)")
    out = apply_local_tensor(state.tensor(), op, sites)
    return QutritState(state.n, out.reshape(-1))


def apply_single_site(state: QutritState, op: np.ndarray, site: int) -> QutritState:
    return apply_local(state, op, (site,))


def apply_two_site(state: QutritState, op: np.ndarray, site_a: int, site_b: int) -> QutritState:
    """Apply a 9x9 operator to the ordered pair (site_a, site_b); site_a is the major factor."""
    return apply_local(state, op, (site_a, site_b))


def retained_probability(obj: AnyState) -> float:
    mask = logical_mask(obj.n)
    if isinstance(obj, DensityMatrix):
        return float(np.sum(np.diagonal(obj.matrix).real[mask]))
    return float(np.sum(np.abs(obj.amplitudes[mask]) ** 2))


def project_logical(obj: AnyState):
    """Return ``(P obj P, Tr(P obj P))`` without renormalizing.

    A fully leaked input gives the zero object and 0.0; use
    :func:`renormalized_logical` when the normalized post-selected state is needed.
    """
    mask = logical_mask(obj.n)
    retained = retained_probability(obj)
    if isinstance(obj, DensityMatrix):
        return DensityMatrix(obj.n, obj.matrix * np.outer(mask, mask)), retained
    return QutritState(obj.n, np.where(mask, obj.amplitudes, 0)), retained


def renormalized_logical(obj: AnyState):
    """Post-select onto the logical subspace and rescale by ``alpha = 1/retained``.

    Returns ``(alpha * P obj P, retained)``.
    """
    projected, retained = project_logical(obj)
    if retained < LEAK_FLOOR:
        raise AllLeakedError(f"retained probability {retained:.3e} is below {LEAK_FLOOR:g}")
    alpha = 1.0 / retained
    if isinstance(projected, DensityMatrix):
        return DensityMatrix(obj.n, projected.matrix * alpha), retained
    return QutritState(obj.n, projected.amplitudes * np.sqrt(alpha)), retained


def leak_probability(obj: AnyState) -> float:
    mask = logical_mask(obj.n)
    if isinstance(obj, DensityMatrix):
        leaked = float(np.sum(np.diagonal(obj.matrix).real[~mask]))
    else:
        leaked = float(np.sum(np.abs(obj.amplitudes[~mask]) ** 2))
    return min(max(leaked, 0.0), 1.0)


def state_to_dict(state: QutritState) -> dict:
    return {"n": state.n, "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes]}


def state_from_dict(data: dict) -> QutritState:
    try:
        n = int(data["n"])
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise StateError(f"malformed state snapshot: {exc}") from None
    return QutritState(n, amps)
