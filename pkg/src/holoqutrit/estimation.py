"""Observables supported on the logical subspace and the two average-value estimators.

An observable is stored by its logical block only: the ``2**n`` eigenpairs of
that block, followed by one zero-eigenvalue basis ket per leaked basis state.
Every eigenvector therefore lies wholly inside L or wholly inside its
complement, which is what post-selection needs.

``estimate_conventional`` sums ``P_j * lambda_j`` over every outcome;
``estimate_rescaled`` keeps only logical outcomes and divides by their total
probability.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional

import numpy as np

from .algebra import hermiticity_defect
from .rng import substream
from .state import (AllLeakedError, AnyState, DensityMatrix, QutritState, StateError,
                    leak_probability, leaked_indices, logical_indices, renormalized_logical)

HERMITIAN_ATOL = 1e-10
RETAINED_FLOOR = 1e-12

LOGICAL_PAULIS = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class ObservableError(ValueError):
    pass


@dataclass(frozen=True)
class Observable:
    n: int
    logical_eigenvalues: np.ndarray
    logical_eigenvectors: np.ndarray  # columns, in the 2**n logical coordinates
    name: str = ""

    @property
    def dim(self) -> int:
        return 3 ** self.n

    @property
    def n_logical(self) -> int:
        return 2 ** self.n

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.logical_eigenvalues, np.zeros(self.dim - self.n_logical)])

    @property
    def is_logical(self) -> np.ndarray:
        tags = np.zeros(self.dim, dtype=bool)
        tags[: self.n_logical] = True
        return tags

    def tags(self) -> list[str]:
        return ["logical" if t else "leaked" for t in self.is_logical]

    def eigenvector(self, j: int) -> QutritState:
        amps = np.zeros(self.dim, dtype=complex)
        if j < self.n_logical:
            amps[logical_indices(self.n)] = self.logical_eigenvectors[:, j]
        else:
            amps[leaked_indices(self.n)[j - self.n_logical]] = 1.0
        return QutritState(self.n, amps)

    def eigenvectors(self) -> np.ndarray:
        """Full 3**n x 3**n matrix whose columns are the eigenvectors, in eigenpair order."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        li, ki = logical_indices(self.n), leaked_indices(self.n)
        out[np.ix_(li, np.arange(self.n_logical))] = self.logical_eigenvectors
        out[ki, self.n_logical + np.arange(ki.size)] = 1.0
        return out

    def logical_matrix(self) -> np.ndarray:
        v = self.logical_eigenvectors
        return (v * self.logical_eigenvalues) @ v.conj().T

    def matrix(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        li = logical_indices(self.n)
        out[np.ix_(li, li)] = self.logical_matrix()
        return out


def observable_from_logical(matrix, n: Optional[int] = None, name: str = "") -> Observable:
    a = np.asarray(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ObservableError(f"observable must be a square matrix, got shape {a.shape}")
    d = a.shape[0]
    if n is None:
        n = d.bit_length() - 1
    if d != 2 ** n:
        raise ObservableError(f"logical observable must be {2 ** n}x{2 ** n}, got {a.shape}")
    if hermiticity_defect(a) > HERMITIAN_ATOL:
        raise ObservableError(f"observable is not Hermitian (defect {hermiticity_defect(a):.2e})")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    w.flags.writeable = False
    v.flags.writeable = False
    return Observable(n, w, v, name)


def pauli_string_observable(paulis: str, name: str = "") -> Observable:
    """Logical Pauli string, one letter per site (site 0 first), e.g. ``"ZIX"``."""
    paulis = paulis.upper()
    if not paulis or any(c not in LOGICAL_PAULIS for c in paulis):
        raise ObservableError(f"Pauli string must use the letters IXYZ, got {paulis!r}")
    mat = reduce(np.kron, (LOGICAL_PAULIS[c] for c in paulis))
    return observable_from_logical(mat, len(paulis), name or paulis)


def random_logical_observable(n: int, rng: np.random.Generator) -> Observable:
    """GUE-distributed Hermitian matrix on the logical block."""
    d = 2 ** n
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return observable_from_logical((g + g.conj().T) / 2, n, "random")


@dataclass(frozen=True)
class OutcomeDistribution:
    probabilities: np.ndarray
    source: str = "exact"
    shots: Optional[int] = None
    counts: Optional[np.ndarray] = None


def exact_distribution(obj: AnyState, observable: Observable) -> OutcomeDistribution:
    """Born-rule probabilities ``P_j = <j|rho|j>`` in eigenpair order."""
    if obj.n != observable.n:
        raise StateError(f"state has {obj.n} qutrits but the observable has {observable.n}")
    li, ki = logical_indices(obj.n), leaked_indices(obj.n)
    v = observable.logical_eigenvectors
    if isinstance(obj, DensityMatrix):
        block = obj.matrix[np.ix_(li, li)]
        p_log = np.einsum("ij,ik,kj->j", v.conj(), block, v).real
        p_leak = np.diagonal(obj.matrix).real[ki]
    else:
        p_log = np.abs(v.conj().T @ obj.amplitudes[li]) ** 2
        p_leak = np.abs(obj.amplitudes[ki]) ** 2
    p = np.concatenate([p_log, p_leak])
    if p.min() < -1e-12:
        raise StateError(f"negative outcome probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        raise StateError(f"outcome probabilities sum to {total!r}; is the state normalized?")
    return OutcomeDistribution(p / total, "exact")


def sample_distribution(exact: OutcomeDistribution, shots: int, seed: int, counter: int = 0) -> OutcomeDistribution:
    """Multinomial finite-shot frequencies; deterministic in ``(seed, counter)``."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    rng = substream(seed, "shots", counter)
    p = exact.probabilities / exact.probabilities.sum()
    counts = rng.multinomial(int(shots), p)
    return OutcomeDistribution(counts / shots, "shots", int(shots), counts)


def estimate_conventional(dist: OutcomeDistribution, observable: Observable) -> float:
    return float(np.dot(dist.probabilities, observable.eigenvalues))


def retained_mass(dist: OutcomeDistribution, observable: Observable) -> float:
    return float(np.sum(dist.probabilities[: observable.n_logical]))


def estimate_rescaled(dist: OutcomeDistribution, observable: Observable) -> float:
    """Post-selected average over logical outcomes; raises AllLeakedError if none survive."""
    p = dist.probabilities[: observable.n_logical]
    kept = float(p.sum())
    if kept <= RETAINED_FLOOR:
        raise AllLeakedError(f"retained mass {kept:.3e}: rescaled estimator undefined")
    return float(np.dot(p, observable.logical_eigenvalues) / kept)


@dataclass(frozen=True)
class EstimationResult:
    e_ideal: float
    e_conventional: float
    e_rescaled: Optional[float]  # None when every outcome leaked
    retained_mass: float
    shots: Optional[int] = None
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {"E_ideal": self.e_ideal, "E_conventional": self.e_conventional,
                "E_rescaled": self.e_rescaled, "retained_mass": self.retained_mass,
                "shots": self.shots, "seed": self.seed}


def estimate(final: AnyState, observable: Observable, e_ideal: float,
             shots: Optional[int] = None, seed: int = 0, counter: int = 0) -> EstimationResult:
    dist = exact_distribution(final, observable)
    if shots:
        dist = sample_distribution(dist, shots, seed, counter)
    kept = retained_mass(dist, observable)
    try:
        e_r: Optional[float] = estimate_rescaled(dist, observable)
    except AllLeakedError:
        e_r = None
    return EstimationResult(float(e_ideal), estimate_conventional(dist, observable), e_r, kept,
                            shots if shots else None, seed if shots else None)


def ideal_weight_after_projection(rho_f: DensityMatrix, rho_eps: DensityMatrix, p: float) -> float:
    """Weight of ``rho_f`` in the post-selected, renormalized ``(1-p) rho_f + p rho_eps``.

    ``rho_f`` must live in L, so ``P rho_f P = rho_f`` and the projected mixture is
    ``(1-p) rho_f + p P rho_eps P`` divided by its trace.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if leak_probability(rho_f) > 1e-10:
        raise StateError("rho_f must be supported in the logical subspace")
    mixed = DensityMatrix.mixture([1.0 - p, p], [rho_f, rho_eps])
    _, retained = renormalized_logical(mixed)
    return (1.0 - p) / retained
