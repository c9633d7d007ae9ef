"""Single-faulty-gate generalized Pauli noise.

Exactly one gate per execution is faulty.  The faulty gate is drawn from a
location distribution over the circuit's two-qutrit gates (uniform unless
configured) and is followed by one of the 80 non-identity operators
``X^a1 Z^a2 (x) X^b1 Z^b2`` on its two sites.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebra import IDENTITY_LABEL, PauliLabel, all_labels, error_operator_view, single_qutrit_operator
from .holonomy import HolonomicGate
from .rng import substream
from .state import QutritState, apply_local, apply_local_tensor

MODES = ("symmetric", "asymmetric", "none")


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSpec:
    mode: str = "symmetric"
    x_weight: float = 1.0
    z_weight: float = 1.0
    # weights over the two-qutrit gates in circuit order (or over all gates
    # when single_qutrit_gates is on); None means uniform
    location_weights: Optional[tuple[float, ...]] = None
    seed: int = 0
    single_qutrit_gates: bool = False
    # chance that the faulty gate actually errs; the rest is the error-free operator
    error_rate: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise NoiseError(f"noise mode must be one of {MODES}, got {self.mode!r}")
        if self.x_weight < 0 or self.z_weight < 0:
            raise NoiseError("x_weight and z_weight must be nonnegative")
        if not 0.0 < self.error_rate <= 1.0:
            raise NoiseError(f"error_rate must lie in (0, 1], got {self.error_rate}")
        if self.location_weights is not None:
            w = tuple(float(x) for x in self.location_weights)
            if any(x < 0 for x in w) or sum(w) <= 0:
                raise NoiseError("location weights must be nonnegative with a positive sum")
            object.__setattr__(self, "location_weights", w)


@dataclass(frozen=True)
class NoiseDraw:
    gate_index: int
    label: PauliLabel = field(default=IDENTITY_LABEL)


def _label_weight(spec: NoiseSpec, label: PauliLabel) -> float:
    if spec.mode == "symmetric":
        return 1.0
    n_x = (label.a1 != 0) + (label.b1 != 0)
    n_z = (label.a2 != 0) + (label.b2 != 0)
    return spec.x_weight ** n_x * spec.z_weight ** n_z


def error_distribution(spec: NoiseSpec, arity: int = 2) -> list[tuple[PauliLabel, float]]:
    """Probability of each error label following a faulty gate.

    Symmetric mode is uniform over the 80 non-identity labels.  Asymmetric mode
    weights a label by ``x_weight**(#X factors) * z_weight**(#Z factors)``.
    Mode ``none`` returns the identity with probability one.  For ``arity=1``
    the labels are restricted to ``(a1, a2, 0, 0)``.  An ``error_rate`` below
    one puts the remaining mass on the identity, listed first.
    """
    if spec.mode == "none":
        return [(IDENTITY_LABEL, 1.0)]
    labels = [lab for lab in all_labels() if not lab.is_identity]
    if arity == 1:
        labels = [lab for lab in labels if lab.b1 == 0 and lab.b2 == 0]
    weights = np.array([_label_weight(spec, lab) for lab in labels], dtype=float)
    total = weights.sum()
    if total <= 0:
        raise NoiseError("x_weight and z_weight cannot both be zero")
    probs = spec.error_rate * weights / total
    dist = list(zip(labels, (float(p) for p in probs)))
    if spec.error_rate < 1.0:
        dist.insert(0, (IDENTITY_LABEL, 1.0 - spec.error_rate))
    return dist


def faulty_locations(spec: NoiseSpec, circuit: Sequence[HolonomicGate]) -> list[tuple[int, float]]:
    """``(gate index, probability)`` for every gate that may be the faulty one."""
    if spec.single_qutrit_gates:
        candidates = list(range(len(circuit)))
    else:
        candidates = [i for i, g in enumerate(circuit) if g.arity == 2]
    if not candidates:
        raise NoiseError("circuit contains no two-qutrit gate to carry the error")
    if spec.location_weights is None:
        w = np.ones(len(candidates))
    else:
        if len(spec.location_weights) != len(candidates):
            raise NoiseError(f"expected {len(candidates)} location weights, got {len(spec.location_weights)}")
        w = np.array(spec.location_weights)
    w = w / w.sum()
    return [(k, float(p)) for k, p in zip(candidates, w)]


def sample_noise(spec: NoiseSpec, circuit: Sequence[HolonomicGate], trial: int = 0) -> NoiseDraw:
    """Deterministic in ``(spec.seed, trial)``."""
    locations = faulty_locations(spec, circuit)
    rng = substream(spec.seed, "noise", trial)
    k = locations[rng.choice(len(locations), p=[p for _, p in locations])][0]
    dist = error_distribution(spec, circuit[k].arity)
    j = rng.choice(len(dist), p=[p for _, p in dist])
    return NoiseDraw(k, dist[j][0])


def error_matrix(label: PauliLabel, arity: int) -> np.ndarray:
    if arity == 1:
        return single_qutrit_operator(label.a1, label.a2)
    return error_operator_view(label)


def run_circuit(initial: QutritState, circuit: Sequence[HolonomicGate]) -> QutritState:
    state = initial
    for gate in circuit:
        state = apply_local(state, gate.unitary, gate.sites)
    return state


def apply_noisy_circuit(initial: QutritState, circuit: Sequence[HolonomicGate], draw: NoiseDraw) -> QutritState:
    """Run the circuit, inserting the drawn error right after gate ``draw.gate_index``."""
    if not 0 <= draw.gate_index < len(circuit):
        raise NoiseError(f"gate index {draw.gate_index} outside circuit of length {len(circuit)}")
    state = initial
    for i, gate in enumerate(circuit):
        state = apply_local(state, gate.unitary, gate.sites)
        if i == draw.gate_index and not draw.label.is_identity:
            state = apply_local(state, error_matrix(draw.label, gate.arity), gate.sites)
    return state


def propagate_batch(batch: np.ndarray, n: int, circuit: Sequence[HolonomicGate]) -> np.ndarray:
    """Apply gates to a stack of kets, shape ``(m, 3**n)``; used by exhaustive ensembles."""
    psi = batch.reshape((batch.shape[0],) + (3,) * n)
    for gate in circuit:
        psi = apply_local_tensor(psi, gate.unitary, gate.sites, offset=1)
    return psi.reshape(batch.shape[0], -1)


def error_batch(state: QutritState, gate: HolonomicGate, labels: Sequence[PauliLabel]) -> np.ndarray:
    """Stack of ``E_label |state>`` on the gate's sites, one row per label."""
    ops = np.stack([error_matrix(lab, gate.arity) for lab in labels])
    k = gate.arity
    psi = state.tensor()
    op_t = ops.reshape((len(labels),) + (3,) * (2 * k))
    out = np.tensordot(op_t, psi, axes=(list(range(1 + k, 1 + 2 * k)), list(gate.sites)))
    out = np.moveaxis(out, list(range(1, 1 + k)), [1 + s for s in gate.sites])
    return out.reshape(len(labels), -1)
