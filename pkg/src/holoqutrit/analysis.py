"""Detection probabilities of generalized Pauli errors and the end-to-end experiment.

For a logical state and a faulty pair of sites ``(a, b)`` group the state's
probability by the logical values of the two sites: ``mass_00``, ``mass_01``,
``mass_10``, ``mass_11``.  An error ``X^a1 Z^a2 (x) X^b1 Z^b2`` moves a
component out of L exactly when some shifted site lands on |2>, so the chance
that post-selection rejects the error depends only on ``(a1, b1)`` and those
four masses.  Summed over each subset this gives N(S1)=27, N(S2)=9, N(S3)=9,
N(S4)=0 for every state, and a detected fraction of 45/80 under uniform noise.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .algebra import PauliLabel, Subset, all_labels, classify_label, validate_label
from .config import SCHEMA_VERSION, ConfigError, ExperimentConfig
from .estimation import (estimate_conventional, estimate_rescaled, exact_distribution,
                         random_logical_observable, retained_mass, sample_distribution)
from .holonomy import HolonomicGate, embed_logical_unitary, random_logical_unitary
from .noise import (NoiseDraw, NoiseSpec, error_batch, error_distribution, error_matrix, faulty_locations,
                    propagate_batch, sample_noise)
from .rng import substream
from .state import (AllLeakedError, QutritState, StateError, apply_local, leak_probability,
                    random_logical_state)

DECOMP_LEAK_ATOL = 1e-10
ERROR_COUNT = 80
SUBSET_TAGS = (Subset.S1, Subset.S2, Subset.S3, Subset.S4)


@dataclass(frozen=True)
class LogicalAmplitudeDecomposition:
    mass_00: float
    mass_01: float
    mass_10: float
    mass_11: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.mass_00, self.mass_01, self.mass_10, self.mass_11)

    def total(self) -> float:
        return math.fsum(self.as_tuple())


def decompose_on_pair(state: QutritState, site_a: int, site_b: int) -> LogicalAmplitudeDecomposition:
    if site_a == site_b or not (0 <= site_a < state.n and 0 <= site_b < state.n):
        raise StateError(f"need two distinct sites below n={state.n}, got ({site_a}, {site_b})")
    leak = leak_probability(state)
    if leak > DECOMP_LEAK_ATOL:
        raise StateError(f"state leaks with probability {leak:.3e}; decomposition needs a logical state")
    probs = np.abs(state.tensor()) ** 2
    other = tuple(i for i in range(state.n) if i not in (site_a, site_b))
    marg = probs.sum(axis=other)
    if site_a > site_b:
        marg = marg.T
    return LogicalAmplitudeDecomposition(float(marg[0, 0]), float(marg[0, 1]),
                                         float(marg[1, 0]), float(marg[1, 1]))


def closed_form_detection(decomp: LogicalAmplitudeDecomposition, label) -> float:
    """Probability that the error ``label`` is caught by post-selection onto L."""
    a1, _, b1, _ = validate_label(label)
    m00, m01, m10, m11 = decomp.as_tuple()
    if a1 and b1:
        return 1.0 - {(1, 1): m00, (1, 2): m01, (2, 1): m10, (2, 2): m11}[(a1, b1)]
    if a1 == 1:
        return m10 + m11
    if a1 == 2:
        return m00 + m01
    if b1 == 1:
        return m01 + m11
    if b1 == 2:
        return m00 + m10
    return 0.0


@dataclass
class DetectionReport:
    method: str                                   # "closed-form" or "simulated"
    subset_sums: dict[str, float]                 # N(S1)..N(S4)
    aggregate: float
    per_label: dict[str, float] = field(default_factory=dict)
    # simulated only
    trials: int = 0
    subset_counts: dict[str, int] = field(default_factory=dict)
    subset_rates: dict[str, Optional[float]] = field(default_factory=dict)
    aggregate_stderr: float = 0.0
    expected_aggregate: Optional[float] = None
    mode: str = "exact"

    def to_dict(self) -> dict:
        out = {"quantity": "detection probability", "method": self.method,
               "subset_sums": self.subset_sums, "aggregate": self.aggregate}
        if self.method == "simulated":
            out.update({"mode": self.mode, "trials": self.trials, "aggregate_stderr": self.aggregate_stderr,
                        "expected_aggregate": self.expected_aggregate,
                        "subset_counts": self.subset_counts, "subset_rates": self.subset_rates})
        if self.per_label:
            out["per_label"] = self.per_label
        return out


def subset_sums(decomp: LogicalAmplitudeDecomposition) -> DetectionReport:
    sums = {s.value: 0.0 for s in SUBSET_TAGS}
    per_label = {}
    for lab in all_labels():
        tag = classify_label(lab)
        if tag is Subset.IDENTITY:
            continue
        p = closed_form_detection(decomp, lab)
        per_label[str(lab)] = p
        sums[tag.value] += p
    aggregate = sum(sums.values()) / ERROR_COUNT
    return DetectionReport("closed-form", sums, aggregate, per_label)


def _single_site_detection(state: QutritState, site: int, label: PauliLabel) -> float:
    probs = np.abs(state.tensor()) ** 2
    marg = probs.sum(axis=tuple(i for i in range(state.n) if i != site))
    return {0: 0.0, 1: float(marg[1]), 2: float(marg[0])}[label.a1]


def expected_detection(prefix_states: Sequence[QutritState], circuit: Sequence[HolonomicGate],
                       spec: NoiseSpec) -> float:
    """Closed-form detection probability averaged over the configured location and label weights."""
    if spec.mode == "none":
        return 0.0
    total = 0.0
    for k, pk in faulty_locations(spec, circuit):
        gate, state = circuit[k], prefix_states[k]
        if gate.arity == 2:
            decomp = decompose_on_pair(state, *gate.sites)
            inner = sum(p * closed_form_detection(decomp, lab) for lab, p in error_distribution(spec, 2))
        else:
            inner = sum(p * _single_site_detection(state, gate.sites[0], lab)
                        for lab, p in error_distribution(spec, 1))
        total += pk * inner
    return total


def prefix_states(initial: QutritState, circuit: Sequence[HolonomicGate]) -> list[QutritState]:
    """``out[k]`` is the noiseless state right after gate ``k``."""
    out, state = [], initial
    for gate in circuit:
        state = apply_local(state, gate.unitary, gate.sites)
        out.append(state)
    return out


def _continue_from(state: QutritState, circuit: Sequence[HolonomicGate], draw: NoiseDraw) -> QutritState:
    gate = circuit[draw.gate_index]
    if not draw.label.is_identity:
        state = apply_local(state, error_matrix(draw.label, gate.arity), gate.sites)
    for g in circuit[draw.gate_index + 1:]:
        state = apply_local(state, g.unitary, g.sites)
    return state


def _chunks(total: int, workers: int) -> list[range]:
    size = max(1, -(-total // max(1, workers * 4)))
    return [range(i, min(i + size, total)) for i in range(0, total, size)]


def _map_ordered(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def simulate_detection(config: ExperimentConfig, trials: Optional[int] = None, exact: Optional[bool] = None,
                       workers: Optional[int] = None) -> tuple[DetectionReport, list[tuple]]:
    """Monte Carlo detection rate of the configured noise; returns the report and per-trial draws.

    Exact mode averages each trial's leak probability; shot mode measures once
    per trial and records whether the outcome left L.
    """
    trials = int(trials or config.trials or 10_000)
    exact = config.exact if exact is None else exact
    workers = workers or config.workers
    circuit, spec = config.circuit, config.noise
    if spec.mode != "none":
        faulty_locations(spec, circuit)
    prefix = prefix_states(config.initial, circuit)

    def run_chunk(idx: range):
        rows = []
        for i in idx:
            if spec.mode == "none":
                rows.append((i, -1, None, 0.0))
                continue
            draw = sample_noise(spec, circuit, i)
            leak = leak_probability(_continue_from(prefix[draw.gate_index], circuit, draw))
            if not exact:
                leak = float(substream(spec.seed, "measure", i).random() < leak)
            rows.append((i, draw.gate_index, draw.label, leak))
        return rows

    rows = [r for chunk in _map_ordered(run_chunk, _chunks(trials, workers), workers) for r in chunk]
    values = np.array([r[3] for r in rows])
    sums = {s.value: 0.0 for s in SUBSET_TAGS}
    counts = {s.value: 0 for s in SUBSET_TAGS}
    for _, _, lab, v in rows:
        if lab is None or lab.is_identity:
            continue
        tag = classify_label(lab).value
        sums[tag] += v
        counts[tag] += 1
    aggregate = float(np.sum(values) / trials)
    if exact:
        stderr = float(np.std(values, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    else:
        stderr = math.sqrt(aggregate * (1 - aggregate) / trials)
    report = DetectionReport(
        method="simulated",
        subset_sums=sums,
        aggregate=aggregate,
        trials=trials,
        subset_counts=counts,
        subset_rates={k: (sums[k] / counts[k] if counts[k] else None) for k in sums},
        aggregate_stderr=stderr,
        expected_aggregate=expected_detection(prefix, circuit, spec),
        mode="exact" if exact else "shots",
    )
    draws = [(i, k, str(lab) if lab is not None else "", classify_label(lab).value if lab is not None else "", v)
             for i, k, lab, v in rows]
    return report, draws


@dataclass
class Member:
    """One noisy execution in the estimator ensemble."""

    trial: int
    gate_index: int
    label: Optional[PauliLabel]
    weight: float
    e_conventional: float
    e_rescaled: Optional[float]
    retained: float
    leak: float


@dataclass
class ExperimentResult:
    e_ideal: float
    mean_e_conventional: float
    mean_e_rescaled: Optional[float]
    mae_conventional: float
    mae_rescaled: Optional[float]
    pooled_e_rescaled: Optional[float]
    retained_mean: float
    retained_min: float
    retained_max: float
    excluded: int
    excluded_weight: float
    ensemble: str
    members: list[Member]
    closed_form: Optional[DetectionReport]
    detection_rate: float
    expected_detection: float
    shots: Optional[int]
    seed: int

    @property
    def pooled_abs_error_conventional(self) -> float:
        return abs(self.mean_e_conventional - self.e_ideal)

    @property
    def pooled_abs_error_rescaled(self) -> Optional[float]:
        return None if self.pooled_e_rescaled is None else abs(self.pooled_e_rescaled - self.e_ideal)

    @property
    def rescaling_helps(self) -> bool:
        return self.mae_rescaled is not None and self.mae_rescaled < self.mae_conventional

    def estimation(self):
        from .estimation import EstimationResult
        return EstimationResult(self.e_ideal, self.mean_e_conventional, self.mean_e_rescaled,
                                self.retained_mean, self.shots, self.seed)


def _ensemble_plan(config: ExperimentConfig) -> list[tuple[int, list[tuple[int, PauliLabel, float]]]]:
    """Group ensemble members by faulty gate: ``[(k, [(trial, label, weight), ...]), ...]``."""
    spec, circuit = config.noise, config.circuit
    if config.trials is None:
        plan, trial = [], 0
        for k, pk in faulty_locations(spec, circuit):
            members = []
            for lab, pl in error_distribution(spec, circuit[k].arity):
                members.append((trial, lab, pk * pl))
                trial += 1
            plan.append((k, members))
        return plan
    by_k: dict[int, list] = {}
    for i in range(config.trials):
        draw = sample_noise(spec, circuit, i)
        by_k.setdefault(draw.gate_index, []).append((i, draw.label, 1.0 / config.trials))
    return sorted(by_k.items())


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Ideal value, then the noisy ensemble with both estimators.

    The default ensemble enumerates every (faulty gate, error label) pair with
    its probability; setting ``trials`` samples that many executions instead.
    Members whose every outcome leaked are excluded from the rescaled averages
    and counted.
    """
    obs, circuit, n = config.observable, config.circuit, config.n
    if not config.exact and not config.shots:
        raise ConfigError("run.shots: shot mode needs a positive shot count")
    shots = None if config.exact else int(config.shots)
    prefix = prefix_states(config.initial, circuit)
    ideal = prefix[-1] if prefix else config.initial
    e_ideal = estimate_conventional(exact_distribution(ideal, obs), obs)

    def evaluate(final_amps: np.ndarray, trial: int):
        state = QutritState(n, final_amps)
        dist = exact_distribution(state, obs)
        leak = float(np.sum(dist.probabilities[obs.n_logical:]))
        if shots:
            dist = sample_distribution(dist, shots, config.seed, trial)
        e_conv = estimate_conventional(dist, obs)
        try:
            e_r: Optional[float] = estimate_rescaled(dist, obs)
        except AllLeakedError:
            e_r = None
        return e_conv, e_r, retained_mass(dist, obs), leak

    if config.noise.mode == "none":
        members = [Member(0, -1, None, 1.0, *evaluate(ideal.amplitudes, 0))]
        ensemble = "noiseless"
    else:
        plan = _ensemble_plan(config)

        def run_group(item):
            k, group = item
            finals = propagate_batch(error_batch(prefix[k], circuit[k], [lab for _, lab, _ in group]),
                                     n, circuit[k + 1:])
            return [Member(t, k, lab, w, *evaluate(finals[j], t)) for j, (t, lab, w) in enumerate(group)]

        members = [m for grp in _map_ordered(run_group, plan, config.workers) for m in grp]
        members.sort(key=lambda m: m.trial)
        ensemble = "exhaustive" if config.trials is None else "sampled"

    w = np.array([m.weight for m in members])
    w = w / w.sum()
    e_conv = np.array([m.e_conventional for m in members])
    valid = np.array([m.e_rescaled is not None for m in members])
    if not valid.any():
        raise AllLeakedError("every ensemble member leaked completely; rescaled estimator undefined")
    e_r = np.array([m.e_rescaled if m.e_rescaled is not None else 0.0 for m in members])
    wv = w[valid] / w[valid].sum()
    retained = np.array([m.retained for m in members])
    pooled_kept = float(np.dot(w, retained))
    # leaked eigenvalues are zero, so each member's E' is its logical numerator
    pooled_r = float(np.dot(w, e_conv)) / pooled_kept if pooled_kept > 1e-12 else None
    closed = None
    if config.noise.mode != "none":
        k0 = faulty_locations(config.noise, circuit)[0][0]
        if circuit[k0].arity == 2:
            closed = subset_sums(decompose_on_pair(prefix[k0], *circuit[k0].sites))
    return ExperimentResult(
        e_ideal=e_ideal,
        mean_e_conventional=float(np.dot(w, e_conv)),
        mean_e_rescaled=float(np.dot(wv, e_r[valid])),
        mae_conventional=float(np.dot(w, np.abs(e_conv - e_ideal))),
        mae_rescaled=float(np.dot(wv, np.abs(e_r[valid] - e_ideal))),
        pooled_e_rescaled=pooled_r,
        retained_mean=float(np.dot(w, retained)),
        retained_min=float(retained.min()),
        retained_max=float(retained.max()),
        excluded=int((~valid).sum()),
        excluded_weight=float(w[~valid].sum()),
        ensemble=ensemble,
        members=members,
        closed_form=closed,
        detection_rate=float(np.dot(w, [m.leak for m in members])),
        expected_detection=expected_detection(prefix, circuit, config.noise),
        shots=shots,
        seed=config.seed,
    )


def result_document(config: ExperimentConfig, result: ExperimentResult) -> dict:
    """JSON-ready results; contains nothing that varies between identical runs."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config.raw,
        "gates": [{"index": i, "name": g.name, "sites": list(g.sites)} for i, g in enumerate(config.circuit)],
        "holonomy": {str(i): r.to_dict() for i, r in sorted(config.pulse_reports.items())},
        "estimation": {
            "E_ideal": result.e_ideal,
            "E_conventional_mean": result.mean_e_conventional,
            "E_rescaled_mean": result.mean_e_rescaled,
            "mean_abs_error_conventional": result.mae_conventional,
            "mean_abs_error_rescaled": result.mae_rescaled,
            "rescaling_helps": result.rescaling_helps,
            "pooled": {"E_conventional": result.mean_e_conventional, "E_rescaled": result.pooled_e_rescaled,
                       "abs_error_conventional": result.pooled_abs_error_conventional,
                       "abs_error_rescaled": result.pooled_abs_error_rescaled},
            "retained_mass": {"mean": result.retained_mean, "min": result.retained_min,
                              "max": result.retained_max},
            "all_leaked_excluded": {"count": result.excluded, "weight": result.excluded_weight},
            "ensemble": result.ensemble,
            "members": len(result.members),
            "distributions": "exact" if result.shots is None else "shots",
            "shots": result.shots,
            "seed": result.seed,
        },
        "detection": {
            "quantity": "probability that the error event is detected (outcome outside L)",
            "ensemble_rate": result.detection_rate,
            "closed_form_expected": result.expected_detection,
            "closed_form_first_location": result.closed_form.to_dict() if result.closed_form else None,
        },
    }
    return doc


MEMBER_CSV_HEADER = ("trial", "gate_index", "label", "subset", "weight", "E_conventional", "E_rescaled",
                     "retained_mass", "leak_probability")


def member_rows(result: ExperimentResult):
    for m in result.members:
        yield (m.trial, m.gate_index, str(m.label) if m.label else "",
               classify_label(m.label).value if m.label else "", m.weight, m.e_conventional,
               m.e_rescaled if m.e_rescaled is not None else "", m.retained, m.leak)


def random_experiment(n: int, n_gates: int, seed: int, noise: Optional[NoiseSpec] = None) -> ExperimentConfig:
    """Random logical circuit (Haar-random embedded gates), random logical initial state and
    GUE observable; at least one two-qutrit gate."""
    rng = substream(seed, "setup", 0)
    circuit = []
    for i in range(n_gates):
        two = n >= 2 and (i == 0 or rng.random() < 0.5)
        sites = tuple(int(s) for s in rng.choice(n, size=2 if two else 1, replace=False))
        circuit.append(embed_logical_unitary(random_logical_unitary(len(sites), rng), sites, "random"))
    order = rng.permutation(n_gates)
    circuit = [circuit[i] for i in order]
    return ExperimentConfig(
        n=n,
        circuit=circuit,
        initial=random_logical_state(n, rng),
        noise=noise or NoiseSpec("symmetric", seed=seed),
        observable=random_logical_observable(n, rng),
        seed=seed,
        raw={"generator": "random_experiment", "n": n, "gates": n_gates, "seed": seed},
    )
