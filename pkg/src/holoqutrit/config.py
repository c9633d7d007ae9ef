"""Experiment configuration: JSON file -> validated ExperimentConfig.

Structure is checked against ``schemas/experiment.schema.json``; semantic
checks (site ranges, matrix sizes, logical initial state) follow.  Every
failure raises ConfigError naming the offending field.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import best_match

from .holonomy import (HolonomicGate, HolonomyReport, NotHolonomicError, NumericalAccuracyError,
                       PulseSchedule, embed_logical_unitary, gate_from_schedule, integrate_schedule,
                       random_logical_unitary)
from .estimation import Observable, ObservableError, observable_from_logical, pauli_string_observable
from .noise import NoiseError, NoiseSpec, faulty_locations
from .rng import substream
from .state import QutritState, StateError, basis_state, leak_probability, logical_state

SCHEMA_VERSION = 1

_S = 1 / math.sqrt(2)
NAMED_GATES = {
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
    "H": np.array([[_S, _S], [_S, -_S]]),
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]),
    "CZ": np.diag([1, 1, 1, -1]),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]]),
}


class ConfigError(ValueError):
    pass


@lru_cache(maxsize=None)
def load_schema() -> dict:
    text = resources.files("holoqutrit").joinpath("schemas/experiment.schema.json").read_text()
    return json.loads(text)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


@dataclass
class ExperimentConfig:
    n: int
    circuit: list[HolonomicGate]
    initial: QutritState
    noise: NoiseSpec
    observable: Observable
    shots: Optional[int] = None
    trials: Optional[int] = None
    seed: int = 0
    exact: bool = True
    workers: int = 1
    out: Optional[str] = None
    csv: Optional[str] = None
    dump_draws: Optional[str] = None
    raw: dict = field(default_factory=dict)
    pulse_reports: dict[int, HolonomyReport] = field(default_factory=dict)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """CLI overrides; keeps ``raw`` in sync so the echoed config is truthful."""
        cfg = ExperimentConfig(**{**self.__dict__})
        cfg.raw = json.loads(json.dumps(self.raw))
        run = cfg.raw.setdefault("run", {})
        for key, value in kw.items():
            if value is None:
                continue
            setattr(cfg, key, value)
            # output destinations stay out of the echo so results do not depend on where they are written
            if key in ("seed", "shots", "trials", "exact"):
                run[key] = value
        if "seed" in kw and kw["seed"] is not None:
            cfg.noise = NoiseSpec(**{**cfg.noise.__dict__, "seed": int(kw["seed"])})
        return cfg


def _complex_matrix(data, where: str) -> np.ndarray:
    try:
        return np.array([[complex(re, im) for re, im in row] for row in data])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: malformed complex matrix ({exc})") from None


def _build_gate(spec: dict, i: int, n: int, seed: int, reports: dict) -> HolonomicGate:
    where = f"circuit[{i}]"
    sites = tuple(spec["sites"])
    for s in sites:
        if s >= n:
            raise ConfigError(f"{where}.sites: site {s} out of range for n={n}")
    if len(set(sites)) != len(sites):
        raise ConfigError(f"{where}.sites: sites must be distinct")
    k = len(sites)
    name = spec.get("name", "")
    try:
        if "pulse" in spec:
            if k != 1:
                raise ConfigError(f"{where}.pulse: pulse gates act on exactly one site")
            schedule = PulseSchedule(**spec["pulse"])
            reports[i] = integrate_schedule(schedule)
            return gate_from_schedule(schedule, sites[0], name)
        if "gate" in spec:
            g = spec["gate"]
            mat = np.eye(2 ** k) if g == "I" else NAMED_GATES[g]
            if mat.shape != (2 ** k, 2 ** k):
                raise ConfigError(f"{where}.gate: {g} needs {mat.shape[0].bit_length() - 1} site(s), got {k}")
            return embed_logical_unitary(mat, sites, name or g)
        if "random_unitary" in spec:
            rng = substream(seed, "setup", int(spec["random_unitary"]))
            return embed_logical_unitary(random_logical_unitary(k, rng), sites, name or "random")
        return embed_logical_unitary(_complex_matrix(spec["matrix"], f"{where}.matrix"), sites, name)
    except (NotHolonomicError, NumericalAccuracyError):
        raise
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def _build_initial(spec, n: int) -> QutritState:
    try:
        if isinstance(spec, str):
            if len(spec) != n:
                raise ConfigError(f"system.initial_state: expected {n} characters, got {len(spec)}")
            state = basis_state(spec)
        else:
            amps = [complex(re, im) for re, im in spec["logical_amplitudes"]]
            state = logical_state(n, amps)
    except StateError as exc:
        raise ConfigError(f"system.initial_state: {exc}") from None
    if leak_probability(state) > 1e-12:
        raise ConfigError("system.initial_state: initial state must lie in the logical subspace")
    return state


def _build_observable(spec: dict, n: int) -> Observable:
    try:
        if "pauli" in spec:
            if len(spec["pauli"]) != n:
                raise ConfigError(f"observable.pauli: expected {n} letters, got {len(spec['pauli'])}")
            return pauli_string_observable(spec["pauli"], spec.get("name", ""))
        return observable_from_logical(_complex_matrix(spec["matrix"], "observable.matrix"), n,
                                       spec.get("name", "matrix"))
    except ObservableError as exc:
        raise ConfigError(f"observable: {exc}") from None


def config_from_dict(data: Any) -> ExperimentConfig:
    err = best_match(Draft202012Validator(load_schema()).iter_errors(data))
    if err is not None:
        raise ConfigError(f"{_path(err.absolute_path)}: {err.message}")
    n = data["system"]["n"]
    run = data.get("run", {})
    seed = int(run.get("seed", 0))
    reports: dict[int, HolonomyReport] = {}
    circuit = [_build_gate(g, i, n, seed, reports) for i, g in enumerate(data["circuit"])]
    noise_raw = dict(data.get("noise", {}))
    if "location_weights" in noise_raw:
        noise_raw["location_weights"] = tuple(noise_raw["location_weights"])
    try:
        noise = NoiseSpec(seed=seed, **noise_raw)
    except NoiseError as exc:
        raise ConfigError(f"noise: {exc}") from None
    if noise.mode != "none" and noise.location_weights is not None:
        try:
            faulty_locations(noise, circuit)
        except NoiseError as exc:
            raise ConfigError(f"noise.location_weights: {exc}") from None
    dump = run.get("dump_draws")
    if dump is True:
        dump = "draws.csv"
    return ExperimentConfig(
        n=n,
        circuit=circuit,
        initial=_build_initial(data["system"]["initial_state"], n),
        noise=noise,
        observable=_build_observable(data["observable"], n),
        shots=run.get("shots"),
        trials=run.get("trials"),
        seed=seed,
        exact=bool(run.get("exact", run.get("shots") is None)),
        workers=int(run.get("workers", 1)),
        out=run.get("out"),
        csv=run.get("csv"),
        dump_draws=dump or None,
        raw=data,
        pulse_reports=reports,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)
