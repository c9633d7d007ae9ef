"""Nonadiabatic holonomic gates on Lambda-type qutrits.

A gate is any unitary that maps the logical block ``{|0>,|1>}^k`` to itself
and its complement to itself.  Single-qutrit gates are generated from the
resonant single-loop Lambda pulse

    H(t) = Omega(t) (|b><2| + |2><b|),
    |b>  = sin(theta/2) e^{i phi} |0> - cos(theta/2) |1>,

which only couples |0> and |1> to the auxiliary level |2>.  A pulse area of pi
takes the bright state |b> around a closed loop through |2>, leaving the dark
state untouched, so the logical block ends up as ``I - 2|b><b|``.  The
integrator checks cyclicity and parallel transport numerically instead of
trusting that closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .algebra import dagger, is_unitary, max_norm, unitarity_defect
from .state import logical_indices, logical_mask

GATE_UNITARY_ATOL = 1e-10
GATE_BLOCK_ATOL = 1e-8
HOLONOMY_ATOL = 1e-6
CONVERGENCE_ATOL = 1e-8
ENVELOPES = ("sin2", "square", "zero")


class NotHolonomicError(ValueError):
    def __init__(self, message: str, report: "HolonomyReport | None" = None):
        super().__init__(message)
        self.report = report


class NumericalAccuracyError(ArithmeticError):
    pass


def block_leakage(u: np.ndarray, k: int) -> float:
    """max of ||(I-P) U P|| and ||P U (I-P)|| for the local logical projector P."""
    p = logical_mask(k).astype(float)
    q = 1.0 - p
    return max(max_norm(q[:, None] * u * p[None, :]), max_norm(p[:, None] * u * q[None, :]))


@dataclass(frozen=True)
class HolonomicGate:
    unitary: np.ndarray
    sites: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if len(sites) not in (1, 2):
            raise ValueError(f"gates act on one or two qutrits, got sites={sites}")
        u = np.array(self.unitary, dtype=complex)
        d = 3 ** len(sites)
        if u.shape != (d, d):
            raise ValueError(f"unitary must be {d}x{d} for {len(sites)} site(s), got {u.shape}")
        if unitarity_defect(u) > GATE_UNITARY_ATOL:
            raise NotHolonomicError(f"gate {self.name!r} is not unitary (defect {unitarity_defect(u):.2e})")
        if block_leakage(u, len(sites)) > GATE_BLOCK_ATOL:
            raise NotHolonomicError(f"gate {self.name!r} mixes the logical block with its complement")
        u.flags.writeable = False
        object.__setattr__(self, "unitary", u)
        object.__setattr__(self, "sites", sites)

    @property
    def arity(self) -> int:
        return len(self.sites)

    def logical_block(self) -> np.ndarray:
        idx = logical_indices(self.arity)
        return self.unitary[np.ix_(idx, idx)]


def embed_logical_unitary(logical_unitary, sites: Sequence[int] = (0,), name: str = "") -> HolonomicGate:
    """Block-diagonal 3^k gate: ``logical_unitary`` on the logical block, identity elsewhere."""
    sites = tuple(sites)
    k = len(sites)
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")
    v = np.asarray(logical_unitary, dtype=complex)
    if v.shape != (2 ** k, 2 ** k):
        raise ValueError(f"logical unitary must be {2 ** k}x{2 ** k}, got {v.shape}")
    if not is_unitary(v, atol=1e-10):
        raise NotHolonomicError(f"logical operator is not unitary (defect {unitarity_defect(v):.2e})")
    u = np.eye(3 ** k, dtype=complex)
    idx = logical_indices(k)
    u[np.ix_(idx, idx)] = v
    return HolonomicGate(u, sites, name)


def random_logical_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2^k x 2^k unitary (QR of a Ginibre matrix with phase fix)."""
    d = 2 ** k
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph[None, :]


@dataclass(frozen=True)
class PulseSchedule:
    """Resonant single-loop Lambda pulse in dimensionless time units."""

    theta: float
    phi: float
    area: float = math.pi
    tau: float = 1.0
    steps: int = 2000
    envelope: str = "sin2"

    def __post_init__(self):
        if self.envelope not in ENVELOPES:
            raise ValueError(f"envelope must be one of {ENVELOPES}, got {self.envelope!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if int(self.steps) < 2:
            raise ValueError("need at least two integration steps")
        for name in ("theta", "phi", "area", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def omega(self, t):
        t = np.asarray(t, dtype=float)
        if self.envelope == "zero":
            return np.zeros_like(t)
        if self.envelope == "square":
            return np.full_like(t, self.area / self.tau)
        # sin^2 integrates to tau/2 over one period
        return (2.0 * self.area / self.tau) * np.sin(np.pi * t / self.tau) ** 2

    def bright_state(self) -> np.ndarray:
        return np.array([math.sin(self.theta / 2) * np.exp(1j * self.phi),
                         -math.cos(self.theta / 2), 0.0], dtype=complex)

    def coupling(self) -> np.ndarray:
        """Time-independent shape K with H(t) = Omega(t) K; no |0><1| element."""
        b = self.bright_state()
        e = np.array([0, 0, 1], dtype=complex)
        return np.outer(b, e.conj()) + np.outer(e, b.conj())

    def hamiltonian(self, t: float) -> np.ndarray:
        return float(self.omega(t)) * self.coupling()

    def grid(self, steps: int | None = None) -> np.ndarray:
        return np.linspace(0.0, self.tau, int(steps or self.steps) + 1)

    def grid_area(self, steps: int | None = None) -> float:
        """Pulse area by the trapezoid rule on the integration grid."""
        t = self.grid(steps)
        return float(np.trapezoid(self.omega(t), t))

    def is_single_loop(self, atol: float = 1e-6) -> bool:
        return abs(self.grid_area() - math.pi) <= atol

    def closed_form_logical_gate(self) -> np.ndarray:
        """``I - 2|b><b|`` on span{|0>,|1>}; only meaningful for area pi."""
        b = self.bright_state()[:2]
        return np.eye(2) - 2 * np.outer(b, b.conj())

    def to_dict(self) -> dict:
        return {"theta": self.theta, "phi": self.phi, "area": self.area, "tau": self.tau,
                "steps": int(self.steps), "envelope": self.envelope}


@dataclass(frozen=True)
class HolonomyReport:
    cyclicity_defect: float
    parallel_transport_residual: float
    projected_gate: np.ndarray
    final_unitary: np.ndarray = field(repr=False)
    convergence_delta: float = 0.0
    steps: int = 0
    envelope: str = "sin2"
    pulse_area: float = 0.0

    def passes(self, atol: float = HOLONOMY_ATOL) -> bool:
        return self.cyclicity_defect <= atol and self.parallel_transport_residual <= atol

    def to_dict(self) -> dict:
        return {
            "cyclicity_defect": self.cyclicity_defect,
            "parallel_transport_residual": self.parallel_transport_residual,
            "convergence_delta": self.convergence_delta,
            "steps": self.steps,
            "envelope": self.envelope,
            "pulse_area": self.pulse_area,
            "projected_gate": [[[float(z.real), float(z.imag)] for z in row] for row in self.projected_gate],
        }


def rk4_propagate(hamiltonian: Callable[[float], np.ndarray], t_grid: np.ndarray, u0: np.ndarray):
    """Classical RK4 for ``dU/dt = -i H(t) U`` on a uniform grid; returns U at every grid point."""
    out = np.empty((len(t_grid),) + u0.shape, dtype=complex)
    u = np.array(u0, dtype=complex)
    out[0] = u
    for i in range(len(t_grid) - 1):
        t, h = t_grid[i], t_grid[i + 1] - t_grid[i]
        h_a = hamiltonian(t)
        h_m = hamiltonian(t + h / 2)
        h_b = hamiltonian(t + h)
        k1 = -1j * (h_a @ u)
        k2 = -1j * (h_m @ (u + 0.5 * h * k1))
        k3 = -1j * (h_m @ (u + 0.5 * h * k2))
        k4 = -1j * (h_b @ (u + h * k3))
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = u
    return out


def expm_product(schedule: PulseSchedule, steps: int | None = None) -> np.ndarray:
    """Independent propagator: ordered product of exp(-i H(t_mid) dt) over the grid."""
    t = schedule.grid(steps)
    u = np.eye(3, dtype=complex)
    for t0, t1 in zip(t[:-1], t[1:]):
        u = expm(-1j * schedule.hamiltonian(0.5 * (t0 + t1)) * (t1 - t0)) @ u
    return u


def _frame_diagnostics(schedule: PulseSchedule, traj: np.ndarray, t_grid: np.ndarray):
    frames = traj[:, :, :2]                       # columns are |phi_0(t)>, |phi_1(t)>
    h = schedule.omega(t_grid)[:, None, None] * schedule.coupling()[None]
    transported = dagger(frames) @ h @ frames
    residual = float(np.max(np.abs(transported)))
    final = frames[-1]
    p_final = final @ dagger(final)
    p_start = np.diag([1.0, 1.0, 0.0])
    return max_norm(p_final - p_start), residual


def integrate_schedule(schedule: PulseSchedule) -> HolonomyReport:
    """Integrate the Schroedinger equation for the logical frame and test the holonomy conditions.

    Raises NumericalAccuracyError if halving the step moves U(tau) by more than 1e-8.
    """
    t = schedule.grid()
    traj = rk4_propagate(schedule.hamiltonian, t, np.eye(3, dtype=complex))
    fine = rk4_propagate(schedule.hamiltonian, schedule.grid(2 * schedule.steps), np.eye(3, dtype=complex))
    delta = max_norm(traj[-1] - fine[-1])
    if delta > CONVERGENCE_ATOL:
        raise NumericalAccuracyError(
            f"step halving changed U(tau) by {delta:.2e} > {CONVERGENCE_ATOL:g}; increase steps")
    cyc, residual = _frame_diagnostics(schedule, traj, t)
    final = traj[-1]
    return HolonomyReport(
        cyclicity_defect=cyc,
        parallel_transport_residual=residual,
        projected_gate=final[:2, :2].copy(),
        final_unitary=final,
        convergence_delta=delta,
        steps=int(schedule.steps),
        envelope=schedule.envelope,
        pulse_area=schedule.grid_area(),
    )


def gate_from_schedule(schedule: PulseSchedule, site: int = 0, name: str = "") -> HolonomicGate:
    report = integrate_schedule(schedule)
    if not report.passes(HOLONOMY_ATOL):
        raise NotHolonomicError(
            f"schedule fails holonomy thresholds: cyclicity {report.cyclicity_defect:.2e}, "
            f"parallel transport {report.parallel_transport_residual:.2e}", report)
    return HolonomicGate(report.final_unitary, (site,), name or f"lambda(theta={schedule.theta:g},phi={schedule.phi:g})")
