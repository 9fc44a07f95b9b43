"""Von Neumann premeasurement, conditional Born sampling and local reversal.

The global state is never collapsed.  Sampling an outcome only appends a
record to the ledger; later samples condition on every record that is still
active.  Reversal applies the adjoint coupling and deactivates the record,
which stays in the ledger as a ghost.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .hilbert import Operator, StateVector, apply_on
from .spin import Direction, spin_projector
from .tolerances import TOL

__all__ = [
    "READY",
    "PLUS",
    "MINUS",
    "POINTER_DIM",
    "MeasurementError",
    "MeasurementOp",
    "ReversalOp",
    "Record",
    "SimulationState",
    "pointer_projector",
    "premeasurement_unitary",
    "conditional_distribution",
    "apply_measurement",
    "apply_reversal",
    "sample_outcome",
    "round_trip_deviation",
    "perturbed_unitary",
]

READY, PLUS, MINUS = 0, 1, 2
POINTER_DIM = 3
_SLOT = {1: PLUS, -1: MINUS}


class MeasurementError(RuntimeError):
    """Raised when a measurement or reversal violates its preconditions."""


@dataclass(frozen=True)
class MeasurementOp:
    id: str
    party: str
    target: str
    direction: Direction
    pointer: str


@dataclass(frozen=True)
class ReversalOp:
    id: str
    undoes: str
    party: str | None = None


@dataclass(frozen=True)
class Record:
    measurement: MeasurementOp
    outcome: int
    active: bool = True

    @property
    def measurement_id(self) -> str:
        return self.measurement.id


@dataclass(frozen=True, eq=False)
class SimulationState:
    state: StateVector
    records: tuple[Record, ...] = ()

    @property
    def active_records(self) -> tuple[Record, ...]:
        return tuple(r for r in self.records if r.active)

    def record(self, measurement_id: str) -> Record:
        """Latest record (active or ghost) for a measurement."""
        for r in reversed(self.records):
            if r.measurement_id == measurement_id:
                return r
        raise KeyError(measurement_id)

    def active_branch_probability(self) -> float:
        """Born weight of the conjunction of all active records."""
        psi = _condition(self.state, self.active_records)
        return float(np.vdot(psi.amplitudes, psi.amplitudes).real)


def pointer_projector(pointer: str, outcome: int) -> Operator:
    slot = _SLOT[outcome]
    m = np.zeros((POINTER_DIM, POINTER_DIM))
    m[slot, slot] = 1.0
    return Operator((pointer,), m)


@lru_cache(maxsize=None)
def _transposition(i: int, j: int) -> np.ndarray:
    perm = np.eye(POINTER_DIM)
    perm[[i, j]] = perm[[j, i]]
    return perm


def premeasurement_unitary(m: MeasurementOp) -> Operator:
    """P_+(n) x (E0<->E+) + P_-(n) x (E0<->E-) on (target spin, pointer)."""
    if not m.pointer or m.pointer == m.target:
        raise MeasurementError(f"measurement {m.id!r}: malformed pointer {m.pointer!r}")
    up = spin_projector(m.direction, 1).matrix
    down = spin_projector(m.direction, -1).matrix
    u = np.kron(up, _transposition(READY, PLUS)) + np.kron(down, _transposition(READY, MINUS))
    return Operator((m.target, m.pointer), u)


def _check_measurement(state: StateVector, m: MeasurementOp) -> None:
    reg = state.register
    if m.target not in reg or reg.subsystem(m.target).dim != 2:
        raise MeasurementError(f"measurement {m.id!r}: target {m.target!r} is not a spin in the register")
    if m.pointer not in reg or reg.subsystem(m.pointer).dim != POINTER_DIM:
        raise MeasurementError(f"measurement {m.id!r}: pointer {m.pointer!r} must be a 3-level subsystem")


def _condition(state: StateVector, records) -> StateVector:
    psi = state
    for rec in records:
        psi = apply_on(psi, pointer_projector(rec.measurement.pointer, rec.outcome))
    return psi


def conditional_distribution(s: SimulationState, m: MeasurementOp) -> dict[int, float]:
    """Outcome probabilities for ``m`` given every active record.

    Assumes the coupling of ``m`` has already been applied to ``s.state``.
    """
    _check_measurement(s.state, m)
    psi = _condition(s.state, s.active_records)
    z = float(np.vdot(psi.amplitudes, psi.amplitudes).real)
    if z < TOL.impossible:
        raise MeasurementError(
            f"active records {[r.measurement_id for r in s.active_records]} form an impossible branch"
        )
    branch = apply_on(psi, pointer_projector(m.pointer, 1)).amplitudes
    p_plus = float(np.vdot(branch, branch).real) / z
    if p_plus < TOL.impossible:
        p_plus = 0.0
    elif p_plus > 1.0 - TOL.impossible:
        p_plus = 1.0
    return {1: p_plus, -1: 1.0 - p_plus}


def sample_outcome(p_plus: float, u: float) -> int:
    return 1 if u < p_plus else -1


def apply_measurement(
    s: SimulationState,
    m: MeasurementOp,
    rng: np.random.Generator,
    unitary: Operator | None = None,
) -> tuple[int, SimulationState]:
    """Couple, sample conditionally on active records, append a record.

    ``unitary`` replaces the ideal coupling; it exists for fault injection.
    """
    _check_measurement(s.state, m)
    for rec in s.active_records:
        if rec.measurement.pointer == m.pointer:
            raise MeasurementError(
                f"pointer {m.pointer!r} already used by {rec.measurement_id!r} and not reversed"
            )
    u_op = premeasurement_unitary(m) if unitary is None else unitary
    coupled = SimulationState(apply_on(s.state, u_op), s.records)
    dist = conditional_distribution(coupled, m)
    outcome = sample_outcome(dist[1], rng.random())
    return outcome, SimulationState(coupled.state, s.records + (Record(m, outcome),))


def apply_reversal(s: SimulationState, r: ReversalOp) -> SimulationState:
    """Apply the adjoint coupling of the undone measurement and ghost its record."""
    idx = next(
        (i for i in range(len(s.records) - 1, -1, -1)
         if s.records[i].measurement_id == r.undoes and s.records[i].active),
        None,
    )
    if idx is None:
        if any(rec.measurement_id == r.undoes for rec in s.records):
            raise MeasurementError(f"reversal {r.id!r}: measurement {r.undoes!r} already reversed")
        raise MeasurementError(f"reversal {r.id!r}: measurement {r.undoes!r} not found")
    rec = s.records[idx]
    state = apply_on(s.state, premeasurement_unitary(rec.measurement).adjoint())
    records = s.records[:idx] + (replace(rec, active=False),) + s.records[idx + 1:]
    return SimulationState(state, records)


def round_trip_deviation(state: StateVector, m: MeasurementOp, rng: np.random.Generator,
                         unitary: Operator | None = None) -> float:
    """Max amplitude deviation after measuring ``m`` and reversing it."""
    _, s = apply_measurement(SimulationState(state), m, rng, unitary=unitary)
    s = apply_reversal(s, ReversalOp(f"{m.id}~", m.id))
    return s.state.max_deviation(state)


def perturbed_unitary(m: MeasurementOp, epsilon: float, seed: int = 0) -> Operator:
    """Ideal coupling followed by exp(-i epsilon H) for a random Hermitian H of unit norm."""
    u = premeasurement_unitary(m)
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = (a + a.conj().T) / 2
    h /= np.linalg.norm(h, 2)
    w, v = np.linalg.eigh(h)
    kick = (v * np.exp(-1j * epsilon * w)) @ v.conj().T
    return Operator(u.support, kick @ u.matrix)
