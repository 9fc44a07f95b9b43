"""Prediction engines for located measurement/reversal protocols.

``run_standard`` applies unitary quantum mechanics along the simultaneity
order of one frame, sampling each outcome conditionally on records active at
that moment.  ``run_bohm`` is the idealized discrete pilot-wave rule evaluated
in a preferred frame.

Both engines have a single-run form returning a :class:`FrameHistory` and a
vectorized batch form returning a :class:`FrameBatch`.  The batch form reuses
the single-run conditioning code: the unitary evolution along a frame does not
depend on sampled outcomes, so the conditional probability for every pattern
of active records is computed once per (protocol, frame).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .hilbert import Register, StateVector, apply_on, basis_state, tensor_state
from .measurement import (
    POINTER_DIM,
    READY,
    MeasurementError,
    MeasurementOp,
    Record,
    ReversalOp,
    SimulationState,
    apply_measurement,
    apply_reversal,
    conditional_distribution,
    premeasurement_unitary,
    sample_outcome,
)
from .relativity import Frame, LocatedOp, interval_type, order_events
from .rng import run_generator, run_uniforms
from .spin import singlet_state

__all__ = [
    "ProtocolError",
    "Protocol",
    "FrameHistory",
    "FrameBatch",
    "HiddenConfiguration",
    "run_standard",
    "run_standard_batch",
    "exact_distribution",
    "run_bohm",
    "run_bohm_batch",
    "sample_hidden",
    "sample_hidden_batch",
]


class ProtocolError(ValueError):
    pass


def _party(op) -> str:
    return op.party


@dataclass(frozen=True)
class Protocol:
    """Two spins in the singlet, one 3-level pointer per pointer label, located ops."""

    ops: tuple[LocatedOp, ...]
    spins: tuple[str, str] = ("L", "R")
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        ids = [o.id for o in self.ops]
        if len(set(ids)) != len(ids):
            raise ProtocolError(f"operation ids must be unique: {ids}")
        located = {o.id: o for o in self.ops}
        for o in self.ops:
            if isinstance(o.op, MeasurementOp):
                if o.op.target not in self.spins:
                    raise ProtocolError(f"{o.id!r} targets {o.op.target!r}, not one of {self.spins}")
                if o.op.pointer in self.spins:
                    raise ProtocolError(f"{o.id!r}: pointer label clashes with a spin label")
            elif isinstance(o.op, ReversalOp):
                m = located.get(o.op.undoes)
                if m is None or not isinstance(m.op, MeasurementOp):
                    raise ProtocolError(f"reversal {o.id!r} undoes unknown measurement {o.op.undoes!r}")
                if not (interval_type(m.at, o.at) == "timelike" and o.at.t > m.at.t):
                    raise ProtocolError(
                        f"reversal {o.id!r} must lie in the timelike future of {m.id!r}"
                    )
            else:
                raise ProtocolError(f"unsupported operation {o.op!r}")
        for a, b in itertools.combinations(self.ops, 2):
            if self.party_of(a) == self.party_of(b) and interval_type(a.at, b.at) != "timelike":
                raise ProtocolError(
                    f"{a.id!r} and {b.id!r} belong to {self.party_of(a)} but are not timelike separated"
                )

    def party_of(self, o: LocatedOp) -> str:
        if isinstance(o.op, ReversalOp):
            if o.op.party is not None:
                return o.op.party
            return next(x.op.party for x in self.ops if x.id == o.op.undoes)
        return o.op.party

    @cached_property
    def measurements(self) -> tuple[MeasurementOp, ...]:
        return tuple(o.op for o in self.ops if isinstance(o.op, MeasurementOp))

    @cached_property
    def measurement_ids(self) -> tuple[str, ...]:
        return tuple(m.id for m in self.measurements)

    def measurement(self, mid: str) -> MeasurementOp:
        for m in self.measurements:
            if m.id == mid:
                return m
        raise KeyError(mid)

    def located(self, oid: str) -> LocatedOp:
        for o in self.ops:
            if o.id == oid:
                return o
        raise KeyError(oid)

    @cached_property
    def pointers(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(m.pointer for m in self.measurements))

    @cached_property
    def register(self) -> Register:
        return Register.of(*((s, 2) for s in self.spins), *((p, POINTER_DIM) for p in self.pointers))

    @cached_property
    def initial_state(self) -> StateVector:
        spins = singlet_state(Register.of(*((s, 2) for s in self.spins)))
        if not self.pointers:
            return spins
        ready = basis_state(Register.of(*((p, POINTER_DIM) for p in self.pointers)), [READY] * len(self.pointers))
        return tensor_state(spins, ready)


@dataclass(frozen=True, eq=False)
class FrameHistory:
    frame: Frame
    ops: tuple[LocatedOp, ...]
    outcomes: Mapping[str, int]
    active_at_end: Mapping[str, bool]
    contexts: Mapping[str, tuple[str, ...]]
    final_state: StateVector | None
    engine: str = "standard"

    def same_as(self, other: "FrameHistory", tol: float = 1e-12) -> bool:
        """Equal op order, outcomes, ledgers and final state (ignores the frame label)."""
        if [o.id for o in self.ops] != [o.id for o in other.ops]:
            return False
        if dict(self.outcomes) != dict(other.outcomes) or dict(self.active_at_end) != dict(other.active_at_end):
            return False
        if dict(self.contexts) != dict(other.contexts):
            return False
        if (self.final_state is None) != (other.final_state is None):
            return False
        return self.final_state is None or self.final_state.max_deviation(other.final_state) <= tol


@dataclass(frozen=True, eq=False)
class FrameBatch:
    """Outcomes of runs ``start .. start + runs - 1`` in one frame; columns follow protocol order."""

    protocol: Protocol
    frame: Frame
    engine: str
    start: int
    outcomes: np.ndarray = field(repr=False)
    ops: tuple[LocatedOp, ...] = ()
    contexts: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    active_at_end: Mapping[str, bool] = field(default_factory=dict)

    @property
    def runs(self) -> int:
        return self.outcomes.shape[0]

    def column(self, mid: str) -> np.ndarray:
        return self.outcomes[:, self.protocol.measurement_ids.index(mid)]

    def correlation(self, x: str, y: str) -> float:
        return float(np.mean(self.column(x).astype(np.int64) * self.column(y)))

    def jointly_active(self) -> list[tuple[str, str]]:
        """Pairs of measurements whose records were active at the same time, earlier one first."""
        pairs = []
        for mid in (o.id for o in self.ops if isinstance(o.op, MeasurementOp)):
            pairs.extend((c, mid) for c in self.contexts[mid])
        return pairs


# ---------------------------------------------------------------- standard engine

@dataclass(frozen=True, eq=False)
class _Step:
    located: LocatedOp
    column: int  # measurement column, -1 for reversals
    context: tuple[int, ...] = ()
    p_plus: np.ndarray | None = None  # indexed by bit pattern over context (bit j: context[j] gave +1)


@dataclass(frozen=True, eq=False)
class _Plan:
    ordered: tuple[LocatedOp, ...]
    steps: tuple[_Step, ...]
    final_state: StateVector
    active_at_end: tuple[bool, ...]


def _pattern_records(protocol: Protocol, context: Sequence[int], bits: int) -> tuple[Record, ...]:
    ms = protocol.measurements
    return tuple(Record(ms[c], 1 if bits >> j & 1 else -1) for j, c in enumerate(context))


@lru_cache(maxsize=256)
def _plan(protocol: Protocol, frame: Frame) -> _Plan:
    ordered = tuple(order_events(protocol.ops, frame))
    ids = protocol.measurement_ids
    state = protocol.initial_state
    active: list[int] = []
    steps = []
    for o in ordered:
        if isinstance(o.op, MeasurementOp):
            col = ids.index(o.id)
            for c in active:
                if protocol.measurements[c].pointer == o.op.pointer:
                    raise MeasurementError(
                        f"pointer {o.op.pointer!r} already used by {ids[c]!r} and not reversed"
                    )
            state = apply_on(state, premeasurement_unitary(o.op))
            context = tuple(active)
            table = np.full(2 ** len(context), np.nan)
            for bits in range(table.size):
                s = SimulationState(state, _pattern_records(protocol, context, bits))
                try:
                    table[bits] = conditional_distribution(s, o.op)[1]
                except MeasurementError:
                    pass  # impossible pattern, never sampled
            table.flags.writeable = False
            steps.append(_Step(o, col, context, table))
            active.append(col)
        else:
            col = ids.index(o.op.undoes)
            if col not in active:
                raise MeasurementError(f"reversal {o.id!r}: measurement {o.op.undoes!r} is not active")
            active.remove(col)
            state = apply_on(state, premeasurement_unitary(protocol.measurements[col]).adjoint())
            steps.append(_Step(o, -1))
    at_end = tuple(c in active for c in range(len(ids)))
    return _Plan(ordered, tuple(steps), state, at_end)


def _contexts(protocol: Protocol, plan: _Plan) -> dict[str, tuple[str, ...]]:
    ids = protocol.measurement_ids
    return {ids[s.column]: tuple(ids[c] for c in s.context) for s in plan.steps if s.column >= 0}


def run_standard(protocol: Protocol, frame: Frame, seed: int, run_index: int = 0) -> FrameHistory:
    """One run executed op by op on a :class:`SimulationState`."""
    ordered = order_events(protocol.ops, frame)
    rng = run_generator(seed, run_index, len(protocol.measurements))
    s = SimulationState(protocol.initial_state)
    contexts = {}
    for o in ordered:
        if isinstance(o.op, MeasurementOp):
            contexts[o.id] = tuple(r.measurement_id for r in s.active_records)
            _, s = apply_measurement(s, o.op, rng)
        else:
            s = apply_reversal(s, o.op)
    outcomes = {r.measurement_id: r.outcome for r in s.records}
    at_end = {r.measurement_id: r.active for r in s.records}
    return FrameHistory(frame, tuple(ordered), outcomes, at_end, contexts, s.state, "standard")


def run_standard_batch(protocol: Protocol, frame: Frame, runs: int, seed: int, start: int = 0) -> FrameBatch:
    """Vectorized equivalent of ``run_standard`` for runs ``start .. start + runs - 1``."""
    plan = _plan(protocol, frame)
    n = len(protocol.measurements)
    u = run_uniforms(seed, start, start + runs, n)
    out = np.zeros((runs, n), dtype=np.int8)
    draw = 0
    for step in plan.steps:
        if step.column < 0:
            continue
        code = np.zeros(runs, dtype=np.int64)
        for j, c in enumerate(step.context):
            code |= (out[:, c] == 1).astype(np.int64) << j
        p = step.p_plus[code]
        if np.isnan(p).any():
            raise MeasurementError(f"{step.located.id!r}: sampled an impossible record pattern")
        out[:, step.column] = np.where(u[:, draw] < p, 1, -1)
        draw += 1
    out.flags.writeable = False
    return FrameBatch(
        protocol, frame, "standard", start, out, plan.ordered, _contexts(protocol, plan),
        dict(zip(protocol.measurement_ids, plan.active_at_end)),
    )


def exact_distribution(protocol: Protocol, frame: Frame) -> dict[tuple[int, ...], float]:
    """Probability of every outcome tuple (protocol column order) under the standard engine."""
    plan = _plan(protocol, frame)
    n = len(protocol.measurements)
    dist: dict[tuple[int, ...], float] = {}

    def walk(k: int, outcomes: list[int], prob: float) -> None:
        if prob == 0.0:
            return
        if k == len(plan.steps):
            dist[tuple(outcomes)] = dist.get(tuple(outcomes), 0.0) + prob
            return
        step = plan.steps[k]
        if step.column < 0:
            walk(k + 1, outcomes, prob)
            return
        bits = sum(1 << j for j, c in enumerate(step.context) if outcomes[c] == 1)
        p = float(step.p_plus[bits])
        for value, q in ((1, p), (-1, 1.0 - p)):
            outcomes[step.column] = value
            walk(k + 1, outcomes, prob * q)
        outcomes[step.column] = 0

    walk(0, [0] * n, 1.0)
    return dist


# ---------------------------------------------------------------- Bohm engine

@dataclass(frozen=True)
class HiddenConfiguration:
    """Which wave packet (+1 upper, -1 lower) each particle starts in."""

    signs: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        signs = tuple((str(k), int(v)) for k, v in self.signs)
        if any(v not in (1, -1) for _, v in signs):
            raise ValueError("hidden position signs must be +1 or -1")
        if len({k for k, _ in signs}) != len(signs):
            raise ValueError("one sign per spin subsystem")
        object.__setattr__(self, "signs", signs)

    @classmethod
    def of(cls, mapping: Mapping[str, int] | None = None, **kw: int) -> "HiddenConfiguration":
        items = dict(mapping or {}, **kw)
        return cls(tuple(items.items()))

    def __getitem__(self, label: str) -> int:
        return dict(self.signs)[label]


def sample_hidden(seed: int, spins: Sequence[str] = ("L", "R"), run_index: int = 0) -> HiddenConfiguration:
    """Independent fair signs per particle, from the (seed, run_index) stream."""
    u = run_generator(seed, run_index, len(spins)).random(len(spins))
    return HiddenConfiguration(tuple((s, 1 if x < 0.5 else -1) for s, x in zip(spins, u)))


def sample_hidden_batch(seed: int, runs: int, start: int = 0, spins: Sequence[str] = ("L", "R")) -> np.ndarray:
    """Array (runs, len(spins)) of signs; row r equals ``sample_hidden(seed, spins, start + r)``."""
    u = run_uniforms(seed, start, start + runs, len(spins))
    return np.where(u < 0.5, 1, -1).astype(np.int8)


def _check_bohm(protocol: Protocol) -> None:
    ms = protocol.measurements
    for m in ms[1:]:
        if not m.direction.is_parallel(ms[0].direction):
            raise ProtocolError(
                f"Bohm engine supports parallel measurement directions only ({m.id!r} differs from {ms[0].id!r})"
            )


def run_bohm(
    protocol: Protocol,
    preferred: Frame,
    h: HiddenConfiguration,
    report: Frame | None = None,
) -> FrameHistory:
    """Deterministic outcomes computed in ``preferred`` order, reported in ``report`` order.

    A measurement repeats the outcome of an active record on the same particle;
    failing that it yields the opposite of an active record on the other
    particle; failing that it yields the particle's hidden sign.
    """
    _check_bohm(protocol)
    ordered = order_events(protocol.ops, preferred)
    active: list[MeasurementOp] = []
    outcomes: dict[str, int] = {}
    contexts: dict[str, tuple[str, ...]] = {}
    for o in ordered:
        if isinstance(o.op, MeasurementOp):
            m = o.op
            contexts[m.id] = tuple(a.id for a in active)
            same = [a for a in active if a.target == m.target]
            other = [a for a in active if a.target != m.target]
            if same:
                value = outcomes[same[-1].id]
            elif other:
                value = -outcomes[other[-1].id]
            else:
                value = h[m.target]
            outcomes[m.id] = value
            active.append(m)
        else:
            target = next((a for a in active if a.id == o.op.undoes), None)
            if target is None:
                raise MeasurementError(f"reversal {o.id!r}: measurement {o.op.undoes!r} is not active")
            active.remove(target)
    shown = ordered if report is None else order_events(protocol.ops, report)
    at_end = {m.id: m in active for m in protocol.measurements}
    final = _plan(protocol, preferred).final_state
    return FrameHistory(report or preferred, tuple(shown), outcomes, at_end, contexts, final, "bohm")


def run_bohm_batch(
    protocol: Protocol,
    preferred: Frame,
    hidden: np.ndarray,
    start: int = 0,
    report: Frame | None = None,
) -> FrameBatch:
    """Bohm outcomes for each row of ``hidden`` (columns follow ``protocol.spins``)."""
    hidden = np.asarray(hidden)
    ids = protocol.measurement_ids
    out = np.zeros((hidden.shape[0], len(ids)), dtype=np.int8)
    history = None
    for z in itertools.product((1, -1), repeat=len(protocol.spins)):
        rows = np.all(hidden == np.array(z), axis=1)
        history = run_bohm(protocol, preferred, HiddenConfiguration(tuple(zip(protocol.spins, z))), report)
        out[rows] = [history.outcomes[m] for m in ids]
    out.flags.writeable = False
    return FrameBatch(
        protocol, report or preferred, "bohm", start, out, history.ops, history.contexts, history.active_at_end
    )


def run_protocol_batches(protocol: Protocol, frames: Iterable[Frame], runs: int, seed: int) -> list[FrameBatch]:
    """Standard-engine batches for several frames on disjoint run-index ranges."""
    return [run_standard_batch(protocol, f, runs, seed, start=i * runs) for i, f in enumerate(frames)]
