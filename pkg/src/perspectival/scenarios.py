"""Built-in thought experiments and the per-frame / cross-frame consistency analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .bell import CHSH_PAIRING, BellError, CorrelationTable, chsh, feasible_range, joint_feasible
from .measurement import MeasurementOp, ReversalOp
from .predictors import (
    FrameBatch,
    Protocol,
    ProtocolError,
    exact_distribution,
    run_bohm_batch,
    run_protocol_batches,
    sample_hidden_batch,
)
from .relativity import (
    LAB,
    Frame,
    LocatedOp,
    SpacetimePoint,
    interval_type,
    order_events,
    order_reversing_boost,
    ordering_window,
)
from .spin import Direction

__all__ = [
    "ScenarioError",
    "InsufficientRunsError",
    "MIN_RUNS",
    "DEFAULT_RUNS",
    "Correlation",
    "Conditional",
    "AllEqual",
    "Scenario",
    "StatEstimate",
    "FrameReport",
    "PerspectivalReport",
    "GAO_GEOMETRY",
    "FOUR_PARTY_GEOMETRY",
    "CHSH_ANGLES",
    "build_gao",
    "build_four_party",
    "build_singlet_pair",
    "run_frames",
    "analyse",
    "perspectival_consistency",
    "check_runs",
    "bohm_summary",
    "tolerance_for",
]

MIN_RUNS = 1000
DEFAULT_RUNS = 200_000
CHSH_ANGLES = {"a": 0.0, "b": math.pi / 4, "c": math.pi / 2, "d": 3 * math.pi / 4}


class ScenarioError(ValueError):
    pass


class InsufficientRunsError(ScenarioError):
    pass


def tolerance_for(runs: int) -> float:
    """Three-sigma radius for a +-1 average over ``runs`` samples."""
    return 3.0 / math.sqrt(runs)


# ---------------------------------------------------------------- statistics

ColumnGetter = Callable[[str], np.ndarray]


@dataclass(frozen=True)
class Correlation:
    x: str
    y: str

    @property
    def name(self) -> str:
        return f"E({self.x},{self.y})"

    @property
    def ids(self) -> tuple[str, ...]:
        return (self.x, self.y)

    def parts(self, col: ColumnGetter) -> tuple[np.ndarray, np.ndarray]:
        v = col(self.x).astype(np.int64) * col(self.y)
        return v.astype(float), np.ones(v.shape, dtype=bool)


@dataclass(frozen=True)
class Conditional:
    """P(every target = value | given = given_value), over ghost records too."""

    targets: tuple[str, ...]
    value: int
    given: str
    given_value: int

    @property
    def name(self) -> str:
        t = self.targets[0] if len(self.targets) == 1 else f"{self.targets[0]}..{self.targets[-1]} all"
        return f"P({t}={self.value:+d}|{self.given}={self.given_value:+d})"

    @property
    def ids(self) -> tuple[str, ...]:
        return self.targets + (self.given,)

    def parts(self, col: ColumnGetter) -> tuple[np.ndarray, np.ndarray]:
        hit = np.all([col(t) == self.value for t in self.targets], axis=0)
        return hit.astype(float), col(self.given) == self.given_value


@dataclass(frozen=True)
class AllEqual:
    targets: tuple[str, ...]

    @property
    def name(self) -> str:
        return f"P({self.targets[0]}..{self.targets[-1]} equal)"

    @property
    def ids(self) -> tuple[str, ...]:
        return self.targets

    def parts(self, col: ColumnGetter) -> tuple[np.ndarray, np.ndarray]:
        first = col(self.targets[0])
        hit = np.all([col(t) == first for t in self.targets[1:]], axis=0)
        return hit.astype(float), np.ones(first.shape, dtype=bool)


Statistic = Correlation | Conditional | AllEqual


def estimate(stat: Statistic, batch: FrameBatch) -> tuple[float, int]:
    v, mask = stat.parts(batch.column)
    n = int(mask.sum())
    return (float(v[mask].mean()) if n else float("nan")), n


def exact_value(stat: Statistic, protocol: Protocol, dist: Mapping[tuple[int, ...], float]) -> float:
    keys = np.array(list(dist), dtype=np.int64)
    probs = np.array(list(dist.values()))
    ids = protocol.measurement_ids
    v, mask = stat.parts(lambda mid: keys[:, ids.index(mid)])
    z = probs[mask].sum()
    return float((probs[mask] * v[mask]).sum() / z) if z > 0 else float("nan")


# ---------------------------------------------------------------- scenarios

@dataclass(frozen=True)
class Scenario:
    name: str
    protocol: Protocol
    frames: tuple[Frame, ...]
    plan: tuple[Statistic, ...] = ()
    letters: Mapping[str, str] = field(default_factory=dict)  # measurement id -> party letter
    table_pairs: tuple[tuple[str, str], ...] = ()
    table_mode: str = "first_joint"  # or "every_frame"
    table_stats: Mapping[tuple[str, str], Correlation] = field(default_factory=dict)
    range_target: tuple[str, str] | None = None
    spacelike_required: tuple[tuple[str, str], ...] = ()
    default_runs: int = DEFAULT_RUNS
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.frames:
            raise ScenarioError(f"{self.name}: at least one frame is required")
        for a, b in self.spacelike_required:
            p, q = self.protocol.located(a).at, self.protocol.located(b).at
            if interval_type(p, q) != "spacelike":
                raise ScenarioError(
                    f"{self.name}: {a!r} at {p} and {b!r} at {q} must be spacelike separated"
                )
        for f in self.frames:
            order_events(self.protocol.ops, f)

    def with_frames(self, frames: Sequence[Frame]) -> "Scenario":
        return replace(self, frames=tuple(frames))

    def ids_for(self, letter: str) -> list[str]:
        return [m for m, l in self.letters.items() if l == letter]


def _pt(geometry: Mapping[str, SpacetimePoint], key: str) -> SpacetimePoint:
    p = geometry[key]
    return p if isinstance(p, SpacetimePoint) else SpacetimePoint(*p)


GAO_GEOMETRY = {
    "alice_measure": SpacetimePoint(0.0, 0.0),
    "alice_reverse": SpacetimePoint(1.0, 0.0),
    "bob_start": SpacetimePoint(2.0, 10.0),
    "bob_end": SpacetimePoint(2.8, 10.0),
}


def build_gao(
    variant: str = "single",
    k: int = 1,
    geometry: Mapping[str, SpacetimePoint] | None = None,
    direction: float = 0.0,
    n: int | None = None,
) -> Scenario:
    """Alice measures, Alice's measurement is undone, Bob measures (same direction).

    ``variant`` is "single", "many_pairs" (the same protocol over ``n`` fresh
    pairs) or "repeated" (Bob measures and reverses ``k`` times, keeping the
    last record).  Bob's operations are spread evenly from ``bob_start`` to
    ``bob_end``.  Frames: the lab and a frame that places all of Bob's
    operations between Alice's measurement and its reversal.
    """
    if variant not in ("single", "many_pairs", "repeated"):
        raise ScenarioError(f"unknown Gao variant {variant!r}")
    if variant != "repeated":
        k = 1
    if k < 1 or (n is not None and n < 1):
        raise ScenarioError("k and n must be >= 1")
    geo = dict(GAO_GEOMETRY, **(geometry or {}))
    n_dir = Direction.from_angle(direction)
    a_m = MeasurementOp("A", "Alice", "L", n_dir, "P_Alice")
    ops = [LocatedOp(a_m, _pt(geo, "alice_measure")), LocatedOp(ReversalOp("A~", "A"), _pt(geo, "alice_reverse"))]
    start, end = _pt(geo, "bob_start"), _pt(geo, "bob_end")
    bob_events = 2 * k - 1
    bob_ids = ["B"] if k == 1 else [f"B{j + 1}" for j in range(k)]
    for e in range(bob_events):
        frac = 0.0 if bob_events == 1 else e / (bob_events - 1)
        at = SpacetimePoint(start.t + frac * (end.t - start.t), start.x + frac * (end.x - start.x))
        j = e // 2
        if e % 2 == 0:
            ops.append(LocatedOp(MeasurementOp(bob_ids[j], "Bob", "R", n_dir, "P_Bob"), at))
        else:
            ops.append(LocatedOp(ReversalOp(f"{bob_ids[j]}~", bob_ids[j]), at))
    name = {"single": "gao-single", "many_pairs": "gao-many", "repeated": "gao-repeated"}[variant]
    try:
        protocol = Protocol(tuple(ops), name=name)
    except ProtocolError as exc:
        raise ScenarioError(f"{name}: {exc}") from None
    alice = [o for o in ops if protocol.party_of(o) == "Alice"]
    bob = [o for o in ops if protocol.party_of(o) == "Bob"]
    spacelike = tuple((a.id, b.id) for a in alice for b in bob)
    for a, b in spacelike:
        if interval_type(protocol.located(a).at, protocol.located(b).at) != "spacelike":
            raise ScenarioError(f"{name}: {a!r} and {b!r} must be spacelike separated")
    lab_order = [o.id for o in order_events(protocol.ops, LAB)]
    if lab_order[:2] != ["A", "A~"]:
        raise ScenarioError(f"{name}: lab order must start with Alice's measurement and its reversal, got {lab_order}")
    a_at, ar_at = ops[0].at, ops[1].at
    lo, hi = ordering_window([(a_at, b.at) for b in bob] + [(b.at, ar_at) for b in bob])
    if not lo < hi:
        raise ScenarioError(f"{name}: no frame places all of Bob's operations between Alice's measurement and its reversal")
    boosted = Frame(0.5 * (lo + hi))
    last = bob_ids[-1] if k == 1 else bob_ids[0]
    if k == 1:
        plan: tuple[Statistic, ...] = (Conditional(("B",), -1, "A", 1), Correlation("A", "B"))
    else:
        plan = (
            Conditional(tuple(bob_ids), -1, "A", 1),
            AllEqual(tuple(bob_ids)),
            Correlation("A", bob_ids[0]),
        )
    letters = {"A": "a", **{b: "b" for b in bob_ids}}
    notes = ()
    if variant == "repeated":
        notes = (
            "Every repeat of Bob's measurement is reversed before the next one, so no record of "
            "the repeats survives; the Bohm and standard predictions for them cannot be compared "
            "by any observation.",
        )
    return Scenario(
        name=name,
        protocol=protocol,
        frames=(LAB, boosted),
        plan=plan,
        letters=letters,
        table_pairs=(("a", "b"),),
        table_mode="every_frame",
        table_stats={("a", "b"): Correlation("A", last)},
        spacelike_required=spacelike,
        default_runs=n if n is not None else (50_000 if variant != "repeated" else 100_000),
        notes=notes,
    )


FOUR_PARTY_GEOMETRY = {
    "dan_measure": SpacetimePoint(0.0, 10.0),
    "carol_measure": SpacetimePoint(1.0, 0.0),
    "carol_reverse": SpacetimePoint(2.0, 0.0),
    "alice_measure": SpacetimePoint(3.0, 0.0),
    "dan_reverse": SpacetimePoint(4.0, 10.0),
    "bob_measure": SpacetimePoint(5.0, 10.0),
}


def build_four_party(
    angles: Mapping[str, float] | Sequence[float] | None = None,
    geometry: Mapping[str, SpacetimePoint] | None = None,
) -> Scenario:
    """Dan, Carol, (Alice undoes Carol), Alice, (Bob undoes Dan), Bob on one singlet pair.

    Carol and Alice act on the left spin, Dan and Bob on the right.  E(dc),
    E(ad) and E(ab) come from the lab frame; E(cb) from the frame that puts
    Bob's measurement before Alice's.
    """
    if angles is None:
        angles = CHSH_ANGLES
    elif not isinstance(angles, Mapping):
        angles = dict(zip("abcd", angles))
    angles = {k: float(angles[k]) for k in "abcd"}
    if not all(math.isfinite(v) for v in angles.values()):
        raise ScenarioError("angles must be finite")
    geo = dict(FOUR_PARTY_GEOMETRY, **(geometry or {}))
    d = {k: Direction.from_angle(v) for k, v in angles.items()}
    ops = (
        LocatedOp(MeasurementOp("D", "Dan", "R", d["d"], "P_Dan"), _pt(geo, "dan_measure")),
        LocatedOp(MeasurementOp("C", "Carol", "L", d["c"], "P_Carol"), _pt(geo, "carol_measure")),
        LocatedOp(ReversalOp("C~", "C", party="Alice"), _pt(geo, "carol_reverse")),
        LocatedOp(MeasurementOp("A", "Alice", "L", d["a"], "P_Alice"), _pt(geo, "alice_measure")),
        LocatedOp(ReversalOp("D~", "D", party="Bob"), _pt(geo, "dan_reverse")),
        LocatedOp(MeasurementOp("B", "Bob", "R", d["b"], "P_Bob"), _pt(geo, "bob_measure")),
    )
    try:
        protocol = Protocol(ops, name="four-party")
    except ProtocolError as exc:
        raise ScenarioError(f"four-party: {exc}") from None
    lab_order = [o.id for o in order_events(protocol.ops, LAB)]
    if lab_order != ["D", "C", "C~", "A", "D~", "B"]:
        raise ScenarioError(f"four-party: lab order must be D, C, C~, A, D~, B; got {lab_order}")
    left = [o.id for o in ops if o.at.x == ops[1].at.x]
    right = [o.id for o in ops if o.id not in left]
    spacelike = tuple((a, b) for a in left for b in right)
    boosted = order_reversing_boost(protocol.located("A").at, protocol.located("B").at)
    if boosted is None:
        raise ScenarioError("four-party: Alice's and Bob's measurements must be spacelike separated")
    order = [o.id for o in order_events(protocol.ops, boosted)]
    if order.index("B") > order.index("C~"):
        raise ScenarioError("four-party: no frame puts Bob's measurement before the reversal of Carol's")
    return Scenario(
        name="four-party",
        protocol=protocol,
        frames=(LAB, boosted),
        letters={"A": "a", "B": "b", "C": "c", "D": "d"},
        table_pairs=CHSH_PAIRING,
        table_mode="first_joint",
        range_target=("b", "c"),
        spacelike_required=spacelike,
    )


def build_singlet_pair(theta: float, separation: float = 10.0) -> Scenario:
    """Alice measures along angle 0 and Bob along ``theta``, spacelike apart."""
    if not math.isfinite(theta):
        raise ScenarioError("angle must be finite")
    ops = (
        LocatedOp(MeasurementOp("A", "Alice", "L", Direction.from_angle(0.0), "P_Alice"), SpacetimePoint(0.0, 0.0)),
        LocatedOp(MeasurementOp("B", "Bob", "R", Direction.from_angle(theta), "P_Bob"), SpacetimePoint(0.5, separation)),
    )
    return Scenario(
        name="singlet-pair",
        protocol=Protocol(ops, name="singlet-pair"),
        frames=(LAB,),
        plan=(Correlation("A", "B"),),
        spacelike_required=(("A", "B"),),
    )


# ---------------------------------------------------------------- analysis

@dataclass(frozen=True)
class StatEstimate:
    name: str
    estimate: float
    prediction: float
    n: int
    tolerance: float
    ok: bool


@dataclass(frozen=True)
class FrameReport:
    beta: float
    order: tuple[str, ...]
    jointly_active: tuple[tuple[str, str], ...]
    stats: tuple[StatEstimate, ...]
    runs: int
    first_run: int

    @property
    def consistent(self) -> bool:
        return all(s.ok for s in self.stats)


@dataclass(frozen=True)
class PerspectivalReport:
    scenario: str
    runs: int
    seed: int
    tolerance: float
    frames: tuple[FrameReport, ...]
    table: dict[str, dict]  # "ab" -> {"value", "beta", "n"}
    conflicts: tuple[str, ...]
    chsh: float | None
    feasible: bool | None
    witness: tuple[float, ...] | None
    feasible_range: tuple[float, float] | None
    range_target: str | None
    range_target_value: float | None
    verdict: str
    notes: tuple[str, ...] = ()

    @property
    def per_frame_consistent(self) -> bool:
        return all(f.consistent for f in self.frames)

    @property
    def verdict_line(self) -> str:
        return {
            "perspectival": "perspectival: per-frame consistent, global joint infeasible",
            "classical": "classical: per-frame consistent, global joint feasible",
            "inconsistent": "inconsistent: a per-frame statistic disagrees with its quantum prediction",
        }[self.verdict]

    def frame(self, beta: float) -> FrameReport:
        return next(f for f in self.frames if f.beta == beta)

    def stat(self, beta: float, name: str) -> StatEstimate:
        return next(s for s in self.frame(beta).stats if s.name == name)


def run_frames(s: Scenario, runs: int, seed: int) -> list[FrameBatch]:
    """Standard-engine batches; frame i uses run indices [i*runs, (i+1)*runs)."""
    return run_protocol_batches(s.protocol, s.frames, runs, seed)


def _frame_stats(s: Scenario, batch: FrameBatch) -> list[Statistic]:
    stats = list(s.plan)
    seen = {frozenset(st.ids) for st in stats if isinstance(st, Correlation)}
    for x, y in batch.jointly_active():
        if frozenset((x, y)) not in seen:
            stats.append(Correlation(x, y))
            seen.add(frozenset((x, y)))
    return stats


def _pair_source(s: Scenario, batches: Sequence[FrameBatch], pair: tuple[str, str]) -> list[tuple[FrameBatch, Correlation]]:
    if pair in s.table_stats:
        stat = s.table_stats[pair]
        return [(b, stat) for b in batches]
    xs, ys = s.ids_for(pair[0]), s.ids_for(pair[1])
    for b in batches:
        for u, v in b.jointly_active():
            if (u in xs and v in ys) or (u in ys and v in xs):
                return [(b, Correlation(u, v))]
    raise ScenarioError(
        f"{s.name}: no frame among betas {[b.frame.beta for b in batches]} has E({''.join(pair)}) jointly active"
    )


def analyse(s: Scenario, batches: Sequence[FrameBatch], runs: int, seed: int) -> PerspectivalReport:
    tol = tolerance_for(runs)
    frame_reports = []
    for b in batches:
        dist = exact_distribution(s.protocol, b.frame)
        rows = []
        for st in _frame_stats(s, b):
            est, n = estimate(st, b)
            pred = exact_value(st, s.protocol, dist)
            ok = n > 0 and abs(est - pred) <= tol
            rows.append(StatEstimate(st.name, est, pred, n, tol, bool(ok)))
        frame_reports.append(
            FrameReport(b.frame.beta, tuple(o.id for o in b.ops), tuple(b.jointly_active()), tuple(rows), b.runs, b.start)
        )

    table: dict[str, dict] = {}
    conflicts = []
    values: dict[tuple[str, str], float] = {}
    for pair in s.table_pairs:
        sources = _pair_source(s, batches, pair)
        found = []
        for b, st in sources:
            est, n = estimate(st, b)
            found.append((b.frame.beta, est, n))
        key = "".join(pair)
        table[key] = {"value": found[0][1], "beta": found[0][0], "n": found[0][2], "stat": sources[0][1].name}
        values[pair] = found[0][1]
        if len(found) > 1:
            table[key]["by_frame"] = [{"beta": f, "value": v, "n": n} for f, v, n in found]
            spread = max(v for _, v, _ in found) - min(v for _, v, _ in found)
            if spread > 2 * tol:
                conflicts.append(
                    f"E({key}) differs across frames: "
                    + ", ".join(f"{v:+.4f} (beta={f:g})" for f, v, _ in found)
                )

    chsh_value = feasible = witness = rng = target_value = None
    if not conflicts:
        ct = CorrelationTable({p: v for p, v in values.items()})
        if all(tuple(p) in values for p in CHSH_PAIRING):
            chsh_value = chsh(ct)
        feasible, w = joint_feasible(ct)
        witness = None if w is None else tuple(float(x) for x in w.weights)
        if s.range_target is not None:
            constraints = CorrelationTable({p: v for p, v in values.items() if set(p) != set(s.range_target)})
            try:
                rng = feasible_range(constraints, s.range_target)
            except BellError:
                rng = None
            tv = [v for p, v in values.items() if set(p) == set(s.range_target)]
            target_value = tv[0] if tv else None
    else:
        feasible = False

    if not all(f.consistent for f in frame_reports):
        verdict = "inconsistent"
    elif feasible:
        verdict = "classical"
    else:
        verdict = "perspectival"
    return PerspectivalReport(
        scenario=s.name,
        runs=runs,
        seed=seed,
        tolerance=tol,
        frames=tuple(frame_reports),
        table=table,
        conflicts=tuple(conflicts),
        chsh=chsh_value,
        feasible=feasible,
        witness=witness,
        feasible_range=rng,
        range_target="".join(s.range_target) if s.range_target else None,
        range_target_value=target_value,
        verdict=verdict,
        notes=s.notes,
    )


def perspectival_consistency(s: Scenario, runs: int | None = None, seed: int = 0) -> PerspectivalReport:
    """Per-frame quantum consistency plus cross-frame joint-distribution feasibility."""
    runs = s.default_runs if runs is None else int(runs)
    check_runs(s, runs)
    return analyse(s, run_frames(s, runs, seed), runs, seed)


def check_runs(s: Scenario, runs: int) -> None:
    if runs < MIN_RUNS:
        raise InsufficientRunsError(
            f"insufficient runs: {runs} < {MIN_RUNS} (tolerance 3/sqrt(N) would be {tolerance_for(max(runs, 1)):.3f})"
        )
    if not s.plan and not s.table_pairs:
        raise ScenarioError(f"{s.name}: empty analysis plan")


def bohm_summary(s: Scenario, runs: int, seed: int) -> list[dict]:
    """Bohm-engine estimates of the planned statistics, each frame taken as the preferred one.

    Hidden configurations use run indices after those of the standard engine.
    """
    out = []
    base = len(s.frames) * runs
    for i, f in enumerate(s.frames):
        hidden = sample_hidden_batch(seed, runs, start=base + i * runs, spins=s.protocol.spins)
        try:
            batch = run_bohm_batch(s.protocol, f, hidden, start=base + i * runs)
        except ProtocolError as exc:
            out.append({"beta": f.beta, "error": str(exc)})
            continue
        stats = []
        for st in s.plan:
            est, n = estimate(st, batch)
            stats.append({"name": st.name, "estimate": est, "n": n})
        out.append({"beta": f.beta, "order": [o.id for o in batch.ops], "stats": stats})
    return out
