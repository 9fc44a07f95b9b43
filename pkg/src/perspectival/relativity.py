"""1+1D Minkowski kinematics (c = 1) and frame-dependent ordering of located operations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .tolerances import TOL

__all__ = [
    "RelativityError",
    "SimultaneityError",
    "SpacetimePoint",
    "Frame",
    "LAB",
    "LocatedOp",
    "boost",
    "interval_type",
    "order_events",
    "order_reversing_boost",
    "ordering_window",
]


class RelativityError(ValueError):
    pass


class SimultaneityError(RelativityError):
    """Two operations share a boosted time; ordering would be arbitrary."""


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t) and math.isfinite(self.x)):
            raise RelativityError(f"spacetime coordinates must be finite, got ({self.t}, {self.x})")

    def __str__(self) -> str:
        return f"({self.t!r}, {self.x!r})"


@dataclass(frozen=True)
class Frame:
    beta: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.beta) or abs(self.beta) >= 1.0 - TOL.beta_margin:
            raise RelativityError(f"frame velocity out of range: |beta| must be < 1 (got {self.beta!r})")

    @property
    def gamma(self) -> float:
        return 1.0 / math.sqrt(1.0 - self.beta**2)

    def time_of(self, p: SpacetimePoint) -> float:
        return self.gamma * (p.t - self.beta * p.x)


LAB = Frame(0.0)


@dataclass(frozen=True)
class LocatedOp:
    op: Any  # MeasurementOp or ReversalOp
    at: SpacetimePoint

    @property
    def id(self) -> str:
        return self.op.id


def boost(p: SpacetimePoint, f: Frame) -> SpacetimePoint:
    g = f.gamma
    return SpacetimePoint(g * (p.t - f.beta * p.x), g * (p.x - f.beta * p.t))


def interval_type(p: SpacetimePoint, q: SpacetimePoint) -> str:
    s2 = (q.t - p.t) ** 2 - (q.x - p.x) ** 2
    if abs(s2) < TOL.lightlike:
        return "lightlike"
    return "timelike" if s2 > 0 else "spacelike"


def order_events(ops: Sequence[LocatedOp], f: Frame) -> list[LocatedOp]:
    """Sort by boosted time; equal times within tolerance are an error."""
    timed = sorted(((f.time_of(o.at), i, o) for i, o in enumerate(ops)), key=lambda e: (e[0], e[1]))
    for (t0, _, a), (t1, _, b) in zip(timed, timed[1:]):
        if t1 - t0 < TOL.simultaneity:
            raise SimultaneityError(
                f"{a.id!r} and {b.id!r} are simultaneous in frame beta={f.beta!r}; perturb the coordinates"
            )
    return [o for _, _, o in timed]


def _later_than_interval(p: SpacetimePoint, q: SpacetimePoint) -> tuple[float, float]:
    """Open beta interval in which q is strictly later than p."""
    dt, dx = q.t - p.t, q.x - p.x
    # t'_q - t'_p = gamma (dt - beta dx) > 0
    if dx == 0:
        return (-1.0, 1.0) if dt > 0 else (1.0, -1.0)
    r = dt / dx
    return (r, 1.0) if dx < 0 else (-1.0, r)


def ordering_window(requirements: Iterable[tuple[SpacetimePoint, SpacetimePoint]]) -> tuple[float, float]:
    """Open interval of beta in which every (earlier, later) pair keeps that order.

    The returned interval is clipped to (-1, 1) and may be empty (lo >= hi).
    """
    lo, hi = -1.0, 1.0
    for p, q in requirements:
        a, b = _later_than_interval(p, q)
        lo, hi = max(lo, a), min(hi, b)
    return lo, hi


def order_reversing_boost(p: SpacetimePoint, q: SpacetimePoint) -> Frame | None:
    """A frame that flips the time order of p and q, or None when no frame can.

    Returns the midpoint of the admissible velocity interval.  For a pair that
    is simultaneous in the lab the frame puts q before p.
    """
    if p == q:
        raise RelativityError("order_reversing_boost needs distinct points")
    if interval_type(p, q) != "spacelike":
        return None
    # require the opposite of the lab order
    lo, hi = ordering_window([(p, q)] if q.t < p.t else [(q, p)])
    return Frame(0.5 * (lo + hi))
