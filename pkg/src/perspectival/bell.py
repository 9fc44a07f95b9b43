"""CHSH values and exact joint-distribution feasibility for four +-1 variables.

A joint distribution is a weight vector over the 16 outcome atoms.  Pairwise
constraints are linear in those weights, so the admissible set is a polytope
inside the probability simplex.  Feasibility and the range of an unconstrained
pair correlation are decided exactly by enumerating basic solutions: every
vertex of {w >= 0, A w = b} solves a square subsystem on |rank A| columns.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .spin import singlet_correlation
from .tolerances import TOL

__all__ = [
    "PARTIES",
    "ATOMS",
    "CHSH_PAIRING",
    "BellError",
    "CorrelationTable",
    "JointDistribution",
    "chsh",
    "joint_feasible",
    "feasible_range",
    "feasible_vertices",
]

PARTIES = ("a", "b", "c", "d")
ATOMS = np.array(list(itertools.product((1, -1), repeat=4)), dtype=np.int64)
CHSH_PAIRING = (("a", "b"), ("a", "d"), ("c", "b"), ("c", "d"))
_CELLS = ((1, 1), (1, -1), (-1, 1), (-1, -1))

Pair = tuple[str, str]


class BellError(ValueError):
    pass


def _pair(p: str | Sequence[str]) -> tuple[Pair, bool]:
    """Canonical (party-ordered) pair and whether the input was reversed."""
    x, y = tuple(p)
    if x not in PARTIES or y not in PARTIES or x == y:
        raise BellError(f"invalid pair {p!r}; parties are {PARTIES}")
    if PARTIES.index(x) > PARTIES.index(y):
        return (y, x), True
    return (x, y), False


def _joint_stats(cells: Sequence[float]) -> tuple[float, float, float]:
    pp, pm, mp, mm = cells
    return pp - pm - mp + mm, pp + pm - mp - mm, pp - pm + mp - mm


@dataclass(frozen=True)
class CorrelationTable:
    """Pairwise constraints on (a, b, c, d).

    ``expectations`` maps pairs to E(xy).  ``joints`` maps pairs to the four
    probabilities of (++, +-, -+, --).  ``marginals`` maps parties to E(x);
    ``None`` means uniform (zero) marginals for every party whose marginal is
    not fixed by a joint, while an explicit mapping leaves omitted parties
    free.
    """

    expectations: Mapping[Pair, float] = field(default_factory=dict)
    joints: Mapping[Pair, tuple[float, float, float, float]] = field(default_factory=dict)
    marginals: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        exps: dict[Pair, float] = {}
        for p, e in dict(self.expectations).items():
            key, _ = _pair(p)
            e = float(e)
            if key in exps:
                raise BellError(f"pair {key} constrained twice")
            if not -1.0 - TOL.marginals <= e <= 1.0 + TOL.marginals:
                raise BellError(f"expectation for {''.join(key)} must lie in [-1, 1], got {e!r}")
            exps[key] = e
        joints: dict[Pair, tuple[float, ...]] = {}
        for p, cells in dict(self.joints).items():
            key, flipped = _pair(p)
            cells = tuple(float(c) for c in cells)
            if len(cells) != 4:
                raise BellError(f"joint for {''.join(key)} needs four probabilities")
            if flipped:
                cells = (cells[0], cells[2], cells[1], cells[3])
            if min(cells) < -TOL.marginals or abs(math.fsum(cells) - 1.0) > TOL.marginals:
                raise BellError(f"joint for {''.join(key)} is not a probability vector: {cells}")
            if key in exps or key in joints:
                raise BellError(f"pair {key} constrained twice")
            joints[key] = cells
        object.__setattr__(self, "expectations", exps)
        object.__setattr__(self, "joints", joints)
        if self.marginals is not None:
            m = {}
            for k, v in dict(self.marginals).items():
                if k not in PARTIES:
                    raise BellError(f"unknown party {k!r}")
                if not -1.0 - TOL.marginals <= float(v) <= 1.0 + TOL.marginals:
                    raise BellError(f"marginal for {k} must lie in [-1, 1]")
                m[k] = float(v)
            object.__setattr__(self, "marginals", m)
        self.resolved_marginals()  # validates consistency

    @classmethod
    def from_angles(cls, angles: Mapping[str, float], pairs: Iterable[Sequence[str]] = CHSH_PAIRING) -> "CorrelationTable":
        """Singlet correlations -cos(theta_x - theta_y) for the requested pairs."""
        return cls({tuple(p): singlet_correlation(angles[p[0]] - angles[p[1]]) for p in pairs})

    def constrained_pairs(self) -> list[Pair]:
        return sorted(set(self.expectations) | set(self.joints), key=lambda p: (PARTIES.index(p[0]), PARTIES.index(p[1])))

    def expectation(self, pair: str | Sequence[str]) -> float:
        key, _ = _pair(pair)
        if key in self.expectations:
            return self.expectations[key]
        if key in self.joints:
            return _joint_stats(self.joints[key])[0]
        raise BellError(f"missing pair {''.join(key)}")

    def resolved_marginals(self) -> dict[str, float]:
        """Marginal expectation per constrained party; raises on inconsistency."""
        implied: dict[str, float] = {}
        for (x, y), cells in self.joints.items():
            _, mx, my = _joint_stats(cells)
            for party, value in ((x, mx), (y, my)):
                if party in implied and abs(implied[party] - value) > TOL.marginals:
                    raise BellError(
                        f"inconsistent input marginals for {party}: {implied[party]!r} vs {value!r}"
                    )
                implied[party] = value
        explicit = {p: 0.0 for p in PARTIES} if self.marginals is None else dict(self.marginals)
        for party, value in explicit.items():
            if party in implied:
                if abs(implied[party] - value) > TOL.marginals:
                    if self.marginals is None:
                        continue  # uniform default yields to joint-implied marginals
                    raise BellError(
                        f"inconsistent input marginals for {party}: joint gives {implied[party]!r}, expected {value!r}"
                    )
            else:
                implied[party] = value
        return implied

    def with_pair(self, pair: Sequence[str], value: float) -> "CorrelationTable":
        key, _ = _pair(pair)
        exps = dict(self.expectations)
        exps[key] = value
        return CorrelationTable(exps, self.joints, self.marginals)

    def constraint_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Rows A and right-hand side b with A @ w = b over the 16 atoms."""
        rows = [np.ones(16)]
        rhs = [1.0]
        for party, m in sorted(self.resolved_marginals().items()):
            rows.append(ATOMS[:, PARTIES.index(party)].astype(float))
            rhs.append(m)
        for (x, y), e in self.expectations.items():
            i, j = PARTIES.index(x), PARTIES.index(y)
            rows.append((ATOMS[:, i] * ATOMS[:, j]).astype(float))
            rhs.append(e)
        for (x, y), cells in self.joints.items():
            i, j = PARTIES.index(x), PARTIES.index(y)
            for (s, t), p in zip(_CELLS, cells):
                rows.append(((ATOMS[:, i] == s) & (ATOMS[:, j] == t)).astype(float))
                rhs.append(p)
        return np.array(rows), np.array(rhs)


@dataclass(frozen=True, eq=False)
class JointDistribution:
    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.shape != (16,):
            raise BellError("a joint distribution has 16 atom weights")
        if w.min() < -TOL.feasibility or abs(w.sum() - 1.0) > TOL.probability:
            raise BellError("atom weights must be nonnegative and sum to 1")
        w = np.clip(w, 0.0, None)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def deterministic(cls, a: int, b: int, c: int, d: int) -> "JointDistribution":
        w = np.zeros(16)
        w[np.flatnonzero(np.all(ATOMS == (a, b, c, d), axis=1))[0]] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls) -> "JointDistribution":
        return cls(np.full(16, 1 / 16))

    def marginal(self, party: str) -> float:
        return float(self.weights @ ATOMS[:, PARTIES.index(party)])

    def expectation(self, pair: str | Sequence[str]) -> float:
        (x, y), _ = _pair(pair)
        return float(self.weights @ (ATOMS[:, PARTIES.index(x)] * ATOMS[:, PARTIES.index(y)]))

    def pair_joint(self, pair: str | Sequence[str]) -> tuple[float, ...]:
        (x, y), _ = _pair(pair)
        i, j = PARTIES.index(x), PARTIES.index(y)
        return tuple(float(self.weights[(ATOMS[:, i] == s) & (ATOMS[:, j] == t)].sum()) for s, t in _CELLS)

    def max_violation(self, table: CorrelationTable) -> float:
        """Largest absolute mismatch against every constraint of ``table``."""
        a, b = table.constraint_system()
        return float(np.max(np.abs(a @ self.weights - b)))


def chsh(t: CorrelationTable | JointDistribution, pairing: Sequence[Sequence[str]] = CHSH_PAIRING) -> float:
    """S = E(p0) - E(p1) + E(p2) + E(p3)."""
    if len(pairing) != 4:
        raise BellError(f"CHSH needs exactly four pairs, got {len(pairing)}")
    e = [t.expectation(p) for p in pairing]
    return e[0] - e[1] + e[2] + e[3]


def _independent_rows(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keep: list[int] = []
    for i in range(a.shape[0]):
        trial = keep + [i]
        if np.linalg.matrix_rank(a[trial], tol=TOL.rank) == len(trial):
            keep = trial
    return a[keep], b[keep]


@lru_cache(maxsize=None)
def _column_subsets(r: int) -> np.ndarray:
    return np.array(list(itertools.combinations(range(16), r)), dtype=np.int64).reshape(-1, r)


def feasible_vertices(t: CorrelationTable) -> np.ndarray:
    """All distinct basic feasible solutions, shape (k, 16); k = 0 when infeasible."""
    a, b = t.constraint_system()
    ar, br = _independent_rows(a, b)
    r = ar.shape[0]
    subsets = _column_subsets(r)
    blocks = np.transpose(ar[:, subsets], (1, 0, 2))  # (S, r, r)
    # constraint rows have integer entries, so every determinant is an integer
    regular = np.abs(np.linalg.det(blocks)) > 0.5
    blocks, subsets = blocks[regular], subsets[regular]
    x = np.linalg.solve(blocks, np.broadcast_to(br, (blocks.shape[0], r))[..., None])[..., 0]
    ok = np.all(x >= -TOL.feasibility, axis=1)
    w = np.zeros((int(ok.sum()), 16))
    np.put_along_axis(w, subsets[ok], x[ok], axis=1)
    # dependent rows were dropped; confirm them explicitly
    w = w[np.max(np.abs(w @ a.T - b), axis=1) <= TOL.feasibility]
    w = np.clip(w, 0.0, None)
    if w.size == 0:
        return w
    _, idx = np.unique(np.round(w, 9), axis=0, return_index=True)
    return w[np.sort(idx)]


def joint_feasible(t: CorrelationTable) -> tuple[bool, JointDistribution | None]:
    """Whether some joint distribution reproduces ``t``; the witness is the vertex barycenter."""
    v = feasible_vertices(t)
    if v.shape[0] == 0:
        return False, None
    w = v.mean(axis=0)
    return True, JointDistribution(w / w.sum())


def feasible_range(t: CorrelationTable, target: str | Sequence[str] = ("b", "c")) -> tuple[float, float]:
    """Exact [min, max] of E(target) over all joint distributions matching ``t``."""
    (x, y), _ = _pair(target)
    v = feasible_vertices(t)
    if v.shape[0] == 0:
        raise BellError("constraint set is infeasible; no joint distribution matches it")
    values = v @ (ATOMS[:, PARTIES.index(x)] * ATOMS[:, PARTIES.index(y)])
    return float(values.min()), float(values.max())
