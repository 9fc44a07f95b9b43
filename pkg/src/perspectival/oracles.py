"""Independent checks for the feasibility engine in :mod:`perspectival.bell`.

``GridOracle`` sweeps every joint distribution whose atom weights are
multiples of 1/64, restricted to distributions invariant under flipping all
four outcomes.  With uniform marginals that restriction loses nothing: the
flipped copy of any feasible distribution is feasible and the average of the
two is flip-invariant.  A flip-invariant distribution is a choice of 32
units among the 8 atom classes with a = +1 (each unit puts 1/64 on an atom and
on its mirror image).  The sweep runs as a dynamic program over those units
on the lattice of the four chosen pair correlations, so all C(39, 7) grid
distributions are covered without listing them.

Every unit step flips an even number of the four tracked correlations, so in
units of 1/32 the reachable points are even vectors whose coordinate sum is a
multiple of 4.  The covering radius of that lattice in the max norm is 1/16,
which is the smallest tolerance at which ``feasible`` sees every interior
point.

``fine_chsh_feasible`` is the closed-form criterion for the four CHSH pairs
with uniform marginals: a joint distribution exists iff all eight CHSH
expressions lie in [-2, 2].
"""

from __future__ import annotations

import itertools
from typing import Mapping, Sequence

import numpy as np

from .bell import PARTIES

__all__ = ["GridOracle", "fine_chsh_feasible"]


class GridOracle:
    """Brute-force reachable set of four pair correlations on the 1/64 atom grid."""

    def __init__(self, pairs: Sequence[Sequence[str]], units: int = 32) -> None:
        if len(pairs) != 4:
            raise ValueError("the grid oracle tracks exactly four pair correlations")
        self.pairs = tuple(tuple(p) for p in pairs)
        self.units = units
        classes = [(1,) + rest for rest in itertools.product((1, -1), repeat=3)]
        idx = [(PARTIES.index(x), PARTIES.index(y)) for x, y in self.pairs]
        steps = [tuple(atom[i] * atom[j] for i, j in idx) for atom in classes]
        size = 2 * units + 1
        reach = np.zeros((size,) * 4, dtype=bool)
        reach[(units,) * 4] = True
        for _ in range(units):
            nxt = np.zeros_like(reach)
            for s in set(steps):
                nxt |= np.roll(reach, s, axis=(0, 1, 2, 3))
            reach = nxt
        self.reach = reach
        grid = np.arange(-units, units + 1) / units
        self._axes = grid

    def _mask(self, targets: Mapping[int, float], tol: float) -> np.ndarray:
        # the allowed values on each axis form a contiguous band, so slice
        index: list[slice] = [slice(None)] * 4
        for axis, value in targets.items():
            ok = np.flatnonzero(np.abs(self._axes - value) <= tol + 1e-12)
            index[axis] = slice(ok[0], ok[-1] + 1) if ok.size else slice(0, 0)
        return self.reach[tuple(index)]

    def _axis(self, pair: Sequence[str]) -> int:
        p = tuple(pair)
        if p in self.pairs:
            return self.pairs.index(p)
        if p[::-1] in self.pairs:
            return self.pairs.index(p[::-1])
        raise KeyError(f"pair {p} not tracked by this oracle")

    def feasible(self, expectations: Mapping[Sequence[str], float], tol: float) -> bool:
        """Some grid distribution matches every given correlation within ``tol``."""
        targets = {self._axis(p): float(e) for p, e in expectations.items()}
        return bool(self._mask(targets, tol).any())

    def range(self, expectations: Mapping[Sequence[str], float], target: Sequence[str], tol: float) -> tuple[float, float]:
        """[min, max] of the target correlation over grid distributions within ``tol``."""
        targets = {self._axis(p): float(e) for p, e in expectations.items()}
        ax = self._axis(target)
        mask = self._mask(targets, tol)
        hit = np.flatnonzero(mask.any(axis=tuple(i for i in range(4) if i != ax)))
        if hit.size == 0:
            raise ValueError("no grid distribution satisfies the constraints")
        offset = 0 if ax not in targets else int(np.flatnonzero(np.abs(self._axes - targets[ax]) <= tol + 1e-12)[0])
        return float(self._axes[offset + hit[0]]), float(self._axes[offset + hit[-1]])


def fine_chsh_feasible(e_ab: float, e_ad: float, e_cb: float, e_cd: float, tol: float = 0.0) -> bool:
    """All eight CHSH expressions within [-2 - tol, 2 + tol] and every |E| <= 1."""
    e = np.array([e_ab, e_ad, e_cb, e_cd])
    if np.any(np.abs(e) > 1 + tol):
        return False
    for flip in range(4):
        signs = np.ones(4)
        signs[flip] = -1
        if abs(float(signs @ e)) > 2 + tol:
            return False
    return True
