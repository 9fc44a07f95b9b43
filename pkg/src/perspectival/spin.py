"""Spin-1/2 algebra: directions, sharp and smeared spin observables, the singlet."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .hilbert import HilbertError, Operator, Register, StateVector
from .tolerances import TOL

__all__ = [
    "PAULI",
    "Direction",
    "SmearingMeasure",
    "sigma",
    "spin_projector",
    "singlet_state",
    "smeared_effect",
    "unsharp_effect",
    "singlet_correlation",
    "default_spin_register",
]

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)
_I2 = np.eye(2, dtype=np.complex128)


@dataclass(frozen=True)
class Direction:
    """Unit 3-vector.  ``Direction.from_angle`` works in the x-z measurement plane."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        n = math.sqrt(self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(n) or abs(n - 1.0) > TOL.direction_norm:
            raise HilbertError(f"direction must be a unit vector (norm {n!r})")

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "Direction":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise HilbertError("zero vector has no direction")
        x, y, z = (float(c) for c in v / n)
        return cls(x, y, z)

    @classmethod
    def from_angle(cls, theta: float) -> "Direction":
        # theta measured from +z towards +x
        return cls(math.sin(theta), 0.0, math.cos(theta))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def __neg__(self) -> "Direction":
        return Direction(-self.x, -self.y, -self.z)

    def angle_to(self, other: "Direction") -> float:
        c = float(np.clip(self.vector @ other.vector, -1.0, 1.0))
        return math.acos(c)

    def is_parallel(self, other: "Direction", tol: float = 1e-12) -> bool:
        return float(self.vector @ other.vector) >= 1.0 - tol


@dataclass(frozen=True)
class SmearingMeasure:
    """Discrete probability measure on directions; weights must sum to one."""

    points: tuple[tuple[Direction, float], ...]

    def __post_init__(self) -> None:
        points = tuple((d, float(w)) for d, w in self.points)
        if not points:
            raise HilbertError("smearing measure needs at least one point")
        if any(w < 0 or not math.isfinite(w) for _, w in points):
            raise HilbertError("smearing weights must be finite and nonnegative")
        total = math.fsum(w for _, w in points)
        if abs(total - 1.0) > TOL.weights:
            raise HilbertError(f"smearing weights sum to {total!r}, not 1")
        object.__setattr__(self, "points", points)

    @classmethod
    def point(cls, n: Direction) -> "SmearingMeasure":
        return cls(((n, 1.0),))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Direction, float]]) -> "SmearingMeasure":
        return cls(tuple(pairs))

    @classmethod
    def planar_uniform(cls, count: int, offset: float = 0.0) -> "SmearingMeasure":
        w = 1.0 / count
        pts = [(Direction.from_angle(offset + 2 * math.pi * k / count), w) for k in range(count)]
        # absorb rounding so the weights sum to exactly one
        pts[-1] = (pts[-1][0], 1.0 - w * (count - 1))
        return cls(tuple(pts))

    @classmethod
    def with_mean_length(cls, n: Direction, lam: float) -> "SmearingMeasure":
        """Two-point measure on +n and -n whose mean vector is lam * n."""
        if not 0.0 <= lam <= 1.0:
            raise HilbertError("mean-vector length must lie in [0, 1]")
        return cls(((n, 0.5 * (1 + lam)), (-n, 0.5 * (1 - lam))))

    def mean_vector(self) -> np.ndarray:
        return sum((w * d.vector for d, w in self.points), np.zeros(3))


def sigma(n: Direction) -> np.ndarray:
    """The matrix n . sigma."""
    return n.x * PAULI[0] + n.y * PAULI[1] + n.z * PAULI[2]


def spin_projector(n: Direction, sign: int, target: str = "spin") -> Operator:
    """Projector (I + sign n.sigma)/2 on the spin subsystem ``target``."""
    if sign not in (1, -1):
        raise HilbertError("sign must be +1 or -1")
    return Operator((target,), 0.5 * (_I2 + sign * sigma(n)))


def default_spin_register(left: str = "L", right: str = "R") -> Register:
    return Register.of((left, 2), (right, 2))


def singlet_state(register: Register | None = None) -> StateVector:
    """(|up,down> - |down,up>)/sqrt(2) over a register of exactly two spins."""
    register = default_spin_register() if register is None else register
    if register.dims != (2, 2):
        raise HilbertError(
            f"singlet needs a register of exactly two spin-1/2 subsystems, got {register.labels} {register.dims}"
        )
    r = 1 / math.sqrt(2)
    return StateVector(register, np.array([0, r, -r, 0], dtype=np.complex128))


def smeared_effect(m: SmearingMeasure, sign: int, target: str = "spin") -> Operator:
    """Weighted mean of sharp projectors, sum_k w_k P_sign(n_k)."""
    if not isinstance(m, SmearingMeasure):
        raise HilbertError("smeared_effect needs a SmearingMeasure")
    matrix = sum((w * spin_projector(d, sign).matrix for d, w in m.points), np.zeros((2, 2), complex))
    return Operator((target,), matrix)


def unsharp_effect(n: Direction, lam: float, sign: int = 1, target: str = "spin") -> Operator:
    """(I + sign lam n.sigma)/2, the effect of any measure with mean vector lam n."""
    return smeared_effect(SmearingMeasure.with_mean_length(n, lam), sign, target)


def singlet_correlation(theta: float) -> float:
    """Expected product of the two +-1 outcomes at angular separation ``theta``."""
    return -math.cos(theta)
