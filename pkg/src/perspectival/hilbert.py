"""Dense state vectors and operators over labeled tensor-product registers.

Every register is an ordered tuple of named subsystems.  Amplitudes are stored
flat in row-major order of that tuple, so the first subsystem is the most
significant index.  Operators carry the labels of the subsystems they act on
and are embedded with the identity elsewhere by :func:`apply_on`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .tolerances import TOL

__all__ = [
    "HilbertError",
    "Subsystem",
    "Register",
    "StateVector",
    "Operator",
    "basis_state",
    "tensor_state",
    "apply_on",
    "born_probability",
    "project",
    "classify",
    "is_unitary",
    "is_hermitian",
    "is_projector",
    "is_effect",
    "hermitian_eigenvalues",
]


class HilbertError(ValueError):
    """Raised for malformed registers, states or operators."""


@dataclass(frozen=True)
class Subsystem:
    label: str
    dim: int

    def __post_init__(self) -> None:
        if not self.label:
            raise HilbertError("subsystem label must be non-empty")
        if int(self.dim) != self.dim or self.dim < 2:
            raise HilbertError(f"subsystem {self.label!r}: dimension must be an integer >= 2")


@dataclass(frozen=True)
class Register:
    subsystems: tuple[Subsystem, ...]

    def __post_init__(self) -> None:
        if not self.subsystems:
            raise HilbertError("register must contain at least one subsystem")
        labels = [s.label for s in self.subsystems]
        if len(set(labels)) != len(labels):
            raise HilbertError(f"duplicate subsystem labels in register: {labels}")

    @classmethod
    def of(cls, *items: Subsystem | tuple[str, int]) -> "Register":
        return cls(tuple(s if isinstance(s, Subsystem) else Subsystem(*s) for s in items))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise HilbertError(f"subsystem {label!r} not in register {self.labels}") from None

    def subsystem(self, label: str) -> Subsystem:
        return self.subsystems[self.index(label)]

    def __contains__(self, label: object) -> bool:
        return label in self.labels

    def __add__(self, other: "Register") -> "Register":
        return Register(self.subsystems + other.subsystems)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.complex128, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """A unit vector over a register.

    Construction checks the norm; use :meth:`normalized` for raw amplitudes.
    """

    register: Register
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        amps = _frozen(self.amplitudes).reshape(-1)
        amps.flags.writeable = False
        if amps.shape != (self.register.dim,):
            raise HilbertError(
                f"amplitude vector has length {amps.size}, register dimension is {self.register.dim}"
            )
        if not np.all(np.isfinite(amps)):
            raise HilbertError("amplitudes must be finite")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > TOL.unit_norm:
            raise HilbertError(f"state is not normalized (norm {norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, register: Register, amplitudes: Sequence[complex] | np.ndarray) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise HilbertError("cannot normalize the zero vector")
        return cls(register, amps / norm)

    @classmethod
    def _raw(cls, register: Register, amplitudes: np.ndarray) -> "StateVector":
        # no norm check: intermediate projected vectors are sub-normalized
        self = object.__new__(cls)
        amps = np.ascontiguousarray(amplitudes, dtype=np.complex128).reshape(-1)
        amps.flags.writeable = False
        object.__setattr__(self, "register", register)
        object.__setattr__(self, "amplitudes", amps)
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        """Inner product <self|other>."""
        self._check_register(other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def max_deviation(self, other: "StateVector") -> float:
        self._check_register(other)
        return float(np.max(np.abs(self.amplitudes - other.amplitudes)))

    def equals_up_to_phase(self, other: "StateVector", tol: float = TOL.state) -> bool:
        return abs(abs(self.overlap(other)) - 1.0) <= tol

    def reorder(self, labels: Sequence[str]) -> "StateVector":
        """Same physical state expressed over the subsystems in a new order."""
        if sorted(labels) != sorted(self.register.labels):
            raise HilbertError(f"{list(labels)} is not a permutation of {self.register.labels}")
        perm = [self.register.index(l) for l in labels]
        psi = self.amplitudes.reshape(self.register.dims).transpose(perm)
        register = Register(tuple(self.register.subsystems[i] for i in perm))
        return StateVector(register, psi.reshape(-1))

    def _check_register(self, other: "StateVector") -> None:
        if other.register != self.register:
            raise HilbertError(f"register mismatch: {self.register.labels} vs {other.register.labels}")


def basis_state(register: Register, indices: Sequence[int]) -> StateVector:
    if len(indices) != len(register.subsystems):
        raise HilbertError("one basis index per subsystem is required")
    for i, s in zip(indices, register.subsystems):
        if not 0 <= i < s.dim:
            raise HilbertError(f"basis index {i} out of range for {s.label!r}")
    amps = np.zeros(register.dim, dtype=np.complex128)
    amps[np.ravel_multi_index(tuple(indices), register.dims)] = 1.0
    return StateVector(register, amps)


def tensor_state(*factors: StateVector) -> StateVector:
    """Kronecker product of states on disjoint registers, in argument order."""
    if not factors:
        raise HilbertError("tensor_state needs at least one factor")
    if len(factors) == 1 and isinstance(factors[0], (list, tuple)):
        factors = tuple(factors[0])
    register = reduce(lambda a, b: a + b, (f.register for f in factors))
    amps = reduce(np.kron, (f.amplitudes for f in factors))
    return StateVector(register, amps)


@dataclass(frozen=True, eq=False)
class Operator:
    """A square matrix acting on the named subsystems ``support`` (in that order)."""

    support: tuple[str, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        support = (self.support,) if isinstance(self.support, str) else tuple(self.support)
        if not support:
            raise HilbertError("operator support must be non-empty")
        if len(set(support)) != len(support):
            raise HilbertError(f"repeated labels in operator support {support}")
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise HilbertError(f"operator matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def adjoint(self) -> "Operator":
        return Operator(self.support, self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.support != self.support:
            raise HilbertError(f"cannot compose operators on {self.support} and {other.support}")
        return Operator(self.support, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        if other.support != self.support:
            raise HilbertError(f"cannot add operators on {self.support} and {other.support}")
        return Operator(self.support, self.matrix + other.matrix)

    def scaled(self, factor: complex) -> "Operator":
        return Operator(self.support, factor * self.matrix)

    def tensor(self, other: "Operator") -> "Operator":
        """Kronecker product; supports must be disjoint."""
        if set(self.support) & set(other.support):
            raise HilbertError(f"overlapping supports {self.support} and {other.support}")
        return Operator(self.support + other.support, np.kron(self.matrix, other.matrix))

    def relabel(self, *support: str) -> "Operator":
        return Operator(tuple(support), self.matrix)

    @classmethod
    def identity(cls, register: Register, labels: Iterable[str] | None = None) -> "Operator":
        labels = tuple(register.labels if labels is None else labels)
        d = math.prod(register.subsystem(l).dim for l in labels)
        return cls(labels, np.eye(d))


def apply_on(state: StateVector, op: Operator) -> StateVector:
    """Apply ``op`` to its support inside ``state``, identity on every other subsystem.

    The result is only normalized when ``op`` preserves the norm of ``state``
    (for instance a unitary); applying a projector yields the unnormalized
    branch vector.
    """
    reg = state.register
    axes = [reg.index(label) for label in op.support]
    sub_dims = [reg.dims[a] for a in axes]
    d = math.prod(sub_dims)
    if op.dim != d:
        raise HilbertError(
            f"operator on {op.support} has dimension {op.dim}, support dimension is {d}"
        )
    k = len(axes)
    psi = np.moveaxis(state.amplitudes.reshape(reg.dims), axes, range(k))
    moved_shape = psi.shape
    psi = (op.matrix @ psi.reshape(d, -1)).reshape(moved_shape)
    psi = np.moveaxis(psi, range(k), axes)
    return StateVector._raw(reg, psi)


def _projected(state: StateVector, projector: Operator) -> np.ndarray:
    if not is_projector(projector):
        raise HilbertError(f"operator on {projector.support} is not a projector")
    return apply_on(state, projector).amplitudes


def born_probability(state: StateVector, projector: Operator) -> float:
    """Squared norm of the projected state."""
    p = float(np.vdot(v := _projected(state, projector), v).real)
    return min(max(p, 0.0), 1.0)


def project(state: StateVector, projector: Operator, threshold: float = TOL.impossible) -> StateVector:
    """Project and renormalize (Lüders conditioning on a pure state)."""
    v = _projected(state, projector)
    p = float(np.vdot(v, v).real)
    if p < threshold:
        raise HilbertError(f"conditioning on a zero-probability outcome (probability {p:.3e})")
    return StateVector(state.register, v / math.sqrt(p))


def _matrix(op: Operator | np.ndarray) -> np.ndarray:
    m = op.matrix if isinstance(op, Operator) else np.asarray(op, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise HilbertError(f"expected a square matrix, got shape {m.shape}")
    return m


def is_hermitian(op: Operator | np.ndarray, tol: float = TOL.classify) -> bool:
    m = _matrix(op)
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def is_unitary(op: Operator | np.ndarray, tol: float = TOL.classify) -> bool:
    m = _matrix(op)
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol)


def is_projector(op: Operator | np.ndarray, tol: float = TOL.classify) -> bool:
    m = _matrix(op)
    return is_hermitian(m, tol) and bool(np.max(np.abs(m @ m - m)) <= tol)


def hermitian_eigenvalues(op: Operator | np.ndarray) -> np.ndarray:
    """Ascending eigenvalues; closed form for 2x2, dense Hermitian solver otherwise."""
    m = _matrix(op)
    if m.shape == (2, 2):
        a, d = m[0, 0].real, m[1, 1].real
        mean = 0.5 * (a + d)
        radius = math.hypot(0.5 * (a - d), abs(m[0, 1]))
        return np.array([mean - radius, mean + radius])
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))


def is_effect(op: Operator | np.ndarray, tol: float = TOL.classify) -> bool:
    if not is_hermitian(op, tol):
        return False
    ev = hermitian_eigenvalues(op)
    return bool(ev[0] >= -tol and ev[-1] <= 1.0 + tol)


def classify(op: Operator | np.ndarray) -> frozenset[str]:
    """Subset of {"unitary", "projector", "effect"}; the empty set means none apply."""
    kinds = set()
    if is_unitary(op):
        kinds.add("unitary")
    if is_projector(op):
        kinds.add("projector")
    if is_effect(op):
        kinds.add("effect")
    return frozenset(kinds)
