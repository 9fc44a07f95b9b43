import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perspectival.hilbert import (
    HilbertError,
    Operator,
    Register,
    StateVector,
    Subsystem,
    apply_on,
    basis_state,
    born_probability,
    classify,
    hermitian_eigenvalues,
    project,
    tensor_state,
)
from perspectival.spin import PAULI, Direction, sigma, singlet_state, spin_projector

R = 1 / math.sqrt(2)


def random_state(register, rng):
    v = rng.normal(size=register.dim) + 1j * rng.normal(size=register.dim)
    return StateVector.normalized(register, v)


def random_unitary(d, rng):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def test_subsystem_and_register_validation():
    with pytest.raises(HilbertError):
        Subsystem("x", 1)
    with pytest.raises(HilbertError):
        Subsystem("", 2)
    with pytest.raises(HilbertError, match="duplicate"):
        Register.of(("L", 2), ("L", 3))
    reg = Register.of(("L", 2), ("P", 3))
    assert reg.dim == 6 and reg.labels == ("L", "P") and "P" in reg
    with pytest.raises(HilbertError, match="not in register"):
        reg.index("Q")


def test_state_norm_is_checked():
    reg = Register.of(("L", 2))
    with pytest.raises(HilbertError, match="not normalized"):
        StateVector(reg, [1, 1])
    with pytest.raises(HilbertError, match="length"):
        StateVector(reg, [1, 0, 0])
    assert StateVector.normalized(reg, [1, 1]).norm() == pytest.approx(1.0, abs=1e-15)


def test_tensor_of_basis_states():
    a = basis_state(Register.of(("A", 2)), [0])
    b = basis_state(Register.of(("B", 2)), [0])
    np.testing.assert_array_equal(tensor_state(a, b).amplitudes, [1, 0, 0, 0])
    # the list form is accepted as well
    np.testing.assert_array_equal(tensor_state([a, b]).amplitudes, [1, 0, 0, 0])


def test_tensor_assembles_singlet():
    up = basis_state(Register.of(("L", 2)), [0])
    down = basis_state(Register.of(("L", 2)), [1])
    upR = basis_state(Register.of(("R", 2)), [0])
    downR = basis_state(Register.of(("R", 2)), [1])
    v = R * tensor_state(up, downR).amplitudes - R * tensor_state(down, upR).amplitudes
    assert np.max(np.abs(v - singlet_state().amplitudes)) == 0.0


def test_tensor_overlapping_labels_rejected():
    a = basis_state(Register.of(("A", 2)), [0])
    with pytest.raises(HilbertError):
        tensor_state(a, a)


def test_tensor_associativity_and_norm():
    rng = np.random.default_rng(0)
    a, b, c = (random_state(Register.of((l, d)), rng) for l, d in (("A", 2), ("B", 3), ("C", 2)))
    left = tensor_state(a, tensor_state(b, c))
    right = tensor_state(tensor_state(a, b), c)
    assert left.max_deviation(right) <= 1e-14
    assert abs(tensor_state(a, b).norm() - 1) <= 1e-12


def test_apply_on_matches_kronecker_embedding():
    """Oracle: build the full-space matrix explicitly with np.kron and permutations."""
    rng = np.random.default_rng(1)
    reg = Register.of(("L", 2), ("P", 3), ("R", 2))
    psi = random_state(reg, rng)
    u = random_unitary(4, rng)
    op = Operator(("R", "L"), u)  # non-adjacent and reversed support
    out = apply_on(psi, op)
    # oracle: permute to (R, L, P), apply kron(u, I3), permute back
    t = psi.amplitudes.reshape(2, 3, 2).transpose(2, 0, 1).reshape(-1)
    t = np.kron(u, np.eye(3)) @ t
    expect = t.reshape(2, 2, 3).transpose(1, 2, 0).reshape(-1)
    np.testing.assert_allclose(out.amplitudes, expect, atol=1e-13)


def test_apply_on_identity_and_unitary_norm():
    rng = np.random.default_rng(2)
    reg = Register.of(("L", 2), ("R", 2), ("P", 3))
    psi = random_state(reg, rng)
    assert apply_on(psi, Operator.identity(reg, ["P"])).max_deviation(psi) == 0.0
    out = apply_on(psi, Operator(("P",), random_unitary(3, rng)))
    assert abs(out.norm() - 1.0) <= 1e-12


def test_pauli_involution():
    rng = np.random.default_rng(3)
    psi = random_state(Register.of(("L", 2), ("R", 2)), rng)
    n = Direction.from_vector(rng.normal(size=3))
    s = Operator(("R",), sigma(n))
    assert apply_on(apply_on(psi, s), s).max_deviation(psi) <= 1e-14


def test_apply_on_errors():
    psi = singlet_state()
    with pytest.raises(HilbertError, match="not in register"):
        apply_on(psi, Operator(("Q",), np.eye(2)))
    with pytest.raises(HilbertError, match="dimension"):
        apply_on(psi, Operator(("L",), np.eye(3)))


def test_born_probabilities_on_singlet():
    psi = singlet_state()
    z = Direction(0, 0, 1)
    assert born_probability(psi, Operator.identity(psi.register)) == pytest.approx(1.0, abs=1e-15)
    assert born_probability(psi, spin_projector(z, 1, "L")) == pytest.approx(0.5, abs=1e-12)
    n = Direction.from_angle(0.7)
    joint = spin_projector(n, 1, "L").tensor(spin_projector(n, 1, "R"))
    assert born_probability(psi, joint) == pytest.approx(0.0, abs=1e-12)


def test_born_rejects_non_projector():
    with pytest.raises(HilbertError, match="not a projector"):
        born_probability(singlet_state(), Operator(("L",), np.diag([1.0, 0.5])))


def test_projector_complement_sums_to_one():
    rng = np.random.default_rng(4)
    psi = random_state(Register.of(("L", 2), ("R", 2)), rng)
    for _ in range(10):
        n = Direction.from_vector(rng.normal(size=3))
        p = spin_projector(n, 1, "L")
        q = Operator(("L",), np.eye(2) - p.matrix)
        assert born_probability(psi, p) + born_probability(psi, q) == pytest.approx(1.0, abs=1e-10)


def test_project_singlet_on_up():
    psi = singlet_state()
    z = Direction(0, 0, 1)
    out = project(psi, spin_projector(z, 1, "L"))
    up_down = basis_state(psi.register, [0, 1])
    assert out.equals_up_to_phase(up_down)
    # an eigenstate is unchanged by its own projector
    assert project(up_down, spin_projector(z, 1, "L")).max_deviation(up_down) <= 1e-15


def test_project_impossible_branch():
    z = Direction(0, 0, 1)
    both_up = spin_projector(z, 1, "L").tensor(spin_projector(z, 1, "R"))
    with pytest.raises(HilbertError, match="zero-probability"):
        project(singlet_state(), both_up)


def test_classify_examples():
    assert classify(np.eye(2)) == {"unitary", "projector", "effect"}
    e = (np.eye(2) + 0.5 * PAULI[2]) / 2
    assert classify(e) == {"effect"}
    np.testing.assert_allclose(hermitian_eigenvalues(e), [0.25, 0.75], atol=1e-15)
    n = Direction.from_angle(1.1)
    assert classify(sigma(n)) == {"unitary"}
    assert classify(np.array([[0, 1], [0, 0]])) == frozenset()


def test_eigenvalues_closed_form_matches_numpy():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        h = a + a.conj().T
        np.testing.assert_allclose(hermitian_eigenvalues(h), np.linalg.eigvalsh(h), atol=1e-12)


def test_disjoint_supports_commute():
    rng = np.random.default_rng(6)
    psi = random_state(Register.of(("L", 2), ("R", 2), ("P", 3)), rng)
    a = Operator(("L",), random_unitary(2, rng))
    b = Operator(("P", "R"), random_unitary(6, rng))
    assert apply_on(apply_on(psi, a), b).max_deviation(apply_on(apply_on(psi, b), a)) <= 1e-12


def test_reorder_preserves_physics():
    rng = np.random.default_rng(7)
    psi = random_state(Register.of(("L", 2), ("P", 3), ("R", 2)), rng)
    moved = psi.reorder(["R", "L", "P"])
    assert moved.register.labels == ("R", "L", "P")
    p = spin_projector(Direction.from_angle(0.4), 1, "R")
    assert born_probability(moved, p) == pytest.approx(born_probability(psi, p), abs=1e-14)


def test_operator_algebra():
    a = Operator(("L",), PAULI[0])
    assert (a @ a).matrix.tolist() == np.eye(2).tolist()
    assert np.allclose((a + a.scaled(-1)).matrix, 0)
    with pytest.raises(HilbertError, match="overlapping"):
        a.tensor(a)
    with pytest.raises(HilbertError, match="square"):
        Operator(("L",), np.zeros((2, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25))
def test_norm_preserved_over_unitary_sequences(seed, length):
    rng = np.random.default_rng(seed)
    reg = Register.of(("L", 2), ("R", 2), ("P", 3))
    psi = random_state(reg, rng)
    labels = [("L",), ("R",), ("P",), ("L", "P"), ("R", "L")]
    for _ in range(length):
        sup = labels[rng.integers(len(labels))]
        d = math.prod(reg.subsystem(l).dim for l in sup)
        psi = apply_on(psi, Operator(sup, random_unitary(d, rng)))
    assert abs(psi.norm() - 1.0) <= 1e-12 * length
