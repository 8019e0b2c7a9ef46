import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import entropy_logm, partial_trace_einsum, relative_entropy_logm
from passdeform.errors import DomainError, ValidationError
from passdeform.qstate import (
    DensityMatrix,
    HermitianOperator,
    MixtureOfUnitaries,
    check_unitary,
    entropy,
    expectation,
    joint_eigenbasis,
    kron_states,
    log_partition,
    mutual_information,
    operator_function,
    partial_trace,
    relative_entropy,
    thermal_state,
    unitary_from_hamiltonian,
)
from passdeform.sampling import haar_unitary, random_channel, random_density_matrix, rng_from

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(2, 6)


def test_density_matrix_rejects_bad_input():
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.5, 0.4]))
    with pytest.raises(ValidationError):
        HermitianOperator(np.array([[0, 1j], [1j, 0]]))


@settings(max_examples=40, deadline=None)
@given(seeds, dims)
def test_entropies_match_matrix_logarithm(seed, n):
    rng = rng_from(seed)
    rho, sigma = random_density_matrix(n, rng), random_density_matrix(n, rng)
    assert abs(entropy(rho) - entropy_logm(rho.matrix)) < 1e-8
    assert abs(relative_entropy(rho, sigma) - relative_entropy_logm(rho.matrix, sigma.matrix)) < 1e-7
    assert relative_entropy(rho, sigma) >= -1e-12


def test_relative_entropy_support_violation():
    with pytest.raises(DomainError):
        relative_entropy(DensityMatrix(np.diag([0.5, 0.5])), DensityMatrix(np.diag([1.0, 0.0])))
    assert relative_entropy(DensityMatrix(np.diag([1.0, 0.0])), DensityMatrix(np.diag([0.5, 0.5]))) == pytest.approx(np.log(2))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(2, 4))
def test_partial_trace_and_mutual_information(seed, da, db):
    rng = rng_from(seed)
    a, b = random_density_matrix(da, rng), random_density_matrix(db, rng)
    joint = kron_states([a, b])
    assert np.allclose(partial_trace(joint, [da, db], 0).matrix, a.matrix, atol=1e-12)
    assert np.allclose(partial_trace(joint, [da, db], 1).matrix, b.matrix, atol=1e-12)
    assert abs(mutual_information(joint, [da, db], 0)) < 1e-10
    r = random_density_matrix(da * db, rng)
    assert np.allclose(partial_trace(r, [da, db], 0).matrix, partial_trace_einsum(r.matrix, (da, db), 0), atol=1e-12)
    assert mutual_information(r, [da, db], 0) >= -1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, dims, st.floats(-3, 3))
def test_unitary_from_hamiltonian_matches_expm(seed, n, t):
    rng = rng_from(seed)
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = HermitianOperator((g + g.conj().T) / 2)
    assert np.allclose(unitary_from_hamiltonian(h, t), scipy.linalg.expm(-1j * t * h.matrix), atol=1e-10)


def test_thermal_state_and_log_partition():
    e = np.array([0.0, 0.3, 1.1, 2.0])
    rho = thermal_state(HermitianOperator(np.diag(e)), 1.7)
    ref = np.exp(-1.7 * e) / np.exp(-1.7 * e).sum()
    assert np.allclose(rho.populations, ref, atol=1e-15)
    assert log_partition(HermitianOperator(np.diag(e)), 1.7) == pytest.approx(np.log(np.exp(-1.7 * e).sum()))


@settings(max_examples=30, deadline=None)
@given(seeds, dims)
def test_operator_functions(seed, n):
    rng = rng_from(seed)
    rho = random_density_matrix(n, rng)
    b = operator_function(rho, "neg_log")
    assert np.allclose(b.matrix, -scipy.linalg.logm(rho.matrix), atol=1e-8)
    b2 = operator_function(b, "signed_power", 2.0)
    assert np.allclose(b2.matrix, b.matrix @ b.matrix, atol=1e-8)
    aff = operator_function(b, "affine", 2.0, 1.0)
    assert np.allclose(aff.matrix, 2 * b.matrix + np.eye(n), atol=1e-12)


def test_neg_log_of_zero_population():
    rho = DensityMatrix(np.diag([1.0, 0.0]))
    with pytest.raises(DomainError):
        operator_function(rho, "neg_log")
    assert operator_function(rho, "neg_log", clamp=True).meta["clamped"]


def test_joint_eigenbasis_rejects_noncommuting():
    x = HermitianOperator(np.array([[1.0, 0], [0, -1.0]]))
    y = HermitianOperator(np.array([[0, 1.0], [1.0, 0]]))
    with pytest.raises(ValidationError):
        joint_eigenbasis(x, y)
    z = HermitianOperator(np.array([[2.0, 1.0], [1.0, 2.0]]))
    a, b, v = joint_eigenbasis(y, z)
    assert np.allclose(v.conj().T @ y.matrix @ v, np.diag(a), atol=1e-10)
    assert np.allclose(v.conj().T @ z.matrix @ v, np.diag(b), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds, dims)
def test_mixtures_of_unitaries_are_unital_and_trace_preserving(seed, n):
    rng = rng_from(seed)
    ch = random_channel(n, rng)
    rho = random_density_matrix(n, rng)
    out = ch.apply(rho)
    assert abs(np.trace(out.matrix) - 1) < 1e-12
    assert np.min(np.linalg.eigvalsh(out.matrix)) > -1e-12
    assert np.allclose(ch.apply(DensityMatrix(np.eye(n) / n)).matrix, np.eye(n) / n, atol=1e-12)
    # unital maps cannot lower entropy
    assert entropy(out) >= entropy(rho) - 1e-10
    assert expectation(out, HermitianOperator(np.eye(n))) == pytest.approx(1.0)


def test_unitary_checks():
    rng = rng_from(0)
    u = haar_unitary(5, rng)
    assert np.allclose(u @ u.conj().T, np.eye(5), atol=1e-12)
    with pytest.raises(ValidationError):
        check_unitary(np.diag([1.0, 2.0]))
    with pytest.raises(ValidationError):
        MixtureOfUnitaries(np.array([0.5, 0.6]), (np.eye(2), np.eye(2)))


def test_haar_sampling_first_moment():
    # E|U_00|^2 = 1/n under the Haar measure
    rng = rng_from(3)
    n = 4
    vals = [abs(haar_unitary(n, rng)[0, 0]) ** 2 for _ in range(4000)]
    assert abs(np.mean(vals) - 1 / n) < 0.02
