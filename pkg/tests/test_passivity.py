import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import assignment_minimum, permutation_minimum, populations_passive
from passdeform.passivity import (
    gp_family,
    is_globally_passive,
    min_expectation,
    order_compatible,
    ordering_function,
    passive_state_of,
)
from passdeform.qstate import DensityMatrix, HermitianOperator, expectation
from passdeform.sampling import haar_unitary, random_density_matrix, random_diagonal_state, rng_from

seeds = st.integers(0, 2**32 - 1)


def _herm(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return HermitianOperator((g + g.conj().T) / 2)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 7))
def test_min_expectation_matches_permutation_search(seed, n):
    rng = rng_from(seed)
    p = rng.dirichlet(np.ones(n))
    a = rng.integers(-2, 3, n).astype(float)
    got = min_expectation(DensityMatrix(np.diag(p)), HermitianOperator(np.diag(a)))
    assert abs(got - permutation_minimum(p, a)) < 1e-12
    assert abs(got - assignment_minimum(p, a)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 5))
def test_passive_state_is_a_lower_bound_over_unitaries(seed, n):
    rng = rng_from(seed)
    rho, A = random_density_matrix(n, rng), _herm(rng, n)
    passive, u = passive_state_of(rho, A)
    assert np.allclose(u @ rho.matrix @ u.conj().T, passive.matrix, atol=1e-10)
    low = min_expectation(rho, A)
    assert abs(expectation(passive, A) - low) < 1e-10
    for _ in range(50):
        v = haar_unitary(n, rng)
        assert expectation(DensityMatrix(v @ rho.matrix @ v.conj().T), A) >= low - 1e-10


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(2, 7))
def test_global_passivity_matches_pairwise_test(seed, n):
    rng = rng_from(seed)
    p = rng.dirichlet(np.ones(n))
    p[rng.integers(n)] = p[rng.integers(n)]        # occasional ties
    p /= p.sum()
    a = rng.integers(0, 4, n).astype(float)
    expected = populations_passive(p, a)
    assert is_globally_passive(HermitianOperator(np.diag(a)), DensityMatrix(np.diag(p))) == expected
    assert order_compatible(-np.log(p), a) == expected


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 6), st.sampled_from([-1.0, 0.5, 1.0, 2.56]))
def test_gp_family_is_passive(seed, n, alpha):
    rng = rng_from(seed)
    rho = random_diagonal_state(n, rng)
    assert is_globally_passive(gp_family(rho, alpha), rho)


def test_noncommuting_operator_is_not_passive():
    rho = DensityMatrix(np.diag([0.7, 0.3]))
    assert not is_globally_passive(HermitianOperator(np.array([[0, 1.0], [1.0, 0]])), rho)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 5))
def test_ordering_function_signs(seed, n):
    rng = rng_from(seed)
    A, B = _herm(rng, n), _herm(rng, n)
    assert ordering_function(A, B, "same").chi_value <= 1e-10
    assert ordering_function(A, B, "reverse").chi_value >= -1e-10
    rho = random_density_matrix(n, rng)
    b = gp_family(rho, 1.0)
    # -ln rho is reverse ordered with rho itself
    assert ordering_function(rho, b, "reverse").is_zero
