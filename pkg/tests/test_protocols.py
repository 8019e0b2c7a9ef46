import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import min_swaps, permutation_minimum
from passdeform.errors import ValidationError
from passdeform.inequalities import increase_of
from passdeform.passivity import gp_family, min_expectation
from passdeform.protocols import (
    DemonChannel,
    ci_gap_decomposition,
    detection_threshold,
    optimal_protocol,
    transposition_count,
)
from passdeform.qstate import DensityMatrix, HermitianOperator
from passdeform.sampling import haar_unitary, random_density_matrix, random_diagonal_state, rng_from

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=100, deadline=None)
@given(st.permutations(list(range(9))))
def test_transposition_count_matches_swap_sort(perm):
    assert transposition_count(perm) == min_swaps(perm)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 7))
def test_sorting_protocols(seed, n):
    rng = rng_from(seed)
    p = rng.dirichlet(np.ones(n))
    a = rng.integers(0, 3, n).astype(float)
    rho0, A = DensityMatrix(np.diag(p)), HermitianOperator(np.diag(a))
    full, part = optimal_protocol(rho0, A), optimal_protocol(rho0, A, partial=True)
    ref = permutation_minimum(p, a)
    for pr in (full, part):
        assert abs(pr.achieved_value - ref) < 1e-12
        out = pr.apply(rho0)
        expect = np.empty(n)
        expect[pr.permutation] = p
        assert np.allclose(out.populations, expect, atol=1e-14)
        assert np.real(np.trace(out.matrix @ A.matrix)) == pytest.approx(pr.achieved_value, abs=1e-12)
    assert part.transpositions <= full.transpositions


def test_rotated_protocol_for_noncommuting_inputs():
    rng = rng_from(3)
    rho = random_density_matrix(4, rng)
    A = HermitianOperator(np.diag([0.0, 1.0, 2.0, 3.0]))
    pr = optimal_protocol(rho, A)
    assert pr.basis_rotated
    assert pr.achieved_value == pytest.approx(min_expectation(rho, A), abs=1e-10)
    out = pr.apply(rho)
    assert np.real(np.trace(out.matrix @ A.matrix)) == pytest.approx(pr.achieved_value, abs=1e-10)


def test_demon_channel_validation():
    with pytest.raises(ValidationError):
        DemonChannel((np.diag([1.0, 0.0]),), (np.eye(2),))
    with pytest.raises(ValidationError):
        DemonChannel((np.diag([1.0, 0.0]), np.diag([1.0, 1.0])), (np.eye(2), np.eye(2)))
    with pytest.raises(ValidationError):
        DemonChannel((np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), (np.eye(2), np.diag([1.0, 2.0])))
    with pytest.raises(ValidationError):
        DemonChannel.trivial(2, p=1.5)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 6), st.floats(0.0, 1.0))
def test_demon_channel_action(seed, n, p):
    rng = rng_from(seed)
    rho = random_density_matrix(n, rng)
    src, tgt = rng.choice(n, 2, replace=False)
    demon = DemonChannel.state_replacement(n, int(src), int(tgt), p)
    out = demon.apply(rho)
    assert abs(np.trace(out.matrix) - 1) < 1e-12
    pops = np.diag(rho.matrix).real
    assert out.matrix[tgt, tgt].real == pytest.approx(pops[tgt] + p * pops[src], abs=1e-12)
    assert out.matrix[src, src].real == pytest.approx((1 - p) * pops[src], abs=1e-12)
    assert np.allclose(demon.with_p(0.0).apply(rho).matrix, rho.matrix)


def test_detection_threshold_against_dense_grid():
    rng = rng_from(7)
    rho0 = random_diagonal_state(5, rng)
    order = np.argsort(-rho0.populations)
    # a partial thermalising step first, then a demon pushing the least likely level back into the most likely
    pre = DemonChannel.state_replacement(5, int(order[0]), int(order[-1]), 0.3)
    demon = DemonChannel.state_replacement(5, int(order[-1]), int(order[0]))
    ineq = increase_of(gp_family(rho0, 2.0))
    mid = pre.apply(rho0)
    t = detection_threshold(rho0, pre, demon, ineq)
    assert 0 < t < 1
    grid = np.linspace(0, 1, 20001)
    dense = next((q for q in grid if not ineq.holds(rho0, demon.with_p(q).apply(mid))), np.inf)
    assert abs(t - dense) < 2e-4
    assert detection_threshold(rho0, None, DemonChannel.trivial(5), ineq) == np.inf


def test_ci_gap_zero_for_identity_on_thermal_system():
    e = np.array([0.0, 1.0, 2.5])
    beta = 0.7
    g = np.exp(-beta * np.array([0.0, 0.4]))
    sys = DensityMatrix(np.diag(g / g.sum()))
    out = ci_gap_decomposition(sys, np.diag(e), beta, np.eye(6))
    assert abs(out.lhs) < 1e-12 and abs(out.D_correlation) < 1e-12 and abs(out.D_env_displacement) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 3), st.integers(2, 4))
def test_ci_gap_identity(seed, ds, de):
    rng = rng_from(seed)
    out = ci_gap_decomposition(random_density_matrix(ds, rng), np.diag(rng.uniform(0, 2, de)),
                               float(rng.uniform(0.1, 2)), haar_unitary(ds * de, rng))
    assert abs(out.residual) < 1e-10
    assert out.lhs >= -1e-12
    with pytest.raises(ValidationError):
        ci_gap_decomposition(random_density_matrix(ds, rng), np.diag([0.0, 1.0]), 1.0, np.eye(3))
