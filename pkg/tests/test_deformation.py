import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import nu_scan, xi_scan
from passdeform.deformation import (
    bound_from_xi,
    bsp_subspaces,
    build_B,
    deformed_inequality,
    effective_betas,
    identity_shift,
    ladders_diagram,
    partition_from_values,
    polarization_bound,
    strip_shift,
    ultracold_analysis,
    validate_deformation,
    verify_bsp_equality,
    xi_thresholds,
)
from passdeform.errors import DomainError, ValidationError
from passdeform.harness import load_bundled
from passdeform.inequalities import delta
from passdeform.passivity import min_expectation
from passdeform.qstate import DensityMatrix, HermitianOperator, expectation
from passdeform.sampling import random_channel, rng_from
from passdeform.setups import SetupSpec, Subsystem, thermal_setup

seeds = st.integers(0, 2**32 - 1)


def _diag_pair(rng, n):
    p = rng.dirichlet(np.ones(n))
    b = -np.log(p)
    # integer-valued direction gives frequent degeneracies in A
    a = rng.integers(-2, 3, n).astype(float)
    return p, b, a


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(2, 8))
def test_thresholds_match_bisection_oracle(seed, n):
    rng = rng_from(seed)
    p, b, a = _diag_pair(rng, n)
    th = xi_thresholds(HermitianOperator(np.diag(b)), HermitianOperator(np.diag(a)))
    lo, hi = xi_scan(b, a)
    for got, ref in ((th.xi_minus, lo), (th.xi_plus, hi)):
        if np.isinf(ref):
            assert np.isinf(got) and np.sign(got) == np.sign(ref)
        else:
            assert abs(got - ref) < 1e-9 * (1 + abs(ref))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(3, 8))
def test_restricted_thresholds_match_blockwise_oracle(seed, n):
    rng = rng_from(seed)
    _, b, a = _diag_pair(rng, n)
    labels = rng.integers(0, 2, n)
    part = partition_from_values(labels)
    th = xi_thresholds(HermitianOperator(np.diag(b)), HermitianOperator(np.diag(a)), part)
    lo, hi = xi_scan(b, a, part.blocks)
    assert (np.isinf(lo) and np.isinf(th.xi_minus)) or abs(th.xi_minus - lo) < 1e-9 * (1 + abs(lo))
    assert (np.isinf(hi) and np.isinf(th.xi_plus)) or abs(th.xi_plus - hi) < 1e-9 * (1 + abs(hi))
    free = xi_thresholds(HermitianOperator(np.diag(b)), HermitianOperator(np.diag(a)))
    assert th.xi_minus <= free.xi_minus + 1e-12 and th.xi_plus >= free.xi_plus - 1e-12


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 6), st.floats(0.0, 1.0))
def test_deformed_bound_holds_inside_and_fails_outside(seed, n, frac):
    rng = rng_from(seed)
    p, b, a = _diag_pair(rng, n)
    B, A = HermitianOperator(np.diag(b)), HermitianOperator(np.diag(a))
    rho0 = DensityMatrix(np.diag(p))
    th = xi_thresholds(B, A)
    lo = th.xi_minus if np.isfinite(th.xi_minus) else -5.0
    hi = th.xi_plus if np.isfinite(th.xi_plus) else 5.0
    xi = lo + frac * (hi - lo)
    ineq = deformed_inequality(B, A, xi)
    for _ in range(30):
        assert ineq.holds(rho0, random_channel(n, rng).apply(rho0))
    assert validate_deformation(B, HermitianOperator(np.diag(b + xi * a)))
    if np.isfinite(th.xi_minus):
        beyond = th.xi_minus - 0.05 * (1 + abs(th.xi_minus))
        deformed = HermitianOperator(np.diag(b + beyond * a))
        assert min_expectation(rho0, deformed) < expectation(rho0, deformed) - 1e-12
        check = validate_deformation(B, deformed)
        assert not check and check.witnesses


def test_bound_from_xi_forms():
    b = -np.log(np.array([0.5, 0.3, 0.2]))
    B = HermitianOperator(np.diag(b))
    up = xi_thresholds(B, HermitianOperator(np.diag([0.0, 1.0, 2.0])))
    assert np.isinf(up.xi_plus)
    sign = bound_from_xi(up, "decrease")
    assert sign.sign_definite
    inc = bound_from_xi(up, "increase")
    assert not inc.sign_definite
    rho0 = DensityMatrix(np.diag(np.exp(-b)))
    rng = rng_from(1)
    for _ in range(100):
        rf = random_channel(3, rng).apply(rho0)
        assert inc.holds(rho0, rf) and sign.holds(rho0, rf)
    with pytest.raises(ValidationError):
        bound_from_xi(up, "sideways")


def test_build_B_inverts_the_state():
    s = load_bundled("two_four_level")
    B = build_B(s)
    rho0 = s.initial_state()
    assert np.allclose(scipy.linalg.expm(-B.matrix), rho0.matrix, atol=1e-14)
    c, h = s.subsystems
    assert identity_shift(B) == pytest.approx(c.log_partition() + h.log_partition())
    core = np.real(np.diag(strip_shift(B).matrix))
    expect = [c.beta * ec + h.beta * eh for ec in c.energies for eh in h.energies]
    assert np.allclose(core, expect, atol=1e-12)


def test_build_B_zero_population():
    s = SetupSpec((Subsystem("x", (0.0, 1.0, 2.0), populations=(0.5, 0.5, 0.0)),))
    with pytest.raises(DomainError):
        build_B(s)
    assert build_B(s, clamp=True).meta.get("clamped")


def test_bsp_equality_and_negative_control():
    s = load_bundled("two_four_level")
    B, A, part = build_B(s), s.observable("A"), s.partition("manifolds")
    th = xi_thresholds(B, A, part)
    bsp = bsp_subspaces(B, A, th.xi_minus, part)
    good = verify_bsp_equality(s, bsp, trials=50, rng=1)
    bad = verify_bsp_equality(s, bsp, trials=50, rng=1, negative_control=True)
    assert good.passed and not bad.passed
    # groups really are degenerate in B(xi) and not in B
    d = np.real(np.diag(B.matrix + th.xi_minus * A.matrix))
    b = np.real(np.diag(B.matrix))
    for g in bsp.groups:
        assert np.ptp(d[list(g)]) < 1e-9 and np.ptp(b[list(g)]) > 1e-6


# --------------------------------------------------------------------------- ladders

def test_ladders_overlap_flag():
    base = {"c": [0.0, 1.0], "h": [0.0, 0.5, 2.0]}
    assert ladders_diagram(thermal_setup(base, {"c": 1.0, "h": 1.0})).overlap
    assert not ladders_diagram(thermal_setup(base, {"c": 2.5, "h": 1.0})).overlap
    # touching counts as overlapping
    assert ladders_diagram(thermal_setup(base, {"c": 2.0, "h": 1.0})).overlap


def test_ladder_gaps_absolute_table():
    s = thermal_setup({"c": [0.0, 1.0], "h": [0.0, 0.5, 2.0]}, {"c": 3.0, "h": 1.0})
    diag = ladders_diagram(s)
    table = diag.absolute()
    assert np.allclose(table.reshape(-1), -np.log(s.initial_populations()), atol=1e-12)


def test_ultracold_threshold_and_errors():
    s = thermal_setup({"c": [0.0, 0.4, 1.0], "h": [0.0, 1.5]}, {"c": 2.0, "h": 0.8})
    uc = ultracold_analysis(s)
    assert uc.beta_c_star == pytest.approx(0.8 * 1.5 / 0.4)
    assert uc.no_cooling == (2.0 >= uc.beta_c_star)
    flat = thermal_setup({"c": [1.0], "h": [0.0, 1.0]}, {"c": 2.0, "h": 1.0})
    with pytest.raises(DomainError):
        ultracold_analysis(flat)
    athermal = load_bundled("athermal")
    with pytest.raises(ValidationError):
        ultracold_analysis(athermal)


def test_polarization_bound_validation_and_brute_nu():
    s = load_bundled("erasure")
    with pytest.raises(ValidationError):
        polarization_bound(s, (0, 1))
    pb = polarization_bound(s, (1, 2))
    b = np.real(np.diag(strip_shift(build_B(s)).matrix))
    a = s.subsystems[1].beta * np.real(np.diag(pb.polarization.matrix))
    assert pb.nu_plus == pytest.approx(nu_scan(b, a), abs=1e-9)
    assert pb.nu_formula == pytest.approx(min(pb.E_plus - pb.E, pb.E - pb.E_minus))


def test_polarization_overlap_has_no_starred_form():
    s = thermal_setup({"c": [0.0, 1.0], "h": [0.0, 1.0, 1.0, 3.0]}, {"c": 1.0, "h": 1.0})
    pb = polarization_bound(s, (1, 2))
    assert pb.overlap and pb.starred_inequality is None
    rho0 = s.initial_state()
    rng = rng_from(4)
    for _ in range(200):
        assert pb.inequality.holds(rho0, random_channel(s.dim, rng).apply(rho0))


@pytest.mark.parametrize("name", ["athermal", "correlated"])
def test_effective_betas_are_valid_deformations(name):
    s = load_bundled(name)
    eb = effective_betas(s)
    assert eb.validity, eb.reasons
    b = build_B(s)
    op = eb.operator
    assert validate_deformation(b, op)
    rho0 = s.initial_state()
    rng = rng_from(5)
    for _ in range(200):
        rf = random_channel(s.dim, rng).apply(rho0)
        assert eb.inequality.holds(rho0, rf)
        assert delta(op, rho0, rf) >= -1e-9


def test_effective_betas_report_invalid_conditions():
    # a floor subsystem whose populations increase with energy cannot carry a positive beta
    s = SetupSpec((Subsystem("c", (0.0, 1.0), populations=(0.3, 0.7)),
                   Subsystem("s", (0.0, 1.0), populations=(0.6, 0.4))))
    eb = effective_betas(s)
    assert not eb.validity and eb.reasons
