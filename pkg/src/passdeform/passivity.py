"""Passive states, passive operators and ordering functions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .qstate import (
    EIG_CUTOFF,
    DensityMatrix,
    HermitianOperator,
    as_matrix,
    as_operator,
    as_state,
    eig_sorted,
    is_diagonal,
    joint_eigenbasis,
    operator_function,
)


def _spectrum_desc(rho) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in nonincreasing order (stable) with matching eigenvectors."""
    m = as_matrix(rho)
    if is_diagonal(rho):
        p = m.diagonal().real
        order = np.argsort(-p, kind="stable")
        return p[order], np.eye(m.shape[0], dtype=complex)[:, order]
    w, v = np.linalg.eigh(m)
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def passive_state_of(rho, A) -> tuple[DensityMatrix, np.ndarray]:
    """The minimiser of tr(U rho U^dagger A) over unitaries, and the unitary reaching it."""
    rho = as_state(rho)
    spec = eig_sorted(as_operator(A))
    if spec.vectors.shape[0] != rho.dim:
        raise ValidationError("dimension mismatch between state and operator")
    r, vr = _spectrum_desc(rho)
    va = spec.vectors
    passive = (va * r) @ va.conj().T
    u = va @ vr.conj().T
    return DensityMatrix(passive, label="passive"), u


def min_expectation(rho, A) -> float:
    """min over unitaries of tr(U rho U^dagger A) = sorted-desc(rho) . sorted-asc(A)."""
    r, _ = _spectrum_desc(as_state(rho))
    a = eig_sorted(as_operator(A)).values
    return float(np.dot(r, a))


@dataclass(frozen=True)
class OrderingReport:
    chi_value: float
    mode: str
    is_zero: bool
    tolerance: float


def _sorted_eigs(x) -> np.ndarray:
    m = as_matrix(x)
    if is_diagonal(x):
        return np.sort(m.diagonal().real)
    return np.linalg.eigvalsh(m)


def ordering_function(A, B, mode: str = "same", rtol: float = 1e-9) -> OrderingReport:
    """chi = tr(AB) - (eig A descending).(eig B descending, or ascending for mode 'reverse').

    Same-order chi is never positive; reverse-order chi is never negative.
    Zero means the two operators are (reverse) ordered in a common eigenbasis.
    """
    if mode not in ("same", "reverse"):
        raise ValueError("mode must be 'same' or 'reverse'")
    a, b = as_matrix(A), as_matrix(B)
    tr = float(np.real(np.einsum("ij,ji->", a, b)))
    la = _sorted_eigs(A)[::-1]
    lb = _sorted_eigs(B)
    lb = lb[::-1] if mode == "same" else lb
    prod = float(np.dot(la, lb))
    chi = tr - prod
    tol = rtol * (abs(tr) + abs(prod) + 1.0)
    return OrderingReport(chi, "same_order" if mode == "same" else "reverse_order", abs(chi) < tol, tol)


def is_globally_passive(A, rho0, tol: float = 1e-9) -> bool:
    """True iff <A> cannot decrease under any mixture of unitaries applied to rho0.

    Requires [A, rho0] = 0 and, in a joint eigenbasis, A nondecreasing wherever
    the population strictly decreases.  The comparison is made on -ln(population)
    so that exponentially small populations are still resolved; zero populations
    sit above every populated level.
    """
    try:
        a, r, _ = joint_eigenbasis(as_matrix(A), as_matrix(rho0), tol)
    except ValueError:
        return False
    with np.errstate(divide="ignore"):
        b = np.where(r > EIG_CUTOFF, -np.log(np.clip(r, EIG_CUTOFF, None)), np.inf)
    return order_compatible(b, a, tol)


def order_compatible(reference, values, rtol: float = 1e-9) -> bool:
    """No pair with reference_i < reference_j (strictly) has values_i > values_j (strictly)."""
    ref = np.asarray(reference, dtype=float)
    val = np.asarray(values, dtype=float)
    finite = ref[np.isfinite(ref)]
    rtol_ref = rtol * (float(np.max(np.abs(finite))) + 1.0) if finite.size else rtol
    vtol = rtol * (float(np.max(np.abs(val))) + 1.0)
    order = np.argsort(ref, kind="stable")
    ref, val = ref[order], val[order]
    # group reference values that are equal within tolerance
    same = np.zeros(ref.size, dtype=bool)
    if ref.size > 1:
        with np.errstate(invalid="ignore"):
            gap = np.diff(ref)
        same[1:] = (gap < rtol_ref) | (np.isinf(ref[1:]) & np.isinf(ref[:-1]))
    starts = np.flatnonzero(~same)
    bounds = list(starts) + [ref.size]
    running_max = -np.inf
    for s, e in zip(bounds[:-1], bounds[1:]):
        grp = val[s:e]
        if grp.min() < running_max - vtol:
            return False
        running_max = max(running_max, grp.max())
    return True


def gp_family(rho0, alpha: float, clamp: bool = False) -> HermitianOperator:
    """sgn(alpha) (-ln rho0)^alpha."""
    B = operator_function(as_state(rho0), "neg_log", clamp=clamp)
    if alpha == 1:
        return B.with_label("B")
    out = operator_function(B, "signed_power", alpha)
    return HermitianOperator(out.matrix, f"sgn({alpha:g})B^{alpha:g}", dict(B.meta))
