"""Linear deformations B + xi*A: admissible xi range, bounds, and order validation."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..inequalities import DeltaInequality
from ..partitions import ManifoldPartition
from ..qstate import HermitianOperator, as_matrix, as_operator, joint_eigenbasis
from .build import strip_shift

RTOL = 1e-9
_CHUNK = 256


def _tol(values, rtol=RTOL) -> float:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return rtol * ((float(np.max(np.abs(v))) if v.size else 0.0) + 1.0)


def pair_constraints(reference, base, direction, indices=None, rtol=RTOL, skip_base_ties=False,
                     keep_pairs=True):
    """Constraints on xi from every pair that is strictly ordered by `reference`.

    For reference_i < reference_j the deformed operator must keep
    base_i + xi*direction_i <= base_j + xi*direction_j.  Returns (lo, hi, pairs)
    where pairs holds (i, j, xi_k) for each pair that constrains xi.
    """
    ref = np.asarray(reference, dtype=float)
    b = np.asarray(base, dtype=float)
    a = np.asarray(direction, dtype=float)
    idx = np.arange(ref.size) if indices is None else np.asarray(indices, dtype=int)
    tr, tb, ta = _tol(ref, rtol), _tol(b, rtol), _tol(a, rtol)
    r_, b_, a_ = ref[idx], b[idx], a[idx]
    lo, hi = -np.inf, np.inf
    pairs = []
    n = idx.size
    for s in range(0, n, _CHUNK):
        rows = slice(s, min(n, s + _CHUNK))
        with np.errstate(invalid="ignore"):
            strict = r_[rows, None] < r_[None, :] - tr
        da = a_[rows, None] - a_[None, :]
        db = b_[None, :] - b_[rows, None]
        mask = strict & (np.abs(da) > ta)
        if skip_base_ties:
            mask &= np.abs(db) > tb
        if not mask.any():
            continue
        ii, jj = np.nonzero(mask)
        v = db[ii, jj] / da[ii, jj]
        up = da[ii, jj] > 0
        if up.any():
            hi = min(hi, float(v[up].min()))
        if (~up).any():
            lo = max(lo, float(v[~up].max()))
        if keep_pairs:
            pairs.extend(zip((idx[ii + s]).tolist(), idx[jj].tolist(), v.tolist()))
    return lo, hi, pairs


@dataclass(frozen=True, eq=False)
class XiThresholds:
    xi_minus: float
    xi_plus: float
    xi_k_list: tuple
    restricted: bool
    partition_used: ManifoldPartition | None
    base: HermitianOperator
    direction: HermitianOperator
    basis: np.ndarray | None = None
    block_ranges: tuple = ()

    @property
    def magnitude_minus(self) -> float:
        return -self.xi_minus

    @property
    def magnitude_plus(self) -> float:
        return self.xi_plus

    def deformed(self, xi: float) -> HermitianOperator:
        return HermitianOperator(self.base.matrix + xi * self.direction.matrix, f"B({xi:g})",
                                 dict(self.base.meta))


def xi_thresholds(B, A, partition: ManifoldPartition | None = None, rtol: float = RTOL) -> XiThresholds:
    """Admissible range xi_minus <= xi <= xi_plus keeping B + xi*A ordered like B.

    Every pair of common eigenvectors with distinct B values and distinct A
    values contributes xi_k = (b_j - b_i)/(a_i - a_j); pairs degenerate in either
    operator are excluded.  With a partition, pairs are only taken inside a block
    and the result is the tightest over blocks.
    """
    B, A = as_operator(B), as_operator(A)
    try:
        b, a, vecs = joint_eigenbasis(B, A)
    except ValidationError:
        raise ValidationError(
            "xi_thresholds: A and B do not commute; pass A expressed in the eigenbasis of B") from None
    computational = B.is_diagonal and A.is_diagonal
    if partition is not None:
        if not computational:
            raise ValidationError("a partition refers to the computational basis; B and A must be diagonal there")
        if partition.dim != b.size:
            raise ValidationError(f"partition covers {partition.dim} states, operators have {b.size}")
        blocks = partition.blocks
    else:
        blocks = (tuple(range(b.size)),)
    lo, hi, pairs, ranges = -np.inf, np.inf, [], []
    for blk in blocks:
        l, h, p = pair_constraints(b, b, a, blk, rtol, skip_base_ties=True, keep_pairs=b.size <= 1024)
        ranges.append((l, h))
        lo, hi = max(lo, l), min(hi, h)
        pairs.extend(p)
    return XiThresholds(lo, hi, tuple(pairs), partition is not None, partition, B, A,
                        None if computational else vecs, tuple(ranges))


@dataclass(frozen=True, eq=False)
class DeformationBound:
    base: HermitianOperator
    direction: HermitianOperator
    xi_used: float
    inequality: DeltaInequality
    provenance: str
    sign_definite: bool = False
    partition: ManifoldPartition | None = None
    notes: dict = field(default_factory=dict)

    def deformed(self) -> HermitianOperator | None:
        if not np.isfinite(self.xi_used):
            return None
        return HermitianOperator(self.base.matrix + self.xi_used * self.direction.matrix, "B(xi)")

    def slack(self, rho0, rhof) -> float:
        return self.inequality.slack(rho0, rhof)

    def holds(self, rho0, rhof, margin: float = 1e-9) -> bool:
        return self.inequality.holds(rho0, rhof, margin)

    @property
    def text(self) -> str:
        return self.inequality.text


def bound_from_xi(thresholds: XiThresholds, direction_sign: str = "increase") -> DeformationBound:
    """Turn a threshold into an inequality on Delta<A>.

    increase:  Delta<A> <= Delta<B> / (-xi_minus)
    decrease: -Delta<A> <= Delta<B> / xi_plus
    An infinite threshold gives the sign-definite statement Delta<A> <= 0 or >= 0.
    """
    A = thresholds.direction
    core = strip_shift(thresholds.base)
    tag = "-restricted" if thresholds.restricted else ""
    if direction_sign == "increase":
        xi = thresholds.xi_minus
        if np.isfinite(xi):
            ineq = DeltaInequality(A, core / (-xi), "deformation_increase" + tag,
                                   f"Delta<A> <= Delta<B>/{-xi:.12g}")
            return DeformationBound(thresholds.base, A, xi, ineq, "increase" + tag, False, thresholds.partition_used)
        ineq = DeltaInequality(A, None, "sign_definite_increase" + tag, "Delta<A> <= 0")
        return DeformationBound(thresholds.base, A, xi, ineq, "increase" + tag, True, thresholds.partition_used)
    if direction_sign == "decrease":
        xi = thresholds.xi_plus
        if np.isfinite(xi):
            ineq = DeltaInequality(-A, core / xi, "deformation_decrease" + tag,
                                   f"-Delta<A> <= Delta<B>/{xi:.12g}")
            return DeformationBound(thresholds.base, A, xi, ineq, "decrease" + tag, False, thresholds.partition_used)
        ineq = DeltaInequality(-A, None, "sign_definite_decrease" + tag, "Delta<A> >= 0")
        return DeformationBound(thresholds.base, A, xi, ineq, "decrease" + tag, True, thresholds.partition_used)
    raise ValidationError("direction_sign must be 'increase' or 'decrease'")


def deformed_inequality(B, A, xi: float, name: str = "deformed") -> DeltaInequality:
    """Delta<B + xi*A> >= 0 with the identity shift of B dropped."""
    core = strip_shift(B)
    op = HermitianOperator(core.matrix + xi * as_matrix(A), name)
    return DeltaInequality(None, op, name, f"Delta<B + {xi:.6g} A> >= 0")


@dataclass(frozen=True)
class DeformationCheck:
    valid: bool
    witnesses: tuple
    n_violations: int

    def __bool__(self):
        return self.valid


def validate_deformation(B, Btilde, rho0=None, allowed_crossings=None, rtol: float = RTOL,
                         max_witnesses: int = 20) -> DeformationCheck:
    """Check that Btilde never strictly inverts a strict order of B.

    Ties may be created or split; only pairs with B_i < B_j and Btilde_i > Btilde_j
    (beyond tolerance) count as violations, unless listed in allowed_crossings.
    Indices refer to the common eigenbasis (the computational basis when both
    operators are diagonal).
    """
    B, Bt = as_operator(B), as_operator(Btilde)
    try:
        b, bt, _ = joint_eigenbasis(B, Bt)
    except ValidationError:
        raise ValidationError("validate_deformation: B and Btilde must commute") from None
    if rho0 is not None:
        if not (B.commutes_with(rho0) and Bt.commutes_with(rho0)):
            raise ValidationError("validate_deformation: operators must commute with rho0")
    allowed = {frozenset(p) for p in (allowed_crossings or ())}
    tb, tt = _tol(b, rtol), _tol(bt, rtol)
    witnesses, count = [], 0
    n = b.size
    for s in range(0, n, _CHUNK):
        rows = slice(s, min(n, s + _CHUNK))
        bad = (b[rows, None] < b[None, :] - tb) & (bt[rows, None] > bt[None, :] + tt)
        if not bad.any():
            continue
        for i, j in zip(*np.nonzero(bad)):
            pair = (int(i + s), int(j))
            if frozenset(pair) in allowed:
                continue
            count += 1
            if len(witnesses) < max_witnesses:
                witnesses.append(pair)
    return DeformationCheck(count == 0, tuple(witnesses), count)
