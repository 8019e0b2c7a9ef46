"""Coarse-grained, truncated and binary passive operators, majorization, and the audit chaining them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ValidationError
from .inequalities import VIOLATION_MARGIN
from .qstate import EIG_CUTOFF, HermitianOperator, as_operator, as_state, eig_sorted

LAYERS = ("CI", "truncated", "binary", "majorization")


# --------------------------------------------------------------------------- coarse graining

@dataclass(frozen=True, eq=False)
class CoarseGrainSpec:
    cluster_map: tuple          # cluster label of every basis index
    labels: tuple               # distinct labels, ordered by cluster value
    cluster_values: np.ndarray  # q_n, aligned with labels
    sizes: np.ndarray           # M_n
    ranges: np.ndarray          # (min, max) of B inside each cluster
    rule: str = "mean"

    def members(self, label) -> np.ndarray:
        return np.flatnonzero(np.array([c == label for c in self.cluster_map]))

    def cluster_populations(self, rho) -> np.ndarray:
        """Total population P_n of each cluster (computational basis)."""
        p = np.real(np.diag(as_state(rho).matrix))
        return np.array([p[self.members(lab)].sum() for lab in self.labels])


def _labels_per_index(cluster_map, n: int) -> tuple:
    if isinstance(cluster_map, dict):
        if set(cluster_map) != set(range(n)):
            raise ValidationError(f"cluster map must assign every index 0..{n - 1}")
        return tuple(cluster_map[i] for i in range(n))
    labs = tuple(cluster_map)
    if len(labs) != n:
        raise ValidationError(f"cluster map has {len(labs)} entries for {n} basis states")
    return labs


def coarse_grain_spec(B, cluster_map, rule: str = "mean", rtol: float = 1e-9) -> CoarseGrainSpec:
    B = as_operator(B)
    if not B.is_diagonal:
        raise ValidationError("coarse graining refers to the computational basis; B must be diagonal there")
    b = B.diagonal()
    labs = _labels_per_index(cluster_map, b.size)
    distinct = list(dict.fromkeys(labs))
    members = [np.flatnonzero(np.array([c == lab for c in labs])) for lab in distinct]
    ranges = np.array([(b[m].min(), b[m].max()) for m in members])
    pick = {"mean": np.mean, "min": np.min, "max": np.max}
    if rule not in pick:
        raise ValidationError(f"unknown cluster value rule {rule!r}; use mean, min or max")
    q = np.array([pick[rule](b[m]) for m in members])
    tol = rtol * (np.max(np.abs(b)) + 1.0)
    for x in range(len(distinct)):
        for y in range(x + 1, len(distinct)):
            (lx, hx), (ly, hy) = ranges[x], ranges[y]
            if lx < hy - tol and ly < hx - tol:
                mx, my = members[x], members[y]
                i = int(mx[np.argmax(b[mx])]) if hx > ly + tol else int(mx[0])
                j = int(my[np.argmin(b[my])])
                if not b[i] > b[j] + tol:
                    i, j = int(my[np.argmax(b[my])]), int(mx[np.argmin(b[mx])])
                raise ValidationError(
                    f"clusters {distinct[x]!r} and {distinct[y]!r} overlap: "
                    f"B[{i}] = {b[i]:.6g} > B[{j}] = {b[j]:.6g} across clusters (witness pair ({i}, {j}))")
    order = np.argsort(q, kind="stable")
    return CoarseGrainSpec(labs, tuple(distinct[k] for k in order), q[order],
                           np.array([members[k].size for k in order]), ranges[order], rule)


def coarse_grain(B, cluster_map, rule: str = "mean") -> HermitianOperator:
    """Cluster-constant operator sum_n q_n Pi_n; rejects overlapping clusters with a witness pair."""
    spec = coarse_grain_spec(B, cluster_map, rule)
    value = dict(zip(spec.labels, spec.cluster_values))
    diag = np.array([value[c] for c in spec.cluster_map], dtype=float)
    return HermitianOperator(np.diag(diag), "B_CG", {"coarse_grain": spec})


def coarse_probability_operator(rho0, cluster_map) -> HermitianOperator:
    """-ln of total cluster populations, placed on every member (not certified passive)."""
    rho0 = as_state(rho0)
    p = np.real(np.diag(rho0.matrix))
    labs = _labels_per_index(cluster_map, p.size)
    tot = {}
    for c, x in zip(labs, p):
        tot[c] = tot.get(c, 0.0) + x
    if min(tot.values()) <= 0:
        raise DomainError("a cluster has zero population")
    return HermitianOperator(np.diag([-np.log(tot[c]) for c in labs]), "B_prime")


# --------------------------------------------------------------------------- truncation

@dataclass(frozen=True, eq=False)
class TruncationSpec:
    l: int
    kept_indices: tuple
    operator_kind: str
    boundary_tie: bool


def _top_levels(B, l: int):
    B = as_operator(B)
    spec = eig_sorted(B)
    b, vecs = spec.values, spec.vectors
    n = b.size
    if not 1 <= l <= n:
        raise ValidationError(f"l = {l} outside 1..{n}")
    if b[0] < -1e-12 * (1 + np.max(np.abs(b))):
        raise DomainError("truncation requires a nonnegative operator")
    order = np.argsort(-b, kind="stable")
    kept = order[:l]
    tol = 1e-9 * (np.max(np.abs(b)) + 1)
    tie = bool(l < n and abs(b[order[l - 1]] - b[order[l]]) < tol)
    return b, vecs, kept, tie


def _rebuild(vals, vecs, label, meta):
    if np.allclose(vecs, np.eye(vecs.shape[0])):
        m = np.diag(vals)
    else:
        m = (vecs * vals) @ vecs.conj().T
    return HermitianOperator(m, label, meta)


def truncated_operator(B, l: int) -> HermitianOperator:
    """Keep the l largest eigenvalues of B, set the rest to zero."""
    b, vecs, kept, tie = _top_levels(B, l)
    vals = np.zeros_like(b)
    vals[kept] = b[kept]
    spec = TruncationSpec(l, tuple(int(k) for k in kept), "truncated", tie)
    return _rebuild(vals, vecs, f"B^({l})", {"truncation": spec})


def binary_operator(B, l: int) -> HermitianOperator:
    """Projector on the l largest eigenvalues of B."""
    b, vecs, kept, tie = _top_levels(B, l)
    vals = np.zeros_like(b)
    vals[kept] = 1.0
    spec = TruncationSpec(l, tuple(int(k) for k in kept), "binary", tie)
    return _rebuild(vals, vecs, f"B_bin^({l})", {"truncation": spec})


# --------------------------------------------------------------------------- majorization

@dataclass(frozen=True, eq=False)
class MajorizationRecord:
    p0_sorted_asc: np.ndarray
    pf_sorted_asc: np.ndarray
    partial_sums: np.ndarray    # rows: initial, final
    verdict_per_l: np.ndarray
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.verdict_per_l.all())

    @property
    def slacks(self) -> np.ndarray:
        return self.partial_sums[1] - self.partial_sums[0]

    @property
    def min_slack(self) -> float:
        return float(self.slacks.min())

    def first_failure(self) -> int | None:
        bad = np.flatnonzero(~self.verdict_per_l)
        return int(bad[0]) + 1 if bad.size else None


def _probabilities(p, what):
    p = np.asarray(p, dtype=float).ravel()
    if np.any(p < -1e-12):
        raise ValidationError(f"{what} has negative entries")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{what} sums to {p.sum():.12g}, not 1")
    return p


def majorization_check(p0, pf, tol: float = VIOLATION_MARGIN) -> MajorizationRecord:
    """Partial sums of the l smallest populations never decrease (p_f majorized by p_0)."""
    p0 = _probabilities(p0, "initial populations")
    pf = _probabilities(pf, "final populations")
    if p0.size != pf.size:
        raise ValidationError(f"length mismatch: {p0.size} vs {pf.size}")
    a, f = np.sort(p0), np.sort(pf)
    sums = np.vstack([np.cumsum(a), np.cumsum(f)])
    verdict = sums[0] <= sums[1] + tol
    verdict[-1] = True
    return MajorizationRecord(a, f, sums, verdict, tol)


# --------------------------------------------------------------------------- audit

@dataclass(frozen=True, eq=False)
class HierarchyReport:
    ci_slack: float
    truncated_slacks: np.ndarray   # index l-1
    binary_slacks: np.ndarray
    majorization: MajorizationRecord
    violated: dict
    first_violated_layer: str | None
    implication_consistent: bool
    witnesses: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"ci_slack": self.ci_slack,
                "min_truncated_slack": float(self.truncated_slacks.min()),
                "min_binary_slack": float(self.binary_slacks.min()),
                "majorization_min_slack": self.majorization.min_slack,
                "first_violated_layer": self.first_violated_layer or "none"}


def _apply(channel, rho):
    if hasattr(channel, "apply"):
        return channel.apply(rho)
    return channel(rho)


def hierarchy_audit(rho0, channel, margin: float = VIOLATION_MARGIN) -> HierarchyReport:
    """Evaluate CI, every truncated and binary inequality, and majorization for rho0 -> channel(rho0).

    Everything is measured in the eigenbasis of rho0, where B = -ln rho0 is
    diagonal; zero populations give B = +inf and any population flowing into
    them counts as an infinite increase.
    """
    rho0 = as_state(rho0)
    rhof = as_state(_apply(channel, rho0))
    w, v = np.linalg.eigh(rho0.matrix)
    if rho0.is_diagonal:
        w, v = np.real(np.diag(rho0.matrix)), np.eye(rho0.dim)
    p0 = np.clip(w, 0.0, None)
    pf = np.real(np.einsum("ij,ik,kj->j", v.conj(), rhof.matrix, v))
    with np.errstate(divide="ignore"):
        b = np.where(p0 > EIG_CUTOFF, -np.log(np.maximum(p0, EIG_CUTOFF)), np.inf)
    diff = pf - p0
    empty = ~np.isfinite(b)
    diff[empty] = np.maximum(diff[empty], 0.0)
    n = b.size
    order = np.argsort(-b, kind="stable")
    contrib = np.where(diff == 0, 0.0, diff * np.where(np.isfinite(b), b, 1.0))
    contrib[empty & (diff > 1e-15)] = np.inf
    trunc = np.cumsum(contrib[order])
    binary = np.cumsum(diff[order])
    ci = float(trunc[-1])
    scale = 1.0 + float(np.max(b[np.isfinite(b)])) if np.any(np.isfinite(b)) else 1.0
    maj = majorization_check(p0 / p0.sum(), np.clip(pf, 0, None) / np.clip(pf, 0, None).sum(), margin)
    t_bad = trunc < -margin * scale
    b_bad = binary < -margin
    violated = {"CI": bool(ci < -margin * scale), "truncated": bool(t_bad.any()),
                "binary": bool(b_bad.any()), "majorization": not maj.passed}
    first = next((k for k in LAYERS if violated[k]), None)
    consistent = True
    for l in np.flatnonzero(t_bad):
        if not b_bad[: l + 1].any():
            consistent = False
    if violated["CI"] and not violated["truncated"]:
        consistent = False
    if violated["binary"] and not violated["majorization"]:
        consistent = False
    witnesses = {"truncated": tuple(int(l) + 1 for l in np.flatnonzero(t_bad)),
                 "binary": tuple(int(l) + 1 for l in np.flatnonzero(b_bad)),
                 "majorization": maj.first_failure()}
    return HierarchyReport(ci, trunc, binary, maj, violated, first, consistent, witnesses)


def p_sweep(rho0, channel_at, ps=None) -> list[dict]:
    """Audit rho0 under channel_at(p) for each p; one row per p with the first violated layer."""
    ps = np.round(np.arange(0.0, 1.0 + 1e-12, 0.01), 10) if ps is None else np.asarray(ps, dtype=float)
    rows = []
    for p in ps:
        rep = hierarchy_audit(rho0, channel_at(float(p)))
        rows.append({"p": float(p), **rep.row(), "implication_consistent": rep.implication_consistent})
    return rows


def first_detection(rows, layer: str) -> float:
    """Smallest swept p at which the given layer is violated (inf if never)."""
    rank = LAYERS.index(layer)
    for r in rows:
        f = r["first_violated_layer"]
        if f != "none" and LAYERS.index(f) <= rank:
            return r["p"]
    return float("inf")
