"""Optimal sorting protocols, demon channels, detection thresholds and the Clausius-gap decomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ValidationError
from .inequalities import VIOLATION_MARGIN
from .passivity import passive_state_of
from .qstate import (
    DensityMatrix,
    HermitianOperator,
    as_matrix,
    as_operator,
    as_state,
    check_unitary,
    entropy,
    expectation,
    joint_eigenbasis,
    kron_states,
    partial_trace,
    relative_entropy,
    thermal_state,
)
from .sampling import permutation_unitary


# --------------------------------------------------------------------------- sorting

def transposition_count(perm) -> int:
    """Minimal number of transpositions composing the permutation: n - #cycles."""
    perm = np.asarray(perm)
    seen = np.zeros(perm.size, dtype=bool)
    cycles = 0
    for i in range(perm.size):
        if not seen[i]:
            cycles += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return int(perm.size - cycles)


@dataclass(frozen=True, eq=False)
class SortingProtocol:
    permutation: np.ndarray   # population at basis index i moves to permutation[i]
    partial: bool
    achieved_value: float
    unitary: np.ndarray
    initial_value: float
    basis_rotated: bool = False
    fell_back: bool = False

    @property
    def transpositions(self) -> int:
        return transposition_count(self.permutation)

    @property
    def moved(self) -> int:
        return int(np.count_nonzero(self.permutation != np.arange(self.permutation.size)))

    @property
    def delta(self) -> float:
        return self.achieved_value - self.initial_value

    def apply(self, rho) -> DensityMatrix:
        u = self.unitary
        return DensityMatrix(u @ as_matrix(rho) @ u.conj().T)


def _full_sort(p, a):
    """Largest population onto smallest A value; stable in both orders."""
    src = np.argsort(-p, kind="stable")
    dst = np.argsort(a, kind="stable")
    perm = np.empty(p.size, dtype=int)
    perm[src] = dst
    return perm


def _blocks(values, rtol=1e-9):
    order = np.argsort(values, kind="stable")
    tol = rtol * (np.max(np.abs(values)) + 1.0)
    cut = np.flatnonzero(np.diff(values[order]) >= tol) + 1
    return np.split(order, cut)


def _partial_sort(p, a, rtol=1e-9):
    """Move populations only between A-degenerate blocks, keeping every state that can stay."""
    blocks = _blocks(a, rtol)
    ranked = np.sort(p)[::-1]
    ptol = rtol * (np.max(np.abs(p)) + 1.0)
    need = []                  # destined population values per block, unclaimed
    s = 0
    for blk in blocks:
        need.append(list(ranked[s:s + blk.size]))
        s += blk.size
    block_of = np.empty(p.size, dtype=int)
    for k, blk in enumerate(blocks):
        block_of[blk] = k

    def claim(k, v):
        for t, w in enumerate(need[k]):
            if abs(w - v) <= ptol:
                need[k].pop(t)
                return True
        return False

    perm = -np.ones(p.size, dtype=int)
    movers = []
    for i in range(p.size):
        if claim(block_of[i], p[i]):
            perm[i] = i
        else:
            movers.append(i)
    # target block for each mover: any block still needing its value
    target = {}
    for i in movers:
        for k in range(len(blocks)):
            if claim(k, p[i]):
                target[i] = k
                break
    free = {k: [i for i in movers if block_of[i] == k] for k in range(len(blocks))}
    # pair up movers that trade places between two blocks (2-cycles)
    left = list(movers)
    for i in list(left):
        if perm[i] >= 0 or i not in left:
            continue
        for j in left:
            if j != i and perm[j] < 0 and target[i] == block_of[j] and target[j] == block_of[i]:
                perm[i], perm[j] = j, i
                free[block_of[j]].remove(j)
                free[block_of[i]].remove(i)
                left.remove(i)
                left.remove(j)
                break
    for i in left:
        perm[i] = free[target[i]].pop(0)
    return perm


def optimal_protocol(rho0, A, partial: bool = False) -> SortingProtocol:
    """Permutation (after a basis rotation if needed) minimising <A>.

    Full mode sorts populations in decreasing order onto increasing A.  Partial
    mode only moves populations across A-degenerate block boundaries; it
    reaches the same minimum and falls back to the full sort if it would use
    more transpositions.
    """
    rho0, A = as_state(rho0), as_operator(A)
    start = expectation(rho0, A)
    try:
        a, p, vecs = joint_eigenbasis(A, rho0)
        rotated = False
    except ValidationError:
        rotated = True
    if rotated:
        passive, u = passive_state_of(rho0, A)
        return SortingProtocol(np.arange(rho0.dim), False, expectation(passive, A), u, start, True, partial)
    p = np.real(p)
    full = _full_sort(p, a)
    perm, fell = full, False
    if partial:
        perm = _partial_sort(p, a)
        if transposition_count(perm) > transposition_count(full):
            perm, fell = full, True
    u = vecs @ permutation_unitary(perm) @ vecs.conj().T
    pf = np.empty_like(p)
    pf[perm] = p
    return SortingProtocol(perm, partial, float(np.dot(pf, a)), u, start, False, fell)


# --------------------------------------------------------------------------- demons

@dataclass(frozen=True, eq=False)
class DemonChannel:
    """rho -> p * sum_k U_k Pi_k rho Pi_k U_k^dagger + (1 - p) * rho."""

    projectors: tuple
    feedbacks: tuple
    p: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValidationError(f"activation probability {self.p} outside [0, 1]")
        if len(self.projectors) != len(self.feedbacks) or not self.projectors:
            raise ValidationError("need one feedback unitary per projector")
        projs = tuple(np.asarray(as_matrix(q), dtype=complex) for q in self.projectors)
        n = projs[0].shape[0]
        tot = np.zeros((n, n), dtype=complex)
        for i, q in enumerate(projs):
            if np.max(np.abs(q @ q - q)) > 1e-10 or np.max(np.abs(q - q.conj().T)) > 1e-10:
                raise ValidationError(f"projector {i} is not an orthogonal projector")
            for j in range(i):
                if np.max(np.abs(q @ projs[j])) > 1e-10:
                    raise ValidationError(f"projectors {j} and {i} are not orthogonal")
            tot += q
        if np.max(np.abs(tot - np.eye(n))) > 1e-10:
            raise ValidationError("projectors do not sum to the identity")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "feedbacks", tuple(check_unitary(u) for u in self.feedbacks))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def with_p(self, p: float) -> "DemonChannel":
        return DemonChannel(self.projectors, self.feedbacks, float(p))

    def feedback_map(self, m: np.ndarray) -> np.ndarray:
        out = np.zeros_like(m, dtype=complex)
        for q, u in zip(self.projectors, self.feedbacks):
            out += u @ q @ m @ q @ u.conj().T
        return out

    def apply(self, rho) -> DensityMatrix:
        m = as_matrix(rho)
        return DensityMatrix(self.p * self.feedback_map(m) + (1.0 - self.p) * m)

    def __call__(self, rho) -> DensityMatrix:
        return self.apply(rho)

    @classmethod
    def state_replacement(cls, dim: int, source: int, target: int, p: float = 1.0) -> "DemonChannel":
        """Measure whether the system is in basis state `source`; if so swap it with `target`."""
        hit = np.zeros((dim, dim))
        hit[source, source] = 1.0
        perm = np.arange(dim)
        perm[source], perm[target] = target, source
        return cls((hit, np.eye(dim) - hit), (permutation_unitary(perm), np.eye(dim)), p)

    @classmethod
    def trivial(cls, dim: int, p: float = 1.0) -> "DemonChannel":
        return cls((np.eye(dim),), (np.eye(dim),), p)


def demon_evolve(rho, channel: DemonChannel) -> DensityMatrix:
    return channel.apply(rho)


def detection_threshold(rho0, pre_evolution, demon: DemonChannel, inequality, step: float = 0.01,
                        resolution: float = 1e-4, margin: float = VIOLATION_MARGIN) -> float:
    """Smallest activation probability at which `inequality` flags the demon (inf if never).

    rho0 may be a setup; pre_evolution is a channel (or None) applied before the demon.
    A grid of spacing `step` locates the first violation, bisection refines it.
    """
    if hasattr(rho0, "initial_state"):
        rho0 = rho0.initial_state()
    rho0 = as_state(rho0)
    mid = rho0 if pre_evolution is None else as_state(pre_evolution(rho0))

    def violated(p):
        return not inequality.holds(rho0, demon.with_p(p).apply(mid), margin)

    grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 12)
    grid[-1] = min(grid[-1], 1.0)
    prev = None
    for p in grid:
        if violated(float(p)):
            if prev is None:
                return 0.0
            lo, hi = prev, float(p)
            while hi - lo > resolution:
                m = 0.5 * (lo + hi)
                if violated(m):
                    hi = m
                else:
                    lo = m
            return hi
        prev = float(p)
    return float("inf")


# --------------------------------------------------------------------------- CI gap

@dataclass(frozen=True)
class CIGapDecomposition:
    dS_sys: float
    beta_dE_env: float
    D_correlation: float
    D_env_displacement: float
    infinite_terms: tuple = ()

    @property
    def lhs(self) -> float:
        return self.dS_sys + self.beta_dE_env

    @property
    def residual(self) -> float:
        return self.lhs - (self.D_correlation + self.D_env_displacement)


def ci_gap_decomposition(rho0_sys, H_env, beta: float, U) -> CIGapDecomposition:
    """Split dS_sys + beta dE_env into correlation and environment-displacement relative entropies."""
    sys0 = as_state(rho0_sys)
    H_env = as_operator(H_env)
    env0 = thermal_state(H_env, beta)
    dims = [sys0.dim, env0.dim]
    joint = kron_states([sys0, env0])
    U = check_unitary(U)
    if U.shape[0] != joint.dim:
        raise ValidationError(f"unitary acts on {U.shape[0]} states, joint system has {joint.dim}")
    fin = DensityMatrix(U @ joint.matrix @ U.conj().T)
    sys_f, env_f = partial_trace(fin, dims, 0), partial_trace(fin, dims, 1)
    ds = entropy(sys_f) - entropy(sys0)
    h_big = HermitianOperator(np.kron(np.eye(sys0.dim), H_env.matrix))
    de = beta * (expectation(fin, h_big) - expectation(joint, h_big))
    inf_terms = []
    try:
        d_corr = relative_entropy(fin, kron_states([sys_f, env_f]))
    except DomainError:
        d_corr = float("inf")
        inf_terms.append("D_correlation")
    try:
        d_env = relative_entropy(env_f, env0)
    except DomainError:
        d_env = float("inf")
        inf_terms.append("D_env_displacement")
    return CIGapDecomposition(float(ds), float(de), float(d_corr), float(d_env), tuple(inf_terms))
