"""Degenerate subspaces that appear at a critical xi, and the equality they support."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..inequalities import delta
from ..partitions import ManifoldPartition
from ..qstate import HermitianOperator, MixtureOfUnitaries, as_operator, as_state, joint_eigenbasis
from ..sampling import block_unitary, haar_unitary, random_weights, rng_from
from ..setups import SetupSpec
from .build import strip_shift


@dataclass(frozen=True, eq=False)
class BSPGroups:
    groups: tuple
    xi: float
    base: HermitianOperator
    direction: HermitianOperator
    basis: np.ndarray
    deformed_values: np.ndarray
    empty: bool

    def __len__(self):
        return len(self.groups)

    def unitary(self, rng) -> np.ndarray:
        """Random unitary acting only inside the groups (in the computational basis)."""
        u = block_unitary(self.basis.shape[0], self.groups, rng)
        return self.basis @ u @ self.basis.conj().T

    def channel(self, rng, n_terms=None) -> MixtureOfUnitaries:
        rng = rng_from(rng)
        n = int(rng.integers(1, 4)) if n_terms is None else n_terms
        return MixtureOfUnitaries(random_weights(n, rng), tuple(self.unitary(rng) for _ in range(n)))


def bsp_subspaces(B, A, xi_critical: float, partition: ManifoldPartition | None = None,
                  rtol: float = 1e-9) -> BSPGroups:
    """Groups of common eigenvectors that are degenerate in B + xi*A but not in B.

    Only groups containing at least two distinct B values are returned; mixing
    such states changes the state while leaving <B + xi*A> fixed.  With a
    partition, groups are split along its blocks.
    """
    B, A = as_operator(B), as_operator(A)
    b, a, vecs = joint_eigenbasis(B, A)
    d = b + xi_critical * a
    tol_d = rtol * (np.max(np.abs(b)) + abs(xi_critical) * np.max(np.abs(a)) + 1.0)
    tol_b = rtol * (np.max(np.abs(b)) + 1.0)
    blocks = partition.blocks if partition is not None else (tuple(range(b.size)),)
    groups = []
    if xi_critical != 0 and np.isfinite(xi_critical):
        for blk in blocks:
            blk = np.asarray(blk)
            order = blk[np.argsort(d[blk], kind="stable")]
            cut = np.flatnonzero(np.diff(d[order]) >= tol_d) + 1
            for g in np.split(order, cut):
                if g.size > 1 and np.ptp(b[g]) > tol_b:
                    groups.append(tuple(sorted(int(i) for i in g)))
    groups.sort()
    return BSPGroups(tuple(groups), float(xi_critical), B, A, vecs, d, len(groups) == 0)


@dataclass(frozen=True)
class BSPReport:
    trials: int
    delta_deformed: np.ndarray
    delta_direction: np.ndarray
    weighted_heat: np.ndarray
    max_abs_deformed_change: float
    max_equality_residual: float
    passed: bool
    negative_control: bool


def verify_bsp_equality(setup_or_state, bsp: BSPGroups, trials: int = 100, rng=None,
                        negative_control: bool = False, tol: float = 1e-9) -> BSPReport:
    """Sample channels confined to the BSP groups and check Delta<B(xi)> = 0.

    `weighted_heat` is Delta<B> with the identity shift removed, i.e. the sum of
    beta_k q_k for product thermal setups; the equality reads
    weighted_heat = -xi * Delta<A>.  With negative_control=True each channel
    also couples a group member to an outside state of different B(xi) value,
    so the equality is expected to fail.
    """
    rng = rng_from(rng)
    rho0 = setup_or_state.initial_state() if isinstance(setup_or_state, SetupSpec) else as_state(setup_or_state)
    core = strip_shift(bsp.base)
    n = rho0.dim
    outside = None
    if negative_control:
        inside = {i for g in bsp.groups for i in g}
        g0 = bsp.groups[0][0] if bsp.groups else 0
        cand = [j for j in range(n) if j not in inside and abs(bsp.deformed_values[j] - bsp.deformed_values[g0]) > 1e-6]
        if not cand:
            cand = [j for j in range(n) if abs(bsp.deformed_values[j] - bsp.deformed_values[g0]) > 1e-6]
        outside = (g0, cand[0])
    dxi, da, dq = [], [], []
    for _ in range(trials):
        if outside is None:
            ch = bsp.channel(rng)
        else:
            u = np.eye(n, dtype=complex)
            i, j = outside
            u[np.ix_([i, j], [i, j])] = haar_unitary(2, rng)
            u = bsp.basis @ u @ bsp.basis.conj().T
            ch = MixtureOfUnitaries(np.ones(1), (u,))
        rhof = ch.apply(rho0)
        q = delta(core, rho0, rhof)
        dA = delta(bsp.direction, rho0, rhof)
        dq.append(q)
        da.append(dA)
        dxi.append(q + bsp.xi * dA)
    dxi, da, dq = np.array(dxi), np.array(da), np.array(dq)
    worst = float(np.max(np.abs(dxi))) if trials else 0.0
    return BSPReport(trials, dxi, da, dq, worst, worst, worst < tol, negative_control)
