"""Partitions of a basis into manifolds that the dynamics never connects."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .qstate import as_matrix


@dataclass(frozen=True)
class ManifoldPartition:
    blocks: tuple
    description: str = ""

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        if any(len(b) == 0 for b in blocks):
            raise ValidationError("partition blocks must be non-empty")
        flat = [i for b in blocks for i in b]
        if len(flat) != len(set(flat)):
            raise ValidationError("partition blocks overlap")
        if sorted(flat) != list(range(len(flat))):
            raise ValidationError("partition blocks must cover indices 0..n-1 exactly")
        blocks = tuple(sorted(blocks, key=lambda b: b[0]))
        object.__setattr__(self, "blocks", blocks)

    @property
    def dim(self) -> int:
        return sum(len(b) for b in self.blocks)

    def labels(self) -> np.ndarray:
        out = np.empty(self.dim, dtype=int)
        for k, b in enumerate(self.blocks):
            out[list(b)] = k
        return out

    def respects(self, u, tol: float = 1e-10) -> bool:
        """True when the matrix has no entries connecting different blocks."""
        lab = self.labels()
        cross = lab[:, None] != lab[None, :]
        return bool(np.all(np.abs(as_matrix(u)[cross]) <= tol))

    @classmethod
    def trivial(cls, dim: int) -> "ManifoldPartition":
        return cls((tuple(range(dim)),), "whole space")


def partition_from_generator(H, description: str = "", tol: float = 1e-12) -> ManifoldPartition:
    """Connected components of the graph of nonzero matrix elements of H."""
    m = np.abs(as_matrix(H)) > tol
    n = m.shape[0]
    label = -np.ones(n, dtype=int)
    comp = 0
    for start in range(n):
        if label[start] >= 0:
            continue
        stack = [start]
        label[start] = comp
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(m[i]):
                if label[j] < 0:
                    label[j] = comp
                    stack.append(j)
        comp += 1
    blocks = [tuple(np.flatnonzero(label == k)) for k in range(comp)]
    return ManifoldPartition(tuple(blocks), description or "connected components of the generator")


def partition_from_values(values, description: str = "", rtol: float = 1e-9) -> ManifoldPartition:
    """Blocks of equal value of a conserved diagonal quantity."""
    v = np.asarray(values, dtype=float)
    tol = rtol * (float(np.max(np.abs(v))) + 1.0)
    order = np.argsort(v, kind="stable")
    blocks, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if v[b] - v[a] < tol:
            cur.append(b)
        else:
            blocks.append(tuple(cur))
            cur = [b]
    blocks.append(tuple(cur))
    return ManifoldPartition(tuple(blocks), description or "level sets of a conserved quantity")
