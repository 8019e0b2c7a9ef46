"""Inequality evaluators on (initial, final) state pairs.

Every evaluator exposes `slack(rho0, rhof)`: a real number that is >= 0 when
the inequality holds.  `holds` applies a small negative margin so that
round-off does not flip verdicts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .qstate import HermitianOperator, as_matrix, as_operator, expectation

VIOLATION_MARGIN = 1e-9


def delta(op, rho0, rhof) -> float:
    return expectation(rhof, op) - expectation(rho0, op)


class Inequality:
    name: str = "inequality"

    def slack(self, rho0, rhof) -> float:  # pragma: no cover - interface
        raise NotImplementedError

    def scale(self) -> float:
        return 1.0

    def holds(self, rho0, rhof, margin: float = VIOLATION_MARGIN) -> bool:
        return self.slack(rho0, rhof) >= -margin * self.scale()

    def __call__(self, rho0, rhof) -> float:
        return self.slack(rho0, rhof)


@dataclass(frozen=True, eq=False)
class DeltaInequality(Inequality):
    """Delta<lhs> <= Delta<rhs>.  Either side may be None, meaning zero."""

    lhs: HermitianOperator | None
    rhs: HermitianOperator | None
    name: str = "delta_inequality"
    text: str = ""

    def slack(self, rho0, rhof) -> float:
        s = 0.0
        if self.rhs is not None:
            s += delta(self.rhs, rho0, rhof)
        if self.lhs is not None:
            s -= delta(self.lhs, rho0, rhof)
        return s

    def sides(self, rho0, rhof) -> tuple[float, float]:
        lhs = 0.0 if self.lhs is None else delta(self.lhs, rho0, rhof)
        rhs = 0.0 if self.rhs is None else delta(self.rhs, rho0, rhof)
        return lhs, rhs

    def scale(self) -> float:
        s = 1.0
        for op in (self.lhs, self.rhs):
            if op is not None:
                s += float(np.max(np.abs(op.matrix)))
        return s


def increase_of(op, name: str | None = None) -> DeltaInequality:
    """Delta<op> >= 0."""
    op = as_operator(op)
    return DeltaInequality(None, op, name or (op.label or "passive_operator"), f"Delta<{op.label or 'B'}> >= 0")


@dataclass(frozen=True, eq=False)
class FunctionalInequality(Inequality):
    """Wraps an arbitrary slack function of (rho0, rhof)."""

    fn: Callable
    name: str = "functional"
    magnitude: float = 1.0

    def slack(self, rho0, rhof) -> float:
        return float(self.fn(rho0, rhof))

    def scale(self) -> float:
        return self.magnitude


@dataclass(frozen=True, eq=False)
class AllOf(Inequality):
    """Conjunction of several inequalities; slack is the smallest individual slack."""

    parts: tuple
    name: str = "family"

    def slack(self, rho0, rhof) -> float:
        return min(p.slack(rho0, rhof) for p in self.parts)

    def holds(self, rho0, rhof, margin: float = VIOLATION_MARGIN) -> bool:
        return all(p.holds(rho0, rhof, margin) for p in self.parts)


@dataclass(frozen=True, eq=False)
class MajorizationInequality(Inequality):
    """Ascending partial sums of final populations dominate the initial ones.

    Populations are read in the eigenbasis of the initial state (`basis`).
    """

    basis: np.ndarray
    name: str = "majorization"
    extra: dict = field(default_factory=dict)

    def populations(self, rho) -> np.ndarray:
        v = self.basis
        return np.real(np.einsum("ia,ij,ja->a", v.conj(), as_matrix(rho), v))

    def slack(self, rho0, rhof) -> float:
        p0 = np.sort(self.populations(rho0))
        pf = np.sort(self.populations(rhof))
        return float(np.min(np.cumsum(pf) - np.cumsum(p0)))
