"""The canonical passive operator B = -ln rho0 of a setup."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError
from ..qstate import EIG_CUTOFF, HermitianOperator, apply_spectral, as_operator
from ..setups import SetupSpec


def _neg_log_pops(p: np.ndarray, clamp: bool, what: str) -> tuple[np.ndarray, bool]:
    p = np.asarray(p, dtype=float)
    if np.any(p <= EIG_CUTOFF):
        if not clamp:
            raise DomainError(f"{what}: zero population present; B = -ln rho0 is singular (use clamp=True)")
        p = np.where(p <= EIG_CUTOFF, EIG_CUTOFF, p)
        p = p / p.sum()
        return -np.log(p), True
    return -np.log(p), False


def build_B(setup: SetupSpec, clamp: bool = False) -> HermitianOperator:
    """B = -ln rho0 with the constant log-partition part kept in meta["identity_shift"].

    For a product of thermal subsystems B = sum_k beta_k H_k + (sum_k ln Z_k) I.
    The returned matrix includes the shift; `strip_shift` removes it.
    """
    clamped = False
    if setup.correlations is not None:
        vals, clamped = _neg_log_pops(setup.joint_probabilities(), clamp, "correlation table")
        return HermitianOperator(np.diag(vals), "B", {"identity_shift": 0.0, "clamped": clamped})
    total = np.zeros((setup.dim, setup.dim), dtype=complex)
    shift = 0.0
    for k, s in enumerate(setup.subsystems):
        if s.thermal:
            shift += s.log_partition()
            total += setup.product({k: s.beta * s.generator_matrix()})
        else:
            vals, c = _neg_log_pops(s.probabilities(), clamp, f"subsystem {s.label!r}")
            clamped = clamped or c
            total += setup.product({k: np.diag(vals)})
    total += shift * np.eye(setup.dim)
    return HermitianOperator(total, "B", {"identity_shift": shift, "clamped": clamped})


def identity_shift(B) -> float:
    return float(getattr(B, "meta", {}).get("identity_shift", 0.0)) if isinstance(B, HermitianOperator) else 0.0


def strip_shift(B) -> HermitianOperator:
    """B minus its recorded identity shift (unchanged when none is recorded)."""
    B = as_operator(B)
    s = identity_shift(B)
    if s == 0.0:
        return B
    return HermitianOperator(B.matrix - s * np.eye(B.dim), (B.label or "B") + "_core")


def neg_log_state(rho, clamp: bool = False) -> HermitianOperator:
    """-ln rho through the spectrum, for states not described by a setup."""
    flags = {}

    def fn(p):
        vals, flags["c"] = _neg_log_pops(np.clip(p, 0, None), clamp, "state")
        return vals

    m = apply_spectral(as_operator(rho), fn)
    return HermitianOperator(m, "B", {"identity_shift": 0.0, "clamped": flags.get("c", False)})
