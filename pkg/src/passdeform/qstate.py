"""Dense Hermitian-operator and density-matrix algebra.

Everything here is immutable: arrays stored on the dataclasses are marked
read-only, and every operation returns new objects.  Functions accept either
the typed wrappers or plain numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ConsistencyError, DomainError, NumericalError, ResourceError, ValidationError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
UNITARY_TOL = 1e-10
EIG_CUTOFF = 1e-14
DIM_CAP = 4096

ArrayLike = Union[np.ndarray, Sequence]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def _square(m, what: str) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValidationError(f"{what}: expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{what}: matrix contains non-finite entries")
    return m


def _offdiag_is_zero(m: np.ndarray, atol: float = 0.0) -> bool:
    d = m.shape[0]
    if d == 1:
        return True
    off = m.reshape(-1)[:-1].reshape(d - 1, d + 1)[:, 1:]
    return bool(np.all(np.abs(off) <= atol))


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A finite-dimensional Hermitian matrix with an optional label.

    `meta` carries bookkeeping (identity shifts, clamp flags) and is ignored
    in comparisons.
    """

    matrix: np.ndarray
    label: str | None = None
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    __array_ufunc__ = None  # let numpy scalars defer to our operators

    def __post_init__(self):
        m = _square(self.matrix, "HermitianOperator")
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise ValidationError(f"operator {self.label or ''} is not Hermitian (max deviation {dev:.3e})")
        object.__setattr__(self, "matrix", _frozen((m + m.conj().T) / 2))

    @classmethod
    def diag(cls, values, label=None, **meta) -> "HermitianOperator":
        return cls(np.diag(np.asarray(values, dtype=float)), label, dict(meta))

    @classmethod
    def identity(cls, dim: int, label=None) -> "HermitianOperator":
        return cls(np.eye(dim), label)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self.matrix

    @cached_property
    def is_diagonal(self) -> bool:
        return _offdiag_is_zero(self.matrix)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def with_label(self, label) -> "HermitianOperator":
        return HermitianOperator(self.matrix, label, dict(self.meta))

    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator(self.matrix + other.matrix)
        if np.isscalar(other):
            return HermitianOperator(self.matrix + float(other) * np.eye(self.dim))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator(self.matrix - other.matrix)
        if np.isscalar(other):
            return HermitianOperator(self.matrix - float(other) * np.eye(self.dim))
        return NotImplemented

    def __neg__(self):
        return HermitianOperator(-self.matrix)

    def __mul__(self, c):
        if np.isscalar(c) and np.isreal(c):
            return HermitianOperator(float(np.real(c)) * self.matrix)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def commutes_with(self, other, tol: float = 1e-10) -> bool:
        a, b = as_matrix(self), as_matrix(other)
        if self.is_diagonal and _offdiag_is_zero(b):
            return True
        scale = 1.0 + np.linalg.norm(a) * np.linalg.norm(b)
        return bool(np.linalg.norm(a @ b - b @ a) <= tol * scale)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: np.ndarray
    label: str | None = None
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    __array_ufunc__ = None

    def __post_init__(self):
        m = _square(self.matrix, "DensityMatrix")
        dev = np.max(np.abs(m - m.conj().T))
        if dev > HERMITIAN_TOL:
            raise ValidationError(f"density matrix is not Hermitian (max deviation {dev:.3e})")
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix trace is {tr!r}, expected 1")
        if _offdiag_is_zero(m):
            lo = m.diagonal().real.min()
        else:
            lo = np.linalg.eigvalsh(m).min()
        if lo < -HERMITIAN_TOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_populations(cls, p, label=None) -> "DensityMatrix":
        p = np.asarray(p, dtype=float)
        return cls(np.diag(p), label)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self.matrix

    @cached_property
    def is_diagonal(self) -> bool:
        return _offdiag_is_zero(self.matrix)

    @property
    def populations(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def eigenvalues(self) -> np.ndarray:
        if self.is_diagonal:
            return np.sort(self.populations)
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.real(np.sum(self.matrix * self.matrix.T)))


def as_matrix(x) -> np.ndarray:
    if isinstance(x, (HermitianOperator, DensityMatrix)):
        return x.matrix
    return np.asarray(x)


def as_operator(x, label=None) -> HermitianOperator:
    if isinstance(x, HermitianOperator):
        return x
    if isinstance(x, DensityMatrix):
        return HermitianOperator(x.matrix, label)
    return HermitianOperator(np.asarray(x), label)


def as_state(x) -> DensityMatrix:
    if isinstance(x, DensityMatrix):
        return x
    x = np.asarray(x)
    if x.ndim == 1:
        return DensityMatrix.from_populations(x)
    return DensityMatrix(x)


def is_diagonal(x) -> bool:
    if isinstance(x, (HermitianOperator, DensityMatrix)):
        return x.is_diagonal
    return _offdiag_is_zero(np.asarray(x))


# --------------------------------------------------------------------------- spectra

def default_degeneracy_tol(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 1e-9
    return 1e-9 * (float(np.max(np.abs(values))) + 1.0)


def group_degenerate(sorted_values, tol: float) -> list[np.ndarray]:
    """Chain consecutive values closer than `tol` (transitive closure on a sorted list)."""
    v = np.asarray(sorted_values, dtype=float)
    if v.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(v) >= tol) + 1
    return [np.asarray(g) for g in np.split(np.arange(v.size), breaks)]


@dataclass(frozen=True, eq=False)
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray
    degeneracy_groups: tuple
    tol: float

    def __len__(self):
        return self.values.size

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T


def _eigh(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    resid = np.linalg.norm(m @ v - v * w) / (1.0 + np.linalg.norm(m))
    if not np.isfinite(resid) or resid > 1e-8:
        raise NumericalError(f"eigendecomposition residual {resid:.3e} too large")
    return w, v


def eig_sorted(op, degeneracy_tol: float | None = None) -> Spectrum:
    """Ascending eigenvalues with orthonormal eigenvectors and degeneracy groups.

    Diagonal inputs keep their computational basis vectors; ties are ordered
    by original index (stable sort).
    """
    m = as_matrix(op)
    _square(m, "eig_sorted")
    if is_diagonal(op):
        d = m.diagonal().real
        order = np.argsort(d, kind="stable")
        values = d[order]
        vectors = np.eye(m.shape[0])[:, order]
    else:
        values, vectors = _eigh(m)
    tol = default_degeneracy_tol(values) if degeneracy_tol is None else float(degeneracy_tol)
    if tol <= 0:
        raise ValidationError("degeneracy_tol must be positive")
    groups = tuple(tuple(int(i) for i in g) for g in group_degenerate(values, tol))
    values = values.copy()
    values.setflags(write=False)
    vectors = np.array(vectors, dtype=complex)
    vectors.setflags(write=False)
    return Spectrum(values, vectors, groups, tol)


def apply_spectral(op, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Return f(op) computed through the eigendecomposition (diagonal fast path)."""
    m = as_matrix(op)
    if is_diagonal(op):
        return np.diag(fn(m.diagonal().real)).astype(complex)
    w, v = _eigh(m)
    return (v * fn(w)) @ v.conj().T


# --------------------------------------------------------------------------- construction

def thermal_state(H, beta: float) -> DensityMatrix:
    """Gibbs state exp(-beta H)/Z."""
    H = as_operator(H)
    beta = float(beta)
    if not np.isfinite(beta):
        raise ValidationError("beta must be finite")
    if beta < 0:
        raise ValidationError("negative beta (population inversion) is not supported")

    def gibbs(e):
        w = np.exp(-beta * (e - e.min()))
        return w / w.sum()

    return DensityMatrix(apply_spectral(H, gibbs), label=f"thermal(beta={beta:g})")


def log_partition(H, beta: float) -> float:
    e = np.linalg.eigvalsh(as_matrix(H)) if not is_diagonal(H) else as_matrix(H).diagonal().real
    e0 = e.min()
    return float(-beta * e0 + np.log(np.sum(np.exp(-beta * (e - e0)))))


def _slot_matrix(slot) -> np.ndarray:
    if isinstance(slot, (int, np.integer)):
        if slot < 1:
            raise ValidationError("identity placeholder dimension must be >= 1")
        return np.eye(int(slot))
    return _square(as_matrix(slot), "tensor_embed slot")


def tensor_embed(ops: Sequence, cap: int = DIM_CAP, label=None) -> HermitianOperator:
    """Kronecker product of the slots; slot 0 is the leftmost factor.

    A slot is a local operator or an integer meaning the identity of that dimension.
    """
    dims = [(_slot_matrix(s).shape[0]) for s in ops]
    total = int(np.prod(dims)) if dims else 1
    if total > cap:
        raise ResourceError(f"embedded dimension {total} exceeds cap {cap}")
    out = np.eye(1, dtype=complex)
    for s in ops:
        out = np.kron(out, _slot_matrix(s))
    return HermitianOperator(out, label)


def embed(op, slot: int, dims: Sequence[int], cap: int = DIM_CAP, label=None) -> HermitianOperator:
    """Place a local operator at position `slot` (0-based) with identities elsewhere."""
    dims = list(dims)
    if not 0 <= slot < len(dims):
        raise ValidationError(f"slot {slot} out of range for {len(dims)} subsystems")
    m = as_matrix(op)
    if m.shape[0] != dims[slot]:
        raise ValidationError(f"operator dim {m.shape[0]} does not match slot dim {dims[slot]}")
    slots: list = list(dims)
    slots[slot] = m
    return tensor_embed(slots, cap=cap, label=label)


def kron_states(states: Sequence) -> DensityMatrix:
    out = np.eye(1, dtype=complex)
    for s in states:
        out = np.kron(out, as_matrix(s))
    return DensityMatrix(out)


# --------------------------------------------------------------------------- functionals

def expectation(state, op, imag_tol: float = 1e-10) -> float:
    """tr(rho A) as a real number."""
    r, a = as_matrix(state), as_matrix(op)
    if r.shape != a.shape:
        raise ValidationError(f"dimension mismatch: state {r.shape} vs operator {a.shape}")
    val = np.einsum("ij,ji->", r, a)
    if abs(val.imag) > imag_tol * (1.0 + abs(val.real)):
        raise ConsistencyError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def _probs(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.eigenvalues()
    x = np.asarray(x)
    if x.ndim == 1:
        return x.astype(float)
    if _offdiag_is_zero(x):
        return x.diagonal().real
    return np.linalg.eigvalsh(x)


def entropy(state) -> float:
    """von Neumann entropy in nats."""
    p = _probs(state)
    p = p[p > EIG_CUTOFF]
    return float(max(0.0, -np.sum(p * np.log(p))))


def relative_entropy(rho, sigma) -> float:
    """D(rho||sigma) = tr rho (ln rho - ln sigma); raises DomainError when infinite."""
    r, s = as_matrix(rho), as_matrix(sigma)
    if r.shape != s.shape:
        raise ValidationError("relative_entropy: dimension mismatch")
    if _offdiag_is_zero(r) and _offdiag_is_zero(s):
        p, q = r.diagonal().real, s.diagonal().real
        on = p > EIG_CUTOFF
        if np.any(q[on] <= EIG_CUTOFF):
            raise DomainError("support of rho is not contained in support of sigma (D = +inf)")
        return float(max(0.0, np.sum(p[on] * (np.log(p[on]) - np.log(q[on])))))
    wr, vr = _eigh(r)
    ws, vs = _eigh(s)
    keep = ws > EIG_CUTOFF
    # weight of rho outside the support of sigma
    proj_out = vs[:, ~keep]
    leak = np.real(np.einsum("ia,ij,ja->", proj_out.conj(), r, proj_out)) if proj_out.size else 0.0
    if leak > EIG_CUTOFF:
        raise DomainError("support of rho is not contained in support of sigma (D = +inf)")
    pr = wr[wr > EIG_CUTOFF]
    s_rho = float(np.sum(pr * np.log(pr)))
    log_s = (vs[:, keep] * np.log(ws[keep])) @ vs[:, keep].conj().T
    cross = float(np.real(np.einsum("ij,ji->", r, log_s)))
    return max(0.0, s_rho - cross)


def partial_trace(state, dims: Sequence[int], keep) -> DensityMatrix:
    """Reduced state on the subsystems listed in `keep` (0-based, any order is sorted)."""
    m = as_matrix(state)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != m.shape[0]:
        raise ValidationError(f"dims {dims} do not multiply to state dimension {m.shape[0]}")
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    if any(k < 0 or k >= len(dims) for k in keep):
        raise ValidationError(f"keep indices {keep} out of range")
    n = len(dims)
    t = m.reshape(dims + dims)
    current = n
    for ax in reversed(range(n)):
        if ax in keep:
            continue
        t = np.trace(t, axis1=ax, axis2=ax + current)
        current -= 1
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return DensityMatrix(t.reshape(d, d))


def mutual_information(state, dims: Sequence[int], part_a) -> float:
    """S_A + S_B - S_AB for the bipartition (part_a, rest)."""
    part_a = sorted({int(k) for k in np.atleast_1d(part_a)})
    part_b = [k for k in range(len(dims)) if k not in part_a]
    sa = entropy(partial_trace(state, dims, part_a))
    sb = entropy(partial_trace(state, dims, part_b))
    return max(0.0, sa + sb - entropy(state))


# --------------------------------------------------------------------------- channels

def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    u = _square(np.asarray(u, dtype=complex), "unitary")
    dev = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))
    if dev > tol:
        raise ValidationError(f"matrix is not unitary (deviation {dev:.3e})")
    return u


@dataclass(frozen=True, eq=False)
class MixtureOfUnitaries:
    """rho -> sum_k w_k U_k rho U_k^dagger."""

    weights: np.ndarray
    unitaries: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size == 0 or w.size != len(self.unitaries):
            raise ValidationError("weights and unitaries must be non-empty and of equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > TRACE_TOL:
            raise ValidationError(f"weights must be >= 0 and sum to 1 (sum={w.sum()!r})")
        us = tuple(_frozen(check_unitary(u)) for u in self.unitaries)
        if len({u.shape for u in us}) != 1:
            raise ValidationError("all unitaries must share one dimension")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "unitaries", us)

    @classmethod
    def single(cls, u) -> "MixtureOfUnitaries":
        return cls(np.ones(1), (u,))

    @property
    def dim(self) -> int:
        return self.unitaries[0].shape[0]

    def apply_matrix(self, m: np.ndarray) -> np.ndarray:
        out = np.zeros_like(m, dtype=complex)
        for w, u in zip(self.weights, self.unitaries):
            out += w * (u @ m @ u.conj().T)
        return out

    def apply(self, state) -> DensityMatrix:
        return DensityMatrix(self.apply_matrix(as_matrix(state)))

    def __call__(self, state) -> DensityMatrix:
        return self.apply(state)


def evolve(state, channel: MixtureOfUnitaries) -> DensityMatrix:
    state = as_state(state)
    if channel.dim != state.dim:
        raise ValidationError(f"channel dim {channel.dim} does not match state dim {state.dim}")
    return channel.apply(state)


def unitary_from_hamiltonian(H, t: float) -> np.ndarray:
    """exp(-i H t) via eigendecomposition."""
    if not np.isfinite(t):
        raise ValidationError("evolution time must be finite")
    return apply_spectral(as_operator(H), lambda e: np.exp(-1j * e * t))


def evolve_hamiltonian(state, H, t: float) -> DensityMatrix:
    state = as_state(state)
    u = unitary_from_hamiltonian(H, t)
    return DensityMatrix(u @ state.matrix @ u.conj().T)


# --------------------------------------------------------------------------- operator functions

def _neg_log_values(p: np.ndarray, clamp: bool) -> tuple[np.ndarray, bool]:
    clamped = False
    if np.any(p <= EIG_CUTOFF):
        if not clamp:
            raise DomainError(
                "neg_log of a singular state: populations below 1e-14 present; "
                "pass clamp=True to replace them with 1e-14 and renormalise"
            )
        p = np.where(p <= EIG_CUTOFF, EIG_CUTOFF, p)
        p = p / p.sum()
        clamped = True
    return -np.log(p), clamped


def operator_function(op, f: str, *params, clamp: bool = False) -> HermitianOperator:
    """Apply a monotone scalar map through the spectrum.

    f is one of "neg_log", "signed_power" (param alpha), "affine" (params a, b -> a x + b).
    """
    m = as_matrix(op)
    meta: dict = {}
    if f == "neg_log":
        state = isinstance(op, DensityMatrix)
        flags = {}

        def fn(x):
            vals, flags["clamped"] = _neg_log_values(np.clip(x, 0.0, None) if state else x, clamp)
            return vals

        if not state:
            w = m.diagonal().real if is_diagonal(op) else np.linalg.eigvalsh(m)
            if np.any(w < -HERMITIAN_TOL):
                raise DomainError("neg_log requires a positive semidefinite operator")
        out = apply_spectral(op, fn)
        meta["clamped"] = flags.get("clamped", False)
        return HermitianOperator(out, "neg_log", meta)
    if f == "signed_power":
        (alpha,) = params
        alpha = float(alpha)
        if alpha == 0:
            raise ValidationError("signed_power requires alpha != 0")

        def fn(x):
            if np.any(x < -HERMITIAN_TOL) and not float(alpha).is_integer():
                raise DomainError("signed_power with non-integer alpha needs a non-negative spectrum")
            if alpha < 0 and np.any(np.abs(x) <= EIG_CUTOFF):
                raise DomainError("signed_power with negative alpha needs a nonsingular operator")
            x = np.clip(x, 0.0, None) if not float(alpha).is_integer() else x
            return np.sign(alpha) * np.power(x, alpha)

        return HermitianOperator(apply_spectral(op, fn), f"signed_power({alpha:g})")
    if f == "affine":
        a, b = (float(x) for x in params)
        return HermitianOperator(a * m + b * np.eye(m.shape[0]), "affine")
    raise ValidationError(f"unknown operator function {f!r}")


def joint_eigenbasis(x, y, tol: float = 1e-9):
    """Common eigenbasis of two commuting Hermitian matrices.

    Returns (x_values, y_values, vectors) with columns of `vectors` being joint
    eigenvectors.  When both inputs are diagonal the computational basis is
    returned unchanged (index order preserved).  Raises ValidationError when
    the inputs do not commute.
    """
    a, b = as_matrix(x), as_matrix(y)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch {a.shape} vs {b.shape}")
    n = a.shape[0]
    if is_diagonal(x) and is_diagonal(y):
        return a.diagonal().real.copy(), b.diagonal().real.copy(), np.eye(n, dtype=complex)
    scale = 1.0 + np.linalg.norm(a) * np.linalg.norm(b)
    if np.linalg.norm(a @ b - b @ a) > tol * scale:
        raise ValidationError("operators do not commute; express them in a common eigenbasis first")
    wa, va = _eigh(a)
    groups = group_degenerate(wa, default_degeneracy_tol(wa))
    vecs = np.zeros((n, n), dtype=complex)
    for g in groups:
        sub = va[:, g]
        if g.size == 1:
            vecs[:, g] = sub
            continue
        wb, vb = _eigh(sub.conj().T @ b @ sub)
        vecs[:, g] = sub @ vb
    xa = np.real(np.einsum("ia,ij,ja->a", vecs.conj(), a, vecs))
    yb = np.real(np.einsum("ia,ij,ja->a", vecs.conj(), b, vecs))
    return xa, yb, vecs
