"""Declarative description of a composite setup: subsystems, initial state, couplings.

Subsystem order fixes the tensor-product order (index 0 is the leftmost factor).
Local operator names understood in observables and interactions:

    H            local Hamiltonian (diagonal of the energy levels)
    I            identity
    sx, sy, sz   Pauli matrices (qubits only; sz = diag(+1, -1))
    sp, sm       |1><0| and |0><1| (qubits only)
    proj:i       |i><i|
    ket:i,j      |i><j|
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ResourceError, ValidationError
from .partitions import ManifoldPartition, partition_from_generator, partition_from_values
from .qstate import (
    DIM_CAP,
    DensityMatrix,
    HermitianOperator,
    apply_spectral,
    kron_states,
)

NORM_TOL = 1e-9

PAULI = {
    "sx": np.array([[0, 1], [1, 0]], dtype=complex),
    "sy": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "sz": np.array([[1, 0], [0, -1]], dtype=complex),
    "sp": np.array([[0, 0], [1, 0]], dtype=complex),
    "sm": np.array([[0, 1], [0, 0]], dtype=complex),
}


@dataclass(frozen=True)
class Subsystem:
    label: str
    energies: tuple
    beta: float | None = None
    populations: tuple | None = None
    generator: Any = None

    def __post_init__(self):
        e = tuple(float(x) for x in self.energies)
        if not e:
            raise ValidationError(f"subsystem {self.label!r}: energy_levels must be non-empty")
        if not all(np.isfinite(e)):
            raise ValidationError(f"subsystem {self.label!r}: energy levels must be finite")
        object.__setattr__(self, "energies", e)
        if (self.beta is None) == (self.populations is None):
            raise ValidationError(f"subsystem {self.label!r}: give exactly one of thermal beta or populations")
        if self.beta is not None:
            b = float(self.beta)
            if not np.isfinite(b) or b < 0:
                raise ValidationError(f"subsystem {self.label!r}: beta must be finite and >= 0")
            object.__setattr__(self, "beta", b)
        else:
            p = np.asarray(self.populations, dtype=float)
            if p.shape != (len(e),):
                raise ValidationError(
                    f"subsystem {self.label!r}: {p.size} populations for {len(e)} energy levels")
            if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
                raise ValidationError(
                    f"subsystem {self.label!r}: populations must be >= 0 and sum to 1 (sum={p.sum()!r})")
            # stored as given so that dump/parse round trips are exact; normalised on use
            object.__setattr__(self, "populations", tuple(float(x) for x in p))

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def thermal(self) -> bool:
        return self.beta is not None

    def hamiltonian(self) -> np.ndarray:
        return np.diag(np.asarray(self.energies))

    def generator_matrix(self) -> np.ndarray:
        if self.generator is None:
            return self.hamiltonian()
        return local_operator(self, self.generator)

    def state(self) -> DensityMatrix:
        if self.thermal:
            g = HermitianOperator(self.generator_matrix())
            beta = self.beta

            def gibbs(x):
                w = np.exp(-beta * (x - x.min()))
                return w / w.sum()

            return DensityMatrix(apply_spectral(g, gibbs))
        return DensityMatrix.from_populations(self.probabilities())

    def probabilities(self) -> np.ndarray:
        p = np.asarray(self.populations, dtype=float)
        return p / p.sum()

    def log_partition(self) -> float:
        if not self.thermal:
            return 0.0
        x = np.linalg.eigvalsh(self.generator_matrix())
        x0 = x.min()
        return float(-self.beta * x0 + np.log(np.sum(np.exp(-self.beta * (x - x0)))))

    def to_dict(self) -> dict:
        d: dict = {"label": self.label, "energy_levels": list(self.energies)}
        if self.thermal:
            init: dict = {"thermal": self.beta}
            if self.generator is not None:
                init["generator"] = self.generator
            d["init"] = init
        else:
            d["init"] = {"populations": list(self.populations)}
        return d


EXPRESSION_KEYS = {
    "terms": {"terms", "hermitian_conjugate"},
    "matrix": {"real", "imag"},
    "creation_annihilation": {"pair", "transitions", "coupling"},
    "flip_flop": {"spins", "coupling", "topology"},
    "dephasing": {"system", "bath", "gammas"},
    "hamiltonian": {"subsystems"},
}
PARTITION_KEYS = {"generator", "conserved", "blocks", "description"}


def local_operator(sub: Subsystem, spec) -> np.ndarray:
    d = sub.dim
    if isinstance(spec, (list, tuple)):
        m = np.asarray(spec, dtype=complex)
        if m.shape != (d, d):
            raise ValidationError(f"local matrix for {sub.label!r} must be {d}x{d}")
        return m
    if not isinstance(spec, str):
        raise ValidationError(f"cannot interpret local operator {spec!r}")
    name = spec.strip()
    if name == "H":
        return sub.hamiltonian().astype(complex)
    if name == "I":
        return np.eye(d, dtype=complex)
    if name in PAULI:
        if d != 2:
            raise ValidationError(f"{name} needs a two-level subsystem, {sub.label!r} has {d}")
        return PAULI[name].copy()
    if name.startswith("proj:"):
        i = _level(name[5:], d, sub.label)
        m = np.zeros((d, d), dtype=complex)
        m[i, i] = 1
        return m
    if name.startswith("ket:"):
        parts = name[4:].split(",")
        if len(parts) != 2:
            raise ValidationError(f"ket operator must look like ket:i,j, got {name!r}")
        i, j = (_level(x, d, sub.label) for x in parts)
        m = np.zeros((d, d), dtype=complex)
        m[i, j] = 1
        return m
    raise ValidationError(f"unknown local operator {name!r}")


def _level(text, d, label) -> int:
    try:
        i = int(text)
    except (TypeError, ValueError):
        raise ValidationError(f"bad level index {text!r} for {label!r}") from None
    if not 0 <= i < d:
        raise ValidationError(f"level {i} out of range for {label!r} (dim {d})")
    return i


@dataclass(frozen=True, eq=False)
class SetupSpec:
    subsystems: tuple
    correlations: tuple | None = None
    interactions: dict = field(default_factory=dict)
    observables: dict = field(default_factory=dict)
    partitions: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)
    name: str = ""
    cap: int = DIM_CAP

    def __post_init__(self):
        subs = tuple(self.subsystems)
        if not subs:
            raise ValidationError("setup needs at least one subsystem")
        labels = [s.label for s in subs]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate subsystem labels in {labels}")
        object.__setattr__(self, "subsystems", subs)
        if self.dim > self.cap:
            raise ResourceError(f"setup dimension {self.dim} exceeds cap {self.cap}")
        if self.correlations is not None:
            p = np.asarray(self.correlations, dtype=float).reshape(-1)
            if p.size != self.dim:
                raise ValidationError(f"correlation table has {p.size} entries, setup dimension is {self.dim}")
            if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
                raise ValidationError(f"correlation table must be >= 0 and sum to 1 (sum={p.sum()!r})")
            object.__setattr__(self, "correlations", tuple(float(x) for x in p))

    # ----------------------------------------------------------------- geometry
    @property
    def dims(self) -> list[int]:
        return [s.dim for s in self.subsystems]

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.subsystems]

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < len(self.subsystems):
                raise ValidationError(f"subsystem index {label} out of range")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValidationError(f"unknown subsystem {label!r}; have {self.labels}") from None

    def subsystem(self, label) -> Subsystem:
        return self.subsystems[self.index(label)]

    def basis_labels(self) -> list[tuple]:
        return [tuple(int(x) for x in idx) for idx in np.ndindex(*self.dims)]

    def basis_index(self, levels) -> int:
        return int(np.ravel_multi_index(tuple(levels), self.dims))

    # ----------------------------------------------------------------- operators
    def product(self, local: dict) -> np.ndarray:
        """Kronecker product with the given local matrices and identities elsewhere."""
        out = np.eye(1, dtype=complex)
        for k, s in enumerate(self.subsystems):
            m = local.get(k, local.get(s.label))
            if m is None:
                m = np.eye(s.dim)
            elif not isinstance(m, np.ndarray):
                m = local_operator(s, m)
            out = np.kron(out, m)
        return out

    def local(self, label, spec="H", label_text=None) -> HermitianOperator:
        k = self.index(label)
        m = local_operator(self.subsystems[k], spec)
        return HermitianOperator(self.product({k: m}), label_text or f"{spec}[{self.labels[k]}]")

    def hamiltonian(self, label) -> HermitianOperator:
        return self.local(label, "H", f"H_{self.subsystem(label).label}")

    def total_hamiltonian(self) -> HermitianOperator:
        m = sum(self.hamiltonian(s.label).matrix for s in self.subsystems)
        return HermitianOperator(m, "H0")

    def terms_matrix(self, terms, hermitian_conjugate: bool = False) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for t in terms:
            coef = complex(t.get("coef", 1.0)) if not isinstance(t.get("coef"), list) else complex(*t["coef"])
            local = {self.index(lab): local_operator(self.subsystem(lab), op) for lab, op in t["ops"].items()}
            out += coef * self.product(local)
        if hermitian_conjugate:
            out = out + out.conj().T
        return out

    def build_expression(self, expr: dict, what: str) -> HermitianOperator:
        if not isinstance(expr, dict):
            raise ValidationError(f"{what}: expression must be a mapping")
        kind = expr.get("kind", "terms")
        if kind in EXPRESSION_KEYS:
            extra = set(expr) - EXPRESSION_KEYS[kind] - {"kind", "scale", "description"}
            if extra:
                raise ValidationError(f"{what}: unknown key {sorted(extra)[0]!r} for kind {kind!r}")
        if kind == "terms":
            m = self.terms_matrix(expr["terms"], bool(expr.get("hermitian_conjugate", False)))
        elif kind == "matrix":
            m = np.asarray(expr["real"], dtype=complex)
            if "imag" in expr:
                m = m + 1j * np.asarray(expr["imag"], dtype=float)
            if m.shape != (self.dim, self.dim):
                raise ValidationError(f"{what}: matrix must be {self.dim}x{self.dim}")
        elif kind == "creation_annihilation":
            a_lab, b_lab = expr["pair"]
            g = float(expr.get("coupling", 1.0))
            terms = [{"coef": g, "ops": {a_lab: f"ket:{i},{j}", b_lab: f"ket:{j},{i}"}}
                     for i, j in expr["transitions"]]
            m = self.terms_matrix(terms, hermitian_conjugate=True)
        elif kind == "flip_flop":
            spins = list(expr["spins"])
            g = float(expr.get("coupling", 1.0))
            topology = expr.get("topology", "all_to_all")
            if topology == "all_to_all":
                pairs = [(spins[i], spins[j]) for i in range(len(spins)) for j in range(i + 1, len(spins))]
            elif topology == "chain":
                pairs = list(zip(spins[:-1], spins[1:]))
            else:
                raise ValidationError(f"{what}: unknown flip_flop topology {topology!r}")
            terms = [{"coef": g, "ops": {a: "sp", b: "sm"}} for a, b in pairs]
            m = self.terms_matrix(terms, hermitian_conjugate=True)
        elif kind == "dephasing":
            bath = list(expr["bath"])
            gam = [float(x) for x in expr["gammas"]]
            if len(gam) != len(bath):
                raise ValidationError(f"{what}: {len(gam)} couplings for {len(bath)} bath spins")
            terms = [{"coef": g, "ops": {expr["system"]: "sz", b: "sz"}} for g, b in zip(gam, bath)]
            m = self.terms_matrix(terms)
        elif kind == "hamiltonian":
            m = sum(self.hamiltonian(lab).matrix for lab in expr.get("subsystems", self.labels))
        else:
            raise ValidationError(f"{what}: unknown expression kind {kind!r}")
        m = m * float(expr.get("scale", 1.0))
        try:
            return HermitianOperator(m, what)
        except ValidationError as exc:
            raise ValidationError(f"{what}: {exc}") from None

    def interaction(self, name) -> HermitianOperator:
        if name not in self.interactions:
            raise ValidationError(f"unknown interaction {name!r}; have {sorted(self.interactions)}")
        return self.build_expression(self.interactions[name], name)

    def observable(self, name) -> HermitianOperator:
        if name in self.observables:
            return self.build_expression(self.observables[name], name)
        if name.startswith("H_") and name[2:] in self.labels:
            return self.hamiltonian(name[2:])
        if name == "H0":
            return self.total_hamiltonian()
        raise ValidationError(f"unknown observable {name!r}; have {sorted(self.observables)}")

    def partition(self, name) -> ManifoldPartition:
        if name not in self.partitions:
            raise ValidationError(f"unknown partition {name!r}; have {sorted(self.partitions)}")
        spec = self.partitions[name]
        extra = set(spec) - PARTITION_KEYS
        if extra:
            raise ValidationError(f"partition {name!r}: unknown key {sorted(extra)[0]!r}")
        desc = spec.get("description", name)
        if "generator" in spec:
            return partition_from_generator(self.interaction(spec["generator"]), desc)
        if "conserved" in spec:
            op = self.observable(spec["conserved"])
            if not op.is_diagonal:
                raise ValidationError(f"partition {name!r}: conserved observable must be diagonal")
            return partition_from_values(op.diagonal(), desc)
        if "blocks" in spec:
            return ManifoldPartition(tuple(tuple(b) for b in spec["blocks"]), desc)
        raise ValidationError(f"partition {name!r} needs one of generator, conserved, blocks")

    # ----------------------------------------------------------------- state
    @property
    def product_thermal(self) -> bool:
        return self.correlations is None and all(s.thermal and s.generator is None for s in self.subsystems)

    @property
    def diagonal_initial_state(self) -> bool:
        return self.correlations is not None or all(s.generator is None for s in self.subsystems)

    def initial_state(self) -> DensityMatrix:
        if self.correlations is not None:
            return DensityMatrix.from_populations(self.joint_probabilities(), label=f"rho0[{self.name}]")
        st = kron_states([s.state() for s in self.subsystems])
        return DensityMatrix(st.matrix, label=f"rho0[{self.name}]")

    def initial_populations(self) -> np.ndarray:
        if self.correlations is not None:
            return self.joint_probabilities()
        return self.initial_state().populations

    def joint_probabilities(self) -> np.ndarray:
        """Normalised correlation table (flattened), or None without correlations."""
        if self.correlations is None:
            return None
        p = np.asarray(self.correlations, dtype=float)
        return p / p.sum()

    def joint_table(self) -> np.ndarray:
        """Initial populations reshaped to the subsystem dimensions (diagonal states only)."""
        if not self.diagonal_initial_state:
            raise ValidationError("initial state is not diagonal in the product energy basis")
        return self.initial_populations().reshape(self.dims)

    # ----------------------------------------------------------------- identity
    def to_dict(self) -> dict:
        d: dict = {"schema": 1, "name": self.name, "subsystems": [s.to_dict() for s in self.subsystems]}
        if self.correlations is not None:
            d["correlations"] = {"populations": list(self.correlations)}
        for key in ("interactions", "observables", "partitions", "parameters"):
            val = getattr(self, key)
            if val:
                d[key] = val
        return d

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_subsystem(self, label, **changes) -> "SetupSpec":
        """Copy with one subsystem's fields replaced (e.g. a different beta)."""
        k = self.index(label)
        subs = list(self.subsystems)
        fields_ = {f: getattr(subs[k], f) for f in ("label", "energies", "beta", "populations", "generator")}
        fields_.update(changes)
        subs[k] = Subsystem(**fields_)
        return SetupSpec(tuple(subs), self.correlations, self.interactions, self.observables,
                         self.partitions, self.parameters, self.name, self.cap)


def thermal_setup(energies: dict, betas: dict, name: str = "", **kw) -> SetupSpec:
    """Convenience constructor: product of thermal subsystems in the given order."""
    subs = tuple(Subsystem(lab, tuple(energies[lab]), beta=betas[lab]) for lab in energies)
    return SetupSpec(subs, name=name, **kw)
