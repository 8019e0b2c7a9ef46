"""Floors-and-ladders analysis of two-subsystem diagonal states.

A joint population p_ij = p_i * p_{j|i} is drawn as floors -ln p_i (one per
level of the floor subsystem) each carrying a ladder -ln p_{j|i}.  When the
ladders do not overlap, level moves that respect the stacking order are free,
which yields the ultra-cold, polarization and effective-temperature bounds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import DomainError, ValidationError
from ..inequalities import DeltaInequality, FunctionalInequality, delta
from ..passivity import order_compatible
from ..qstate import HermitianOperator
from ..setups import SetupSpec
from .build import build_B, strip_shift
from .thresholds import DeformationBound, _tol, pair_constraints, validate_deformation

TOL = 1e-9


def _check_pair(setup: SetupSpec):
    if len(setup.subsystems) != 2:
        raise ValidationError("floors-and-ladders analysis needs exactly two subsystems")
    if not setup.diagonal_initial_state:
        raise ValidationError("initial state is not diagonal in the product energy basis")


def _exact(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def _distinct_levels(energies, tol=TOL):
    e = np.sort(np.asarray(energies, dtype=float))
    t = tol * (np.max(np.abs(e)) + 1.0)
    keep = [e[0]]
    for x in e[1:]:
        if x - keep[-1] >= t:
            keep.append(x)
    return np.array(keep)


def min_nonzero_gap(energies) -> tuple[float, Fraction]:
    """Smallest nonzero spacing between distinct levels (float and exact rational)."""
    lv = _distinct_levels(energies)
    if lv.size < 2:
        raise DomainError("spectrum has no nonzero gap")
    ex = sorted({_exact(x) for x in energies})
    gaps = [b - a for a, b in zip(ex[:-1], ex[1:]) if float(b - a) > 0]
    g = min(gaps)
    return float(g), g


def spectral_range(energies) -> tuple[float, Fraction]:
    ex = [_exact(x) for x in energies]
    r = max(ex) - min(ex)
    return float(r), r


# --------------------------------------------------------------------------- diagram

@dataclass(frozen=True, eq=False)
class LaddersDiagram:
    floors: tuple            # (value, floor-subsystem level index)
    ladders: tuple           # per floor: rung values relative to the floor
    overlap: bool
    source: str
    offset: float = 0.0
    floor_subsystem: int = 0

    def absolute(self) -> np.ndarray:
        """Matrix [i, j] of floor_i + rung_ij + offset (= -ln p_ij)."""
        return np.array([[f + r + self.offset for r in lad] for (f, _), lad in zip(self.floors, self.ladders)])

    def gaps(self) -> list[float]:
        """For consecutive floor groups: min rung of the upper group minus max rung of the lower one."""
        return _ladder_gaps(self.floors, self.ladders)


def _ladder_gaps(floors, ladders) -> list[float]:
    vals = np.array([f for f, _ in floors])
    tops = np.array([f + np.max(l) for (f, _), l in zip(floors, ladders)])
    bots = np.array([f + np.min(l) for (f, _), l in zip(floors, ladders)])
    order = np.argsort(vals, kind="stable")
    t = _tol(vals)
    groups, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if vals[b] - vals[a] < t:
            cur.append(b)
        else:
            groups.append(cur)
            cur = [b]
    groups.append(cur)
    return [float(np.min(bots[g2]) - np.max(tops[g1])) for g1, g2 in zip(groups[:-1], groups[1:])]


def ladders_diagram(setup: SetupSpec, floor_subsystem=0) -> LaddersDiagram:
    _check_pair(setup)
    f = setup.index(floor_subsystem)
    o = 1 - f
    fs, ls = setup.subsystems[f], setup.subsystems[o]
    if setup.product_thermal:
        floors = tuple((fs.beta * e, i) for i, e in enumerate(fs.energies))
        rung = tuple(ls.beta * e for e in ls.energies)
        ladders = tuple(rung for _ in floors)
        offset = fs.log_partition() + ls.log_partition()
        source = "product_thermal"
    else:
        table = setup.joint_table()
        if f == 1:
            table = table.T
        pf = table.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            floors = tuple((float(-np.log(p)), i) for i, p in enumerate(pf))
            cond = table / pf[:, None]
            ladders = tuple(tuple(float(x) for x in -np.log(c)) for c in cond)
        offset = 0.0
        source = "product_passive" if setup.correlations is None else "classically_correlated"
    t = _tol([v for v, _ in floors] + [x for lad in ladders for x in lad])
    overlap = any(g <= t for g in _ladder_gaps(floors, ladders))
    return LaddersDiagram(floors, ladders, overlap, source, offset, f)


# --------------------------------------------------------------------------- ultra-cold

@dataclass(frozen=True, eq=False)
class UltraColdReport:
    beta_c_star: float
    beta_c_star_exact: Fraction
    omega_c_min: float
    omega_h_max: float
    beta_c: float
    beta_h: float
    no_cooling: bool
    limiting_case: bool
    otto_efficiency_bound: float
    effective_inequality: DeformationBound
    no_cooling_inequality: DeltaInequality
    deformation_valid: bool
    gap_pair: tuple
    cold: int
    hot: int

    def saturating_swap(self, setup: SetupSpec) -> tuple[tuple[int, int], np.ndarray]:
        """Permutation swapping |c_k, h_max> with |c_{k+1}, h_min> across the minimal cold gap."""
        ec = setup.subsystems[self.cold].energies
        eh = np.asarray(setup.subsystems[self.hot].energies)
        k, k1 = self.gap_pair
        hmax, hmin = int(np.argmax(eh)), int(np.argmin(eh))
        lv_a, lv_b = [0, 0], [0, 0]
        lv_a[self.cold], lv_a[self.hot] = k, hmax
        lv_b[self.cold], lv_b[self.hot] = k1, hmin
        i, j = setup.basis_index(lv_a), setup.basis_index(lv_b)
        perm = np.arange(setup.dim)
        perm[i], perm[j] = j, i
        u = np.eye(setup.dim)[perm]
        del ec
        return (i, j), u


def ultracold_analysis(setup: SetupSpec, cold=0, hot=1) -> UltraColdReport:
    _check_pair(setup)
    c, h = setup.index(cold), setup.index(hot)
    sc, sh = setup.subsystems[c], setup.subsystems[h]
    if not setup.product_thermal:
        raise ValidationError("ultra-cold analysis needs two uncorrelated thermal subsystems")
    wc, wc_ex = min_nonzero_gap(sc.energies)
    wh, wh_ex = spectral_range(sh.energies)
    star_ex = _exact(sh.beta) * wh_ex / wc_ex
    star = float(star_ex)
    limiting = star_ex == 0
    no_cooling = _exact(sc.beta) >= star_ex
    Hc, Hh = setup.hamiltonian(c), setup.hamiltonian(h)
    rhs = Hc / wc + (Hh / wh if wh > 0 else 0 * Hh)
    ineq = DeltaInequality(None, HermitianOperator(rhs.matrix, "H_c/w_c + H_h/w_h"), "ci_no_overlap",
                           "Delta<H_c>/omega_c_min + Delta<H_h>/omega_h_max >= 0")
    core = strip_shift(build_B(setup))
    bound = DeformationBound(core, Hc, star - sc.beta, ineq, "ultracold", False,
                             notes={"valid": bool(no_cooling)})
    star_op = HermitianOperator(star * Hc.matrix + sh.beta * Hh.matrix)
    valid = validate_deformation(core, star_op).valid
    ec = np.asarray(sc.energies)
    order = np.argsort(ec, kind="stable")
    pair = None
    for a, b in zip(order[:-1], order[1:]):
        if abs((ec[b] - ec[a]) - wc) <= TOL * (1 + abs(wc)):
            pair = (int(a), int(b))
            break
    otto = 1.0 - wc / wh if wh > 0 else float("-inf")
    return UltraColdReport(star, star_ex, wc, wh, sc.beta, sh.beta, bool(no_cooling), bool(limiting), otto,
                           bound, DeltaInequality(None, Hc, "no_cooling", "Delta<H_c> >= 0"), bool(valid),
                           pair, c, h)


# --------------------------------------------------------------------------- polarization

@dataclass(frozen=True, eq=False)
class PolarizationBound:
    levels: tuple
    E: float
    E_plus: float
    E_minus: float
    nu_plus: float
    nu_minus: float
    nu_formula: float
    overlap: bool
    polarization: HermitianOperator
    inequality: FunctionalInequality
    starred_inequality: FunctionalInequality | None
    nu_starred: float | None = None


def polarization_bound(setup: SetupSpec, degenerate_pair, cold=0, hot=1) -> PolarizationBound:
    """Heat cost of polarising two degenerate hot levels m, n (0-based level indices).

    nu is the largest splitting of the pair inside B before it meets another
    level of B; it is found by scanning the full spectrum, and the neighbour
    formula min(E_+ - E, E - E_-) is reported alongside.
    """
    _check_pair(setup)
    c, h = setup.index(cold), setup.index(hot)
    sc, sh = setup.subsystems[c], setup.subsystems[h]
    if not setup.product_thermal:
        raise ValidationError("polarization bound needs two uncorrelated thermal subsystems")
    m, n = (int(x) for x in degenerate_pair)
    eh = np.asarray(sh.energies)
    if not (0 <= m < eh.size and 0 <= n < eh.size) or m == n:
        raise ValidationError(f"bad level pair {degenerate_pair} for {eh.size} hot levels")
    t = _tol(eh)
    if abs(eh[m] - eh[n]) > t:
        raise ValidationError(f"levels {m} and {n} are not degenerate ({eh[m]} vs {eh[n]})")
    E = float(eh[m])
    above, below = eh[eh > E + t], eh[eh < E - t]
    e_plus = float(above.min()) if above.size else np.inf
    e_minus = float(below.max()) if below.size else -np.inf
    nu_formula = float(min(e_plus - E, E - e_minus))
    a_loc = np.zeros((eh.size, eh.size))
    a_loc[n, n], a_loc[m, m] = 1.0, -1.0
    A = HermitianOperator(setup.product({h: a_loc}), f"p{n}-p{m}")
    core = strip_shift(build_B(setup))
    b = core.diagonal()
    direction = sh.beta * A.diagonal()
    lo, hi, _ = pair_constraints(b, b, direction, keep_pairs=False)
    nu = float(min(hi, -lo))
    uc = ultracold_analysis(setup, c, h)
    overlap = not uc.no_cooling
    Hc, Hh = setup.hamiltonian(c).matrix, setup.hamiltonian(h).matrix
    beta_c, beta_h = sc.beta, sh.beta

    def plain(r0, rf, nu=nu):
        dp = abs(delta(A, r0, rf))
        return delta(core, r0, rf) - (nu * beta_h * dp if dp > 0 else 0.0)

    ineq = FunctionalInequality(plain, "polarization", 1.0 + float(np.max(np.abs(b))))
    starred, nu_star = None, None
    if not overlap and uc.omega_h_max > 0:
        star_b = uc.beta_c_star * np.diag(Hc).real + beta_h * np.diag(Hh).real
        lo_s, hi_s, _ = pair_constraints(b, star_b, direction, keep_pairs=False)
        nu_star = float(min(nu, hi_s, -lo_s))
        ratio = uc.omega_h_max / uc.omega_c_min
        dHc_op = HermitianOperator(Hc)
        dHh_op = HermitianOperator(Hh)

        def star(r0, rf, nu=nu_star):
            dp = abs(delta(A, r0, rf))
            return ratio * delta(dHc_op, r0, rf) + delta(dHh_op, r0, rf) - (nu * dp if dp > 0 else 0.0)

        starred = FunctionalInequality(star, "polarization_starred", 1.0 + ratio * np.max(np.abs(Hc)))
    del beta_c
    return PolarizationBound((m, n), E, e_plus, e_minus, nu, -nu, nu_formula, overlap, A, ineq, starred, nu_star)


# --------------------------------------------------------------------------- effective betas

@dataclass(frozen=True, eq=False)
class EffectiveBetaReport:
    beta_eff_per_subsystem: dict
    validity: bool
    reasons: tuple
    construction_trace: tuple
    mode: str
    operator: HermitianOperator
    inequality: DeltaInequality
    beta_bar_star: float | None = None
    extra: dict = field(default_factory=dict)


def _group_by_energy(e: np.ndarray):
    order = np.argsort(e, kind="stable")
    t = _tol(e)
    groups, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if e[b] - e[a] < t:
            cur.append(b)
        else:
            groups.append(cur)
            cur = [b]
    groups.append(cur)
    return groups


def effective_betas(setup: SetupSpec, floor=0, ladder=1, mode: str = "auto") -> EffectiveBetaReport:
    """Effective inverse temperatures for athermal or classically correlated initial states.

    athermal:   thermal floor subsystem, passive athermal ladder subsystem;
                beta_s_eff * omega_s_max = beta_c * omega_c_min.
    correlated: floors shifted to beta_c_eff * E_c (smallest value keeping the
                ladders stacked), then every ladder replaced by beta_h_eff * E_h with
                beta_h_eff the largest slope that keeps ladders from crossing.
    Failed preconditions are reported in `reasons` with validity False.
    """
    _check_pair(setup)
    f, s = setup.index(floor), setup.index(ladder)
    sf, ss = setup.subsystems[f], setup.subsystems[s]
    table = setup.joint_table()
    if f == 1:
        table = table.T
    ef, es = np.asarray(sf.energies), np.asarray(ss.energies)
    if mode == "auto":
        mode = "athermal" if (setup.correlations is None and sf.thermal and sf.generator is None) else "correlated"
    reasons, trace = [], []
    pf = table.sum(axis=1)
    if np.any(pf <= 0) or np.any(table <= 0):
        reasons.append("zero populations: -ln p is singular")
        with np.errstate(divide="ignore"):
            cond = table / np.where(pf > 0, pf, 1)[:, None]
    else:
        cond = table / pf[:, None]
    with np.errstate(divide="ignore"):
        floors = -np.log(pf)
        ladders = -np.log(cond)
    if not order_compatible(ef, floors):
        reasons.append("floor populations are not passive with respect to the floor Hamiltonian")
    for i in range(ef.size):
        if not order_compatible(es, ladders[i]):
            reasons.append(f"conditional populations on floor {i} are not passive with respect to the ladder Hamiltonian")
            break
    groups = _group_by_energy(ef)
    tf = _tol(floors[np.isfinite(floors)]) if np.any(np.isfinite(floors)) else TOL
    for g in groups:
        if np.ptp(floors[g]) > tf:
            reasons.append("degenerate floor levels carry distinct populations")
            break
    try:
        wc, _ = min_nonzero_gap(ef)
    except DomainError:
        wc = np.nan
        reasons.append("floor spectrum has no nonzero gap")
    ws, _ = spectral_range(es)
    if ws <= 0:
        reasons.append("ladder subsystem has zero spectral range")
    tops = np.array([floors[i] + np.max(ladders[i]) for i in range(ef.size)])
    bots = np.array([floors[i] + np.min(ladders[i]) for i in range(ef.size)])
    span = float(np.max(np.ptp(ladders, axis=1))) if np.all(np.isfinite(ladders)) else np.inf
    beta_bar = None
    if mode == "athermal":
        bc = sf.beta
        pl = np.asarray(table.sum(axis=0))
        beta_bar = float(np.log(pl.max() / pl.min()) / wc) if pl.min() > 0 and np.isfinite(wc) else np.inf
        trace.append(f"ladder span ln(p_max/p_min) = {span:.12g}; beta_bar_star = {beta_bar:.12g}")
        if bc < beta_bar * (1 - 1e-12):
            reasons.append(f"ladders overlap: beta_c = {bc:.6g} < beta_bar_star = {beta_bar:.6g}")
        beff_f = bc
        beff_s = bc * wc / ws if ws > 0 else np.nan
        trace.append(f"keep beta_c = {bc:.12g}; beta_s_eff = beta_c*omega_c_min/omega_s_max = {beff_s:.12g}")
    elif mode == "correlated":
        need = []
        for g1, g2 in zip(groups[:-1], groups[1:]):
            de = ef[g2[0]] - ef[g1[0]]
            need.append((np.max(ladders[g1]) - np.min(ladders[g2])) / de)
            if np.max(tops[g1]) > np.min(bots[g2]) + TOL * (1 + abs(np.max(tops[g1]))):
                reasons.append("ladders overlap in the initial state")
        beff_f = float(max(0.0, max(need))) if need else 0.0
        trace.append(f"floors -> beta_c_eff * E_c with beta_c_eff = {beff_f:.12g} (smallest stacking-preserving value)")
        beff_s = beff_f * wc / ws if ws > 0 else np.nan
        trace.append(f"ladders -> beta_h_eff * E_h with beta_h_eff = {beff_s:.12g} (largest non-crossing slope)")
    else:
        raise ValidationError(f"unknown effective-beta mode {mode!r}")
    reasons = list(dict.fromkeys(reasons))
    Hf, Hs = setup.hamiltonian(f), setup.hamiltonian(s)
    if np.isfinite(beff_f) and np.isfinite(beff_s):
        op = HermitianOperator(beff_f * Hf.matrix + beff_s * Hs.matrix, "B_eff")
    else:
        op = HermitianOperator(0 * Hf.matrix, "B_eff")
    try:
        B = build_B(setup)
        check = validate_deformation(B, op)
        if not check.valid:
            reasons.append(f"effective operator inverts the order of B at {check.n_violations} pairs")
        trace.append(f"validate_deformation against -ln rho0: {'ok' if check.valid else 'failed'}")
    except DomainError as exc:
        reasons.append(str(exc))
    ineq = DeltaInequality(None, op, "effective_ci", "beta_c_eff Delta<H_c> + beta_h_eff Delta<H_h> >= 0")
    betas = {sf.label: float(beff_f), ss.label: float(beff_s)}
    return EffectiveBetaReport(betas, not reasons, tuple(reasons), tuple(trace), mode, op, ineq, beta_bar,
                               {"omega_floor_min": wc, "omega_ladder_max": ws})
