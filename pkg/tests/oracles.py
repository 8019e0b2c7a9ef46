"""Independent brute-force reference computations used by the tests.

None of these import the package's numerical routines: they re-derive each
quantity by exhaustive enumeration, exact rational arithmetic, bisection on a
direct order test, or scipy matrix functions.
"""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment


def permutation_minimum(p, a):
    """min over permutations sigma of sum_i p[sigma(i)] a[i], by enumeration."""
    p, a = np.asarray(p, float), np.asarray(a, float)
    return min(float(np.dot(p[list(s)], a)) for s in itertools.permutations(range(p.size)))


def assignment_minimum(p, a):
    """Same minimum through the Hungarian algorithm (exact for the permutation problem)."""
    cost = np.outer(np.asarray(p, float), np.asarray(a, float))
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum())


def populations_passive(pops, values, tol=1e-12):
    """True when no pair has a strictly smaller value carrying strictly less population."""
    pops, values = np.asarray(pops, float), np.asarray(values, float)
    n = pops.size
    for i in range(n):
        for j in range(n):
            if values[i] < values[j] - tol and pops[i] < pops[j] - tol:
                return False
    return True


def _order_preserved(b, d, blocks, tol):
    for blk in blocks:
        for i in blk:
            for j in blk:
                if b[i] < b[j] - tol and d[i] > d[j] + tol:
                    return False
    return True


def xi_scan(b, a, blocks=None, bound=1e6, iters=200, tol=1e-12):
    """(xi_minus, xi_plus) by bisection on the direct test 'b + xi a never inverts a strict order of b'."""
    b, a = np.asarray(b, float), np.asarray(a, float)
    blocks = [list(range(b.size))] if blocks is None else [list(x) for x in blocks]

    def ok(x):
        return _order_preserved(b, b + x * a, blocks, tol)

    out = []
    for sign in (-1.0, 1.0):
        if ok(sign * bound):
            out.append(sign * np.inf)
            continue
        lo, hi = 0.0, bound
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if ok(sign * mid):
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15 * max(1.0, hi):
                break
        out.append(sign * lo)
    return tuple(out)


def xi_pairs_exact(b, a, blocks=None):
    """Exact thresholds from pair enumeration with Fraction inputs."""
    n = len(b)
    blocks = [list(range(n))] if blocks is None else [list(x) for x in blocks]
    lo, hi = None, None
    for blk in blocks:
        for i in blk:
            for j in blk:
                if b[i] < b[j] and a[i] != a[j]:
                    x = (b[j] - b[i]) / (a[i] - a[j])
                    if x > 0:
                        hi = x if hi is None else min(hi, x)
                    else:
                        lo = x if lo is None else max(lo, x)
    return lo, hi


def nu_scan(b, a, bound=1e6, iters=200, tol=1e-12):
    """Largest nu with both b + nu a and b - nu a order-compatible with b."""
    lo_xi, hi_xi = xi_scan(b, a, bound=bound, iters=iters, tol=tol)
    return min(hi_xi, -lo_xi)


def relative_entropy_logm(rho, sigma):
    rho, sigma = np.asarray(rho, complex), np.asarray(sigma, complex)
    return float(np.real(np.trace(rho @ (scipy.linalg.logm(rho) - scipy.linalg.logm(sigma)))))


def entropy_logm(rho):
    rho = np.asarray(rho, complex)
    return float(-np.real(np.trace(rho @ scipy.linalg.logm(rho))))


def partial_trace_einsum(rho, dims, keep):
    da, db = dims
    r = np.asarray(rho).reshape(da, db, da, db)
    return np.einsum("ijkj->ik", r) if keep == 0 else np.einsum("ijil->jl", r)


def majorizes(p, q, tol=1e-9):
    """p majorizes q: descending partial sums of p dominate those of q."""
    ps, qs = np.cumsum(np.sort(p)[::-1]), np.cumsum(np.sort(q)[::-1])
    return bool(np.all(ps >= qs - tol))


def min_swaps(perm):
    """Transpositions needed to sort perm, by repeatedly swapping an element into place."""
    arr = list(perm)
    count = 0
    for i in range(len(arr)):
        while arr[i] != i:
            j = arr[i]
            arr[i], arr[j] = arr[j], arr[i]
            count += 1
    return count


def exact(x):
    return Fraction(repr(float(x)))
