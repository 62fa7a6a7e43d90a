"""Finite-n profiles of the limit statements, with numerical error bars.

The limit theorems give no rates, so the profiles are meant to be read as
trends along a grid.  Error bars cover rounding and tail truncation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exact import (
    BRUTE_FORCE_GUARD,
    component_count_law,
    largest_component_law,
    limit_laws,
    prefix_table,
    qn_law,
    smallest_component_law,
    spectrum_law_bruteforce,
    suffix_table,
    t_distribution,
    tv_distance,
)
from .errors import DomainError
from .models import ModelSpec

EPS = 2.220446049250313e-16


@dataclass
class ConvergenceProfile:
    abscissae: list
    values: list
    error_bars: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = list(self.abscissae)
        if any(b <= c for c, b in zip(a, a[1:])):
            raise DomainError("abscissae must be strictly increasing")
        if any(e < 0 for e in self.error_bars):
            raise DomainError("error bars must be non-negative")
        if not (len(a) == len(self.values) == len(self.error_bars)):
            raise DomainError("profile columns differ in length")

    def is_decreasing(self, strict: bool = True) -> bool:
        v = self.values
        if strict:
            return all(b < a for a, b in zip(v, v[1:]))
        return all(b <= a for a, b in zip(v, v[1:]))

    def rows(self):
        return list(zip(self.abscissae, self.values, self.error_bars))


def _roundoff(n: int, value: float) -> float:
    # accumulated relative rounding over an n-step DP, with a generous factor
    return 64 * n * EPS * (abs(value) + 1.0)


def llt_value(spec: ModelSpec, b: int, n: int, l: int) -> float:
    """``|lambda(l)^-1 l^(1+q) P[T_bn = l] - 1|``."""
    if not (0 <= b <= l - 1 <= n - 1):
        raise DomainError(f"need 0 <= b <= l-1 <= n-1, got b={b}, n={n}, l={l}")
    p = suffix_table(spec, n).prob(b + 1, l) if n <= 2000 else t_distribution(spec, b, n)[l]
    return abs(l ** (1 + spec.q) * p / spec.lam_at(l) - 1.0)


def llt_profile(spec: ModelSpec, triples) -> ConvergenceProfile:
    """``H_n(l)`` for each ``(b, n, l)``; abscissa ``l``.

    ``meta["bgrid_max"]`` holds the maximum over ``b in {0, l//2, l-1}`` at
    the same ``n``, a lower bound for the maximum over all ``b``.
    """
    triples = sorted(triples, key=lambda t: t[2])
    ls, vals, errs, bmax = [], [], [], []
    for b, n, l in triples:
        v = llt_value(spec, b, n, l)
        grid = {0, l // 2, l - 1}
        m = max(llt_value(spec, bb, n, l) for bb in grid)
        ls.append(l)
        vals.append(v)
        errs.append(_roundoff(n, v))
        bmax.append(max(m, v))
    meta = {
        "model": spec.fingerprint(),
        "quantity": "H_n(l)",
        "triples": [list(t) for t in triples],
        "bgrid_max": bmax,
        "note": "finite b- and n-grids give lower bounds for the sup/max",
    }
    return ConvergenceProfile(ls, vals, errs, meta)


def llt_sup_profile(spec: ModelSpec, ls, n_factors=(1, 2, 4)) -> ConvergenceProfile:
    """Approximate ``H(l)``: max over ``n in {l, 2l, 4l}`` and ``b in {0, l//2, l-1}``."""
    vals, errs = [], []
    for l in ls:
        best = 0.0
        for f in n_factors:
            n = f * l
            for b in {0, l // 2, l - 1}:
                best = max(best, llt_value(spec, b, n, l))
        vals.append(best)
        errs.append(_roundoff(max(n_factors) * l, best))
    meta = {"model": spec.fingerprint(), "quantity": "H(l) lower bound", "n_factors": list(n_factors)}
    return ConvergenceProfile(list(ls), vals, errs, meta)


def tv_to_qn(spec: ModelSpec, ns, delta: float = 1e-6) -> ConvergenceProfile:
    """``d_TV(L(C^(n)), Q_n)`` with error bars from the uncovered masses."""
    ns = sorted(ns)
    vals, errs = [], []
    for n in ns:
        if n > BRUTE_FORCE_GUARD:
            raise DomainError(f"n = {n} exceeds the brute-force guard {BRUTE_FORCE_GUARD}")
        res = tv_distance(spectrum_law_bruteforce(spec, n), qn_law(spec, n, delta))
        vals.append(res.value)
        errs.append(res.error + _roundoff(n, res.value))
    return ConvergenceProfile(ns, vals, errs, {"model": spec.fingerprint(), "quantity": "d_TV(C^(n), Q_n)", "delta": delta})


def small_counts_identity(spec: ModelSpec, n: int, b: int) -> float:
    """``sum_j P[T_0b = j] {1 - P[T_bn = n-j] / P[T_0n = n]}_+``; mass of ``T_0b > n`` counts fully."""
    if not (1 <= b < n):
        raise DomainError(f"need 1 <= b < n, got b={b}, n={n}")
    pre = prefix_table(spec, n)
    suf = suffix_table(spec, n)
    t0b = pre.column(b)
    over = float(pre.table.overflow[b])
    lnorm = suf.logprob(1, n)
    terms = []
    for j in range(n + 1):
        pj = t0b[j]
        if pj == 0:
            continue
        lp = suf.logprob(b + 1, n - j)
        ratio = math.exp(lp - lnorm) if math.isfinite(lp) else 0.0
        terms.append(pj * max(0.0, 1.0 - ratio))
    return math.fsum(terms) + over


def small_counts_direct(spec: ModelSpec, n: int, b: int) -> float:
    """The same distance from the brute-force law: ``sum_x (P_C(x) - P_Z(x))_+`` over the C-support."""
    law = spectrum_law_bruteforce(spec, n)
    marg = law.marginal(lambda s: tuple(dict(s).get(j, 0) for j in range(1, b + 1)))
    windows = {j: spec.species_pmf(j, n // j).window(n // j) for j in range(1, b + 1)}
    total = []
    for x, pc in marg.items():
        pzx = 1.0
        for j, y in enumerate(x, start=1):
            pzx *= windows[j][y]
        total.append(max(0.0, pc - pzx))
    return math.fsum(total)


def small_counts_convergence(spec: ModelSpec, ns, b: int) -> ConvergenceProfile:
    """Distance of ``(C_1..C_b)`` from ``(Z_1..Z_b)``; ``meta["direct"]`` cross-checks for small n."""
    ns = sorted(ns)
    if b >= ns[0]:
        raise DomainError(f"b = {b} must be below every n")
    vals, errs, direct = [], [], {}
    for n in ns:
        v = small_counts_identity(spec, n, b)
        vals.append(v)
        errs.append(_roundoff(n, v))
        if n <= BRUTE_FORCE_GUARD:
            direct[n] = small_counts_direct(spec, n, b)
    meta = {"model": spec.fingerprint(), "quantity": f"d_TV((C_1..C_{b}), (Z_1..Z_{b}))", "b": b, "direct": direct}
    return ConvergenceProfile(ns, vals, errs, meta)


def gelation_profile(spec: ModelSpec, ns, delta: float = 1e-6, b: int = 3) -> dict:
    """Four discrepancies from the limiting picture, plus ``P[Y_n = n]`` itself.

    Keys: ``giant`` (TV of ``n - Y_n`` against ``T_0inf``), ``smallest``
    (``|P[K_n > b] - prod_{j<=b} P[Z_j = 0]|``), ``count`` (TV of ``X_n``
    against ``1 + sum Z_j``), ``connected`` (``|P[Y_n = K_n = n] - rho|``),
    ``p_connected`` and ``limits``.
    """
    ns = sorted(ns)
    cap = max(ns)
    lim = limit_laws(spec, delta, cap=cap, kmax=cap)
    t_inf = lim.t_inf.window(cap)
    t_above = lim.t_inf.tail
    count_lim = lim.count.window(cap)
    p0b = math.prod(spec.p_zero(j) for j in range(1, b + 1))
    rho_err = 0.5 * (lim.rho_bracket[1] - lim.rho_bracket[0])
    out = {k: ([], []) for k in ("giant", "smallest", "count", "connected", "p_connected")}
    for n in ns:
        y = largest_component_law(spec, n).window(n)
        k = smallest_component_law(spec, n).window(n)
        x = component_count_law(spec, n).window(n)
        gap = y[::-1][: n]  # P[n - Y_n = t] = P[Y_n = n - t], t = 0..n-1
        d_giant = 0.5 * (
            math.fsum(np.abs(gap - t_inf[:n])) + math.fsum(t_inf[n:]) + t_above
        )
        out["giant"][0].append(d_giant)
        out["giant"][1].append(lim.uncovered + _roundoff(n, d_giant))
        p_k = 1.0 - math.fsum(k[: b + 1])
        d_small = abs(p_k - p0b)
        out["smallest"][0].append(d_small)
        out["smallest"][1].append(_roundoff(n, d_small))
        d_count = 0.5 * (math.fsum(np.abs(x - count_lim[: n + 1])) + math.fsum(count_lim[n + 1 :]) + lim.count.tail)
        out["count"][0].append(d_count)
        out["count"][1].append(lim.uncovered + _roundoff(n, d_count))
        p_conn = float(y[n])
        d_conn = abs(p_conn - lim.rho_connect)
        out["connected"][0].append(d_conn)
        out["connected"][1].append(rho_err + _roundoff(n, d_conn))
        out["p_connected"][0].append(p_conn)
        out["p_connected"][1].append(_roundoff(n, p_conn))
    fp = spec.fingerprint()
    profiles = {
        name: ConvergenceProfile(ns, v, e, {"model": fp, "quantity": name, "delta": delta, "b": b})
        for name, (v, e) in out.items()
    }
    profiles["limits"] = lim
    return profiles
