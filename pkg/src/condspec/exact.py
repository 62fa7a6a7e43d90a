"""Exact laws of the conditioned component spectrum.

Everything is computed by dynamic programming over the weight ``t <= n``
with explicit overflow, or by enumerating integer partitions for small
``n``.  DP columns carry their own log scale so that tilted models, whose
probabilities run far below the double range, still produce exact
conditional laws.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
from scipy.special import logsumexp

from . import dist
from .dist import Pmf, ScaledVar
from .errors import (
    BudgetError,
    ConditioningImpossibleError,
    DomainError,
    FamilyError,
    InternalConsistencyError,
    SizeError,
    TailUnknownError,
)
from .models import ModelSpec

BRUTE_FORCE_GUARD = 40

Spectrum = tuple  # sparse ((j, y_j), ...) sorted by j, y_j >= 1


# ------------------------------------------------------------------ partitions


def partitions(n: int) -> Iterator[list[int]]:
    """Integer partitions of ``n`` as ascending part lists (Kelleher's accel_asc)."""
    if n == 0:
        yield []
        return
    a = [0] * (n + 1)
    k = 1
    y = n - 1
    while k != 0:
        x = a[k - 1] + 1
        k -= 1
        while 2 * x <= y:
            a[k] = x
            y -= x
            k += 1
        l = k + 1
        while x <= y:
            a[k] = x
            a[l] = y
            yield a[: k + 2]
            x += 1
            y -= 1
        a[k] = x + y
        y = x + y - 1
        yield a[: k + 1]


def as_spectrum(parts) -> Spectrum:
    return tuple(sorted(Counter(parts).items()))


def spectrum_weight(spec: Spectrum) -> int:
    return sum(j * y for j, y in spec)


def spectra(n: int) -> Iterator[Spectrum]:
    for p in partitions(n):
        yield as_spectrum(p)


# ------------------------------------------------------------------ tables


def _species_windows(spec: ModelSpec, lo: int, hi: int, cap: int) -> dict:
    """``{j: array of P[Z_j = y], y <= cap // j}`` plus the truncated remainder."""
    out = {}
    for j in range(lo, hi + 1):
        law = spec.species_pmf(j, cap // j)
        out[j] = law.window(cap // j)
    return out


def _step(col: np.ndarray, z: np.ndarray, j: int, cap: int):
    """Convolve a column with the law of ``j Z``; returns (new column, spilled mass)."""
    out = np.zeros(cap + 1)
    ymax = len(z) - 1
    for y in range(ymax + 1):
        if z[y] == 0.0:
            continue
        sh = j * y
        out[sh:] += z[y] * col[: cap + 1 - sh]
    # P[Z >= k] including the unrepresented part, so spill is conserved
    surv = np.empty(ymax + 2)
    surv[ymax + 1] = max(0.0, 1.0 - math.fsum(z))
    for k in range(ymax, -1, -1):
        surv[k] = surv[k + 1] + z[k]
    t = np.arange(cap + 1)
    spill = math.fsum(col * surv[(cap - t) // j + 1])
    return out, spill


class _ScaledTable:
    """Rows of weight distributions on ``[0, cap]``; true value = row * exp(logscale)."""

    def __init__(self, rows: int, cap: int):
        self.cap = cap
        self.vals = np.zeros((rows, cap + 1))
        self.logscale = np.zeros(rows)
        self.overflow = np.zeros(rows)

    def _store(self, i, col, log_s, over):
        m = float(col.max()) if col.size else 0.0
        if m > 0:
            col = col / m
            log_s = log_s + math.log(m)
        self.vals[i] = col
        self.logscale[i] = log_s
        self.overflow[i] = over

    def prob(self, i: int, t: int) -> float:
        if t < 0 or t > self.cap:
            return 0.0
        v = self.vals[i, t]
        return float(v * math.exp(self.logscale[i])) if v > 0 else 0.0

    def logprob(self, i: int, t: int) -> float:
        if t < 0 or t > self.cap:
            return -math.inf
        v = self.vals[i, t]
        return math.log(v) + self.logscale[i] if v > 0 else -math.inf

    def row(self, i: int) -> np.ndarray:
        """True-scale row (may underflow to zeros for heavily tilted models)."""
        return self.vals[i] * math.exp(self.logscale[i])

    def window_mass(self, i: int) -> float:
        return math.fsum(self.vals[i]) * math.exp(self.logscale[i])


@dataclass
class SuffixTable:
    """``P[sum_{i=j}^{n} i Z_i = t]`` for ``1 <= j <= n+1`` and ``0 <= t <= n``.

    Row ``j`` of the underlying table is stored scaled; use :meth:`prob`,
    :meth:`logprob` or :meth:`column`.  ``b = j - 1`` indexes ``T_bn``.
    """

    n: int
    table: _ScaledTable = field(repr=False)

    def prob(self, j, t):
        return self.table.prob(j, t)

    def logprob(self, j, t):
        return self.table.logprob(j, t)

    def column(self, j) -> np.ndarray:
        return self.table.row(j)

    def overflow(self, j) -> float:
        return float(self.table.overflow[j])

    def mass(self, j) -> float:
        return self.table.window_mass(j) + self.overflow(j)

    @property
    def d(self) -> np.ndarray:
        """Unscaled ``(n+2, n+1)`` array ``d[j][t]``; row 0 unused."""
        return self.table.vals * np.exp(self.table.logscale)[:, None]


@dataclass
class PrefixTable:
    """``P[sum_{i=lo}^{k} i Z_i = t]`` for ``lo-1 <= k <= n``; row ``k``."""

    n: int
    lo: int
    table: _ScaledTable = field(repr=False)

    def prob(self, k, t):
        return self.table.prob(k, t)

    def logprob(self, k, t):
        return self.table.logprob(k, t)

    def column(self, k) -> np.ndarray:
        return self.table.row(k)


def suffix_table(spec: ModelSpec, n: int) -> SuffixTable:
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    key = ("suffix", n)
    hit = spec._cache.get(key)
    if hit is not None:
        return hit
    tab = _ScaledTable(n + 2, n)
    col = np.zeros(n + 1)
    col[0] = 1.0
    tab._store(n + 1, col, 0.0, 0.0)
    zs = _species_windows(spec, 1, n, n)
    for j in range(n, 0, -1):
        prev = tab.vals[j + 1]
        new, spill = _step(prev, zs[j], j, n)
        over = tab.overflow[j + 1] + spill * math.exp(tab.logscale[j + 1])
        tab._store(j, new, tab.logscale[j + 1], over)
    out = SuffixTable(n, tab)
    with spec._lock:
        spec._cache.setdefault(key, out)
    return out


def prefix_table(spec: ModelSpec, n: int, lo: int = 1) -> PrefixTable:
    """Row ``k`` holds the law of ``sum_{i=lo}^{k} i Z_i``, capped at ``n``."""
    key = ("prefix", n, lo)
    hit = spec._cache.get(key)
    if hit is not None:
        return hit
    tab = _ScaledTable(n + 1, n)
    col = np.zeros(n + 1)
    col[0] = 1.0
    tab._store(lo - 1, col, 0.0, 0.0)
    zs = _species_windows(spec, lo, n, n)
    for k in range(lo, n + 1):
        new, spill = _step(tab.vals[k - 1], zs[k], k, n)
        over = tab.overflow[k - 1] + spill * math.exp(tab.logscale[k - 1])
        tab._store(k, new, tab.logscale[k - 1], over)
    out = PrefixTable(n, lo, tab)
    with spec._lock:
        spec._cache.setdefault(key, out)
    return out


def _log_norm(spec: ModelSpec, n: int) -> float:
    """``log P[T_0n = n]``; raises if the conditioning event is null."""
    lp = suffix_table(spec, n).logprob(1, n)
    if not math.isfinite(lp):
        raise ConditioningImpossibleError(
            f"P[T_0n = n] = 0 for n={n}; the conditional law is undefined"
        )
    return lp


# ------------------------------------------------------------------ T_bn


def t_distribution(spec: ModelSpec, b: int, n: int, cap: Optional[int] = None) -> Pmf:
    """Law of ``T_bn = sum_{j=b+1}^{n} j Z_j`` on ``[0, cap]`` (default ``n``) plus overflow."""
    if not (0 <= b < n):
        raise DomainError(f"need 0 <= b < n, got b={b}, n={n}")
    cap = n if cap is None else cap
    acc = Pmf(np.eye(1, cap + 1)[0], tail=0.0, capped=True, tau=spec.tau)
    for j in range(b + 1, n + 1):
        acc = dist.scaled_convolve(acc, ScaledVar(j, spec.species_pmf(j, cap // j)), cap)
    return acc


# ------------------------------------------------------------------ spectrum laws


@dataclass
class SpectrumLaw:
    """Probabilities of spectra.

    ``outside`` is mass known to sit on spectra of total weight other than
    ``n`` (for ``Q_n``: the event ``T_0n > n``), kept as one lump because it
    can never overlap a conditional law.  ``uncovered`` is mass whose location
    is unknown; it bounds the numerical error of anything computed from the
    entries.
    """

    n: int
    entries: dict
    uncovered: float = 0.0
    outside: float = 0.0
    log_normalizer: Optional[float] = None

    def total(self) -> float:
        return math.fsum(self.entries.values())

    def __getitem__(self, key) -> float:
        return self.entries.get(key, 0.0)

    def __len__(self):
        return len(self.entries)

    def marginal(self, fn) -> dict:
        """Push forward through ``fn(spectrum)``."""
        out: dict = {}
        for s, p in self.entries.items():
            k = fn(s)
            out[k] = out.get(k, 0.0) + p
        return out

    def component_marginal(self, j: int) -> np.ndarray:
        m = self.marginal(lambda s: dict(s).get(j, 0))
        arr = np.zeros(max(m) + 1)
        for k, p in m.items():
            arr[k] += p
        return arr


def _log_species(spec: ModelSpec, n: int, upto: Optional[int] = None) -> dict:
    """``{j: log P[Z_j = y]}`` for ``j <= n`` and ``y <= upto // j`` (default ``upto = n``)."""
    upto = n if upto is None else upto
    out = {}
    with np.errstate(divide="ignore"):
        for j in range(1, n + 1):
            w = spec.species_pmf(j, upto // j).window(upto // j)
            out[j] = np.log(w)
    return out


class _LogWeights:
    """Evaluates ``log prod_{j<=n} P[Z_j = y_j]`` for sparse configurations."""

    def __init__(self, spec: ModelSpec, n: int, upto: Optional[int] = None):
        self.lp = _log_species(spec, n, upto)
        lp0 = np.array([self.lp[j][0] for j in range(1, n + 1)])
        self.null0 = {j for j in range(1, n + 1) if not np.isfinite(lp0[j - 1])}
        self.base = math.fsum(v for v in lp0 if np.isfinite(v))

    def __call__(self, config) -> float:
        if self.null0 and not self.null0.issubset(j for j, _ in config):
            return -math.inf
        total = self.base
        for j, y in config:
            lp = self.lp[j]
            if y >= len(lp):
                return -math.inf
            total += lp[y] - (lp[0] if j not in self.null0 else 0.0)
        return total


def spectrum_law_bruteforce(spec: ModelSpec, n: int, guard: int = BRUTE_FORCE_GUARD) -> SpectrumLaw:
    """Conditional spectrum law by enumerating all partitions of ``n`` (log space)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if n > guard:
        raise SizeError(f"n = {n} exceeds the brute-force guard {guard}")
    lw = _LogWeights(spec, n)
    keys = list(spectra(n))
    logs = np.array([lw(k) for k in keys])
    if not np.any(np.isfinite(logs)):
        raise ConditioningImpossibleError(f"every spectrum of weight {n} has probability zero")
    norm = float(logsumexp(logs))
    probs = np.exp(logs - norm)
    entries = {k: float(p) for k, p in zip(keys, probs) if p > 0}
    return SpectrumLaw(n, entries, 0.0, 0.0, norm)


def conditional_marginal(spec: ModelSpec, n: int, j: int) -> Pmf:
    """Law of ``C_j`` from the prefix (indices < j) and suffix (indices > j) tables."""
    if not (1 <= j <= n):
        raise DomainError(f"need 1 <= j <= n, got j={j}, n={n}")
    lnorm = _log_norm(spec, n)
    pre = prefix_table(spec, n)
    suf = suffix_table(spec, n)
    f = pre.table.vals[j - 1]
    g = suf.table.vals[j + 1]
    lscale = pre.table.logscale[j - 1] + suf.table.logscale[j + 1]
    loo = np.convolve(f, g)[: n + 1]  # scaled law of T without index j
    z = spec.species_pmf(j, n // j).window(n // j)
    ymax = n // j
    logs = np.full(ymax + 1, -math.inf)
    for y in range(ymax + 1):
        v = loo[n - j * y]
        if z[y] > 0 and v > 0:
            logs[y] = math.log(z[y]) + math.log(v) + lscale - lnorm
    probs = np.exp(logs)
    return _exact_pmf(probs, spec.tau)


def _exact_pmf(probs, tau, offset=0) -> Pmf:
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-10:
        raise InternalConsistencyError(f"conditional law sums to {total!r}")
    probs = np.clip(probs, 0.0, 1.0)
    return Pmf(probs / total if abs(total - 1) > 1e-13 else probs, offset=offset, tau=tau)


def _from_cdf(cdf: np.ndarray, tau) -> Pmf:
    diffs = np.diff(cdf, prepend=0.0)
    if np.any(diffs < -1e-12):
        raise InternalConsistencyError("CDF is not monotone")
    return _exact_pmf(np.clip(diffs, 0.0, None), tau)


def _log_p0(spec: ModelSpec, n: int) -> np.ndarray:
    """``out[j] = log P[Z_j = 0]`` for ``1 <= j <= n`` (``out[0] = 0``)."""
    out = np.zeros(n + 1)
    for j in range(1, n + 1):
        p0 = spec.p_zero(j)
        out[j] = math.log(p0) if p0 > 0 else -math.inf
    return out


def largest_component_law(spec: ModelSpec, n: int) -> Pmf:
    """Law of ``Y_n`` (index = size).

    ``P[Y_n <= k] = P[T_0k = n] prod_{k<j<=n} P[Z_j = 0] / P[T_0n = n]``
    """
    lnorm = _log_norm(spec, n)
    pre = prefix_table(spec, n)
    lp0 = _log_p0(spec, n)
    above = np.concatenate([np.cumsum(lp0[::-1])[::-1][1:], [0.0]])  # above[k] = sum_{j>k} lp0[j]
    cdf = np.zeros(n + 1)
    for k in range(1, n + 1):
        v = pre.logprob(k, n) + above[k] - lnorm
        cdf[k] = math.exp(v) if math.isfinite(v) else 0.0
    return _from_cdf(cdf, spec.tau)


def smallest_component_law(spec: ModelSpec, n: int) -> Pmf:
    """Law of ``K_n`` (index = size).

    ``P[K_n > b] = prod_{j<=b} P[Z_j = 0] P[T_bn = n] / P[T_0n = n]``
    """
    lnorm = _log_norm(spec, n)
    suf = suffix_table(spec, n)
    below = np.cumsum(_log_p0(spec, n))  # below[b] = sum_{j<=b} lp0[j]
    surv = np.zeros(n + 1)
    for b in range(n):
        v = below[b] + suf.logprob(b + 1, n) - lnorm
        surv[b] = math.exp(v) if math.isfinite(v) else 0.0
    cdf = 1.0 - surv
    cdf[0] = 0.0
    return _from_cdf(cdf, spec.tau)


def component_count_law(spec: ModelSpec, n: int, kmax: Optional[int] = None) -> Pmf:
    """Conditional law of ``X_n = sum_j C_j`` on ``[0, kmax]``; the rest is the overflow."""
    kmax = n if kmax is None else kmax
    if kmax < 1:
        raise DomainError(f"kmax must be >= 1, got {kmax}")
    lnorm = _log_norm(spec, n)
    g = np.zeros((n + 1, kmax + 1))
    g[0, 0] = 1.0
    lscale = 0.0
    for j in range(1, n + 1):
        z = spec.species_pmf(j, n // j).window(n // j)
        new = np.zeros_like(g)
        for y in range(len(z)):
            if z[y] == 0.0 or y > kmax:
                continue
            sh = j * y
            new[sh:, y:] += z[y] * g[: n + 1 - sh, : kmax + 1 - y]
        m = new.max()
        if m > 0:
            new /= m
            lscale += math.log(m)
        g = new
    with np.errstate(divide="ignore"):
        probs = np.exp(np.log(g[n]) + lscale - lnorm)
    covered = math.fsum(probs)
    if covered > 1 + 1e-10:
        raise InternalConsistencyError(f"count law mass {covered!r} exceeds one")
    return Pmf(np.clip(probs, 0, 1), tail=max(0.0, 1.0 - covered), capped=True, tau=spec.tau)


# ------------------------------------------------------------------ n = infinity


@dataclass
class LimitLaws:
    t_inf: Pmf  # law of T_0inf on [0, cap], overflow above
    rho_connect: float
    rho_bracket: tuple
    count: Pmf  # law of 1 + sum_j Z_j on [0, kmax]
    uncovered: float
    rigorous: bool
    J: int


def limit_laws(spec: ModelSpec, delta: float = 1e-6, cap: int = 400, kmax: Optional[int] = None) -> LimitLaws:
    """Laws at ``n = infinity``: ``T_0inf``, ``prod_j P[Z_j = 0]`` and ``1 + sum_j Z_j``.

    Species beyond ``cap`` can only contribute zeros inside the window, so they
    enter through the bracketed product of their zero probabilities.  The
    returned ``uncovered`` is the certified slack from the tail brackets and
    must not exceed ``delta``.
    """
    kmax = cap if kmax is None else kmax
    J = cap
    if spec.horizon is not None:
        J = min(J, spec.horizon)
    zero_lo, zero_hi, rig = spec.tail_zero_bracket(J)
    mean_lo, mean_hi, _ = spec.tail_mean_bracket(J)
    beyond_cap_unknown = J < cap

    # T_0inf
    t = dist.point_mass(0)
    t = dist.capped(t, cap)
    log_p0 = 0.0
    for j in range(1, J + 1):
        law = spec.species_pmf(j, cap // j)
        p0 = law[0]
        log_p0 += math.log(p0) if p0 > 0 else -math.inf
        t = dist.scaled_convolve(t, ScaledVar(j, law), cap)
    mid = 0.5 * (zero_lo + zero_hi)
    w = np.asarray(t.probs) * mid
    over = 1.0 - math.fsum(w)
    uncovered = math.fsum(t.probs) * 0.5 * (zero_hi - zero_lo)
    if beyond_cap_unknown:
        uncovered += mean_hi
    t_inf = Pmf(w, tail=max(0.0, over), capped=True, tau=spec.tau)

    p0_prod = math.exp(log_p0)
    rnd = 4 * (J + 1) * 2.220446049250313e-16  # rounding in the J-term log sum
    bracket = (p0_prod * zero_lo * (1 - rnd), p0_prod * zero_hi * (1 + rnd))
    rho = 0.5 * (bracket[0] + bracket[1])

    # 1 + sum_j Z_j
    c = dist.capped(dist.point_mass(0), kmax)
    for j in range(1, J + 1):
        law = spec.species_pmf(j, kmax)
        c = dist.scaled_convolve(c, ScaledVar(1, law), kmax)
    if spec.is_poisson:
        s_mid = 0.5 * (mean_lo + mean_hi)
        c = dist.scaled_convolve(c, ScaledVar(1, dist.pmf_poisson(s_mid, spec.tau, kmax + 1)), kmax)
        # Po(lo) and Po(hi) differ in total variation by at most hi - lo
        count_unc = 0.5 * (mean_hi - mean_lo)
    else:
        count_unc = mean_hi  # P[sum_{j>J} Z_j >= 1] <= sum_{j>J} a_j
    shifted = np.concatenate([[0.0], c.probs[:kmax]])
    count = Pmf(shifted, tail=c.tail + float(c.probs[kmax]), capped=True, tau=spec.tau)
    uncovered = max(uncovered, count_unc, 0.5 * (bracket[1] - bracket[0]))
    if uncovered > delta:
        raise TailUnknownError(
            f"tail beyond j={J} only certified to {uncovered:.3g} > delta={delta:.3g}"
        )
    return LimitLaws(t_inf, rho, bracket, count, uncovered, rig, J)


# ------------------------------------------------------------------ Q_n


def qn_law(
    spec: ModelSpec,
    n: int,
    delta: float = 1e-6,
    resolve_outside: bool = False,
    node_budget: int = 1_000_000,
) -> SpectrumLaw:
    """Law of ``(Z_1..Z_n) + e(n - T_0n)`` with ``e(k) = 0`` for ``k <= 0``.

    A spectrum ``y`` of weight ``n`` has preimages ``y`` itself (``T = n``) and
    ``y - e_k`` for every size ``k`` present in ``y``, so its mass is exact.
    Configurations with ``T_0n > n`` are kept as the single ``outside`` lump
    of exact mass ``P[T_0n > n]``.  With ``resolve_outside`` they are instead
    enumerated up to the smallest ``t_max`` with ``P[T_0n > t_max] < delta``.
    """
    if not (0 < delta <= 1e-3):
        raise DomainError(f"delta must lie in (0, 1e-3], got {delta}")
    lw = _LogWeights(spec, n)
    entries = {}
    for y in spectra(n):
        base = lw(y)
        terms = [base]
        ys = dict(y)
        for k, c in y:
            lp = lw.lp[k]
            if k in lw.null0 and c == 1:
                # removing the only k-component leaves P[Z_k = 0] = 0
                continue
            prev = base - lp[c] + lp[c - 1] if math.isfinite(base) else lw(
                tuple((j, v - (j == k)) for j, v in ys.items() if v - (j == k) > 0)
            )
            terms.append(prev)
        terms = [v for v in terms if math.isfinite(v)]
        if terms:
            p = float(np.exp(logsumexp(terms)))
            if p > 0:
                entries[y] = p
    tlaw = t_distribution(spec, 0, n)
    outside = float(tlaw.tail)
    law = SpectrumLaw(n, entries, 0.0, outside)
    if resolve_outside and outside > 0:
        law = _resolve_outside(spec, law, lw, n, delta, node_budget)
    law.uncovered = max(law.uncovered, abs(1.0 - law.total() - law.outside))
    return law


def _resolve_outside(spec, law, lw, n, delta, budget):
    cap = 2 * n
    while True:
        tl = t_distribution(spec, 0, n, cap=cap)
        if tl.tail < delta:
            break
        cap *= 2
        if cap > 64 * n:
            raise BudgetError(f"P[T_0n > {cap}] still >= delta; raise delta")
    cdf = np.cumsum(tl.probs)
    t_max = int(np.searchsorted(cdf, 1.0 - delta)) if cdf[-1] >= 1 - delta else cap
    t_max = max(t_max, n + 1)
    # configurations of weight t_max can hold up to t_max // j copies of size j
    lw = _LogWeights(spec, n, upto=t_max)
    nodes = 0
    for t in range(n + 1, t_max + 1):
        for parts in partitions(t):
            nodes += 1
            if nodes > budget:
                raise BudgetError(f"enumeration exceeded {budget} configurations; raise delta")
            if parts[-1] > n:
                continue
            y = as_spectrum(parts)
            v = lw(y)
            if math.isfinite(v):
                law.entries[y] = math.exp(v)
    law.outside = 0.0
    law.uncovered = float(tl.tail) + float(math.fsum(tl.probs[t_max + 1 :]))
    return law


@dataclass(frozen=True)
class TVResult:
    value: float
    error: float

    def __float__(self):
        return self.value

    @property
    def interval(self):
        return max(0.0, self.value - self.error), min(1.0, self.value + self.error)


def tv_distance(p: SpectrumLaw, q: SpectrumLaw) -> TVResult:
    """Total variation over the union of supports, with a certified error."""
    if p.n != q.n:
        raise DomainError(f"laws of different sizes: {p.n} vs {q.n}")
    keys = set(p.entries) | set(q.entries)
    s = 0.5 * math.fsum(abs(p[k] - q[k]) for k in keys)
    po, qo = p.outside, q.outside
    lo = 0.5 * abs(po - qo)
    hi = 0.5 * (po + qo)
    value = s + 0.5 * (lo + hi)
    error = 0.5 * (hi - lo) + p.uncovered + q.uncovered
    return TVResult(value, error)


# ------------------------------------------------------------------ identities


def partition_function(spec: ModelSpec, n: int) -> float:
    """``c_n = exp(sum_{j<=n} a_j) P[T_0n = n]`` for Poisson species."""
    if not spec.is_poisson:
        raise FamilyError(f"partition function needs Poisson species, not {spec.family}")
    s = math.fsum(spec.mean(j) for j in range(1, n + 1))
    lp = suffix_table(spec, n).logprob(1, n)
    return math.exp(s + lp) if math.isfinite(lp) else 0.0


def poisson_recursion_residual(spec: ModelSpec, b: int, n: int, law: Optional[Pmf] = None) -> float:
    """Largest round-off residual of ``l P[T=l] = sum_j j a_j P[T=l-j]`` over ``b < l <= n``.

    ``law`` substitutes another law of ``T_bn`` (e.g. one built from perturbed
    species) while keeping the Poisson weights ``j a_j`` of ``spec``.
    """
    if not spec.is_poisson:
        raise FamilyError(f"Poisson recursion needs Poisson species, not {spec.family}")
    law = t_distribution(spec, b, n) if law is None else law
    p = law.window(n)
    w = np.zeros(n + 1)
    for j in range(b + 1, n + 1):
        w[j] = j * spec.mean(j)  # j^-q lambda(j)
    worst = 0.0
    for l in range(b + 1, n + 1):
        js = np.arange(b + 1, l + 1)
        rhs = math.fsum(w[js] * p[l - js])
        worst = max(worst, abs(l * p[l] - rhs))
    return worst


def _loo_laws(spec: ModelSpec, b: int, n: int) -> dict:
    """``{j: law of T_bn - j Z_j on [0, n]}`` for ``b < j <= n``."""
    pre = prefix_table(spec, n, lo=b + 1)
    suf = suffix_table(spec, n)
    out = {}
    for j in range(b + 1, n + 1):
        f = pre.column(j - 1)
        g = suf.column(j + 1)
        out[j] = np.convolve(f, g)[: n + 1]
    return out


def general_recursion_residual(spec: ModelSpec, b: int, n: int) -> float:
    """Largest residual of the perturbed recursion with one summand per species.

    ``l P[T=l]`` against the Poisson part, the ``(1 - eps_j1)`` correction on
    the leave-one-out law ``T^(j)``, and the ``s >= 2`` terms.
    """
    q = spec.q
    p = t_distribution(spec, b, n).window(n)
    loo = _loo_laws(spec, b, n)
    coef = {}
    eps = {}
    for j in range(b + 1, n + 1):
        law = spec.species_pmf(j, n // j)
        lam_j = spec.lam_at(j)
        coef[j] = j ** (-q) * lam_j
        eps[j] = dist.epsilon_profile(law, j, q, lam_j)
    worst = 0.0
    for l in range(b + 1, n + 1):
        line1 = math.fsum(coef[j] * p[l - j] for j in range(b + 1, min(l, n) + 1))
        line2 = math.fsum(
            coef[j] * ((1 - eps[j][0]) * loo[j][l - j] - p[l - j]) for j in range(b + 1, min(l, n) + 1)
        )
        line3 = 0.0
        for j in range(b + 1, min(l // 2, n) + 1):
            e = eps[j]
            for s in range(2, min(l // j, len(e)) + 1):
                line3 += coef[j] * s * e[s - 1] * loo[j][l - j * s]
        worst = max(worst, abs(l * p[l] - (line1 + line2 + line3)))
    return worst


def upper_bound_constant(spec: ModelSpec, n: int) -> float:
    """``max_{l<=n, b in {0, floor(l/2)}} P[T_bn = l] l^(1+q) / lambda(l)``."""
    suf = suffix_table(spec, n)
    q = spec.q
    best = 0.0
    for l in range(1, n + 1):
        scale = l ** (1 + q) / spec.lam_at(l)
        for b in {0, l // 2}:
            best = max(best, suf.prob(b + 1, l) * scale)
    return best
