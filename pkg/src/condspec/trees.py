"""Exact counts of unlabelled trees and Otter's growth constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

from scipy.optimize import brentq

from .errors import InsufficientDataError, InternalConsistencyError


@dataclass(frozen=True)
class TreeCounts:
    """Rooted (``r``) and free (``m``) unlabelled tree counts; ``r[0]`` is size 1."""

    r: tuple
    m: tuple

    @property
    def horizon(self) -> int:
        return len(self.r)

    def rooted(self, j: int) -> int:
        return self.r[j - 1]

    def unrooted(self, j: int) -> int:
        return self.m[j - 1]


def rooted_tree_counts(jmax: int) -> list[int]:
    """Rooted unlabelled tree counts ``r_1 .. r_jmax`` by the Euler transform.

    ``n r_{n+1} = sum_{k=1}^{n} (sum_{d|k} d r_d) r_{n+1-k}``, in exact integers.
    """
    if jmax < 1:
        raise ValueError(f"jmax must be >= 1, got {jmax}")
    r = [0] * (jmax + 1)
    r[1] = 1
    divsum = [0] * (jmax + 1)
    for n in range(1, jmax):
        divsum[n] = sum(d * r[d] for d in range(1, n + 1) if n % d == 0)
        total = sum(divsum[k] * r[n + 1 - k] for k in range(1, n + 1))
        q, rem = divmod(total, n)
        if rem:
            raise InternalConsistencyError(f"Euler transform not integral at n={n + 1}")
        r[n + 1] = q
    return r[1:]


def unrooted_tree_counts(r) -> list[int]:
    """Free tree counts from rooted counts via Otter's dissimilarity formula.

    ``m_n = r_n - (1/2) sum_{i=1}^{n-1} r_i r_{n-i} + [n even] r_{n/2} / 2``
    """
    rr = [0] + list(r)
    out = []
    for n in range(1, len(rr)):
        twice = 2 * rr[n] - sum(rr[i] * rr[n - i] for i in range(1, n))
        if n % 2 == 0:
            twice += rr[n // 2]
        half, rem = divmod(twice, 2)
        if rem or half < 1:
            raise InternalConsistencyError(
                f"dissimilarity formula gave non-integral or non-positive m_{n} = {twice}/2; bad rooted counts?"
            )
        out.append(half)
    return out


@lru_cache(maxsize=8)
def tree_counts(horizon: int) -> TreeCounts:
    r = rooted_tree_counts(horizon)
    return TreeCounts(tuple(r), tuple(unrooted_tree_counts(r)))


@dataclass(frozen=True)
class OtterConstants:
    rho: float
    c: float
    c_rooted: float
    rho_functional: float
    report: dict = field(default_factory=dict, compare=False)


def _neville(hs, vals):
    p = list(vals)
    n = len(p)
    for k in range(1, n):
        for i in range(n - k):
            p[i] = (hs[i + k] * p[i] - hs[i] * p[i + 1]) / (hs[i + k] - hs[i])
    return p[0]


def _rho_ratio(r, H):
    # rho_j = (r_j / r_{j+1}) (j/(j+1))^{3/2} = rho + O(j^-2); extrapolate in 1/j
    js = [H - 1 - k * (H // 8) for k in range(4)]
    vals = [(r[j - 1] / r[j]) * (j / (j + 1)) ** 1.5 for j in js]
    return _neville([1.0 / j for j in js], vals)


def _prefactor(counts, rho, H, power):
    # counts_j rho^j j^power = const + O(1/j); extrapolate in 1/j
    js = [H - k * (H // 8) for k in range(3)]
    vals = [math.exp(math.log(counts[j - 1]) + j * math.log(rho)) * j**power for j in js]
    return _neville([1.0 / j for j in js], vals)


def _rho_functional(r):
    # the rooted generating function R satisfies R(x) = x exp(sum_k R(x^k)/k) and
    # equals 1 at its singularity, so log(rho) + 1 + sum_{k>=2} R(rho^k)/k = 0
    rf = [float(v) for v in r]

    def R(x):
        return math.fsum(c * x ** (j + 1) for j, c in enumerate(rf))

    def f(x):
        return math.log(x) + 1 + math.fsum(R(x**k) / k for k in range(2, 120))

    return brentq(f, 0.30, 0.40, xtol=1e-17, rtol=1e-15)


def otter_constants(counts: TreeCounts, digits: int = 4) -> OtterConstants:
    """Estimate ``rho``, ``c`` (free trees) and ``c'`` (rooted trees).

    ``rho`` comes from the extrapolated ratio sequence at the full horizon and
    is compared with the same estimate at half the horizon; if the two differ
    in the first ``digits`` significant digits, :class:`InsufficientDataError`.
    The report also carries ``rho_functional``, a root of the functional
    equation of the rooted generating function, accurate to rounding.
    """
    H = counts.horizon
    if H < 60:
        raise InsufficientDataError(f"tree-count horizon {H} < 60")
    r, m = counts.r, counts.m
    rho_full = _rho_ratio(r, H)
    rho_half = _rho_ratio(r, H // 2)
    rel = abs(rho_full - rho_half) / rho_full
    if rel > 0.5 * 10 ** (-digits):
        raise InsufficientDataError(
            f"rho not stable to {digits} digits: {rho_full!r} (H={H}) vs {rho_half!r} (H={H // 2})"
        )
    rho_f = _rho_functional(r[: min(H, 300)])
    c = _prefactor(m, rho_f, H, 2.5)
    c_rooted = _prefactor(r, rho_f, H, 1.5)
    c_half = _prefactor(m, rho_f, H // 2, 2.5)
    report = {
        "horizon": H,
        "rho_full": rho_full,
        "rho_half": rho_half,
        "rho_rel_change": rel,
        "rho_functional": rho_f,
        "c_full": c,
        "c_half": c_half,
        "c_rel_change": abs(c - c_half) / c,
    }
    return OtterConstants(rho_full, c, c_rooted, rho_f, report)


@lru_cache(maxsize=8)
def otter_for_horizon(horizon: int) -> OtterConstants:
    return otter_constants(tree_counts(horizon))
