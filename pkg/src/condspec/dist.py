"""Truncated integer-valued distributions and the operations the engine needs.

A :class:`Pmf` keeps an explicit window of probabilities starting at
``offset`` and an explicit ``tail``: the mass of all points above the window.
Nothing is dropped silently; ``sum(probs) + tail == 1`` to 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .errors import DomainError, InconsistentModelError, TiltDivergenceError

DEFAULT_TAU = 1e-12
MASS_TOL = 1e-12
FLUSH = 1e-300


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function on a window ``offset .. offset+len-1``.

    ``kind`` optionally records the closed form the pmf was built from, e.g.
    ``("poisson", mean)`` or ``("negbinom", m, p)``; tilting uses it to
    re-evaluate the law exactly instead of reweighting a truncated window.
    ``capped`` marks a pmf whose ``tail`` is an overflow bucket (the mass
    above a cap) rather than a truncation remainder bounded by ``tau``.
    """

    probs: np.ndarray
    offset: int = 0
    tail: float = 0.0
    capped: bool = False
    tau: float = DEFAULT_TAU
    kind: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        probs = _readonly(self.probs)
        if probs.ndim != 1:
            raise DomainError("probs must be one-dimensional")
        if self.offset < 0:
            raise DomainError(f"offset must be non-negative, got {self.offset}")
        if np.any(probs < 0) or np.any(probs > 1 + 1e-15):
            raise DomainError("probabilities must lie in [0, 1]")
        if self.tail < 0:
            raise DomainError(f"tail mass must be non-negative, got {self.tail}")
        total = math.fsum(probs) + self.tail
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"mass not conserved: window + tail = {total!r}")
        if not self.capped and self.tail > self.tau:
            raise DomainError(f"tail {self.tail:.3g} exceeds truncation tolerance {self.tau:.3g}")
        object.__setattr__(self, "probs", probs)

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, s: int) -> float:
        i = s - self.offset
        if 0 <= i < len(self.probs):
            return float(self.probs[i])
        return 0.0

    @property
    def hi(self) -> int:
        """Largest represented support point."""
        return self.offset + len(self.probs) - 1

    def window(self, upto: int) -> np.ndarray:
        """Probabilities of ``0..upto`` as a fresh array (zero outside the window)."""
        out = np.zeros(upto + 1)
        lo = self.offset
        hi = min(self.hi, upto)
        if hi >= lo:
            out[lo : hi + 1] = self.probs[: hi - lo + 1]
        return out

    def log(self, s: int) -> float:
        p = self[s]
        return math.log(p) if p > 0 else -math.inf

    def allclose(self, other: "Pmf", atol: float) -> bool:
        n = max(self.hi, other.hi)
        return bool(np.max(np.abs(self.window(n) - other.window(n)), initial=0.0) <= atol)


@dataclass(frozen=True)
class ScaledVar:
    """The summand ``j * Z_j``."""

    j: int
    law: Pmf

    def __post_init__(self):
        if self.j < 1:
            raise DomainError(f"component size must be >= 1, got {self.j}")


def point_mass(s: int = 0) -> Pmf:
    return Pmf(np.ones(1), offset=s)


def from_window(probs, tau=DEFAULT_TAU, capped=False, offset=0) -> Pmf:
    """Wrap a window of probabilities; whatever mass is missing becomes the tail."""
    probs = np.clip(np.asarray(probs, dtype=np.float64), 0.0, 1.0)
    tail = max(0.0, 1.0 - math.fsum(probs))
    return Pmf(probs, offset=offset, tail=tail, capped=capped, tau=tau)


def _check_tau(tau):
    if not (0 < tau <= 1e-6):
        raise DomainError(f"truncation tolerance must lie in (0, 1e-6], got {tau}")


def poisson_tail_bound(mean: float, s: int) -> float:
    """Upper bound on P[X > s] for X ~ Po(mean); needs ``s + 2 > mean``."""
    if mean == 0:
        return 0.0
    if s + 2 <= mean:
        return math.inf
    nxt = math.exp(-mean + (s + 1) * math.log(mean) - math.lgamma(s + 2))
    return nxt / (1.0 - mean / (s + 2))


def pmf_poisson(mean: float, tau: float = DEFAULT_TAU, min_len: int = 1) -> Pmf:
    """Poisson law truncated at the first point whose tail bound drops below ``tau``.

    Terms are evaluated in log space, so large means do not overflow; entries
    that underflow below 1e-300 are stored as zero.
    """
    if not math.isfinite(mean) or mean < 0:
        raise DomainError(f"Poisson mean must be finite and non-negative, got {mean}")
    _check_tau(tau)
    if mean == 0:
        probs = np.zeros(max(min_len, 1))
        probs[0] = 1.0
        return Pmf(probs, tau=tau, kind=("poisson", 0.0))
    start = max(int(math.floor(mean)) - 1, 0)
    span = int(40 * math.sqrt(mean)) + 60
    s_star = None
    while s_star is None:
        for s in range(start, start + span):
            if poisson_tail_bound(mean, s) < tau:
                s_star = s
                break
        start += span
    s_star = max(s_star, min_len - 1)
    s = np.arange(s_star + 1)
    logp = -mean + s * math.log(mean) - special.gammaln(s + 1)
    probs = np.exp(logp)
    probs[probs < FLUSH] = 0.0
    tail = float(special.pdtrc(s_star, mean))
    # pdtrc and the window sum agree to rounding; let the window decide if they differ
    tail = min(tail, max(0.0, 1.0 - math.fsum(probs))) if tail > 0 else 0.0
    total = math.fsum(probs)
    if abs(total + tail - 1.0) > 0.1 * MASS_TOL:
        # large means: gammaln carries ~1e-16 relative error on a large log, so
        # terms are good to about mean * 1e-16 relatively; renormalise the window
        probs = probs * ((1.0 - tail) / total)
    return Pmf(probs, tail=tail, tau=tau, kind=("poisson", float(mean)))


def _log_of(m) -> float:
    # math.log handles arbitrarily large Python ints
    return math.log(m)


def pmf_negbinom(m, p: float, tau: float = DEFAULT_TAU, min_len: int = 1) -> Pmf:
    """NB(m, p): ``P[s] = (1-p)^m C(m+s-1, s) p^s``, ``m`` real or a big integer.

    Built from the ratio ``P[s+1]/P[s] = p(m+s)/(s+1)`` accumulated in log
    space; ``(1-p)^m`` is evaluated as ``exp(m log1p(-p))`` through logarithms
    so tree counts with hundreds of digits are fine.
    """
    if not (0 < p < 1):
        raise DomainError(f"negative binomial p must lie in (0, 1), got {p}")
    if m <= 0:
        raise DomainError(f"negative binomial shape must be positive, got {m}")
    _check_tau(tau)
    log_m = _log_of(m)
    mp = math.exp(log_m + math.log(p))  # m*p without forming m as a float
    log_p0 = -math.exp(log_m + math.log(-math.log1p(-p)))
    mf = float(m) if log_m < 700 else math.inf

    # ratio r_s = p(m+s)/(s+1) is eventually below 1; the tail beyond S is
    # at most P[S] * sum_k r^k with r the supremum of later ratios
    def ratio(s):
        return (mp + p * s) / (s + 1)

    logs = [log_p0]
    s = 0
    while True:
        r_next = ratio(s)
        sup_r = r_next if mf >= 1 else p
        if s + 1 >= min_len and sup_r < 1:
            bound = math.exp(logs[-1]) * r_next / (1 - sup_r)
            if bound < tau and s >= mp / max(1 - p, 1e-300):
                break
        logs.append(logs[-1] + math.log(r_next))
        s += 1
        if s > 10_000_000:
            raise DomainError("negative binomial window did not close")
    probs = np.exp(np.array(logs))
    probs[probs < FLUSH] = 0.0
    tail = max(0.0, 1.0 - math.fsum(probs))
    return Pmf(probs, tail=tail, tau=tau, kind=("negbinom", m, float(p)))


def negbinom_mean(m, p: float) -> float:
    return math.exp(_log_of(m) + math.log(p) - math.log1p(-p))


def tilt(law: Pmf, j: int, x: float) -> Pmf:
    """Reweight ``P[i]`` by ``x**(j*i)`` and renormalise.

    Closed-form laws are re-evaluated exactly (Poisson mean ``a x^j``,
    negative binomial ``p x^j``).  A plain window is reweighted; for ``x > 1``
    the reweighted terms must decay geometrically at the window edge, else
    :class:`TiltDivergenceError`.
    """
    if not (x > 0):
        raise DomainError(f"tilt parameter must be positive, got {x}")
    if j < 1:
        raise DomainError(f"component size must be >= 1, got {j}")
    if x == 1:
        return law
    if law.kind is not None and not law.capped:
        name = law.kind[0]
        if name == "poisson":
            return pmf_poisson(law.kind[1] * x**j, law.tau, min_len=len(law) + law.offset)
        if name == "negbinom":
            m, p = law.kind[1], law.kind[2]
            pt = math.exp(math.log(p) + j * math.log(x))
            if pt >= 1:
                raise TiltDivergenceError(
                    f"negative binomial tilt diverges: p x^j = {pt:.6g} >= 1 (j={j}, x={x})"
                )
            return pmf_negbinom(m, pt, law.tau, min_len=len(law) + law.offset)

    i = np.arange(law.offset, law.hi + 1)
    with np.errstate(divide="ignore"):
        logw = np.log(law.probs) + j * i * math.log(x)
    top = np.max(logw[np.isfinite(logw)], initial=-math.inf)
    if not math.isfinite(top):
        raise DomainError("cannot tilt a pmf with no mass in its window")
    w = np.exp(logw - top)
    # contribution of the unrepresented tail, in the same scale as w
    if law.tail > 0:
        if x < 1:
            tail_w = law.tail * math.exp(j * (law.hi + 1) * math.log(x) - top)
        else:
            if len(w) < 2 or w[-2] <= 0:
                raise TiltDivergenceError("cannot verify summability: window too short")
            r = w[-1] / w[-2]
            if r >= 1:
                raise TiltDivergenceError(
                    f"tilted terms grow at the window edge (ratio {r:.3g}); tilt by x={x} not summable"
                )
            # geometric continuation of the tilted terms; the original tail mass,
            # reweighted at the edge rate, must be dominated by it
            tail_w = w[-1] * r / (1 - r)
            edge = law.tail * math.exp(j * (law.hi + 1) * math.log(x) - top)
            if edge > tail_w * 1e6 + 1e-300:
                raise TiltDivergenceError(
                    f"tail mass {law.tail:.3g} too heavy for tilt by x={x} at j={j}"
                )
    else:
        tail_w = 0.0
    k = math.fsum(w) + tail_w
    probs = w / k
    # a finite support stays finite: rounding must not invent a tail
    tail = max(0.0, 1.0 - math.fsum(probs)) if law.tail > 0 else 0.0
    if tail > law.tau and not law.capped:
        raise TiltDivergenceError(f"tilted tail {tail:.3g} exceeds tolerance {law.tau:.3g}")
    return Pmf(probs, offset=law.offset, tail=tail, capped=law.capped, tau=law.tau)


def mean(law: Pmf) -> float:
    """Mean over the represented window."""
    s = np.arange(law.offset, law.hi + 1)
    return math.fsum(s * law.probs)


def mean_bounds(law: Pmf) -> tuple[float, float]:
    """Bracket for the full mean given the unrepresented tail.

    The lower end counts the tail at ``hi + 1``; the upper end is exact for
    closed-form laws and infinite otherwise.
    """
    m = mean(law)
    lo = m + law.tail * (law.hi + 1)
    if law.tail == 0:
        return m, m
    if law.kind is not None:
        if law.kind[0] == "poisson":
            return lo, max(lo, law.kind[1])
        if law.kind[0] == "negbinom":
            return lo, max(lo, negbinom_mean(law.kind[1], law.kind[2]))
    return lo, math.inf


def capped(law: Pmf, cap: int) -> Pmf:
    """Restrict to ``[0, cap]``; mass above the cap (and any tail) goes to overflow."""
    if cap < 0:
        raise DomainError(f"cap must be non-negative, got {cap}")
    w = law.window(cap)
    over = law.tail
    if law.hi > cap:
        over += math.fsum(law.probs[cap + 1 - law.offset :])
    return Pmf(w, tail=over, capped=True, tau=law.tau)


def scaled_convolve(acc: Pmf, v: ScaledVar, cap: int) -> Pmf:
    """Law of ``A + j Z`` on ``[0, cap]`` with an overflow bucket.

    Mass of ``v.law`` beyond its window lands in the overflow bucket.
    """
    if cap < 0:
        raise DomainError(f"cap must be non-negative, got {cap}")
    base = acc if (acc.capped and acc.hi == cap and acc.offset == 0) else capped(acc, cap)
    a = np.asarray(base.probs)
    j = v.j
    ymax = cap // j
    z = v.law.window(ymax)
    out = np.zeros(cap + 1)
    for y in range(ymax + 1):
        if z[y] == 0.0:
            continue
        sh = j * y
        out[sh:] += z[y] * a[: cap + 1 - sh]
    # mass spilling past the cap: A = t with j Z > cap - t
    zsurv = np.empty(ymax + 2)  # zsurv[k] = P[Z >= k] within the window + tail
    zsurv[ymax + 1] = max(0.0, 1.0 - math.fsum(z))
    for k in range(ymax, -1, -1):
        zsurv[k] = zsurv[k + 1] + z[k]
    t = np.arange(cap + 1)
    spill_idx = (cap - t) // j + 1
    spill = math.fsum(a * zsurv[spill_idx])
    over = base.tail + spill
    out[out < FLUSH] = 0.0
    return Pmf(out, tail=over, capped=True, tau=acc.tau)


def epsilon_profile(law: Pmf, j: int, q: float, lam_j: float, check: bool = True) -> np.ndarray:
    """Closeness-to-Poisson profile with a single summand per species.

    Returns ``eps`` with ``eps[s-1]`` the coefficient for ``s`` components:
    ``eps[0] = 1 - P[1] j^(q+1)/lam_j`` and ``eps[s-1] = P[s] j^(q+1)/lam_j``
    for ``s >= 2``.
    """
    if not (lam_j > 0):
        raise DomainError(f"lambda(j) must be positive, got {lam_j}")
    scale = j ** (q + 1) / lam_j
    # the window omits the truncated tail; judge consistency against the bracket
    lo, hi = mean_bounds(law)
    slack = (hi - mean(law)) * scale if math.isfinite(hi) else law.tail * (law.hi + 1) * scale
    if check:
        target = lam_j / j ** (q + 1)
        if not (lo * (1 - 1e-9) <= target <= hi * (1 + 1e-9)):
            raise InconsistentModelError(
                f"mean(Z_{j}) in [{lo!r}, {hi!r}] but lambda(j) j^-(q+1) = {target!r}"
            )
    smax = max(law.hi, 1)
    w = law.window(smax)
    eps = np.empty(smax)
    eps[0] = 1.0 - w[1] * scale
    eps[1:] = w[2:] * scale
    if check:
        s = np.arange(2, smax + 1)
        rhs = math.fsum(s * eps[1:])
        if abs(eps[0] - rhs) > 1e-9 + slack:
            raise InconsistentModelError(
                f"eps_j1 = {eps[0]!r} but sum s eps_js = {rhs!r} at j={j}"
            )
    return eps


def epsilon_limit_negbinom(j: int, rho: float, smax: int) -> np.ndarray:
    """Limiting profile ``s^-1 (1 - rho^j) rho^((s-1) j)`` for s = 2..smax (comparison only)."""
    s = np.arange(2, smax + 1)
    return (1 - rho**j) * np.exp((s - 1) * j * math.log(rho)) / s
