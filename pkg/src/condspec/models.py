"""Species families: the laws of the independent counts ``Z_j``.

A :class:`ModelSpec` names a family and its parameters and hands out
``species_pmf(j)``.  Means are written ``a_j = j^(-q-1) lambda(j)``.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from . import dist
from .dist import DEFAULT_TAU, Pmf
from .errors import DomainError, HorizonError, TailUnknownError
from .trees import otter_for_horizon, tree_counts

FAMILIES = (
    "poisson-power",
    "forest-unlabelled-unrooted",
    "forest-unlabelled-rooted",
    "forest-labelled-unrooted",
    "forest-labelled-rooted",
    "custom-table",
)
FOREST_Q = {
    "forest-unlabelled-unrooted": 1.5,
    "forest-unlabelled-rooted": 0.5,
    "forest-labelled-unrooted": 1.5,
    "forest-labelled-rooted": 0.5,
}
DEFAULT_HORIZON = 400
SQRT_2PI = math.sqrt(2 * math.pi)


class LambdaFn:
    """Positive function ``j -> lambda(j)`` with a cached running maximum."""

    def __init__(self, fn: Callable[[int], float], descriptor: dict):
        self._fn = fn
        self.descriptor = descriptor
        self._plus = [0.0]  # _plus[l] = max_{1<=s<=l} lambda(s)
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, value: float = 1.0) -> "LambdaFn":
        if not value > 0:
            raise DomainError(f"lambda must be positive, got {value}")
        return cls(lambda j: value, {"kind": "constant", "value": float(value)})

    @classmethod
    def log_power(cls, value: float = 1.0, power: float = 1.0) -> "LambdaFn":
        """``lambda(j) = value * log(e + j)^power``, slowly varying."""
        if not value > 0:
            raise DomainError(f"lambda scale must be positive, got {value}")
        return cls(
            lambda j: value * math.log(math.e + j) ** power,
            {"kind": "log-power", "value": float(value), "power": float(power)},
        )

    def __call__(self, j: int) -> float:
        v = self._fn(j)
        if not v > 0:
            raise DomainError(f"lambda({j}) = {v} is not positive")
        return v

    def plus(self, l: int) -> float:
        with self._lock:
            while len(self._plus) <= l:
                s = len(self._plus)
                self._plus.append(max(self._plus[-1], self(s)))
            return self._plus[l]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A species family.

    ``params`` holds family-specific values: ``A`` for poisson-power,
    ``horizon`` for the unlabelled forests, ``table`` and ``beyond`` for
    custom tables, and an optional ``tilt`` applied to every species.
    """

    family: str
    q: float
    lam: Optional[LambdaFn] = None
    params: dict = field(default_factory=dict)
    tau: float = DEFAULT_TAU
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.family in FOREST_Q and self.q != FOREST_Q[self.family]:
            raise DomainError(f"{self.family} fixes q = {FOREST_Q[self.family]}; got {self.q}")
        if not self.q > 0:
            raise DomainError(f"q must be positive, got {self.q}")
        if self.family == "poisson-power":
            if self.lam is None:
                object.__setattr__(self, "lam", LambdaFn.constant(1.0))
            if not self.params.get("A", 1.0) > 0:
                raise DomainError("A must be positive")
        if self.tilt <= 0:
            raise DomainError(f"tilt must be positive, got {self.tilt}")

    # ----- construction helpers -----
    @classmethod
    def poisson_power(cls, A=1.0, q=1.5, lam=None, tau=DEFAULT_TAU, tilt=1.0):
        params = {"A": float(A)}
        if tilt != 1:
            params["tilt"] = float(tilt)
        return cls("poisson-power", q, lam or LambdaFn.constant(1.0), params, tau)

    @classmethod
    def forest(cls, kind: str, horizon=DEFAULT_HORIZON, tau=DEFAULT_TAU, tilt=1.0):
        family = kind if kind.startswith("forest-") else "forest-" + kind
        if family not in FOREST_Q:
            raise DomainError(f"unknown forest family {kind!r}")
        params = {}
        if "unlabelled" in family:
            params["horizon"] = int(horizon)
        if tilt != 1:
            params["tilt"] = float(tilt)
        return cls(family, FOREST_Q[family], None, params, tau)

    @classmethod
    def custom(cls, table: dict, q: float = 1.5, beyond: str = "zero", tau=DEFAULT_TAU):
        """``table`` maps ``j`` to a sequence of probabilities ``P[Z_j = s]``, s = 0, 1, ..."""
        rows = {}
        for j, probs in table.items():
            j = int(j)
            if j < 1:
                raise DomainError(f"custom table index must be >= 1, got {j}")
            rows[j] = tuple(float(p) for p in probs)
        if beyond not in ("zero", "error"):
            raise DomainError(f"beyond must be 'zero' or 'error', got {beyond!r}")
        return cls("custom-table", q, None, {"table": rows, "beyond": beyond}, tau)

    def tilted(self, x: float) -> "ModelSpec":
        params = dict(self.params)
        params["tilt"] = self.tilt * x
        return ModelSpec(self.family, self.q, self.lam, params, self.tau)

    @property
    def tilt(self) -> float:
        return float(self.params.get("tilt", 1.0))

    @property
    def is_poisson(self) -> bool:
        return self.family in ("poisson-power", "forest-labelled-unrooted", "forest-labelled-rooted")

    @property
    def horizon(self) -> Optional[int]:
        if self.family.startswith("forest-unlabelled"):
            return int(self.params.get("horizon", DEFAULT_HORIZON))
        if self.family == "custom-table" and self.params.get("beyond") == "error":
            return max(self.params["table"])
        return None

    def _check_horizon(self, j):
        if j < 1:
            raise DomainError(f"component size must be >= 1, got {j}")
        h = self.horizon
        if h is not None and j > h:
            raise HorizonError(f"j = {j} beyond the {self.family} horizon {h}")

    # ----- forest constants -----
    @property
    def rho(self) -> float:
        return otter_for_horizon(self.horizon).rho_functional

    def _tree_count(self, j) -> int:
        tc = tree_counts(self.horizon)
        return tc.unrooted(j) if self.family.endswith("unrooted") else tc.rooted(j)

    # ----- means -----
    def base_mean(self, j: int) -> float:
        """``E Z_j`` before any tilt."""
        self._check_horizon(j)
        f = self.family
        if f == "poisson-power":
            return self.params.get("A", 1.0) * j ** (-self.q - 1) * self.lam(j)
        if f.startswith("forest-unlabelled"):
            return dist.negbinom_mean(self._tree_count(j), self.rho**j)
        if f.startswith("forest-labelled"):
            e = j - 2 if f.endswith("unrooted") else j - 1
            return math.exp(e * math.log(j) - math.lgamma(j + 1) - j)
        row = self.params["table"].get(j)
        if row is None:
            return 0.0
        return math.fsum(s * p for s, p in enumerate(row))

    def mean(self, j: int) -> float:
        """``a_j = E Z_j`` (tilt included)."""
        x = self.tilt
        if x == 1:
            return self.base_mean(j)
        if self.is_poisson:
            return self.base_mean(j) * x**j
        return dist.mean(self.species_pmf(j))

    def lam_at(self, j: int) -> float:
        """``lambda(j) = a_j j^(q+1)``; for poisson-power the supplied function itself."""
        if self.family == "poisson-power" and self.tilt == 1:
            return self.params.get("A", 1.0) * self.lam(j)
        return self.mean(j) * j ** (self.q + 1)

    # ----- species laws -----
    def species_pmf(self, j: int, upto: int = 0) -> Pmf:
        """Law of ``Z_j``; the window covers at least ``0..upto``."""
        self._check_horizon(j)
        key = (j, upto)
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        law = self._build(j, upto)
        with self._lock:
            self._cache.setdefault(key, law)
            return self._cache[key]

    def _build(self, j, upto):
        f = self.family
        n = upto + 1
        x = self.tilt
        if f == "poisson-power" or f.startswith("forest-labelled"):
            return dist.pmf_poisson(self.base_mean(j) * x**j, self.tau, min_len=n)
        if f.startswith("forest-unlabelled"):
            p = math.exp(j * math.log(self.rho * x))
            if p >= 1:
                from .errors import TiltDivergenceError

                raise TiltDivergenceError(f"tilted forest law diverges at j={j}: (rho x)^j >= 1")
            return dist.pmf_negbinom(self._tree_count(j), p, self.tau, min_len=n)
        row = self.params["table"].get(j)
        if row is None:
            base = dist.point_mass(0)
        else:
            base = dist.from_window(row, tau=self.tau)
        if x != 1:
            base = dist.tilt(base, j, x)
        if len(base) < n and base.tail == 0:
            base = Pmf(base.window(upto), tail=0.0, tau=self.tau)
        return base

    def p_zero(self, j: int) -> float:
        return self.species_pmf(j)[0]

    # ----- tails beyond an index -----
    def tail_mean_bracket(self, J: int) -> tuple[float, float, bool]:
        """Bracket ``(lo, hi, rigorous)`` for ``sum_{j>J} a_j``."""
        f = self.family
        x = self.tilt
        if f == "custom-table":
            table = self.params["table"]
            if self.params.get("beyond") != "zero":
                raise TailUnknownError("custom table declares no tail beyond its rows")
            s = math.fsum(self.mean(j) for j in table if j > J)
            return s, s, True
        if x > 1:
            raise TailUnknownError("no tail bound for a model tilted by x > 1")
        if f == "poisson-power":
            A = self.params.get("A", 1.0)
            d = self.lam.descriptor
            if x < 1:
                # a_j x^j <= a_{J+1} x^{J+1} / (1 - x) is crude but certified for decreasing a_j
                hi = self._poisson_power_tail(J, A, d)[1] * x ** (J + 1)
                return 0.0, hi, True
            return self._poisson_power_tail(J, A, d)
        if f.startswith("forest-labelled"):
            s_exp = 2.5 if f.endswith("unrooted") else 1.5
            hi = float(special.zeta(s_exp, J + 1)) / SQRT_2PI * x ** (J + 1)
            lo = hi * math.exp(-1.0 / (12 * (J + 1)))
            return (lo if x == 1 else 0.0), hi, True
        # unlabelled forests: lambda(j) has settled to its limit near the horizon;
        # bracket by its range over the last quarter, widened by 2% (not rigorous)
        H = self.horizon
        lams = [self.lam_at(j) for j in range(max(1, 3 * H // 4), H + 1)]
        z = float(special.zeta(self.q + 1, J + 1))
        hi = max(lams) * 1.02 * z
        if x != 1:
            # tilting by x < 1 scales each tail mean by at most x^j
            return 0.0, hi * x ** (J + 1), False
        return min(lams) * 0.98 * z, hi, False

    def _poisson_power_tail(self, J, A, d):
        s = self.q + 1
        if d["kind"] == "constant":
            v = A * d["value"] * float(special.zeta(s, J + 1))
            return v * (1 - 1e-13), v * (1 + 1e-13), True
        if d["kind"] == "log-power":
            c, k = d["value"], d["power"]

            def g(t):
                return c * math.log(math.e + t) ** k * t ** (-s)

            # g decreasing on [J, inf) makes the sum lie between the two integrals
            t = np.geomspace(max(J, 1), max(J, 1) * 1e6, 400)
            vals = np.array([g(v) for v in t])
            if np.any(np.diff(vals) > 0):
                raise TailUnknownError(f"lambda j^(-q-1) not decreasing beyond J={J}")
            lo = integrate.quad(g, J + 1, math.inf, limit=200)[0]
            hi = integrate.quad(g, J, math.inf, limit=200)[0]
            return A * lo * (1 - 1e-9), A * hi * (1 + 1e-9), True
        raise TailUnknownError(f"no tail bound for lambda kind {d['kind']!r}")

    def tail_zero_bracket(self, J: int) -> tuple[float, float, bool]:
        """Bracket for ``prod_{j>J} P[Z_j = 0]``."""
        lo_s, hi_s, rig = self.tail_mean_bracket(J)
        if self.is_poisson or self.family == "custom-table" and lo_s == hi_s == 0:
            return math.exp(-hi_s), math.exp(-lo_s), rig
        if self.family == "custom-table":
            # P[Z=0] >= 1 - E Z, with the product bounded via exp(-s/(1-s)) for small s
            if hi_s >= 0.5:
                raise TailUnknownError("custom tail mass too large to bracket")
            return math.exp(-hi_s / (1 - hi_s)), 1.0, rig
        # negative binomial: -log P[Z_j=0] = m_j(-log(1-p)) lies in [a_j (1-p), a_j]
        p_next = self.rho ** (J + 1) * self.tilt ** (J + 1)
        return math.exp(-hi_s), math.exp(-lo_s * (1 - p_next)), rig

    # ----- identity -----
    def describe(self) -> dict:
        d = {"family": self.family, "q": self.q, "tau": self.tau}
        if self.lam is not None:
            d["lambda"] = self.lam.descriptor
        for k, v in sorted(self.params.items()):
            if k == "table":
                d["table"] = {str(j): list(row) for j, row in sorted(v.items())}
            else:
                d[k] = v
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- diagnostics


@dataclass
class Diagnostics:
    """Finite-range estimates of the hypotheses on ``lambda`` and the species laws."""

    jmax: int
    smax: int
    L_hat: float
    lambda_plus_ratios: dict
    eps_hat: np.ndarray  # eps_hat[j-1]
    gamma: np.ndarray  # gamma[s-2] for s = 2..smax
    G_hat: float
    G_q_hat: float
    p0_hat: float
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "jmax": self.jmax,
            "smax": self.smax,
            "L_hat": self.L_hat,
            "lambda_plus_ratios": self.lambda_plus_ratios,
            "eps_hat": self.eps_hat.tolist(),
            "gamma": self.gamma.tolist(),
            "G_hat": self.G_hat,
            "G_q_hat": self.G_q_hat,
            "p0_hat": self.p0_hat,
            "flags": list(self.flags),
        }


def condition_diagnostics(spec: ModelSpec, jmax: int = 200, smax: int = 8) -> Diagnostics:
    """Estimate the constants in the hypotheses over ``j <= jmax``, ``s <= smax``.

    Never rejects a model: a quantity that fails to settle is listed in
    ``flags``.
    """
    if spec.horizon is not None:
        jmax = min(jmax, spec.horizon)
    q = spec.q
    lam = np.array([spec.lam_at(j) for j in range(1, jmax + 1)])  # lam[j-1]
    flags = []

    L_hat = 1.0
    for l in range(2, jmax + 1):
        t = np.arange(l // 2 + 1, l)
        if len(t):
            L_hat = max(L_hat, float(np.max(lam[l - t - 1]) / lam[l - 1]))

    lplus = np.maximum.accumulate(lam)
    grid = sorted({int(v) for v in np.geomspace(1, jmax, 12)})
    ratios = {}
    for beta in (0.1, 0.25, 0.5):
        vals = [float(lplus[l - 1] / l**beta) for l in grid]
        ratios[str(beta)] = dict(zip(grid, vals))
        if len(vals) > 3 and vals[-1] > vals[-2] > vals[-3]:
            flags.append(f"lambda+(l)/l^{beta} still increasing at l={grid[-1]}")

    eps = np.zeros((jmax, smax - 1))  # eps[j-1, s-2]
    p0 = math.inf
    for j in range(1, jmax + 1):
        law = spec.species_pmf(j, smax)
        w = law.window(smax)
        p0 = min(p0, w[0])
        eps[j - 1] = w[2:] * j ** (q + 1) / lam[j - 1]
    eps_j = eps.max(axis=1)
    pos = eps_j > 0
    if np.any(pos):
        gamma = np.max(eps[pos] / eps_j[pos, None], axis=0)
    else:
        gamma = np.zeros(smax - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps_hat = np.where(gamma > 0, eps / gamma, 0.0).max(axis=1)
    s = np.arange(2, smax + 1)
    G_hat = float(np.sum(s * gamma))
    L_s = np.ones(smax - 1)
    for k, sv in enumerate(s):
        ls = np.arange(sv, jmax + 1)
        L_s[k] = float(np.max(lam[ls // sv - 1] / lam[ls - 1])) if len(ls) else 1.0
    G_q_hat = float(np.sum(L_s * s ** (1 + q) * gamma))

    terms = s * gamma
    if G_hat > 0 and terms[-1] > 0.01 * G_hat:
        flags.append(f"G partial sums not settled: last term {terms[-1]:.3g} of {G_hat:.3g}")
    tail = eps_hat[3 * jmax // 4 :]
    head = eps_hat[jmax // 4 : jmax // 2]
    if len(tail) and len(head) and tail.max() > head.max():
        flags.append("eps(j) not decaying over the sampled range")
    if p0 <= 0:
        flags.append("min_j P[Z_j = 0] is zero")
    return Diagnostics(jmax, smax, L_hat, ratios, eps_hat, gamma, G_hat, G_q_hat, float(p0), flags)
