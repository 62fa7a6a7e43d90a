"""Random spectra: exact sequential sampling and rejection sampling.

Randomness comes from numpy's counter-based Philox bit generator, keyed by
``SeedSequence(seed, spawn_key=(stream,))``; independent substreams are
derived from the stream index, never by sharing a generator.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import ConditioningImpossibleError, DomainError, ExhaustionError, InternalConsistencyError
from .exact import SpectrumLaw, SuffixTable, suffix_table
from .models import ModelSpec

RNG_NAME = "numpy.Philox4x64-10"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SamplerState:
    """Single-owner sampler: seed, stream index and the suffix table it draws from."""

    seed: int
    table: SuffixTable
    spec: ModelSpec
    stream: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self.rng = make_rng(self.seed, self.stream)

    @classmethod
    def for_model(cls, spec: ModelSpec, n: int, seed: int = 0, stream: int = 0) -> "SamplerState":
        return cls(seed, suffix_table(spec, n), spec, stream)

    def substream(self, k: int) -> "SamplerState":
        return SamplerState(self.seed, self.table, self.spec, k)


def _conditional_cdfs(state: SamplerState) -> dict:
    """Per size ``j``: row ``t`` is the CDF of ``y_j`` given remaining weight ``t``."""
    tab = state.table.table
    n = state.table.n
    out = {}
    for j in range(1, n + 1):
        ymax = n // j
        z = state.spec.species_pmf(j, ymax).window(ymax)
        cur = tab.vals[j]
        nxt = tab.vals[j + 1]
        shift = math.exp(tab.logscale[j + 1] - tab.logscale[j])
        cdf = np.zeros((n + 1, ymax + 1))
        for t in range(n + 1):
            if cur[t] <= 0:
                cdf[t] = np.nan  # unreachable remainder
                continue
            ys = np.arange(t // j + 1)
            p = z[ys] * nxt[t - j * ys] * shift / cur[t]
            c = np.cumsum(p)
            cdf[t, : len(c)] = c
            cdf[t, len(c) :] = c[-1]
        out[j] = cdf
    return out


def sample_spectrum_exact(state: SamplerState, size: Optional[int] = None, batch: int = 20000):
    """Draw from the conditional spectrum law, scanning ``j = 1..n`` with the remaining weight.

    Returns one spectrum (sparse ``((j, y_j), ...)``) or a list of ``size`` of them.
    """
    n = state.table.n
    if not state.table.prob(1, n) > 0 and not math.isfinite(state.table.logprob(1, n)):
        raise ConditioningImpossibleError(f"P[T_0n = n] = 0 for n={n}")
    cdfs = getattr(state, "_cdfs", None)
    if cdfs is None:
        cdfs = _conditional_cdfs(state)
        state._cdfs = cdfs
    want = 1 if size is None else size
    out = []
    while len(out) < want:
        m = min(batch, want - len(out))
        rem = np.full(m, n)
        ys = np.zeros((m, n + 1), dtype=np.int64)
        for j in range(1, n + 1):
            active = rem > 0
            if not active.any():
                break
            u = state.rng.random(m)
            rows = cdfs[j][rem]
            if np.isnan(rows[active]).any():
                raise InternalConsistencyError(f"reached a remainder with zero probability at j={j}")
            # rounding can leave the last CDF entry a hair below u
            y = np.minimum((u[:, None] >= rows).sum(axis=1), rem // j)
            y[~active] = 0
            ys[:, j] = y
            rem = rem - j * y
        if np.any(rem != 0):
            raise InternalConsistencyError("sampled spectrum does not have weight n")
        for row in ys:
            nz = np.nonzero(row)[0]
            out.append(tuple((int(j), int(row[j])) for j in nz))
    return out[0] if size is None else out


@dataclass
class RejectionResult:
    spectrum: Optional[tuple]
    tries: int

    @property
    def exhausted(self) -> bool:
        return self.spectrum is None


def sample_spectrum_rejection(
    spec: ModelSpec, n: int, state: SamplerState, max_tries: int = 1_000_000, raise_on_exhaustion: bool = False
) -> RejectionResult:
    """Draw independent ``(Z_1..Z_n)`` until ``sum j Z_j = n``.

    ``tries`` is the number of draws used; its mean is ``1 / P[T_0n = n]``.
    """
    if max_tries < 1:
        raise DomainError(f"max_tries must be >= 1, got {max_tries}")
    inv = getattr(state, "_inv", None)
    if inv is None or inv[0] != n:
        cdfs = []
        for j in range(1, n + 1):
            w = spec.species_pmf(j, n // j).window(n // j)
            cdfs.append(np.cumsum(w))
        inv = (n, cdfs)
        state._inv = inv
    cdfs = inv[1]
    used = 0
    block = 256
    while used < max_tries:
        m = min(block, max_tries - used)
        total = np.zeros(m, dtype=np.int64)
        draws = np.empty((m, n), dtype=np.int64)
        for j in range(1, n + 1):
            u = state.rng.random(m)
            # beyond the window means j Z_j > n: sentinel n+1 forces rejection
            z = np.searchsorted(cdfs[j - 1], u, side="right")
            draws[:, j - 1] = z
            total += j * z
        hit = np.nonzero(total == n)[0]
        if len(hit):
            i = int(hit[0])
            row = draws[i]
            spectrum = tuple((j + 1, int(row[j])) for j in np.nonzero(row)[0])
            return RejectionResult(spectrum, used + i + 1)
        used += m
        block = min(block * 2, 65536)
    if raise_on_exhaustion:
        raise ExhaustionError(f"no acceptance in {max_tries} tries")
    return RejectionResult(None, used)


def empirical_tv(samples, law: SpectrumLaw) -> float:
    """Total variation between the empirical measure of ``samples`` and ``law``."""
    if len(samples) == 0:
        raise DomainError("need at least one sample")
    counts = Counter(samples)
    N = len(samples)
    keys = set(counts) | set(law.entries)
    s = math.fsum(abs(counts.get(k, 0) / N - law[k]) for k in keys)
    return 0.5 * (s + law.outside)


def chisquare_gof(samples, law: SpectrumLaw, min_expected: float = 5.0) -> float:
    """Chi-square goodness-of-fit p-value; cells with small expectation are pooled."""
    counts = Counter(samples)
    N = len(samples)
    keys = sorted(law.entries, key=lambda k: -law[k])
    obs, exp = [], []
    pool_o, pool_e = 0.0, 0.0
    for k in keys:
        e = law[k] * N
        if e >= min_expected:
            obs.append(counts.get(k, 0))
            exp.append(e)
        else:
            pool_o += counts.get(k, 0)
            pool_e += e
    stray = sum(c for k, c in counts.items() if k not in law.entries)
    pool_o += stray
    if pool_e > 0 or pool_o > 0:
        obs.append(pool_o)
        exp.append(max(pool_e, 1e-300))
    obs = np.array(obs, dtype=float)
    exp = np.array(exp)
    exp *= obs.sum() / exp.sum()
    if len(obs) < 2:
        return 1.0
    return float(stats.chisquare(obs, exp).pvalue)
