"""Independent reference computations used by the tests.

Nothing here imports the package's DP or enumeration code: trees are
enumerated as graphs and canonicalised, partitions come from a plain
recursion, and spectrum probabilities are products of scipy pmfs.
"""

from __future__ import annotations

import heapq
import itertools
import math
from functools import lru_cache

from scipy import stats


# ---------------------------------------------------------------- trees


def _canon(adj, v, parent) -> str:
    """AHU canonical string of the subtree rooted at ``v``."""
    return "(" + "".join(sorted(_canon(adj, w, v) for w in adj[v] if w != parent)) + ")"


@lru_cache(maxsize=None)
def rooted_trees(n: int) -> frozenset:
    """Canonical strings of all rooted unlabelled trees on ``n`` nodes, by leaf addition."""
    if n == 1:
        return frozenset({"()"})
    out = set()
    for t in rooted_trees(n - 1):
        adj = _parse(t)
        for v in range(len(adj)):
            adj[v].append(len(adj))
            adj.append([v])
            out.add(_canon(adj, 0, -1))
            adj.pop()
            adj[v].pop()
    return frozenset(out)


def _parse(s: str):
    """Adjacency lists (node 0 is the root) from an AHU string."""
    adj, stack = [], []
    for ch in s:
        if ch == "(":
            adj.append([])
            k = len(adj) - 1
            if stack:
                adj[stack[-1]].append(k)
                adj[k].append(stack[-1])
            stack.append(k)
        else:
            stack.pop()
    return adj


def _centres(adj):
    n = len(adj)
    deg = [len(a) for a in adj]
    leaves = [v for v in range(n) if deg[v] <= 1]
    left = n
    while left > 2:
        nxt = []
        for v in leaves:
            left -= 1
            for w in adj[v]:
                deg[w] -= 1
                if deg[w] == 1:
                    nxt.append(w)
        leaves = nxt
    return leaves


def free_tree_count(n: int) -> int:
    """Free unlabelled trees on ``n`` nodes: all Pruefer codes, canonicalised at the centre."""
    if n <= 2:
        return 1
    seen = set()
    for code in itertools.product(range(n), repeat=n - 2):
        adj = [[] for _ in range(n)]
        for a, b in _pruefer_edges(code, n):
            adj[a].append(b)
            adj[b].append(a)
        seen.add(min(_canon(adj, c, -1) for c in _centres(adj)))
    return len(seen)


def _pruefer_edges(code, n):
    deg = [1] * n
    for v in code:
        deg[v] += 1
    leaves = [u for u in range(n) if deg[u] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in code:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        deg[v] -= 1
        if deg[v] == 1:
            heapq.heappush(leaves, v)
    edges.append((heapq.heappop(leaves), heapq.heappop(leaves)))
    return edges


# ---------------------------------------------------------------- partitions


def partitions(n: int, largest: int | None = None):
    """Partitions of ``n`` as descending tuples, by plain recursion."""
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in partitions(n - k, k):
            yield (k,) + rest


def spectrum(parts) -> tuple:
    counts = {}
    for p in parts:
        counts[p] = counts.get(p, 0) + 1
    return tuple(sorted(counts.items()))


def poisson_conditional_law(means, n: int) -> dict:
    """``P[Z = y | sum j y_j = n]`` for independent ``Z_j ~ Po(means[j])``."""
    weights = {}
    for parts in partitions(n):
        s = spectrum(parts)
        y = dict(s)
        w = math.prod(stats.poisson.pmf(y.get(j, 0), means[j]) for j in range(1, n + 1))
        weights[s] = w
    z = math.fsum(weights.values())
    return {k: v / z for k, v in weights.items()}


def negbinom_conditional_law(params, n: int) -> dict:
    """Same for ``Z_j ~ NB(m_j, p_j)`` given as ``params[j] = (m_j, p_j)``.

    ``P[Z = s] = C(m+s-1, s) p^s (1-p)^m``, evaluated with exact binomials.
    """
    weights = {}
    for parts in partitions(n):
        y = dict(spectrum(parts))
        logw = 0.0
        for j in range(1, n + 1):
            m, p = params[j]
            s = y.get(j, 0)
            logw += math.log(math.comb(m + s - 1, s)) + s * math.log(p) + m * math.log1p(-p)
        weights[spectrum(parts)] = logw
    top = max(weights.values())
    w = {k: math.exp(v - top) for k, v in weights.items()}
    z = math.fsum(w.values())
    return {k: v / z for k, v in w.items()}


def push(law: dict, fn) -> dict:
    out = {}
    for s, p in law.items():
        k = fn(s)
        out[k] = out.get(k, 0.0) + p
    return out


def partition_sum(means, n: int) -> float:
    """``sum over spectra of prod a_j^{y_j} / y_j!``."""
    total = []
    for parts in partitions(n):
        total.append(math.prod(means[j] ** y / math.factorial(y) for j, y in spectrum(parts)))
    return math.fsum(total)
