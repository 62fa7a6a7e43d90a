"""Command line front end.

Every command prints its table (CSV by default, JSON with ``--format json``)
to stdout or to ``--out``, and one summary line to stderr.  Relative
``--out`` paths are placed under ``$CONDSPEC_OUTPUT_DIR`` when that is set.

Exit codes: 0 success, 2 bad usage, 3 domain error, 4 unparseable model
file, 5 horizon or brute-force guard exceeded, 6 tilt divergence,
7 inconsistent model, 8 conditioning on a null event, 9 enumeration budget,
10 unknown tail, 11 insufficient tree-count data, 12 sampler exhausted,
13 wrong family, 14 internal consistency failure, 20 a verification
command ran but its check failed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path

from . import asymptotics, exact, export
from .dist import DEFAULT_TAU
from .errors import VERIFICATION_FAILED, CondSpecError, DomainError, SizeError
from .modelfile import load_model
from .models import DEFAULT_HORIZON, FAMILIES, FOREST_Q, LambdaFn, ModelSpec, condition_diagnostics
from .sampling import RNG_NAME, SamplerState, sample_spectrum_exact, sample_spectrum_rejection
from .trees import otter_constants, tree_counts

OUTPUT_ENV = "CONDSPEC_OUTPUT_DIR"


def _ints(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}")


def _model_args(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", default="poisson-power", choices=FAMILIES, help="model family")
    g.add_argument("--model-file", help="YAML model file (overrides --model and its parameters)")
    g.add_argument("--q", type=float, default=1.5, help="exponent q > 0 (poisson-power)")
    g.add_argument("--A", type=float, default=1.0, help="scale A (poisson-power)")
    g.add_argument("--lambda-kind", default="constant", choices=("constant", "log-power"))
    g.add_argument("--lambda-value", type=float, default=1.0)
    g.add_argument("--lambda-power", type=float, default=1.0)
    g.add_argument("--horizon", type=int, default=DEFAULT_HORIZON, help="tree-count horizon (unlabelled forests)")
    g.add_argument("--tau", type=float, default=DEFAULT_TAU, help="species truncation tolerance")
    g.add_argument("--tilt", type=float, default=1.0, help="tilt x applied to every species")


def _out_args(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help=f"output file (relative paths go under ${OUTPUT_ENV} if set)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="condspec", description="Random decomposable structures in the convergent case.")
    sub = ap.add_subparsers(dest="command", required=True)

    def cmd(name, help, model=True):
        p = sub.add_parser(name, help=help)
        if model:
            _model_args(p)
        _out_args(p)
        return p

    p = cmd("dist", "law of Z_j, or of T_bn when --n is given")
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--n", type=int)
    p.add_argument("--b", type=int, default=0)

    p = cmd("spectrum", "full conditional spectrum law by enumeration (n <= 40)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--qn", action="store_true", help="emit the limiting law Q_n instead")
    p.add_argument("--delta", type=float, default=1e-6)

    p = cmd("marginal", "conditional law of C_j")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--j", type=int, required=True)

    p = cmd("corollary", "laws of the largest (Y_n) and smallest (K_n) sizes and the count X_n")
    p.add_argument("--n", type=int, required=True)

    p = cmd("limits", "laws at n = infinity: T_0inf, 1 + sum Z_j and the connectedness limit")
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--cap", type=int, default=400)

    p = cmd("verify-llt", "local limit profile H_n(l), checked for strict decrease")
    p.add_argument("--ls", type=_ints, default=[50, 100, 200, 400])
    p.add_argument("--b", type=int, default=0)
    p.add_argument("--n-factor", type=int, default=1, help="n = factor * l")
    p.add_argument("--baseline", type=float, help="expected final value")
    p.add_argument("--baseline-tol", type=float, default=1e-9)

    p = cmd("verify-tv", "total-variation profiles, checked for strict decrease")
    p.add_argument("--what", choices=("qn", "small-counts", "gelation"), default="qn")
    p.add_argument("--ns", type=_ints)
    p.add_argument("--b", type=int, default=3)
    p.add_argument("--delta", type=float, default=1e-6)

    p = cmd("verify-recursion", "residual of the size-biased recursion for T_bn")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--bs", type=_ints, help="values of b (default 0, n/4, n-1)")
    p.add_argument("--tol", type=float, default=1e-10)

    p = cmd("sample", "draw spectra (sparse CSV dump)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--method", choices=("exact", "rejection"), default="exact")
    p.add_argument("--max-tries", type=int, default=1_000_000)

    p = cmd("trees", "rooted and free unlabelled tree counts", model=False)
    p.add_argument("--horizon", type=int, default=10)

    p = cmd("diagnostics", "finite-range estimates of the hypotheses")
    p.add_argument("--jmax", type=int, default=200)
    p.add_argument("--smax", type=int, default=8)

    p = cmd("partition-fn", "partition function c_n for Poisson species")
    p.add_argument("--ns", type=_ints, default=[5, 10, 20])
    p.add_argument("--check", action="store_true", help="compare with the partition sum (n <= 40)")
    return ap


# ------------------------------------------------------------------ plumbing


def resolve_model(a) -> ModelSpec:
    if a.model_file:
        return load_model(a.model_file)
    fam = a.model
    if fam == "poisson-power":
        lam = LambdaFn.constant(a.lambda_value) if a.lambda_kind == "constant" else LambdaFn.log_power(
            a.lambda_value, a.lambda_power
        )
        return ModelSpec.poisson_power(A=a.A, q=a.q, lam=lam, tau=a.tau, tilt=a.tilt)
    if fam in FOREST_Q:
        return ModelSpec.forest(fam, horizon=a.horizon, tau=a.tau, tilt=a.tilt)
    raise DomainError("custom-table models must be given with --model-file")


class Result:
    """Table plus metadata; ``ok`` is False when a verification check fails."""

    def __init__(self, kind, columns, rows, meta=None, extra=None, ok=True, text=None):
        self.kind = kind
        self.columns = columns
        self.rows = rows
        self.meta = meta or {}
        self.extra = extra or {}
        self.ok = ok
        self.text = text  # preformatted body (sample dumps)

    def render(self, fmt: str) -> str:
        if self.text is not None:
            return self.text
        if fmt == "json":
            payload = {"columns": self.columns, "rows": [list(r) for r in self.rows]}
            payload.update(self.extra)
            return export.json_text(self.kind, payload, self.meta)
        return export.csv_text(self.columns, self.rows, self.meta)


def _meta(spec, **kw):
    d = {"model": spec.fingerprint(), "family": spec.family, "tau": spec.tau}
    d.update(kw)
    return d


# ------------------------------------------------------------------ commands


def cmd_dist(a, spec):
    if a.n is None:
        law = spec.species_pmf(a.j)
        cols, rows = export.pmf_table(law, "s")
        return Result("species-law", cols, rows, _meta(spec, j=a.j, uncovered=law.tail))
    law = exact.t_distribution(spec, a.b, a.n)
    cols, rows = export.pmf_table(law, "t")
    return Result("weighted-sum-law", cols, rows, _meta(spec, n=a.n, b=a.b, uncovered=0.0, overflow=law.tail))


def cmd_spectrum(a, spec):
    if a.qn:
        law = exact.qn_law(spec, a.n, a.delta)
        meta = _meta(spec, n=a.n, law="Q_n", delta=a.delta, uncovered=law.uncovered, outside=law.outside)
    else:
        law = exact.spectrum_law_bruteforce(spec, a.n)
        meta = _meta(spec, n=a.n, law="conditional", uncovered=law.uncovered)
    cols, rows = export.spectrum_law_table(law)
    return Result("spectrum-law", cols, rows, meta)


def cmd_marginal(a, spec):
    law = exact.conditional_marginal(spec, a.n, a.j)
    cols, rows = export.pmf_table(law, "c")
    return Result("marginal", cols, rows, _meta(spec, n=a.n, j=a.j, uncovered=0.0))


def cmd_corollary(a, spec):
    n = a.n
    y = exact.largest_component_law(spec, n).window(n)
    k = exact.smallest_component_law(spec, n).window(n)
    x = exact.component_count_law(spec, n).window(n)
    rows = [(i, float(y[i]), float(k[i]), float(x[i])) for i in range(n + 1)]
    return Result(
        "corollary-laws", ["value", "P[Y_n=value]", "P[K_n=value]", "P[X_n=value]"], rows, _meta(spec, n=n, uncovered=0.0)
    )


def cmd_limits(a, spec):
    lim = exact.limit_laws(spec, a.delta, cap=a.cap)
    t = lim.t_inf.window(a.cap)
    c = lim.count.window(a.cap)
    rows = [(i, float(t[i]), float(c[i])) for i in range(a.cap + 1)]
    meta = _meta(
        spec,
        delta=a.delta,
        cap=a.cap,
        rho_connect=lim.rho_connect,
        rho_lo=lim.rho_bracket[0],
        rho_hi=lim.rho_bracket[1],
        uncovered=lim.uncovered,
        rigorous=lim.rigorous,
    )
    return Result("limit-laws", ["value", "P[T_0inf=value]", "P[1+sum Z=value]"], rows, meta)


def cmd_verify_llt(a, spec):
    triples = [(a.b, a.n_factor * l, l) for l in a.ls]
    prof = asymptotics.llt_profile(spec, triples)
    ok = prof.is_decreasing()
    extra = {"decreasing": ok}
    if a.baseline is not None:
        match = abs(prof.values[-1] - a.baseline) <= a.baseline_tol
        extra["baseline_match"] = match
        ok = ok and match
    rows = [(l, v, e, m) for (l, v, e), m in zip(prof.rows(), prof.meta["bgrid_max"])]
    meta = _meta(spec, quantity="H_n(l)", b=a.b, n_factor=a.n_factor, check="strictly decreasing", passed=ok)
    return Result("llt-profile", ["l", "value", "error_bar", "bgrid_max"], rows, meta, extra, ok)


def cmd_verify_tv(a, spec):
    if a.what == "qn":
        ns = a.ns or [10, 20, 40]
        prof = asymptotics.tv_to_qn(spec, ns, a.delta)
        ok = prof.is_decreasing() and all(e < 2 * a.delta for e in prof.error_bars)
        meta = _meta(spec, quantity="d_TV(C^(n), Q_n)", delta=a.delta, passed=ok)
        return Result("tv-profile", ["n", "value", "error_bar"], prof.rows(), meta, {}, ok)
    if a.what == "small-counts":
        ns = a.ns or [20, 40, 80, 160]
        prof = asymptotics.small_counts_convergence(spec, ns, a.b)
        agree = all(abs(prof.values[prof.abscissae.index(n)] - v) <= 1e-9 for n, v in prof.meta["direct"].items())
        ok = prof.is_decreasing() and agree
        rows = [(n, v, e, prof.meta["direct"].get(n, "")) for n, v, e in prof.rows()]
        meta = _meta(spec, quantity=prof.meta["quantity"], b=a.b, passed=ok)
        return Result("tv-profile", ["n", "value", "error_bar", "direct"], rows, meta, {}, ok)
    ns = a.ns or [25, 50, 100, 200]
    g = asymptotics.gelation_profile(spec, ns, a.delta, a.b)
    names = ("giant", "smallest", "count", "connected")
    ok = all(g[k].is_decreasing() for k in names)
    rows = []
    for i, n in enumerate(ns):
        row = [n]
        for k in names + ("p_connected",):
            row += [g[k].values[i], g[k].error_bars[i]]
        rows.append(row)
    cols = ["n"] + [c for k in names + ("p_connected",) for c in (k, k + "_error")]
    lim = g["limits"]
    meta = _meta(spec, delta=a.delta, b=a.b, rho_connect=lim.rho_connect, uncovered=lim.uncovered, passed=ok)
    return Result("gelation-profile", cols, rows, meta, {}, ok)


def cmd_verify_recursion(a, spec):
    n = a.n
    bs = a.bs if a.bs is not None else sorted({0, n // 4, n - 1})
    rows = []
    for b in bs:
        r = exact.poisson_recursion_residual(spec, b, n) if spec.is_poisson else exact.general_recursion_residual(spec, b, n)
        rows.append((b, r))
    ok = all(r < a.tol for _, r in rows)
    form = "poisson" if spec.is_poisson else "general"
    meta = _meta(spec, n=n, identity=form, tol=a.tol, passed=ok)
    return Result("recursion-residual", ["b", "residual"], rows, meta, {}, ok)


def cmd_sample(a, spec):
    state = SamplerState.for_model(spec, a.n, a.seed, a.stream)
    extra = {"method": a.method, "rng": RNG_NAME, "stream": a.stream}
    if a.method == "exact":
        samples = sample_spectrum_exact(state, a.N)
    else:
        samples, tries = [], []
        for _ in range(a.N):
            r = sample_spectrum_rejection(spec, a.n, state, a.max_tries, raise_on_exhaustion=True)
            samples.append(r.spectrum)
            tries.append(r.tries)
        extra["mean_tries"] = math.fsum(tries) / len(tries)
    if a.format == "json":
        return Result(
            "samples", ["n", "spectrum"], [(a.n, [list(p) for p in s]) for s in samples], _meta(spec, seed=a.seed, **extra)
        )
    return Result("samples", None, None, text=export.samples_text(samples, a.n, a.seed, spec.fingerprint(), extra))


def cmd_trees(a, spec):
    tc = tree_counts(a.horizon)
    rows = [(j, tc.rooted(j), tc.unrooted(j)) for j in range(1, a.horizon + 1)]
    meta = {"horizon": a.horizon}
    extra = {}
    if a.horizon >= 60:
        oc = otter_constants(tc)
        meta.update(rho=oc.rho, rho_functional=oc.rho_functional, c=oc.c, c_rooted=oc.c_rooted)
        extra["report"] = oc.report
    return Result("tree-counts", ["j", "r_j", "m_j"], rows, meta, extra)


def cmd_diagnostics(a, spec):
    d = condition_diagnostics(spec, a.jmax, a.smax)
    rows = [(j, float(e)) for j, e in enumerate(d.eps_hat, start=1)]
    meta = _meta(
        spec, jmax=d.jmax, smax=d.smax, L_hat=d.L_hat, G_hat=d.G_hat, G_q_hat=d.G_q_hat, p0_hat=d.p0_hat,
        flags="; ".join(d.flags) or "none",
    )
    return Result("diagnostics", ["j", "eps_hat"], rows, meta, {"report": d.as_dict()})


def cmd_partition_fn(a, spec):
    rows = []
    ok = True
    for n in a.ns:
        c = exact.partition_function(spec, n)
        if a.check:
            s = partition_sum(spec, n)
            rel = abs(c - s) / abs(s)
            ok = ok and rel < 1e-10
            rows.append((n, c, s, rel))
        else:
            rows.append((n, c))
    cols = ["n", "c_n"] + (["partition_sum", "rel_diff"] if a.check else [])
    return Result("partition-function", cols, rows, _meta(spec, check=a.check, passed=ok), {}, ok)


def partition_sum(spec: ModelSpec, n: int) -> float:
    """``sum over spectra of prod_j a_j^{y_j} / y_j!`` by enumeration."""
    if n > exact.BRUTE_FORCE_GUARD:
        raise SizeError(f"n = {n} exceeds the brute-force guard {exact.BRUTE_FORCE_GUARD}")
    a = [0.0] + [spec.mean(j) for j in range(1, n + 1)]
    terms = []
    for s in exact.spectra(n):
        terms.append(math.exp(math.fsum(y * math.log(a[j]) - math.lgamma(y + 1) for j, y in s)))
    return math.fsum(terms)


COMMANDS = {
    "dist": cmd_dist,
    "spectrum": cmd_spectrum,
    "marginal": cmd_marginal,
    "corollary": cmd_corollary,
    "limits": cmd_limits,
    "verify-llt": cmd_verify_llt,
    "verify-tv": cmd_verify_tv,
    "verify-recursion": cmd_verify_recursion,
    "sample": cmd_sample,
    "trees": cmd_trees,
    "diagnostics": cmd_diagnostics,
    "partition-fn": cmd_partition_fn,
}


def _destination(out: str | None):
    if out is None:
        return None
    p = Path(out)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    a = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        spec = None if a.command == "trees" else resolve_model(a)
        res = COMMANDS[a.command](a, spec)
        body = res.render(a.format)
    except CondSpecError as exc:
        print(f"condspec {a.command}: error: {exc}", file=stderr)
        return exc.exit_code
    dest = _destination(a.out)
    if dest is None:
        stdout.write(body)
    else:
        dest.write_text(body, encoding="utf-8")
    dt = time.perf_counter() - t0
    fp = spec.fingerprint() if spec is not None else "-"
    tau = spec.tau if spec is not None else "-"
    extra = "".join(f" {k}={res.meta[k]}" for k in ("delta", "tol") if k in res.meta)
    status = "ok" if res.ok else "check-failed"
    print(f"condspec {a.command}: model={fp} tau={tau}{extra} time={dt:.3f}s status={status}", file=stderr)
    return 0 if res.ok else VERIFICATION_FAILED


def main():  # console entry point
    sys.exit(run())
