"""CSV and JSON writers for laws, profiles and sample dumps.

CSV files start with ``# key=value`` comment lines (model fingerprint,
tolerances, uncovered mass), then a header row.  JSON documents carry a
``schema`` field.  Floats are written with ``repr`` so output is
byte-identical across runs with the same inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

SCHEMA = "condspec/1"


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, big ints kept exact."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def csv_text(columns, rows, meta: dict | None = None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def json_text(kind: str, payload: dict, meta: dict | None = None) -> str:
    doc = {"schema": SCHEMA, "kind": kind}
    doc.update(meta or {})
    doc.update(payload)
    return json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n"


# ----------------------------------------------------------------- tables


def spectrum_law_table(law):
    """Dense rows ``(y_1, ..., y_n, probability)`` in decreasing probability."""
    n = law.n
    cols = [f"y_{j}" for j in range(1, n + 1)] + ["probability"]
    rows = []
    for s, p in sorted(law.entries.items(), key=lambda kv: (-kv[1], kv[0])):
        y = [0] * n
        for j, c in s:
            y[j - 1] = c
        rows.append(y + [p])
    return cols, rows


def pmf_table(pmf, name="value", upto=None):
    """Rows ``(value, probability)`` over the stored window."""
    hi = pmf.hi if upto is None else upto
    w = pmf.window(hi)
    return [name, "probability"], [(pmf.offset + i, float(p)) for i, p in enumerate(w)]


def profile_table(profile):
    return ["abscissa", "value", "error_bar"], profile.rows()


def samples_text(samples, n: int, seed: int, fingerprint: str, extra: dict | None = None) -> str:
    """Sparse dump: one row per sample, ``n`` followed by ``j:y_j`` pairs."""
    buf = io.StringIO()
    meta = {"seed": seed, "model": fingerprint, "n": n}
    meta.update(extra or {})
    for k, v in meta.items():
        buf.write(f"# {k}={_fmt(v)}\n")
    for s in samples:
        buf.write(",".join([str(n)] + [f"{j}:{y}" for j, y in s]) + "\n")
    return buf.getvalue()


def read_samples(text: str):
    """Inverse of :func:`samples_text`: returns ``(meta, [spectrum, ...])``."""
    meta, out = {}, []
    for line in text.splitlines():
        if not line:
            continue
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
            continue
        fields = line.split(",")
        out.append(tuple((int(j), int(y)) for j, y in (f.split(":") for f in fields[1:])))
    return meta, out
