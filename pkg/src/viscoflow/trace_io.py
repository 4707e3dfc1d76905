"""Trace CSV serialization.

Format: comment header lines carrying run metadata (config hash, seed, stop
cause, wall time), then a header row and one row per emitted iterate:

    n,alpha_n,x0..x{d-1},step_residual[,fixres][,y0..y{d-1}]

`step_residual` on row n is ||x_{n+1} - x_n|| (empty on the final row).
Floats are written with shortest round-trip repr, so identical runs produce
byte-identical files.
"""
from __future__ import annotations

import numpy as np


def _fmt(v):
    return repr(float(v))


def write_trace_csv(path, trace, alpha_full=None, config_sha="", seed=0,
                    every_k=1, fixres=None):
    """Write the trace; rows are thinned to every_k but the final row is
    always emitted."""
    x = trace.iterates
    k, d = x.shape[0] - 1, x.shape[1]
    if alpha_full is None:
        alpha_full = np.concatenate([trace.alpha_values, [np.nan]])
    cols = ["n", "alpha_n"] + [f"x{i}" for i in range(d)] + ["step_residual"]
    if fixres is not None:
        cols.append("fixres")
    aux = trace.aux_iterates
    if aux is not None:
        cols += [f"y{i}" for i in range(d)]
    rows = sorted(set(range(0, k + 1, every_k)) | {k})
    with open(path, "w", newline="\n") as fh:
        fh.write("# viscoflow-trace v1\n")
        fh.write(f"# config_sha256={config_sha}\n")
        fh.write(f"# seed={seed}\n")
        fh.write(f"# stop_cause={trace.stop_cause}\n")
        fh.write(f"# steps={k}\n")
        fh.write(",".join(cols) + "\n")
        for n in rows:
            parts = [str(n)]
            a = alpha_full[n] if n < len(alpha_full) else np.nan
            parts.append("" if np.isnan(a) else _fmt(a))
            parts += [_fmt(v) for v in x[n]]
            parts.append(_fmt(trace.residuals[n]) if n < k else "")
            if fixres is not None:
                parts.append(_fmt(fixres[n]))
            if aux is not None:
                parts += [_fmt(v) for v in aux[n]]
            fh.write(",".join(parts) + "\n")


class TraceReadError(ValueError):
    pass


def read_trace_csv(path):
    """Read a trace CSV back into (meta dict, column dict of float arrays)."""
    meta, header, data = {}, None, []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if "=" in body:
                        key, val = body.split("=", 1)
                        meta[key.strip()] = val.strip()
                    continue
                if header is None:
                    header = line.split(",")
                    continue
                parts = line.split(",")
                if len(parts) != len(header):
                    raise TraceReadError(f"row with {len(parts)} fields, "
                                         f"expected {len(header)}")
                data.append([float(p) if p else np.nan for p in parts])
    except OSError as e:
        raise TraceReadError(f"cannot read trace {path}: {e}") from None
    if header is None or not data:
        raise TraceReadError("trace file holds no data rows")
    arr = np.asarray(data, dtype=float)
    cols = {name: arr[:, i] for i, name in enumerate(header)}
    return meta, cols


def final_point(cols):
    xcols = sorted((c for c in cols if c.startswith("x") and c[1:].isdigit()),
                   key=lambda c: int(c[1:]))
    if not xcols:
        raise TraceReadError("trace file has no coordinate columns")
    return np.array([cols[c][-1] for c in xcols])
