"""Trace CSV and summary JSON files: writers, readers, validation.

The trace format is one row per visited iterate with a fixed column set,
written incrementally so a running solver leaves a parseable prefix behind
at any point.  Summaries are small JSON documents carrying the final
point, the config echo, and the stop reason.
"""

import csv
import json
import math

import numpy as np

TRACE_COLUMNS = ("iter", "objective", "grad_norm_sq", "lambda_min",
                 "lambda_max", "w2sq_to_ref", "wall_ns")


class TraceWriter:
    """Appends trace records to a CSV file as they arrive."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(TRACE_COLUMNS)
        self._fh.flush()

    def write(self, record):
        ref = "" if math.isnan(record.w2sq_to_ref) else repr(record.w2sq_to_ref)
        self._writer.writerow([
            record.iteration,
            repr(record.objective),
            repr(record.grad_norm_sq),
            repr(record.lambda_min),
            repr(record.lambda_max),
            ref,
            record.wall_ns,
        ])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_trace_csv(trace, path):
    """Write a completed trace in one pass."""
    with TraceWriter(path) as w:
        for rec in trace.records:
            w.write(rec)


def read_trace_csv(path):
    """Read a trace CSV into a list of per-row dicts with parsed values."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
            raise ValueError(
                f"{path}: header {reader.fieldnames} does not match {TRACE_COLUMNS}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append({
                    "iter": int(row["iter"]),
                    "objective": float(row["objective"]),
                    "grad_norm_sq": float(row["grad_norm_sq"]),
                    "lambda_min": float(row["lambda_min"]),
                    "lambda_max": float(row["lambda_max"]),
                    "w2sq_to_ref": float(row["w2sq_to_ref"]) if row["w2sq_to_ref"] else float("nan"),
                    "wall_ns": int(row["wall_ns"]),
                })
            except (TypeError, ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad trace row ({exc})") from exc
    return rows


def validate_trace_csv(path):
    """Check a trace file's schema and internal consistency.

    Verifies the exact column set, strictly increasing iteration numbers,
    finite objectives and spectral bounds, and nonnegative squared
    quantities.  Returns a small summary dict on success and raises
    ``ValueError`` naming the file and line on the first problem.
    """
    rows = read_trace_csv(path)
    prev_iter = None
    for idx, row in enumerate(rows):
        line = idx + 2
        if prev_iter is not None and row["iter"] <= prev_iter:
            raise ValueError(f"{path}:{line}: iteration numbers must increase")
        prev_iter = row["iter"]
        for key in ("objective", "lambda_min", "lambda_max"):
            if not math.isfinite(row[key]):
                raise ValueError(f"{path}:{line}: non-finite {key}")
        if row["grad_norm_sq"] < 0.0:
            raise ValueError(f"{path}:{line}: negative grad_norm_sq")
        if row["lambda_min"] > row["lambda_max"]:
            raise ValueError(f"{path}:{line}: lambda_min exceeds lambda_max")
    return {
        "rows": len(rows),
        "first_iter": rows[0]["iter"] if rows else None,
        "last_iter": rows[-1]["iter"] if rows else None,
        "final_objective": rows[-1]["objective"] if rows else None,
    }


def summary_payload(command, seed, config_echo, trace, final_cov, final_mean=None):
    """Assemble the summary document for a finished solver run."""
    last = trace.records[-1]
    payload = {
        "command": command,
        "seed": seed,
        "config": config_echo,
        "iterations": trace.iterations,
        "stop_reason": trace.stop_reason,
        "converged": trace.converged,
        "objective": last.objective,
        "grad_norm_sq": last.grad_norm_sq,
        "final": {
            "dimension": final_cov.dim,
            "mean": (np.zeros(final_cov.dim) if final_mean is None
                     else np.asarray(final_mean)).tolist(),
            "cov": final_cov.entries.flatten().tolist(),
        },
    }
    return payload


def write_summary_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_reference_point(path):
    """Read a reference covariance from a summary JSON or a dataset JSON.

    Summaries carry a ``final`` block; dataset files must contain exactly
    one atom.  Returns an SpdMatrix.
    """
    from .geometry import SpdMatrix

    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if "final" in payload:
        d = int(payload["final"]["dimension"])
        cov = np.asarray(payload["final"]["cov"], dtype=float).reshape(d, d)
        return SpdMatrix(cov)
    if "atoms" in payload:
        atoms = payload["atoms"]
        if len(atoms) != 1:
            raise ValueError(
                f"{path}: reference dataset must contain exactly one atom, "
                f"found {len(atoms)}"
            )
        d = int(payload["dimension"])
        cov = np.asarray(atoms[0]["cov"], dtype=float).reshape(d, d)
        return SpdMatrix(cov)
    raise ValueError(f"{path}: not a summary or dataset JSON")
