"""Experiment drivers behind the dim-sweep and robustness commands.

Both produce plain row dictionaries so the CLI can write CSV tables and
the test suite can assert on the same numbers without going through the
filesystem.
"""

import csv
import hashlib

import numpy as np

from .barycenter import (
    DiscreteDistribution,
    SolverConfig,
    run_bary_gd,
    variance_of,
)
from .datasets import GenSpec, generate
from .geometry import SpdMatrix, w2_squared
from .median import MedianConfig, run_median_gd


def derive_seed(master, label):
    """Stable 64-bit sub-seed for ``label`` under a master seed.

    Labeled hashing keeps every consumer's stream independent of the
    others, so adding a new labeled draw never shifts existing ones.
    """
    digest = hashlib.sha256(f"{label}:{master}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def passes_until(trace, target):
    """First recorded iteration whose squared distance to the reference is below target."""
    for rec in trace.records:
        if rec.w2sq_to_ref <= target:
            return rec.iteration
    return None


def dim_sweep(dims=(5, 20, 50), n=50, alpha=1e-3, beta=1.0,
              r_exponents=(3,), seed=0, ref_grad_tol=1e-13, max_iters=2000):
    """Passes-to-convergence of gradient descent across dimensions.

    For each dimension a fresh family is generated (Haar eigenbasis,
    linearly spaced eigenvalues in ``[alpha, beta]``), a reference run
    resolves the barycenter to near machine precision, and a second
    identical run counts the iterations until the squared distance to the
    reference falls below ``10^-r`` times the variance, for each exponent
    ``r``.

    The default eigenvalue range keeps the condition number at 1000 while
    holding the spectra at unit scale; larger absolute scales push the
    double-precision gradient floor above ``ref_grad_tol`` in high
    dimension and the reference run would then exhaust its budget.

    Returns
    -------
    list of dict
        One row per (dimension, exponent) with keys ``d``, ``r``,
        ``passes``, ``var_p``, ``ref_iterations``, ``ref_grad_norm_sq``.
    """
    rows = []
    for d in dims:
        spec = GenSpec(method=1, n=n, d=d, alpha=alpha, beta=beta,
                       seed=derive_seed(seed, f"dim-sweep:d={d}"))
        p = generate(spec)
        ref_cfg = SolverConfig(max_iters=max_iters, grad_tol=ref_grad_tol)
        ref, ref_trace = run_bary_gd(p, config=ref_cfg)
        var_p = variance_of(p, ref)
        run_cfg = SolverConfig(max_iters=ref_trace.iterations, grad_tol=0.0)
        _, trace = run_bary_gd(p, config=run_cfg, reference=ref)
        for r in r_exponents:
            target = 10.0 ** (-r) * var_p
            rows.append({
                "d": d,
                "r": r,
                "passes": passes_until(trace, target),
                "var_p": var_p,
                "ref_iterations": ref_trace.iterations,
                "ref_grad_norm_sq": ref_trace.records[-1].grad_norm_sq,
            })
    return rows


def write_dim_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d", "r", "passes", "var_p", "ref_iterations",
                         "ref_grad_norm_sq"])
        for row in rows:
            writer.writerow([row["d"], row["r"], row["passes"],
                             repr(row["var_p"]), row["ref_iterations"],
                             repr(row["ref_grad_norm_sq"])])


def _scale_contaminated(p, scale, fraction):
    count = int(np.floor(fraction * p.size))
    covs = []
    for i, a in enumerate(p.atoms):
        cov = a.cov
        if i < count:
            cov = SpdMatrix.from_eigh(cov.eigenvalues * scale, cov.eigenvectors)
        covs.append(cov)
    return DiscreteDistribution.from_covariances(covs, p.weights)


def robustness(n=20, d=10, alpha=1.0, beta=10.0, scales=(1.0, 2.0, 5.0, 10.0, 20.0),
               fraction=0.45, epsilon=0.5, seed=0, max_iters=3000):
    """Shift of the barycenter and the median under scaled contamination.

    A contaminated copy of the family multiplies the covariances of the
    first ``floor(fraction n)`` atoms by each scale; the rows record how
    far (in W2) each solver's output moves from its clean-data output.

    Returns
    -------
    list of dict
        One row per scale with keys ``scale``, ``median_shift``,
        ``barycenter_shift``.
    """
    spec = GenSpec(method=2, n=n, d=d, alpha=alpha, beta=beta,
                   seed=derive_seed(seed, "robustness"))
    p = generate(spec)
    bary_cfg = SolverConfig(max_iters=max_iters, grad_tol=1e-11)
    med_cfg = MedianConfig(epsilon=epsilon, max_iters=max_iters, grad_tol=1e-11)
    bary_clean, _ = run_bary_gd(p, config=bary_cfg)
    med_clean, _ = run_median_gd(p, config=med_cfg)
    rows = []
    for scale in scales:
        contaminated = _scale_contaminated(p, scale, fraction)
        bary_s, _ = run_bary_gd(contaminated, config=bary_cfg)
        med_s, _ = run_median_gd(contaminated, config=med_cfg)
        rows.append({
            "scale": scale,
            "median_shift": float(np.sqrt(w2_squared(med_clean, med_s))),
            "barycenter_shift": float(np.sqrt(w2_squared(bary_clean, bary_s))),
        })
    return rows


def write_robustness_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["perturbation", "median_shift", "barycenter_shift"])
        for row in rows:
            writer.writerow([repr(row["scale"]), repr(row["median_shift"]),
                             repr(row["barycenter_shift"])])
