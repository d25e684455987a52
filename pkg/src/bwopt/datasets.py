"""Seeded generators for synthetic SPD families and dataset file round-trip.

Seven generation methods cover the regimes the solvers are exercised on:
well-spread and clustered spectra, shared and independent eigenbases,
repeated eigenvalues, and a mixture of all of them.  A separate
construction produces families whose barycenter is exactly the identity,
by pushing zero-mean tangent draws through the exponential map.  All
randomness flows through a counter-based generator keyed on the seed, so a
spec reproduces its dataset bitwise.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .barycenter import DiscreteDistribution
from .geometry import GaussianMeasure, SpdMatrix, symmetrize


@dataclass(frozen=True)
class GenSpec:
    """Recipe for one synthetic family.

    ``method`` selects the construction (1..7), ``n`` the atom count,
    ``d`` the dimension, ``[alpha, beta]`` the eigenvalue interval, ``m``
    the support size for the repeated-eigenvalue methods 5 and 6
    (defaults to ``d`` when omitted), and ``seed`` the RNG key.
    """

    method: int
    n: int
    d: int
    alpha: float = 1.0
    beta: float = 10.0
    m: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in range(1, 8):
            raise ValueError(f"method must be 1..7, got {self.method}")
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if not 0.0 < self.alpha <= self.beta:
            raise ValueError(f"need 0 < alpha <= beta, got [{self.alpha}, {self.beta}]")
        if self.m is not None and not 1 <= self.m <= self.d:
            raise ValueError(f"need 1 <= m <= d, got m={self.m}")

    @property
    def support_size(self):
        return self.m if self.m is not None else self.d


def haar_orthogonal(d, rng):
    """Orthogonal matrix drawn from the Haar measure.

    QR of a standard Gaussian matrix, with the Q columns sign-corrected by
    the diagonal of R so the distribution is exactly rotation invariant.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


def _from_spectrum(vals, q):
    return SpdMatrix(symmetrize((q * vals) @ q.T))


def _covs_for_method(method, count, d, alpha, beta, m, rng):
    covs = []
    if method == 1:
        vals = np.linspace(alpha, beta, d)
        for _ in range(count):
            covs.append(_from_spectrum(vals, haar_orthogonal(d, rng)))
    elif method == 2:
        for _ in range(count):
            q = haar_orthogonal(d, rng)
            covs.append(_from_spectrum(rng.uniform(alpha, beta, d), q))
    elif method == 3:
        # Three groups at scales 1e-2, 1, 1e2 times [1, beta/alpha].
        kappa = beta / alpha
        base, rem = divmod(count, 3)
        sizes = [base + (1 if i < rem else 0) for i in range(3)]
        for size, exponent in zip(sizes, (-2, 0, 2)):
            scale = 10.0 ** exponent
            for _ in range(size):
                q = haar_orthogonal(d, rng)
                covs.append(_from_spectrum(rng.uniform(scale, scale * kappa, d), q))
    elif method == 4:
        q = haar_orthogonal(d, rng)
        for _ in range(count):
            covs.append(_from_spectrum(rng.uniform(alpha, beta, d), q))
    elif method == 5:
        for _ in range(count):
            q = haar_orthogonal(d, rng)
            support = rng.uniform(alpha, beta, m)
            covs.append(_from_spectrum(support[rng.integers(0, m, size=d)], q))
    elif method == 6:
        support = rng.uniform(alpha, beta, m)
        vals = support[rng.integers(0, m, size=d)]
        for _ in range(count):
            covs.append(_from_spectrum(vals, haar_orthogonal(d, rng)))
    else:
        raise ValueError(f"unknown method {method}")
    return covs


def generate(spec):
    """Draw the family described by ``spec``.

    Returns
    -------
    DiscreteDistribution
        ``n`` centered atoms with equal weights; identical spec and seed
        reproduce the dataset bitwise.
    """
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    m = spec.support_size
    if spec.method == 7:
        # floor(n/6) atoms per method 1..6; remainder goes to method 1.
        base, rem = divmod(spec.n, 6)
        counts = [base] * 6
        counts[0] += rem
        covs = []
        for method, count in enumerate(counts, start=1):
            if count:
                covs.extend(_covs_for_method(method, count, spec.d, spec.alpha,
                                             spec.beta, m, rng))
    else:
        covs = _covs_for_method(spec.method, spec.n, spec.d, spec.alpha,
                                spec.beta, m, rng)
    return DiscreteDistribution.from_covariances(covs)


def generate_known_barycenter(n, d, delta, seed=0):
    """Family whose barycenter is exactly the identity.

    Tangent vectors with Haar eigenbasis and eigenvalues uniform in
    ``[-(1-delta), 1-delta]`` are drawn, their empirical mean is subtracted
    so the first-order optimality condition at I holds exactly, and each
    is pushed through the exponential map at I, giving atoms
    ``(I + S)^2``.  If the mean subtraction pushed any draw's spectral norm
    past ``1 - delta``, all draws are rescaled back inside (rescaling
    preserves the zero mean), so atom spectra always lie in
    ``[delta^2, (2-delta)^2]``.

    Returns
    -------
    DiscreteDistribution
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    draws = []
    for _ in range(n):
        q = haar_orthogonal(d, rng)
        vals = rng.uniform(-(1.0 - delta), 1.0 - delta, d)
        draws.append(symmetrize((q * vals) @ q.T))
    stacked = np.stack(draws)
    stacked = stacked - stacked.mean(axis=0)
    spectral = max(
        float(np.max(np.abs(np.linalg.eigvalsh(s)))) for s in stacked
    )
    if spectral > 1.0 - delta:
        stacked = stacked * ((1.0 - delta) / spectral)
    eye = np.eye(d)
    covs = []
    for s in stacked:
        w = eye + s
        covs.append(SpdMatrix(symmetrize(w @ w)))
    return DiscreteDistribution.from_covariances(covs)


def perturb_rank_one(p, rho):
    """Add ``rho`` to every atom covariance in the first coordinate direction."""
    if rho < 0.0:
        raise ValueError("rho must be nonnegative")
    atoms = []
    for a in p.atoms:
        c = np.array(a.cov.entries)
        c[0, 0] += rho
        atoms.append(GaussianMeasure(a.mean, SpdMatrix(c)))
    return DiscreteDistribution(atoms, p.weights)


def save_dataset(p, path, metadata=None):
    """Write a distribution as JSON with full binary64 round-trip precision.

    Layout: ``{dimension, atoms: [{mean, cov}], weights, metadata}`` with
    each covariance flattened row-major.  ``metadata`` defaults to
    ``{"spec": None, "seed": None}``; pass a GenSpec (or a dict) to record
    provenance.
    """
    if metadata is None:
        meta = {"spec": None, "seed": None}
    elif isinstance(metadata, GenSpec):
        meta = {"spec": asdict(metadata), "seed": metadata.seed}
    else:
        meta = metadata
    payload = {
        "dimension": p.dim,
        "atoms": [
            {"mean": a.mean.tolist(), "cov": a.cov.entries.flatten().tolist()}
            for a in p.atoms
        ],
        "weights": p.weights.tolist(),
        "metadata": meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_dataset(path):
    """Read a dataset JSON written by :func:`save_dataset`.

    Returns
    -------
    DiscreteDistribution

    Raises
    ------
    ValueError
        On structural problems; the message names the file.
    """
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        d = int(payload["dimension"])
        atoms_raw = payload["atoms"]
        weights = payload["weights"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: missing dataset field ({exc})") from exc
    atoms = []
    for i, a in enumerate(atoms_raw):
        try:
            mean = np.asarray(a["mean"], dtype=float)
            cov = np.asarray(a["cov"], dtype=float).reshape(d, d)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: atom {i} malformed ({exc})") from exc
        atoms.append(GaussianMeasure(mean, SpdMatrix(cov)))
    return DiscreteDistribution(atoms, np.asarray(weights, dtype=float))
