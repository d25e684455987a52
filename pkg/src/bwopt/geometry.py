"""Closed-form primitives of the Bures-Wasserstein geometry.

Centered Gaussians are identified with their covariance matrices, so the
2-Wasserstein geometry on nondegenerate Gaussians becomes a Riemannian
geometry on the cone of symmetric positive definite matrices.  Every
operation here has a closed form built from symmetric eigendecompositions:
squared distances, optimal transport maps, matrix geometric means,
logarithmic and exponential maps, geodesics, and the spectral clipping and
projection maps used by the solvers.
"""

import numpy as np

# Relative tolerance for accepting a matrix as symmetric.
SYMMETRY_RTOL = 1e-12
# A matrix is accepted as positive definite when lambda_min > PD_RTOL * lambda_max.
PD_RTOL = 1e-12


class NumericalError(RuntimeError):
    """A matrix computation failed (non-finite entries or eigensolver breakdown).

    Attributes
    ----------
    matrix : ndarray or None
        The offending matrix, when available.
    iteration : int or None
        Iteration index attached by solvers when the failure happened
        inside an iterative run.
    """

    def __init__(self, message, matrix=None, iteration=None):
        super().__init__(message)
        self.matrix = matrix
        self.iteration = iteration


def symmetrize(a):
    """Return the symmetric part (a + a.T) / 2 of a square array."""
    a = np.asarray(a, dtype=float)
    return (a + a.T) / 2.0


def _check_square(a, name="matrix"):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")


def _check_symmetric(a, name="matrix"):
    _check_square(a, name)
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"{name} has non-finite entries", matrix=a)
    scale = np.linalg.norm(a)
    asym = np.linalg.norm(a - a.T)
    if asym > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError(
            f"{name} is not symmetric: relative asymmetry {asym / max(scale, 1e-300):.3e}"
        )


def _eigh(a, context="matrix"):
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed for {context}: {exc}", matrix=a
        ) from exc


class SpdMatrix:
    """Symmetric positive definite matrix with its eigendecomposition attached.

    The constructor validates symmetry (relative asymmetry at most 1e-12),
    symmetrizes, and eagerly computes the eigendecomposition.  Matrices whose
    smallest eigenvalue does not exceed ``PD_RTOL`` times the largest are
    rejected rather than regularized.  Instances are immutable: the stored
    arrays are marked read-only, so the cached decomposition always matches
    the entries.

    Parameters
    ----------
    entries : array_like, shape (d, d)
        Symmetric positive definite matrix.
    """

    __slots__ = ("entries", "eigenvalues", "eigenvectors")

    def __init__(self, entries, _eig=None):
        a = symmetrize_checked(entries, name="SpdMatrix entries")
        if _eig is None:
            vals, vecs = _eigh(a, context="SpdMatrix entries")
        else:
            vals, vecs = _eig
        if vals[-1] <= 0.0 or vals[0] <= PD_RTOL * vals[-1]:
            raise ValueError(
                "matrix is not positive definite: eigenvalue range "
                f"[{vals[0]:.6e}, {vals[-1]:.6e}]"
            )
        a.flags.writeable = False
        vals = np.array(vals, dtype=float)
        vals.flags.writeable = False
        vecs = np.array(vecs, dtype=float)
        vecs.flags.writeable = False
        self.entries = a
        self.eigenvalues = vals
        self.eigenvectors = vecs

    @classmethod
    def from_eigh(cls, eigenvalues, eigenvectors):
        """Build from a known eigendecomposition without re-decomposing.

        The entries are reconstructed as ``V diag(w) V.T`` and the usual
        positivity check applies.  Eigenvalues must be in ascending order.
        """
        vals = np.asarray(eigenvalues, dtype=float)
        vecs = np.asarray(eigenvectors, dtype=float)
        entries = symmetrize((vecs * vals) @ vecs.T)
        return cls(entries, _eig=(vals, vecs))

    @classmethod
    def identity(cls, dim):
        return cls.from_eigh(np.ones(dim), np.eye(dim))

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def lambda_min(self):
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])

    @property
    def trace(self):
        return float(np.trace(self.entries))

    @property
    def log_det(self):
        return float(np.sum(np.log(self.eigenvalues)))

    def _apply_spectral(self, fn):
        # V f(w) V.T, symmetrized; stays within the cached eigenbasis.
        vecs = self.eigenvectors
        return symmetrize((vecs * fn(self.eigenvalues)) @ vecs.T)

    def sqrt_entries(self):
        """Principal matrix square root, as a plain array."""
        return self._apply_spectral(np.sqrt)

    def inv_sqrt_entries(self):
        return self._apply_spectral(lambda w: 1.0 / np.sqrt(w))

    def inv_entries(self):
        return self._apply_spectral(lambda w: 1.0 / w)

    def inverse(self):
        """Inverse as an SpdMatrix, reusing the cached eigendecomposition."""
        return SpdMatrix.from_eigh(1.0 / self.eigenvalues[::-1],
                                   self.eigenvectors[:, ::-1])

    def __repr__(self):
        return (f"SpdMatrix(dim={self.dim}, "
                f"spectrum=[{self.lambda_min:.6g}, {self.lambda_max:.6g}])")


def symmetrize_checked(a, name="matrix"):
    """Validate near-symmetry, then return the symmetrized array."""
    a = np.asarray(a, dtype=float)
    _check_symmetric(a, name)
    return symmetrize(a)


class TangentMap:
    """Symmetric matrix viewed as a tangent vector at some base point.

    Tangent vectors act on a base covariance ``S`` through the map
    ``x -> (I + V) x``; their length depends on the base point, see
    :func:`tangent_norm`.
    """

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = symmetrize_checked(entries, name="TangentMap entries")
        a.flags.writeable = False
        self.entries = a

    @property
    def dim(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"TangentMap(dim={self.dim})"


class GaussianMeasure:
    """Gaussian measure given by a mean vector and an SPD covariance."""

    __slots__ = ("mean", "cov")

    def __init__(self, mean, cov):
        if not isinstance(cov, SpdMatrix):
            cov = SpdMatrix(cov)
        mean = np.asarray(mean, dtype=float).reshape(-1)
        if mean.shape[0] != cov.dim:
            raise ValueError(
                f"mean has dimension {mean.shape[0]} but covariance is {cov.dim}x{cov.dim}"
            )
        mean.flags.writeable = False
        self.mean = mean
        self.cov = cov

    @property
    def dim(self):
        return self.cov.dim

    def __repr__(self):
        return f"GaussianMeasure(dim={self.dim})"


def _cov_and_mean(x):
    if isinstance(x, GaussianMeasure):
        return x.cov, x.mean
    if isinstance(x, SpdMatrix):
        return x, None
    return SpdMatrix(x), None


def _check_same_dim(a, b):
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def _tangent_entries(v):
    if isinstance(v, TangentMap):
        return v.entries
    return symmetrize_checked(v, name="tangent vector")


def matrix_sqrt(a):
    """Principal square root of an SPD matrix.

    Parameters
    ----------
    a : SpdMatrix

    Returns
    -------
    SpdMatrix
        The unique SPD matrix R with R @ R = a.
    """
    return SpdMatrix.from_eigh(np.sqrt(a.eigenvalues), a.eigenvectors)


def _sqrt_from_entries(m, context="matrix"):
    # eigh-based square root of a symmetric PSD array; tiny negative
    # eigenvalues from rounding are clipped to zero.
    vals, vecs = _eigh(m, context=context)
    return symmetrize((vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.T)


def geometric_mean(a, b):
    """Matrix geometric mean ``a^{1/2} (a^{-1/2} b a^{-1/2})^{1/2} a^{1/2}``.

    Symmetric in its arguments; equals the midpoint of the geodesic from
    ``a`` to ``b`` in the affine-invariant geometry.  For commuting inputs
    it reduces to the entrywise geometric mean of the spectra.

    Parameters
    ----------
    a, b : SpdMatrix

    Returns
    -------
    SpdMatrix
    """
    _check_same_dim(a, b)
    asq = a.sqrt_entries()
    aisq = a.inv_sqrt_entries()
    inner = _sqrt_from_entries(symmetrize(aisq @ b.entries @ aisq),
                               context="geometric mean inner term")
    return SpdMatrix(symmetrize(asq @ inner @ asq))


def transport_map(from_, to):
    """Linear optimal transport map between centered Gaussians.

    The map ``T`` is the unique SPD matrix with ``T from T = to``; it pushes
    the Gaussian with covariance ``from_`` onto the one with covariance
    ``to`` and equals the geometric mean of ``from_^{-1}`` and ``to``.

    Parameters
    ----------
    from_, to : SpdMatrix
        Source and target covariances.

    Returns
    -------
    ndarray, shape (d, d)
        Symmetric positive definite matrix.
    """
    t, _ = transport_and_w2sq(from_, to)
    return t


def transport_and_w2sq(from_, to):
    """Transport map and squared distance from one eigendecomposition.

    Internal workhorse shared by the solvers: the eigendecomposition of
    ``from^{1/2} to from^{1/2}`` yields both the transport map and the
    squared Bures-Wasserstein distance, so objective and gradient come at
    the price of one decomposition per atom.
    """
    _check_same_dim(from_, to)
    sq = from_.sqrt_entries()
    isq = from_.inv_sqrt_entries()
    mid = symmetrize(sq @ to.entries @ sq)
    vals, vecs = _eigh(mid, context="transport map inner term")
    roots = np.sqrt(np.maximum(vals, 0.0))
    msqrt = (vecs * roots) @ vecs.T
    t = symmetrize(isq @ msqrt @ isq)
    w2sq = from_.trace + to.trace - 2.0 * float(np.sum(roots))
    return t, max(w2sq, 0.0)


def w2_squared(a, b):
    """Squared 2-Wasserstein distance between Gaussians.

    Accepts :class:`SpdMatrix` (treated as a centered Gaussian) or
    :class:`GaussianMeasure`.  For covariances S, S' the value is
    ``tr S + tr S' - 2 tr (S^{1/2} S' S^{1/2})^{1/2}``; a squared mean
    difference term is added for noncentered inputs.

    Returns
    -------
    float
        Nonnegative; zero exactly when the inputs coincide (up to rounding).
    """
    cov_a, mean_a = _cov_and_mean(a)
    cov_b, mean_b = _cov_and_mean(b)
    _check_same_dim(cov_a, cov_b)
    sq = cov_a.sqrt_entries()
    mid = symmetrize(sq @ cov_b.entries @ sq)
    vals = np.linalg.eigvalsh(mid)
    val = cov_a.trace + cov_b.trace - 2.0 * float(np.sum(np.sqrt(np.maximum(vals, 0.0))))
    if mean_a is not None or mean_b is not None:
        d = cov_a.dim
        ma = mean_a if mean_a is not None else np.zeros(d)
        mb = mean_b if mean_b is not None else np.zeros(d)
        if ma.shape != mb.shape:
            raise ValueError("mean dimension mismatch")
        val += float(np.dot(ma - mb, ma - mb))
    return max(val, 0.0)


def bures_log(base, target):
    """Logarithmic map: the tangent vector at ``base`` pointing to ``target``.

    Equals ``T - I`` where ``T`` transports ``base`` onto ``target``; its
    norm at ``base`` is the Bures-Wasserstein distance.
    """
    return TangentMap(transport_map(base, target) - np.eye(base.dim))


def bures_exp(base, v):
    """Exponential map ``(I + v) base (I + v)``.

    Parameters
    ----------
    base : SpdMatrix
    v : TangentMap or array_like
        Symmetric matrix with ``I + v`` positive definite.

    Returns
    -------
    SpdMatrix

    Raises
    ------
    ValueError
        If ``I + v`` is not positive definite; the message names the most
        negative eigenvalue of ``I + v``.
    """
    ve = _tangent_entries(v)
    if ve.shape[0] != base.dim:
        raise ValueError(f"dimension mismatch: {ve.shape[0]} vs {base.dim}")
    w = np.eye(base.dim) + ve
    wmin = float(np.linalg.eigvalsh(w)[0])
    if wmin <= 0.0:
        raise ValueError(
            "exponential map undefined: I + v has smallest eigenvalue "
            f"{wmin:.6e}"
        )
    return SpdMatrix(symmetrize(w @ base.entries @ w))


def tangent_norm(v, base):
    """Riemannian norm ``sqrt(tr(v base v))`` of a tangent vector at ``base``.

    Zero exactly for the zero vector, since ``base`` is positive definite.
    """
    ve = _tangent_entries(v)
    if ve.shape[0] != base.dim:
        raise ValueError(f"dimension mismatch: {ve.shape[0]} vs {base.dim}")
    val = float(np.einsum("ij,jk,ki->", ve, base.entries, ve))
    return float(np.sqrt(max(val, 0.0)))


def geodesic_point(a, b, t):
    """Point at parameter ``t`` on the Wasserstein geodesic from ``a`` to ``b``.

    The curve is ``((1-t) I + t T) a ((1-t) I + t T)`` with ``T`` the
    transport map from ``a`` to ``b``; it has constant speed and hits the
    endpoints at ``t = 0`` and ``t = 1``.

    Parameters
    ----------
    a, b : SpdMatrix
    t : float
        Must lie in [0, 1].
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter must be in [0, 1], got {t}")
    tmap = transport_map(a, b)
    w = (1.0 - t) * np.eye(a.dim) + t * tmap
    return SpdMatrix(symmetrize(w @ a.entries @ w))


def generalized_geodesic_point(base, a, b, t):
    """Generalized geodesic from ``a`` to ``b`` with base point ``base``.

    Both endpoints are pulled to the tangent space at ``base`` and the
    convex combination of their transport maps is pushed forward; with
    ``base == a`` this reduces to the ordinary geodesic.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"geodesic parameter must be in [0, 1], got {t}")
    ta = transport_map(base, a)
    tb = transport_map(base, b)
    w = (1.0 - t) * ta + t * tb
    return SpdMatrix(symmetrize(w @ base.entries @ w))


def clip_eigenvalues(a, beta):
    """Cap the spectrum of ``a`` at ``beta``, keeping its eigenvectors.

    This map is a contraction in the Bures-Wasserstein distance: clipping
    two covariances at the same level never increases the distance
    between them.

    Parameters
    ----------
    a : SpdMatrix
    beta : float
        Positive cap.
    """
    if beta <= 0.0:
        raise ValueError(f"clip level must be positive, got {beta}")
    return SpdMatrix.from_eigh(np.minimum(a.eigenvalues, beta), a.eigenvectors)


def project_spectrum(y, alpha, beta):
    """Frobenius projection of a symmetric matrix onto the set with spectrum in [alpha, beta].

    Eigenvalues are clamped into the interval; the eigenbasis is kept.
    Among all symmetric matrices whose spectrum lies in [alpha, beta], the
    result is the closest to ``y`` in Frobenius norm.

    Parameters
    ----------
    y : array_like, shape (d, d)
        Symmetric matrix, possibly indefinite.
    alpha, beta : float
        Interval bounds with 0 < alpha <= beta.

    Returns
    -------
    SpdMatrix
    """
    if not 0.0 < alpha <= beta:
        raise ValueError(f"need 0 < alpha <= beta, got [{alpha}, {beta}]")
    ye = symmetrize_checked(y, name="projection input")
    vals, vecs = _eigh(ye, context="spectral projection input")
    return SpdMatrix.from_eigh(np.clip(vals, alpha, beta), vecs)


def kl_to_standard(a):
    """KL divergence of the centered Gaussian with covariance ``a`` from N(0, I).

    Closed form ``(tr a - log det a - d) / 2``, computed from the cached
    spectrum.  Nonnegative, zero exactly at the identity.
    """
    vals = a.eigenvalues
    total = 0.5 * float(np.sum(vals - np.log(vals)) - a.dim)
    return max(total, 0.0)
