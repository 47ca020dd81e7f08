"""Dense linear algebra, the chi-squared CDF and seeded Gaussian streams."""

import math

import numpy as np
from scipy import linalg

from ._validation import check_matrix
from .exceptions import ConvergenceError, DomainError, RankDeficient

#: Relative threshold on the pivoted-QR diagonal that defines numerical rank.
RANK_RTOL = 1e-10


def numerical_rank_qr(R, rtol=RANK_RTOL):
    """Rank read off the diagonal of a column-pivoted R factor."""
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0.0:
        return 0
    return int(np.count_nonzero(d >= rtol * d[0]))


def solve_least_squares(A, b, rtol=RANK_RTOL):
    """Minimize ``||A x - b||_2`` with a column-pivoted QR factorization.

    Parameters
    ----------
    A : (m, q) array_like
    b : (m,) or (m, k) array_like
        One or several right-hand sides; a matrix is solved column by column
        with a single factorization.
    rtol : float
        A is declared rank deficient when the smallest diagonal entry of the
        pivoted R factor falls below ``rtol`` times the largest.

    Returns
    -------
    x : (q,) or (q, k) ndarray

    Raises
    ------
    RankDeficient
        If A does not have full column rank, including when ``m < q``.
    """
    A = check_matrix(A, "A")
    b = np.asarray(b, dtype=float)
    m, q = A.shape
    if b.shape[0] != m:
        raise DomainError(f"b has {b.shape[0]} rows, A has {m}")
    if q == 0:
        return np.zeros((0,) + b.shape[1:])
    Q, R, piv = linalg.qr(A, mode="economic", pivoting=True)
    rank = numerical_rank_qr(R, rtol)
    if rank < q:
        raise RankDeficient(
            f"least-squares matrix of shape {A.shape} has numerical rank "
            f"{rank} < {q}", rank=rank, expected=q)
    y = linalg.solve_triangular(R, Q.T @ b)
    x = np.empty_like(y)
    x[piv] = y
    return x


def thin_svd(X):
    """Thin SVD ``X = U diag(s) Vt`` with ``r = min(m, k)`` singular triplets."""
    X = check_matrix(X, "X")
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return U, s, Vt


def _start_vector(apply, n):
    v = np.full(n, 1.0 / math.sqrt(n))
    if np.any(apply(v)):
        return v
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        if np.any(apply(e)):
            return e
    return None


def spectral_norm(apply, apply_transpose, n, tol=1e-8, max_iter=10_000):
    """Largest singular value of a linear operator given only its action.

    Power iteration on ``apply_transpose(apply(.))``. The start vector is the
    normalized all-ones vector, replaced by the first unit vector not mapped
    to zero when ones lies in the null space.

    Parameters
    ----------
    apply, apply_transpose : callable
        Maps an ``(n,)`` array to an ``(n,)`` array.
    n : int
    tol : float in (0, 1)
        Stop when the singular value estimate changes by at most
        ``tol`` relative between two iterations.
    max_iter : int

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations without meeting ``tol``.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0.0 < tol < 1.0:
        raise DomainError("tol must lie in (0, 1)")
    v = _start_vector(apply, n)
    if v is None:
        return 0.0
    sigma = np.linalg.norm(apply(v))
    for _ in range(max_iter):
        w = apply_transpose(apply(v))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        sigma_new = np.linalg.norm(apply(v))
        if abs(sigma_new - sigma) <= tol * sigma_new:
            return float(sigma_new)
        sigma = sigma_new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} iterations",
        last_iterate=v, estimate=float(sigma))


def chi2_cdf_1dof(x):
    """CDF of the chi-squared distribution with one degree of freedom.

    Uses ``F(x) = erf(sqrt(x / 2))``.
    """
    x = float(x)
    if not x >= 0.0:
        raise DomainError(f"chi2_cdf_1dof requires x >= 0, got {x}")
    if math.isinf(x):
        return 1.0
    return math.erf(math.sqrt(0.5 * x))


class RngStream:
    """A reproducible stream of random numbers keyed by ``(seed, stream_id)``.

    Draws are sequential: the n-th draw of a stream depends only on the key
    and the number of values drawn before it. A stream must have a single
    owner; use :meth:`spawn` to derive independent child streams, e.g. one
    per Monte Carlo trajectory.
    """

    def __init__(self, seed, stream_id=0, _path=()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(int(i) for i in _path)
        key = (self.stream_id,) + self._path
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=key)))

    def spawn(self, index):
        """Independent child stream; identical for identical parent key and index."""
        return RngStream(self.seed, self.stream_id, self._path + (index,))

    def standard_normal(self, size):
        return self._gen.standard_normal(size)

    def __repr__(self):
        return (f"RngStream(seed={self.seed}, stream_id={self.stream_id}, "
                f"path={self._path})")


def gaussian_vector(rng, n):
    """Draw ``n`` independent standard-normal values from ``rng``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    return rng.standard_normal(n)


def _vech_index(q):
    # lower triangle, column-major: column j outer, rows i >= j inner
    cols, rows = np.triu_indices(q)
    return rows, cols


def vech(P):
    """Half-vectorization: lower triangle incl. diagonal, column-major."""
    P = np.asarray(P, dtype=float)
    rows, cols = _vech_index(P.shape[0])
    return P[rows, cols]


def unvech(v, q):
    """Symmetric ``q x q`` matrix whose :func:`vech` is ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != (q * (q + 1) // 2,):
        raise DomainError(f"vech vector of length {v.shape} does not fit q={q}")
    P = np.zeros((q, q))
    rows, cols = _vech_index(q)
    P[rows, cols] = v
    P[cols, rows] = v
    return P


def vech_scaled(S, rtol=1e-12):
    """``vech(2 S - diag(S))`` of a symmetric matrix.

    Dotting the result for ``S = x x^T`` with ``vech(P)`` gives ``x^T P x``
    for any symmetric P.
    """
    S = check_matrix(S, "S")
    if S.shape[0] != S.shape[1]:
        raise DomainError(f"S must be square, got {S.shape}")
    scale = max(np.max(np.abs(S), initial=0.0), np.finfo(float).tiny)
    if np.max(np.abs(S - S.T), initial=0.0) > rtol * scale:
        raise DomainError("S is not symmetric")
    return vech(2.0 * S - np.diag(np.diag(S)))


def vech_scaled_outer(X):
    """Row-wise :func:`vech_scaled` of ``x x^T`` for every row ``x`` of ``X``.

    Returns an array of shape ``(len(X), q(q+1)/2)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rows, cols = _vech_index(X.shape[1])
    weight = np.where(rows == cols, 1.0, 2.0)
    return X[:, rows] * X[:, cols] * weight
