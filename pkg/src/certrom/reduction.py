"""POD bases, Galerkin projection and reduced-model simulation."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_inputs, check_is_fitted, check_matrix, check_vector
from .exceptions import DomainError, RankDeficient
from .numerics import RANK_RTOL, thin_svd
from .queryable import Trajectory


@dataclass(frozen=True)
class PodBasis:
    """Orthonormal basis ``V`` (N x n) with all snapshot singular values."""

    V: np.ndarray
    singular_values: np.ndarray

    @property
    def n(self):
        return self.V.shape[1]

    @property
    def n_dof(self):
        return self.V.shape[0]

    def truncate(self, n):
        """Leading ``n`` columns; POD bases are nested."""
        if not 0 <= n <= self.n:
            raise DomainError(f"cannot truncate a basis of size {self.n} to {n}")
        return PodBasis(self.V[:, :n].copy(), self.singular_values)


def fix_signs(U):
    """Flip columns so that the largest-magnitude entry of each is positive."""
    U = np.array(U, dtype=float, copy=True)
    if U.size == 0:
        return U
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def pod_basis(snapshots, n, rtol=RANK_RTOL):
    """POD basis from a snapshot matrix with one state per column.

    The snapshots are neither centered nor scaled.

    Parameters
    ----------
    snapshots : (N, K+1) array_like
    n : int
        Basis dimension; must not exceed the numerical rank of the
        snapshots (singular values below ``rtol * s_max`` are noise).

    Raises
    ------
    RankDeficient
        If ``n`` exceeds the numerical rank.
    """
    X = check_matrix(snapshots, "snapshots")
    if n < 0:
        raise DomainError("n must be >= 0")
    U, s, _ = thin_svd(X)
    rank = int(np.count_nonzero(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    if n > rank:
        raise RankDeficient(
            f"requested {n} basis vectors but the snapshots have numerical "
            f"rank {rank}", rank=rank, expected=n)
    return PodBasis(fix_signs(U[:, :n]), s)


class PODBasis(TransformerMixin, BaseEstimator):
    """Proper orthogonal decomposition as a scikit-learn transformer.

    ``fit`` takes snapshots as rows (``n_snapshots x N``), the usual
    samples-by-features layout. ``transform`` maps full states to reduced
    coordinates ``V^T w`` and ``inverse_transform`` lifts them back.

    Parameters
    ----------
    n_components : int
    rtol : float
        Relative singular-value threshold for the numerical rank.

    Attributes
    ----------
    components_ : (n_components, N) ndarray
        Rows are the basis vectors, i.e. ``V.T``.
    singular_values_ : ndarray
    basis_ : PodBasis
    """

    def __init__(self, n_components=1, rtol=RANK_RTOL):
        self.n_components = n_components
        self.rtol = rtol

    def fit(self, X, y=None):
        X = check_matrix(X, "X", allow_empty=False)
        self.basis_ = pod_basis(X.T, self.n_components, self.rtol)
        self.components_ = self.basis_.V.T
        self.singular_values_ = self.basis_.singular_values
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = np.asarray(X, dtype=float)
        return X @ self.basis_.V

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        return np.asarray(X, dtype=float) @ self.components_


@dataclass(frozen=True)
class ReducedModel:
    """Reduced operators of ``w~_{k+1} = A_r w~_k + B_r g_{k+1}``."""

    A_r: np.ndarray
    B_r: np.ndarray

    def __post_init__(self):
        n = self.A_r.shape[0]
        if self.A_r.shape != (n, n) or self.B_r.shape[0] != n:
            raise DomainError(
                f"inconsistent shapes {self.A_r.shape} and {self.B_r.shape}")
        if not (np.all(np.isfinite(self.A_r)) and np.all(np.isfinite(self.B_r))):
            raise DomainError("reduced operators contain non-finite entries")

    @property
    def n(self):
        return self.A_r.shape[0]

    @property
    def p(self):
        return self.B_r.shape[1]


def intrusive_project(oracle, basis):
    """Galerkin projection ``(V^T A V, V^T B)`` through intrusive oracle access."""
    V = basis.V
    AV = np.column_stack([oracle.apply_A(V[:, j]) for j in range(V.shape[1])]) \
        if V.shape[1] else np.zeros((V.shape[0], 0))
    B = oracle.dense_B()
    return ReducedModel(V.T @ AV, V.T @ B)


def simulate_reduced(rom, w0_r, inputs):
    """Run the reduced recursion from ``w0_r``.

    The caller chooses the reduced initial state, usually ``V^T w0``.
    """
    w0_r = check_vector(w0_r, "w0_r", rom.n)
    G = check_inputs(inputs, rom.p)
    W = np.empty((G.shape[0] + 1, rom.n))
    W[0] = w0_r
    forced = G @ rom.B_r.T
    A_T = rom.A_r.T
    for k in range(G.shape[0]):
        W[k + 1] = W[k] @ A_T + forced[k]
    return Trajectory(W, G)
