"""Non-intrusive learning of reduced operators and residual-norm operators.

All functions here touch the high-dimensional system through
:meth:`QueryableSystem.step` only.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_inputs, check_is_fitted, check_matrix, check_vector
from .exceptions import (DomainError, InsufficientData, ModelMismatch,
                         ModelMismatchWarning, RankDeficient)
from .numerics import RANK_RTOL, solve_least_squares, unvech, vech_scaled_outer
from .reduction import ReducedModel, simulate_reduced


@dataclass(frozen=True)
class ReprojectedData:
    """Re-projected reduced states ``w_0..w_K``, inputs ``g_1..g_K`` and residuals.

    ``residual_norms_sq[k]`` is ``||r_k||^2`` for
    ``r_k = step(V w_k, g_{k+1}) - V w_{k+1}``. The residual vectors
    themselves are kept only when requested, since they are N-dimensional.
    """

    reduced_states: np.ndarray
    inputs: np.ndarray
    residual_norms_sq: np.ndarray
    residuals: np.ndarray = None

    def __post_init__(self):
        K = self.inputs.shape[0]
        if self.reduced_states.shape[0] != K + 1 or self.residual_norms_sq.shape != (K,):
            raise DomainError("inconsistent re-projected data lengths")

    @property
    def n(self):
        return self.reduced_states.shape[1]

    @property
    def p(self):
        return self.inputs.shape[1]

    @property
    def n_steps(self):
        return self.inputs.shape[0]


def reproject_sample(system, basis, w0, inputs, keep_residuals=True):
    """Sample a reduced trajectory by re-projection.

    Starting from ``w_0 = V^T w0``, each step queries the full system once
    from the lifted state ``V w_k``, projects the result back and records
    the part that leaves the subspace as the residual.

    Parameters
    ----------
    system : QueryableSystem
    basis : PodBasis
    w0 : (N,) array_like
        Need not lie in the range of V; only its projection is used.
    inputs : (K, p) array_like
    keep_residuals : bool
        Store the residual vectors (K x N) in addition to their norms.

    Returns
    -------
    ReprojectedData
    """
    V = basis.V
    if V.shape[0] != system.n_dof:
        raise DomainError(f"basis has {V.shape[0]} rows, system {system.n_dof}")
    w0 = check_vector(w0, "w0", system.n_dof)
    G = check_inputs(inputs, system.n_inputs)
    K = G.shape[0]
    W = np.empty((K + 1, V.shape[1]))
    W[0] = V.T @ w0
    norms = np.empty(K)
    R = np.empty((K, system.n_dof)) if keep_residuals else None
    for k in range(K):
        w_tmp = system.step(V @ W[k], G[k])
        W[k + 1] = V.T @ w_tmp
        r = w_tmp - V @ W[k + 1]
        norms[k] = r @ r
        if keep_residuals:
            R[k] = r
    return ReprojectedData(W, G, norms, R)


def _as_list(data):
    if isinstance(data, ReprojectedData):
        return [data]
    data = list(data)
    if not data:
        raise DomainError("no re-projected data given")
    n, p = data[0].n, data[0].p
    if any(d.n != n or d.p != p for d in data):
        raise DomainError("re-projected data sets have different dimensions")
    return data


def operator_data_matrix(data):
    """Stacked data matrix ``[w_k^T, g_{k+1}^T]`` and targets ``w_{k+1}^T``."""
    data = _as_list(data)
    Psi = np.vstack([np.hstack([d.reduced_states[:-1], d.inputs]) for d in data])
    Y = np.vstack([d.reduced_states[1:] for d in data])
    return Psi, Y


def _deficient_directions(Psi, n):
    _, s, Vt = np.linalg.svd(Psi, full_matrices=True)
    s_full = np.zeros(Vt.shape[0])
    s_full[:s.size] = s
    tiny = s_full <= RANK_RTOL * (s_full[0] if s_full.size else 0.0)
    labels = [f"w[{i}]" for i in range(n)] + \
        [f"g[{j}]" for j in range(Psi.shape[1] - n)]
    out = []
    for vec in Vt[tiny]:
        top = np.argsort(-np.abs(vec))[:3]
        out.append(" + ".join(f"{vec[i]:+.2g}*{labels[i]}" for i in top))
    return Vt[tiny], out


def infer_operators(data):
    """Least-squares operator inference from one or more re-projected trajectories.

    Solves ``min sum_k ||A w_k + B g_{k+1} - w_{k+1}||^2`` over all given
    trajectories with one factorization and ``n`` right-hand sides.

    Raises
    ------
    RankDeficient
        If the stacked data matrix does not have full column rank; the
        exception carries the null directions in ``directions``. Add
        excitation, e.g. from :func:`design_excitation`.
    """
    data = _as_list(data)
    n, p = data[0].n, data[0].p
    Psi, Y = operator_data_matrix(data)
    try:
        X = solve_least_squares(Psi, Y)
    except RankDeficient as exc:
        dirs, text = _deficient_directions(Psi, n)
        err = RankDeficient(
            f"operator-inference data matrix ({Psi.shape[0]} x {n + p}) has "
            f"rank {exc.rank}; deficient directions: {'; '.join(text)}. "
            "Add excitation (see design_excitation).",
            rank=exc.rank, expected=n + p)
        err.directions = dirs
        raise err from exc
    return ReducedModel(X[:n].T.copy(), X[n:].T.copy())


class OperatorInference(BaseEstimator):
    """Estimator wrapper around :func:`infer_operators`.

    Attributes
    ----------
    A_ : (n, n) ndarray
    B_ : (n, p) ndarray
    model_ : ReducedModel
    """

    def fit(self, data, y=None):
        self.model_ = infer_operators(data)
        self.A_, self.B_ = self.model_.A_r, self.model_.B_r
        return self

    def predict(self, w0_r, inputs):
        """Reduced states ``w_0..w_K`` as a ``(K+1, n)`` array."""
        check_is_fitted(self, "model_")
        return simulate_reduced(self.model_, w0_r, inputs).states


def design_excitation(basis, p):
    """Initial states and single-step inputs that make the data matrix full rank.

    Returns ``n`` pairs ``(v_j, 0)`` followed by ``p`` pairs ``(0, e_j)``,
    each input given as a ``(1, p)`` trajectory. Re-projecting each pair for
    one step yields the identity as stacked first data rows.
    """
    V = basis.V
    N, n = V.shape
    pairs = [(V[:, j].copy(), np.zeros((1, p))) for j in range(n)]
    for j in range(p):
        g = np.zeros((1, p))
        g[0, j] = 1.0
        pairs.append((np.zeros(N), g))
    return pairs


def residual_unknowns(n, p):
    """Number of unknowns ``(n+p)(n+p+1)/2`` in the residual-operator fit."""
    return (n + p) * (n + p + 1) // 2


def build_residual_data(data, rom, M4):
    """Data matrix and right-hand side for the residual-norm least squares.

    Row k of ``D`` is ``[vech_s(w_k w_k^T), vech_s(g g^T), 2 vec(g w_k^T)]``
    with ``g = g_{k+1}``, ``vech_s(S) = vech(2S - diag(S))`` and column-major
    ``vec``. The right-hand side is

        f_k = ||r_k||^2 - w_{k+1}^T M4 w_{k+1} + 2 w_{k+1}^T A_r w_k
              + 2 w_{k+1}^T B_r g_{k+1}.

    Raises
    ------
    InsufficientData
        If there are fewer rows than unknowns.
    """
    data = _as_list(data)
    n, p = data[0].n, data[0].p
    M4 = check_matrix(M4, "M4", shape=(n, n))
    q = residual_unknowns(n, p)
    K = sum(d.n_steps for d in data)
    if K < q:
        raise InsufficientData(
            f"{K} residual samples for {q} unknowns (n={n}, p={p})")
    D_blocks, f_blocks = [], []
    for d in data:
        W0, W1, G = d.reduced_states[:-1], d.reduced_states[1:], d.inputs
        cross = np.einsum("ki,kj->kji", G, W0).reshape(G.shape[0], n * p)
        D_blocks.append(np.hstack([vech_scaled_outer(W0),
                                   vech_scaled_outer(G), 2.0 * cross]))
        f_blocks.append(d.residual_norms_sq
                        - np.einsum("ki,ij,kj->k", W1, M4, W1)
                        + 2.0 * np.einsum("ki,ij,kj->k", W1, rom.A_r, W0)
                        + 2.0 * np.einsum("ki,ij,kj->k", W1, rom.B_r, G))
    return np.vstack(D_blocks), np.concatenate(f_blocks)


@dataclass(frozen=True)
class ResidualNormOps:
    """Quadratic-form operators for evaluating squared residual norms.

    ``M1 ~ V^T A^T A V``, ``M2 ~ B^T B``, ``M3 ~ B^T A V``, ``M4 = V^T V``.
    ``objective`` is the least-squares objective reached when learned.

    ``P1, P2, P3`` optionally hold the same quadratic form with the
    in-subspace part removed, ``[A V, B]^T (I - V V^T) [A V, B]``, fitted
    directly to the squared residual norms. Along a trajectory of the
    reduced model ``||r||^2 = z^T P z`` with ``z = (w, g)``, which avoids
    the cancellation between terms of size ``||w||^2`` in the six-term
    expansion.
    """

    M1: np.ndarray
    M2: np.ndarray
    M3: np.ndarray
    M4: np.ndarray
    objective: float = 0.0
    P1: np.ndarray = None
    P2: np.ndarray = None
    P3: np.ndarray = None

    @property
    def has_compact(self):
        return self.P1 is not None


#: Eigenvalues of learned M1, M2 below -PSD_TOL * max(1, ||M||) are rejected.
PSD_TOL = 1e-10


def _check_psd(M, name):
    if M.size == 0:
        return
    lam = np.linalg.eigvalsh(M)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam[0] < -PSD_TOL * scale:
        raise ModelMismatch(
            f"learned {name} has eigenvalue {lam[0]:.3e}; data are not from "
            "a linear time-invariant system")


def _unpack(o, n, p):
    q1, q2 = n * (n + 1) // 2, p * (p + 1) // 2
    return (unvech(o[:q1], n), unvech(o[q1:q1 + q2], p),
            o[q1 + q2:].reshape((p, n), order="F"))


def infer_residual_operators(D, f, n, p, M4=None, residual_norms_sq=None):
    """Solve ``min ||D o - f||`` and unpack ``o`` into M1, M2, M3.

    Warns with :class:`ModelMismatchWarning` when the objective exceeds
    ``1e-6 ||f||^2``; exact LTI data give objective zero. When the squared
    residual norms are passed as well, the compact operators P1, P2, P3 are
    fitted against them with the same factorization.
    """
    D = check_matrix(D, "D")
    f = check_vector(f, "f", D.shape[0])
    q1, q2 = n * (n + 1) // 2, p * (p + 1) // 2
    if D.shape[1] != q1 + q2 + n * p:
        raise DomainError(f"D has {D.shape[1]} columns, expected "
                          f"{q1 + q2 + n * p} for n={n}, p={p}")
    if D.shape[0] < D.shape[1]:
        raise InsufficientData(f"{D.shape[0]} rows for {D.shape[1]} unknowns")
    rhs = f[:, None]
    if residual_norms_sq is not None:
        r2 = check_vector(residual_norms_sq, "residual_norms_sq", D.shape[0])
        rhs = np.column_stack([f, r2])
    sol = solve_least_squares(D, rhs)
    o = sol[:, 0]
    resid = D @ o - f
    objective = float(resid @ resid)
    if objective > 1e-6 * float(f @ f):
        warnings.warn(
            f"residual-operator fit left objective {objective:.3e} "
            f"(||f||^2 = {f @ f:.3e}); data may not come from an LTI system",
            ModelMismatchWarning, stacklevel=2)
    M1, M2, M3 = _unpack(o, n, p)
    _check_psd(M1, "M1")
    _check_psd(M2, "M2")
    P = (None, None, None)
    if residual_norms_sq is not None:
        P = _unpack(sol[:, 1], n, p)
    if M4 is None:
        M4 = np.eye(n)
    return ResidualNormOps(M1, M2, M3, np.asarray(M4, dtype=float), objective,
                           *P)


class ResidualNormInference(BaseEstimator):
    """Learn residual-norm operators from re-projected training data.

    ``fit(data, rom)`` uses ``M4 = V^T V = I`` for an orthonormal basis and
    fits the compact operators alongside M1, M2, M3.

    Attributes
    ----------
    ops_ : ResidualNormOps
    objective_ : float
    """

    def fit(self, data, rom):
        data = _as_list(data)
        n, p = data[0].n, data[0].p
        M4 = np.eye(n)
        D, f = build_residual_data(data, rom, M4)
        r2 = np.concatenate([d.residual_norms_sq for d in data])
        self.ops_ = infer_residual_operators(D, f, n, p, M4, r2)
        self.objective_ = self.ops_.objective
        self.M1_, self.M2_, self.M3_ = self.ops_.M1, self.ops_.M2, self.ops_.M3
        return self
