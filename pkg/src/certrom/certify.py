"""A posteriori error estimators for learned reduced models.

The state error after k steps is bounded by

    Delta_k = c_k e_0 + sum_{l=0}^{k-1} c_{k-l-1} rho_{l+1}

where ``e_0`` is the projection error of the initial state, ``rho_l`` are
residual norms and ``c_l`` bounds ``||A^l||_2``. Three coefficient sets are
supported: all ones (valid when ``||A||_2 <= 1``), sampled probabilistic
bounds ``xi_l`` and, for reference, the exact norms from an oracle.
"""

from dataclasses import dataclass, replace

import numpy as np

from ._validation import check_inputs, check_positive, check_vector
from .exceptions import DomainError, ModelMismatch
from .numerics import chi2_cdf_1dof, gaussian_vector, spectral_norm

#: Squared residuals in [-CLAMP_RTOL * scale, 0) are rounded up to zero.
CLAMP_RTOL = 1e-10


def _squared_residuals(ops, rom, W0, W1, G):
    # the last two cross terms are exact only for V^T V = I
    if not np.allclose(ops.M4, np.eye(rom.n), rtol=0, atol=1e-8):
        raise DomainError("residual-norm expansion requires an orthonormal basis")
    t1 = np.einsum("ki,ij,kj->k", W0, ops.M1, W0)
    t2 = np.einsum("ki,ij,kj->k", G, ops.M2, G)
    t3 = np.einsum("ki,ij,kj->k", G, ops.M3, W0)
    t4 = np.einsum("ki,ij,kj->k", W1, ops.M4, W1)
    t5 = np.einsum("ki,ij,kj->k", W1, rom.A_r, W0)
    t6 = np.einsum("ki,ij,kj->k", W1, rom.B_r, G)
    value = t1 + t2 + 2.0 * t3 + t4 - 2.0 * t5 - 2.0 * t6
    scale = t1 + t2 + t4 + 1.0
    return value, scale


def _clamped_sqrt(value, scale):
    bad = value < -CLAMP_RTOL * scale
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise ModelMismatch(
            f"squared residual norm {value[k]:.3e} at step {k} is negative "
            f"beyond round-off (scale {scale[k]:.3e})")
    return np.sqrt(np.maximum(value, 0.0))


def residual_norm(ops, rom, w_k, w_k1, g_k1):
    """``||A V w_k + B g_{k+1} - V w_{k+1}||_2`` from reduced quantities only."""
    W0 = check_vector(w_k, "w_k", rom.n)[None, :]
    W1 = check_vector(w_k1, "w_k1", rom.n)[None, :]
    G = check_vector(g_k1, "g_k1", rom.p)[None, :]
    value, scale = _squared_residuals(ops, rom, W0, W1, G)
    return float(_clamped_sqrt(value, scale)[0])


def _follows_model(rom, W, G):
    pred = W[:-1] @ rom.A_r.T + G @ rom.B_r.T
    size = np.abs(W[:-1]) @ np.abs(rom.A_r.T) + np.abs(G) @ np.abs(rom.B_r.T)
    return bool(np.all(np.abs(pred - W[1:]) <= 1e-12 * (size + np.abs(W[1:]))
                       + 1e-300))


def residual_norms(ops, rom, reduced_states, inputs, method="auto"):
    """Residual norms ``rho_1..rho_J`` along a reduced trajectory.

    Parameters
    ----------
    reduced_states : (J+1, n) array_like
    inputs : (J, p) array_like
    method : {"auto", "six_term", "compact"}
        ``"six_term"`` evaluates the full expansion. ``"compact"`` uses the
        operators P1, P2, P3 and requires the states to follow the reduced
        recursion ``w_{k+1} = A_r w_k + B_r g_{k+1}``; it stays accurate when
        the residual is many orders of magnitude below the state.
        ``"auto"`` picks ``"compact"`` when both conditions hold.
    """
    W = np.asarray(reduced_states, dtype=float)
    G = check_inputs(inputs, rom.p)
    if W.shape != (G.shape[0] + 1, rom.n):
        raise DomainError(f"reduced states of shape {W.shape} do not match "
                          f"{G.shape[0]} inputs and n={rom.n}")
    if method not in ("auto", "six_term", "compact"):
        raise DomainError(f"unknown method {method!r}")
    if method != "six_term":
        usable = ops.has_compact and _follows_model(rom, W, G)
        if method == "compact" and not usable:
            raise DomainError("compact evaluation needs P operators and states "
                              "generated by the reduced model")
        if usable:
            return _compact_residuals(ops, rom, W, G)
    value, scale = _squared_residuals(ops, rom, W[:-1], W[1:], G)
    return _clamped_sqrt(value, scale)


def _compact_residuals(ops, rom, W, G):
    W0 = W[:-1]
    value = (np.einsum("ki,ij,kj->k", W0, ops.P1, W0)
             + np.einsum("ki,ij,kj->k", G, ops.P2, G)
             + 2.0 * np.einsum("ki,ij,kj->k", G, ops.P3, W0))
    scale = (np.einsum("ki,ij,kj->k", W0, ops.M1, W0)
             + np.einsum("ki,ij,kj->k", G, ops.M2, G)
             + np.einsum("ki,ki->k", W[1:], W[1:]) + 1.0)
    return _clamped_sqrt(value, scale)


def _check_estimator_inputs(initial_error, residual_norms_):
    e0 = check_positive(initial_error, "initial_error", strict=False)
    rho = check_vector(residual_norms_, "residual_norms")
    if np.any(rho < 0):
        raise DomainError("residual norms must be non-negative")
    return e0, rho


def delta_w(initial_error, residual_norms_, coefficients):
    """Error estimate after ``k = len(residual_norms)`` steps.

    ``coefficients[l]`` bounds ``||A^l||_2`` for ``l = 0..k``; the initial
    error is weighted by ``coefficients[k]`` and ``rho_{l+1}`` by
    ``coefficients[k-l-1]``.
    """
    e0, rho = _check_estimator_inputs(initial_error, residual_norms_)
    c = check_vector(coefficients, "coefficients", rho.size + 1)
    if np.any(c < 0):
        raise DomainError("coefficients must be non-negative")
    k = rho.size
    return float(c[k] * e0 + c[:k][::-1] @ rho)


def delta_w_series(initial_error, residual_norms_, coefficients):
    """Error estimates ``Delta_1..Delta_J`` for all horizons at once.

    ``coefficients`` needs at least ``J + 1`` entries. Constant coefficients
    take an O(J) cumulative-sum path; otherwise a direct convolution is used.
    """
    e0, rho = _check_estimator_inputs(initial_error, residual_norms_)
    c = check_vector(coefficients, "coefficients")
    J = rho.size
    if c.size < J + 1:
        raise DomainError(f"need {J + 1} coefficients, got {c.size}")
    if np.any(c < 0):
        raise DomainError("coefficients must be non-negative")
    c = c[:J + 1]
    if J == 0:
        return np.zeros(0)
    if np.all(c == c[0]):
        return c[0] * (e0 + np.cumsum(rho))
    return c[1:] * e0 + np.convolve(c[:J], rho)[:J]


@dataclass(frozen=True)
class NormBoundRealization:
    """One realization of the sampled bounds ``xi_l`` on ``||A^l||_2``.

    ``theta_max_sq[l-1]`` is ``max_i ||A^l z_i||^2`` over the M samples, so
    :meth:`with_gamma` can rescale the same draws for another gamma.
    """

    xi: np.ndarray
    gamma: np.ndarray
    n_samples: int
    p_lb: float
    theta_max_sq: np.ndarray

    @property
    def n_steps(self):
        return self.xi.size - 1

    def with_gamma(self, gamma):
        g = _gamma_vector(gamma, self.n_steps)
        xi = np.concatenate([[1.0], np.sqrt(g * self.theta_max_sq)])
        return replace(self, xi=xi, gamma=g,
                       p_lb=prob_lower_bound(g, self.n_samples, self.n_steps))


def _gamma_vector(gamma, J):
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.size == 1:
        g = np.full(J, g[0])
    if g.shape != (J,):
        raise DomainError(f"gamma must be a scalar or have length {J}")
    if np.any(~(g > 0)):
        raise DomainError("all gamma values must be > 0")
    return g


def prob_lower_bound(gamma, M, J):
    """Lower bound on the probability that all J sampled bounds hold.

    ``max(0, 1 - sum_l F(1/gamma_l)^M)`` with ``F`` the chi-squared(1) CDF;
    a scalar gamma gives ``max(0, 1 - J F(1/gamma)^M)``.
    """
    if M < 1:
        raise DomainError("M must be >= 1")
    if J < 0:
        raise DomainError("J must be >= 0")
    if J == 0:
        return 1.0
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if g.size == 1:
        fail = J * chi2_cdf_1dof(1.0 / check_positive(g[0], "gamma")) ** M
    else:
        g = _gamma_vector(g, J)
        fail = sum(chi2_cdf_1dof(1.0 / gl) ** M for gl in g)
    return max(0.0, 1.0 - fail)


def sample_norm_bounds(system, gamma, M, J, rng, batch_size=256):
    """Sample ``xi_l = sqrt(gamma_l max_i ||A^l z_i||^2)`` for ``l = 1..J``.

    Each of the M standard-normal initial states ``z_i`` is drawn from its
    own child stream ``rng.spawn(i)``, so a realization with M samples
    shares its first draws with any larger M. The system is queried with
    zero input for J steps from every ``z_i``.
    """
    if M < 1 or J < 1:
        raise DomainError("M and J must be >= 1")
    g = _gamma_vector(gamma, J)
    N, p = system.n_dof, system.n_inputs
    theta = np.zeros(J)
    for start in range(0, M, batch_size):
        idx = range(start, min(M, start + batch_size))
        Z = np.stack([gaussian_vector(rng.spawn(i), N) for i in idx])
        zero = np.zeros((Z.shape[0], p))
        for l in range(J):
            Z = system.step(Z, zero)
            theta[l] = max(theta[l], float(np.max(np.einsum("ij,ij->i", Z, Z))))
    xi = np.concatenate([[1.0], np.sqrt(g * theta)])
    return NormBoundRealization(xi, g, int(M), prob_lower_bound(g, M, J), theta)


@dataclass(frozen=True)
class ErrorCertificate:
    """Error estimates ``delta[k-1] = Delta_k`` for ``k = 1..J``."""

    initial_error: float
    residual_norms: np.ndarray
    coefficients: np.ndarray
    delta: np.ndarray
    kind: str
    p_lb: float = 1.0

    @property
    def delta_from_zero(self):
        """``Delta_0..Delta_J``, with ``Delta_0 = c_0 e_0``."""
        return np.concatenate([[self.coefficients[0] * self.initial_error],
                               self.delta])


def deterministic_certificate(initial_error, residual_norms_):
    """Estimate with unit coefficients.

    Valid when ``||A||_2 <= 1``, which cannot be checked without intrusive
    access; the caller is responsible for that assumption.
    """
    rho = check_vector(residual_norms_, "residual_norms")
    c = np.ones(rho.size + 1)
    return ErrorCertificate(float(initial_error), rho, c,
                            delta_w_series(initial_error, rho, c), "deterministic")


def learned_certificate(realization, initial_error, residual_norms_):
    """Estimate with sampled coefficients ``xi``; holds with probability >= p_lb."""
    rho = check_vector(residual_norms_, "residual_norms")
    if realization.n_steps < rho.size:
        raise DomainError(f"realization covers {realization.n_steps} steps, "
                          f"need {rho.size}")
    c = realization.xi[:rho.size + 1]
    return ErrorCertificate(float(initial_error), rho, c,
                            delta_w_series(initial_error, rho, c), "learned",
                            p_lb=realization.p_lb)


def power_norms(oracle, J, tol=1e-8, stride=1):
    """``||A^l||_2`` for ``l = 0..J`` by power iteration on composed applies.

    With ``stride > 1`` the norms are computed exactly for ``l < stride`` and
    at multiples of ``stride``; the levels in between get the
    submultiplicative upper bound ``||A^m|| * ||A^{l-m}||`` with ``m`` the
    previous multiple, which keeps the estimator rigorous.
    """
    N = oracle.n_dof
    exact = set(range(min(stride, J + 1))) | set(range(0, J + 1, stride))
    exact.add(J)
    norms = np.empty(J + 1)
    norms[0] = 1.0
    try:
        dense = oracle.dense_A()
    except DomainError:
        dense = None
    P = np.eye(N) if dense is not None else None
    for l in range(1, J + 1):
        if dense is not None:
            P = dense @ P
        if l not in exact:
            continue
        if dense is not None:
            Pl = P
            norms[l] = spectral_norm(lambda x: Pl @ x, lambda x: Pl.T @ x, N, tol)
        else:
            def apply(x, l=l):
                for _ in range(l):
                    x = oracle.apply_A(x)
                return x

            def apply_T(x, l=l):
                for _ in range(l):
                    x = oracle.apply_AT(x)
                return x
            norms[l] = spectral_norm(apply, apply_T, N, tol)
    for l in range(1, J + 1):
        if l not in exact:
            m = (l // stride) * stride
            norms[l] = norms[m] * norms[l - m]
    return norms


def intrusive_certificate(oracle, initial_error, residual_norms_, J=None,
                          tol=1e-8, stride=1, norms=None):
    """Reference estimate with coefficients ``||A^l||_2`` (intrusive).

    Precomputed ``norms`` from :func:`power_norms` may be passed to reuse
    them across basis sizes.
    """
    rho = check_vector(residual_norms_, "residual_norms")
    J = rho.size if J is None else J
    if norms is None:
        norms = power_norms(oracle, J, tol=tol, stride=stride)
    c = np.asarray(norms, dtype=float)[:rho.size + 1]
    return ErrorCertificate(float(initial_error), rho, c,
                            delta_w_series(initial_error, rho, c), "intrusive")


def output_interval(output_norm, reduced_outputs, certificate):
    """Intervals ``y~_k -/+ ||C||_2 Delta_k`` for ``k = 1..J``.

    The interval contains the true output whenever the state estimate
    ``Delta_k`` bounds the true state error at step k.

    Returns
    -------
    (J, 2) ndarray
        Lower and upper bounds per step.
    """
    c = check_positive(output_norm, "output_norm", strict=False)
    y = check_vector(reduced_outputs, "reduced_outputs", certificate.delta.size)
    width = c * certificate.delta
    return np.column_stack([y - width, y + width])


def averaging_output_norm(N):
    """``||C||_2`` of the averaging row ``C = (1/N, ..., 1/N)``."""
    return 1.0 / np.sqrt(N)
