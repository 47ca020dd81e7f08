"""Finite-element benchmark systems and their one-step time discretization.

Two semi-discrete systems ``M dw/dt = K w + F u`` are assembled:

* 1-D heat equation on (0, 1), Dirichlet at x=0, Neumann control at x=1,
  piecewise-linear elements;
* 2-D convection-diffusion on (0, 1) x (0, 0.25) with bilinear elements on a
  structured square mesh and Neumann control segments on the boundary.

:func:`discretize` turns either into a :class:`LTISystem` stepping
``w_{k+1} = A w_k + B g_{k+1}``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import DomainError, FactorizationError
from .queryable import LTIOracle, QueryableSystem


@dataclass(frozen=True)
class NeumannSegment:
    """Consecutive boundary edges carrying one control input.

    The segment covers the edges between boundary nodes ``start`` and
    ``stop`` (node indices counted along ``side``, ``start < stop``). Its
    endpoints stay Dirichlet nodes; the nodes strictly between become
    degrees of freedom.
    """

    side: str
    start: int
    stop: int

    def __post_init__(self):
        if self.side not in ("left", "right", "bottom", "top"):
            raise DomainError(f"unknown side {self.side!r}")
        if not 0 <= self.start < self.stop:
            raise DomainError(f"invalid node range [{self.start}, {self.stop}]")


@dataclass(frozen=True)
class ContinuousSystem:
    """Semi-discrete system ``M dw/dt = K w + F u``.

    ``mass``, ``stiffness`` and ``input_map`` are scipy sparse matrices.
    ``K`` follows the sign convention ``K_ij = -a(phi_j, phi_i)``.
    """

    mass: sp.spmatrix
    stiffness: sp.spmatrix
    input_map: sp.spmatrix
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = self.mass.shape[0]
        if self.mass.shape != (N, N) or self.stiffness.shape != (N, N):
            raise DomainError("mass and stiffness must be square of equal size")
        if self.input_map.shape[0] != N:
            raise DomainError("input_map row count must equal n_dof")
        M = self.mass.toarray()
        if not np.allclose(M, M.T, rtol=0, atol=1e-14 * np.abs(M).max()):
            raise DomainError("mass matrix is not symmetric")
        try:
            np.linalg.cholesky(M)
        except np.linalg.LinAlgError as exc:
            raise DomainError("mass matrix is not positive definite") from exc

    @property
    def n_dof(self):
        return self.mass.shape[0]

    @property
    def n_inputs(self):
        return self.input_map.shape[1]


@dataclass(frozen=True)
class TimeScheme:
    """One-step theta scheme; beta=0 forward Euler, 1 backward Euler, 1/2 CN."""

    beta: float
    dt: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.dt > 0.0:
            raise DomainError(f"dt must be > 0, got {self.dt}")

    def blend(self, u_k, u_k1):
        """``g_{k+1} = beta u_{k+1} + (1 - beta) u_k``."""
        return self.beta * np.asarray(u_k1) + (1.0 - self.beta) * np.asarray(u_k)


def assemble_heat_1d(n_intervals, mu, source=None):
    """Heat equation ``w_t = mu w_xx`` with linear hat functions.

    The Dirichlet node at x=0 is eliminated, leaving the ``N = n_intervals``
    nodes ``x_j = j / N``, ``j = 1..N``. The Neumann flux ``u`` at x=1
    enters as ``F = mu e_N``.

    Parameters
    ----------
    n_intervals : int
    mu : float
        Diffusivity, > 0.
    source : float, optional
        Constant source term R. When given, a leading input column
        ``int phi_i R dx`` is added and the input vector is ``[1, u]``.
    """
    N = int(n_intervals)
    if N < 2:
        raise DomainError("n_intervals must be >= 2")
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    dx = 1.0 / N
    off = np.ones(N - 1)
    m_diag = np.full(N, 4.0)
    m_diag[-1] = 2.0
    M = sp.diags([off, m_diag, off], [-1, 0, 1], format="csr") * (dx / 6.0)
    k_diag = np.full(N, 2.0)
    k_diag[-1] = 1.0
    K = sp.diags([-off, k_diag, -off], [-1, 0, 1], format="csr") * (-mu / dx)
    F = np.zeros((N, 1))
    F[-1, 0] = mu
    if source is not None:
        load = np.full(N, dx)
        load[-1] = dx / 2.0
        F = np.hstack([float(source) * load[:, None], F])
    return ContinuousSystem(M, K, sp.csr_matrix(F),
                            meta={"kind": "heat1d", "n_intervals": N, "mu": mu,
                                  "dx": dx})


# bilinear element on the reference square, local nodes (0,0),(1,0),(1,1),(0,1)
_GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_LOCAL = np.array([[0, 0], [1, 0], [1, 1], [0, 1]])


def _q1_shape(xi, eta):
    N = np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dN = np.array([[-(1 - eta), -(1 - xi)],
                   [1 - eta, -xi],
                   [eta, xi],
                   [-eta, 1 - xi]])
    return N, dN


def q1_element_matrices(h, velocity=(0.0, 0.0)):
    """Element mass, Laplacian stiffness and convection matrices.

    For a square element of width ``h`` returns ``(Me, Se, Ce)`` with
    ``Me_ij = int phi_j phi_i``, ``Se_ij = int grad phi_j . grad phi_i`` and
    ``Ce_ij = int (v . grad phi_j) phi_i``, by 2x2 Gauss quadrature (exact
    for these integrands).
    """
    v = np.asarray(velocity, dtype=float)
    Me = np.zeros((4, 4))
    Se = np.zeros((4, 4))
    Ce = np.zeros((4, 4))
    for xi in _GAUSS:
        for eta in _GAUSS:
            N, dN = _q1_shape(xi, eta)
            w = 0.25
            Me += w * h * h * np.outer(N, N)
            Se += w * dN @ dN.T
            Ce += w * h * np.outer(N, dN @ v)
    return Me, Se, Ce


def default_segments(nx, ny):
    """Five disjoint Neumann segments: left, right and three on the top edge.

    Only a figure of the original layout exists, so these fractions are a
    configurable approximation: left and right edges over [0.2, 0.8] of the
    height, top edge over [0.1, 0.3], [0.4, 0.6] and [0.7, 0.9] of the width.
    """
    def span(n, a, b):
        start, stop = int(round(a * n)), int(round(b * n))
        if stop - start < 2:
            raise DomainError(f"mesh too coarse for a segment over [{a}, {b}]")
        return start, stop

    return [
        NeumannSegment("left", *span(ny, 0.2, 0.8)),
        NeumannSegment("right", *span(ny, 0.2, 0.8)),
        NeumannSegment("top", *span(nx, 0.1, 0.3)),
        NeumannSegment("top", *span(nx, 0.4, 0.6)),
        NeumannSegment("top", *span(nx, 0.7, 0.9)),
    ]


def _segment_nodes(seg, nx, ny):
    """Global node indices of the boundary nodes start..stop of a segment."""
    idx = np.arange(seg.start, seg.stop + 1)
    limit = ny if seg.side in ("left", "right") else nx
    if seg.stop > limit:
        raise DomainError(f"segment {seg} exceeds the {limit} edges of its side")
    if seg.side == "left":
        return idx * (nx + 1)
    if seg.side == "right":
        return idx * (nx + 1) + nx
    if seg.side == "bottom":
        return idx
    return ny * (nx + 1) + idx


def assemble_convdiff_2d(nx, ny, mu, velocity=(1.0, 1.0), segments=None,
                         width=1.0, height=0.25):
    """Convection-diffusion ``w_t = mu lap w - v . grad w`` on a square mesh.

    ``K_ij = -mu int grad phi_j . grad phi_i - int (v . grad phi_j) phi_i``
    and ``F_ij = mu int_{E_j} phi_i``. Boundary nodes that are not strictly
    inside a Neumann segment are Dirichlet nodes and are eliminated.

    Parameters
    ----------
    nx, ny : int
        Elements along x1 and x2; elements must be square,
        i.e. ``width / nx == height / ny``.
    mu : float
    velocity : (2,) sequence
    segments : list of NeumannSegment, optional
        Defaults to :func:`default_segments`.
    """
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2:
        raise DomainError("need at least 2 elements per direction")
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    h = width / nx
    if abs(height / ny - h) > 1e-12 * h:
        raise DomainError(
            f"elements are not square: {width}/{nx} != {height}/{ny}")
    if segments is None:
        segments = default_segments(nx, ny)

    n_nodes = (nx + 1) * (ny + 1)
    seg_nodes = [_segment_nodes(s, nx, ny) for s in segments]
    owner = {}
    for j, nodes in enumerate(seg_nodes):
        for node in nodes[1:-1]:
            if node in owner:
                raise DomainError(f"segments {owner[node]} and {j} overlap")
            owner[node] = j
    edge_sets = [set(zip(n[:-1], n[1:])) for n in seg_nodes]
    for a in range(len(edge_sets)):
        for b in range(a + 1, len(edge_sets)):
            if edge_sets[a] & edge_sets[b]:
                raise DomainError(f"segments {a} and {b} overlap")

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    ii, jj = ii.ravel(), jj.ravel()
    interior = (ii > 0) & (ii < nx) & (jj > 0) & (jj < ny)
    free = interior.copy()
    free[list(owner)] = True
    dofs = np.flatnonzero(free)

    Me, Se, Ce = q1_element_matrices(h, velocity)
    Ke = -mu * Se - Ce
    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    base = (ey * (nx + 1) + ex).ravel()
    conn = np.stack([base + dy * (nx + 1) + dx for dx, dy in _LOCAL], axis=1)
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    n_el = conn.shape[0]
    Mg = sp.csr_matrix((np.tile(Me.ravel(), n_el), (rows, cols)),
                       shape=(n_nodes, n_nodes))
    Kg = sp.csr_matrix((np.tile(Ke.ravel(), n_el), (rows, cols)),
                       shape=(n_nodes, n_nodes))

    traces = np.zeros((n_nodes, len(segments)))
    for j, nodes in enumerate(seg_nodes):
        for a, b in zip(nodes[:-1], nodes[1:]):
            traces[a, j] += h / 2.0
            traces[b, j] += h / 2.0

    M = Mg[dofs][:, dofs].tocsr()
    K = Kg[dofs][:, dofs].tocsr()
    traces = traces[dofs]
    coords = np.column_stack([ii[dofs] * h, jj[dofs] * h])
    return ContinuousSystem(
        M, K, sp.csr_matrix(mu * traces),
        meta={"kind": "convdiff2d", "nx": nx, "ny": ny, "h": h, "mu": mu,
              "velocity": tuple(float(v) for v in velocity),
              "segments": list(segments), "coords": coords,
              "segment_traces": traces})


class LTISystem(QueryableSystem):
    """Discrete system obtained from a :class:`ContinuousSystem`.

    ``A = (M - beta dt K)^{-1} (M + (1 - beta) dt K)`` and
    ``B = (M - beta dt K)^{-1} dt F`` are kept implicit behind a sparse LU
    factorization of ``M - beta dt K``.
    """

    def __init__(self, system, scheme):
        self.continuous = system
        self.scheme = scheme
        beta, dt = scheme.beta, scheme.dt
        M, K = system.mass, system.stiffness
        lhs = (M - beta * dt * K).tocsc()
        try:
            self._lu = splu(lhs)
        except RuntimeError as exc:
            raise FactorizationError(f"M - beta*dt*K is singular: {exc}") from exc
        diag_u = np.abs(self._lu.U.diagonal())
        if diag_u.min() <= 1e-14 * diag_u.max():
            raise FactorizationError("M - beta*dt*K is numerically singular")
        self._rhs = (M + (1.0 - beta) * dt * K).tocsr()
        self._rhs_T = self._rhs.T.tocsr()
        self._Fdt = (dt * system.input_map).toarray()
        self.n_dof = system.n_dof
        self.n_inputs = system.n_inputs

    def blend(self, u_k, u_k1):
        return self.scheme.blend(u_k, u_k1)

    def step(self, state, g):
        state = np.asarray(state, dtype=float)
        g = np.asarray(g, dtype=float)
        rhs = self._rhs @ state.T + self._Fdt @ g.T
        return self._lu.solve(rhs).T

    def _apply_A(self, x):
        return self._lu.solve(self._rhs @ x)

    def _apply_AT(self, x):
        return self._rhs_T @ self._lu.solve(x, trans="T")

    def _apply_B(self, g):
        return self._lu.solve(self._Fdt @ g)

    def _dense_A(self):
        return self._lu.solve(self._rhs.toarray())

    def _dense_B(self):
        return self._lu.solve(self._Fdt)

    def oracle(self):
        """Intrusive access to A and B; reference and test code only."""
        return LTIOracle(n_dof=self.n_dof, apply_A=self._apply_A,
                         apply_AT=self._apply_AT, apply_B=self._apply_B,
                         _dense_A=self._dense_A, _dense_B=self._dense_B)


def discretize(system, scheme):
    """Return the queryable discrete system for ``system`` under ``scheme``."""
    return LTISystem(system, scheme)
