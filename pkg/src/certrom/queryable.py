"""Black-box access to a discrete linear time-invariant system.

Downstream learning code only ever calls :meth:`QueryableSystem.step`.
Concrete systems may additionally offer an ``oracle()`` method that exposes
the operators themselves; that capability is reserved for intrusive
reference computations and tests.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from ._validation import check_inputs, check_matrix, check_vector
from .exceptions import DomainError


class QueryableSystem(ABC):
    """A system ``w_{k+1} = step(w_k, g_{k+1})`` with hidden operators.

    ``step`` accepts either a single state of shape ``(n_dof,)`` with an
    input of shape ``(n_inputs,)``, or a batch of states of shape
    ``(m, n_dof)`` with inputs of shape ``(m, n_inputs)``; rows are advanced
    independently.
    """

    n_dof: int
    n_inputs: int

    @abstractmethod
    def step(self, state, g):
        """Advance one time step."""


class DenseLTI(QueryableSystem):
    """Queryable system backed by explicit dense matrices ``A`` and ``B``.

    Mostly useful for tests and small synthetic experiments.
    """

    def __init__(self, A, B):
        A = check_matrix(A, "A")
        if A.shape[0] != A.shape[1]:
            raise DomainError(f"A must be square, got {A.shape}")
        B = check_matrix(B, "B", shape=(A.shape[0], None))
        self._A = A
        self._B = B
        self.n_dof = A.shape[0]
        self.n_inputs = B.shape[1]

    def step(self, state, g):
        return state @ self._A.T + g @ self._B.T

    def oracle(self):
        return LTIOracle(
            n_dof=self.n_dof,
            apply_A=lambda x: self._A @ x,
            apply_AT=lambda x: self._A.T @ x,
            apply_B=lambda g: self._B @ g,
            _dense_A=lambda: self._A.copy(),
            _dense_B=lambda: self._B.copy(),
        )


@dataclass(frozen=True)
class LTIOracle:
    """Intrusive access to ``A`` and ``B``; reference and test code only."""

    n_dof: int
    apply_A: object
    apply_AT: object
    apply_B: object
    _dense_A: object
    _dense_B: object
    max_dense: int = 512

    def dense_A(self, force=False):
        if self.n_dof > self.max_dense and not force:
            raise DomainError(
                f"refusing to form a dense {self.n_dof}x{self.n_dof} A; "
                "pass force=True")
        return self._dense_A()

    def dense_B(self):
        return self._dense_B()


class CountingSystem(QueryableSystem):
    """Wrap a system and count the number of ``step`` calls."""

    def __init__(self, system):
        self.system = system
        self.n_dof = system.n_dof
        self.n_inputs = system.n_inputs
        self.calls = 0

    def step(self, state, g):
        self.calls += 1
        return self.system.step(state, g)


@dataclass(frozen=True)
class Trajectory:
    """States ``w_0..w_K`` (rows) and inputs ``g_1..g_K`` (rows)."""

    states: np.ndarray
    inputs: np.ndarray

    def __post_init__(self):
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise DomainError(
                f"{self.states.shape[0]} states do not match "
                f"{self.inputs.shape[0]} inputs")

    @property
    def n_steps(self):
        return self.inputs.shape[0]


def simulate(system, w0, inputs):
    """Query ``system`` from ``w0`` along the input trajectory ``inputs``.

    Parameters
    ----------
    system : QueryableSystem
    w0 : (N,) array_like
    inputs : (K, p) array_like
        Row k holds ``g_{k+1}``.

    Returns
    -------
    Trajectory
    """
    w0 = check_vector(w0, "w0", system.n_dof)
    G = check_inputs(inputs, system.n_inputs)
    W = np.empty((G.shape[0] + 1, system.n_dof))
    W[0] = w0
    for k in range(G.shape[0]):
        W[k + 1] = system.step(W[k], G[k])
    return Trajectory(W, G)


def homogeneous_trajectories(system, initials, n_steps):
    """Zero-input trajectories ``w_l = A^l w_0`` from several initial states.

    All initial states are advanced together with batched ``step`` calls.

    Returns
    -------
    list of Trajectory
        One per initial state, in the given order.
    """
    if n_steps < 1:
        raise DomainError("n_steps must be >= 1")
    Z = check_matrix(np.atleast_2d(np.asarray(initials, dtype=float)),
                     "initials", shape=(None, system.n_dof))
    m = Z.shape[0]
    states = np.empty((n_steps + 1, m, system.n_dof))
    states[0] = Z
    zero = np.zeros((m, system.n_inputs))
    for k in range(n_steps):
        states[k + 1] = system.step(states[k], zero)
    G = np.zeros((n_steps, system.n_inputs))
    return [Trajectory(states[:, i, :].copy(), G) for i in range(m)]
