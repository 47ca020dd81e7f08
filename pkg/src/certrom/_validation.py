"""Input validation helpers shared by the estimators."""

import numpy as np

from .exceptions import DomainError, NotFittedError


def check_matrix(X, name="X", shape=None, allow_empty=True):
    """Return ``X`` as a finite 2-D float array.

    ``shape`` may contain ``None`` entries for unconstrained axes.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DomainError(f"{name} must be 2-D, got shape {X.shape}")
    if not allow_empty and X.size == 0:
        raise DomainError(f"{name} must be non-empty")
    if not np.all(np.isfinite(X)):
        raise DomainError(f"{name} contains non-finite entries")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(X.shape, shape)):
            if want is not None and got != want:
                raise DomainError(
                    f"{name} has shape {X.shape}, expected {shape} (axis {axis})")
    return X


def check_vector(x, name="x", size=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite entries")
    if size is not None and x.shape[0] != size:
        raise DomainError(f"{name} has length {x.shape[0]}, expected {size}")
    return x


def check_inputs(G, n_inputs, name="inputs"):
    """Return an input trajectory as a ``(K, p)`` array.

    A 1-D sequence is accepted when ``p == 1`` and read as one scalar input
    per time step.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim == 1:
        if n_inputs != 1:
            raise DomainError(
                f"{name} is 1-D but the system has {n_inputs} inputs")
        G = G[:, None]
    return check_matrix(G, name, shape=(None, n_inputs))


def check_is_fitted(estimator, attributes):
    if isinstance(attributes, str):
        attributes = [attributes]
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted yet; call fit first")


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (strict and value == 0):
        relation = "> 0" if strict else ">= 0"
        raise DomainError(f"{name} must be {relation}, got {value}")
    return value
