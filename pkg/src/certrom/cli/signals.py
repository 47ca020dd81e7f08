"""Named input signals evaluated on the time grid ``t_k = k dt``.

Analytic signals give ``u(t)`` and are turned into ``g_{k+1} = beta u_{k+1}
+ (1 - beta) u_k``. Random signals are drawn directly as ``g_1..g_K``; the
heat training input ``[0, z_1, ..., z_K]`` with ``beta = 1`` is the
``gaussian`` signal.
"""

import numpy as np

from ..exceptions import ConfigError


def _exp_sin(t, p, params, rng):
    # u_j(t) = exp(rate t) sin(freq j t), j = 1..p
    rate, freq = params.get("rate", 1.0), params["freq"]
    j = np.arange(1, p + 1)
    return np.exp(rate * t)[:, None] * np.sin(freq * np.outer(t, j))


def _mixed_sin(t, p, params, rng):
    if p != 5:
        raise ConfigError("mixed_sin has exactly 5 components")
    pi = np.pi
    return np.column_stack([
        5 * t * np.sin(pi * t),
        np.exp(5 * t) * np.sin(2 * pi * t),
        np.sqrt(3 + t ** 2) * np.sin(3 * pi * t),
        50 * t ** 2 * np.sin(4 * pi * t),
        np.exp(2 * t) * np.sin(5 * pi * t),
    ])


def _random_freq_sin(t, p, params, rng):
    # u_j(t) = sin(j pi t z_j) with one standard-normal z_j per component
    z = rng.standard_normal(p)
    j = np.arange(1, p + 1)
    return np.sin(np.pi * np.outer(t, j * z))


def _constant(t, p, params, rng):
    return np.full((t.size, p), params.get("value", 0.0))


def _gaussian(t, p, params, rng):
    return params.get("sigma", 1.0) * rng.standard_normal((t.size, p))


def _sin2_gaussian(t, p, params, rng):
    # [g_k]_j ~ N(0, sin^2(j pi t_k)), components indexed j = 1..p
    j = np.arange(1, p + 1)
    return np.abs(np.sin(np.pi * np.outer(t, j))) * rng.standard_normal((t.size, p))


ANALYTIC = {"exp_sin": _exp_sin, "mixed_sin": _mixed_sin,
            "random_freq_sin": _random_freq_sin, "constant": _constant,
            "zero": _constant}
RANDOM = {"gaussian": _gaussian, "sin2_gaussian": _sin2_gaussian}
NEEDS_RNG = {"random_freq_sin", "gaussian", "sin2_gaussian"}


def signal_library(name, params, horizon, dt, beta, n_inputs=1, rng=None):
    """Input trajectory ``g_1..g_K`` as a ``(K, p)`` array.

    Parameters
    ----------
    name : str
        One of ``exp_sin`` (params ``rate``, ``freq``), ``mixed_sin``,
        ``random_freq_sin``, ``constant`` (``value``), ``zero``,
        ``gaussian`` (``sigma``) or ``sin2_gaussian``.
    params : dict
    horizon : int
        Number of steps K.
    dt, beta : float
        Time step and blending weight of the time scheme.
    n_inputs : int
    rng : RngStream, optional
        Required by the random signals.
    """
    params = dict(params)
    if name not in ANALYTIC and name not in RANDOM:
        raise ConfigError(f"unknown signal {name!r}; choose from "
                          f"{sorted(ANALYTIC) + sorted(RANDOM)}")
    if name in NEEDS_RNG and rng is None:
        raise ConfigError(f"signal {name!r} needs a random stream")
    if horizon < 1:
        raise ConfigError("signal horizon must be >= 1")
    if name in RANDOM:
        t = dt * np.arange(1, horizon + 1)
        return RANDOM[name](t, n_inputs, params, rng)
    t = dt * np.arange(horizon + 1)
    u = ANALYTIC[name](t, n_inputs, params, rng)
    return beta * u[1:] + (1.0 - beta) * u[:-1]
