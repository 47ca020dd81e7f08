"""Error metrics e1..e4 and error-estimate metrics d1..d6.

With full states ``w_k``, reduced states ``w~_k`` (k = 0..J), residual norms
``rho_k`` and estimates ``Delta_k``:

* e1 = ||W - V W~||_F / ||W~||_F over k = 0..J
* e2 = mean of rho_1..rho_J
* e3 = sum_{k<J} ||w_k - V w~_k|| / (J sum_{k<J} ||w_k||); d1, d2, d3 use
  the intrusive, learned and deterministic Delta_k in the numerator
* e4 = ||w_k - V w~_k|| / ||w_k|| at one time index; d4, d5, d6 likewise

Relative metrics with a zero denominator are NaN, written as ``undefined``.
"""

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DomainError

UNDEFINED = float("nan")

#: metric -> (certificate kind, family) for the estimate metrics
ESTIMATES = {"d1": ("intrusive", "average"), "d2": ("learned", "average"),
             "d3": ("deterministic", "average"), "d4": ("intrusive", "at_time"),
             "d5": ("learned", "at_time"), "d6": ("deterministic", "at_time")}


def _ratio(num, den):
    return float(num / den) if den > 0 else UNDEFINED


@dataclass
class MetricsTable:
    """Scalar metrics per basis dimension plus per-time series.

    ``values[metric][n]`` is a float (NaN when undefined) and
    ``series[name][n]`` a ``(t, value)`` pair of arrays.
    """

    values: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def set(self, metric, n, value):
        self.values.setdefault(metric, {})[int(n)] = float(value)

    def add_series(self, name, n, t, y):
        self.series.setdefault(name, {})[int(n)] = (np.asarray(t, dtype=float),
                                                   np.asarray(y, dtype=float))

    def merge(self, other):
        for metric, by_n in other.values.items():
            for n, v in by_n.items():
                self.set(metric, n, v)
        for name, by_n in other.series.items():
            for n, (t, y) in by_n.items():
                self.add_series(name, n, t, y)
        self.info.update(other.info)
        return self

    def get(self, metric, n):
        return self.values[metric][int(n)]


def compute_metrics(full, reduced, basis, certificates, time_index=None,
                    dt=1.0, metrics=None):
    """Evaluate the metric suite for one basis dimension.

    Parameters
    ----------
    full : Trajectory or None
        Full-order test trajectory ``w_0..w_J``; without it only e2 and the
        absolute estimates are available.
    reduced : Trajectory
        Reduced trajectory ``w~_0..w~_J``.
    basis : PodBasis
    certificates : dict
        Maps ``"intrusive"``, ``"learned"``, ``"deterministic"`` to
        :class:`ErrorCertificate`; missing kinds skip their metrics.
    time_index : int, optional
        Time step k for e4 and d4..d6; defaults to J.
    dt : float
        Time step, used for the time column of the series.
    metrics : iterable of str, optional
        Subset of metrics to report.

    Returns
    -------
    MetricsTable
    """
    V = basis.V
    n = V.shape[1]
    Wr = reduced.states
    J = Wr.shape[0] - 1
    k_at = J if time_index is None else int(time_index)
    if not 0 <= k_at <= J:
        raise DomainError(f"time_index {k_at} outside [0, {J}]")
    wanted = set(metrics) if metrics is not None else None
    table = MetricsTable()
    t = dt * np.arange(J + 1)

    def report(metric, value):
        if wanted is None or metric in wanted:
            table.set(metric, n, value)

    if certificates:
        rho = next(iter(certificates.values())).residual_norms
        if rho.size != J:
            raise DomainError("certificate horizon does not match the trajectory")
        report("e2", float(np.mean(rho)) if J > 0 else UNDEFINED)
    for kind, cert in certificates.items():
        table.add_series(f"delta_{kind}", n, t, cert.delta_from_zero)

    if full is None:
        return table
    W = full.states
    if W.shape[0] != J + 1 or W.shape[1] != V.shape[0]:
        raise DomainError("full and reduced trajectories do not match")
    lifted = Wr @ V.T
    err = np.linalg.norm(W - lifted, axis=1)
    norms = np.linalg.norm(W, axis=1)
    table.add_series("error", n, t, err)
    table.add_series("state_norm", n, t, norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        table.add_series("e4", n, t, np.where(norms > 0, err / norms, np.nan))

    report("e1", _ratio(np.linalg.norm(W - lifted), np.linalg.norm(Wr)))
    avg_den = J * norms[:J].sum()
    report("e3", _ratio(err[:J].sum(), avg_den))
    report("e4", _ratio(err[k_at], norms[k_at]))
    for metric, (kind, family) in ESTIMATES.items():
        cert = certificates.get(kind)
        if cert is None:
            continue
        delta = cert.delta_from_zero
        if family == "average":
            report(metric, _ratio(delta[:J].sum(), avg_den))
        else:
            report(metric, _ratio(delta[k_at], norms[k_at]))
            with np.errstate(divide="ignore", invalid="ignore"):
                table.add_series(metric, n, t,
                                 np.where(norms > 0, delta / norms, np.nan))
    return table
