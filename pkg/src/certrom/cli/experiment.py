"""Offline training, online certification and Monte Carlo coverage runs."""

import contextlib
import json
import os
from dataclasses import dataclass

import numpy as np
import scipy

from .. import __version__
from ..certify import (NormBoundRealization, deterministic_certificate,
                       intrusive_certificate, learned_certificate,
                       output_interval, power_norms, residual_norms,
                       sample_norm_bounds)
from ..exceptions import CertromError, ConfigError, StaleArtifacts
from ..learn import (ResidualNormInference, ResidualNormOps, design_excitation,
                     infer_operators, reproject_sample)
from ..numerics import RngStream
from ..pde import TimeScheme, assemble_convdiff_2d, assemble_heat_1d, discretize
from ..queryable import DenseLTI, simulate
from ..reduction import PodBasis, ReducedModel, intrusive_project, pod_basis, simulate_reduced
from .config import check_training_size
from .metrics import MetricsTable, _ratio, compute_metrics
from .signals import signal_library

# independent random streams per purpose
STREAM_MODEL, STREAM_BASIS, STREAM_TRAIN, STREAM_TEST = 1, 2, 3, 4
STREAM_NORMS, STREAM_COVERAGE, STREAM_INITIAL = 5, 6, 7

#: Absolute slack when comparing an estimate with the true error.
BOUND_SLACK = 1e-12


@contextlib.contextmanager
def phase(name):
    """Prefix the message of any certrom error raised inside with ``name``."""
    try:
        yield
    except CertromError as exc:
        if exc.args and not str(exc.args[0]).startswith(f"[{name}]"):
            exc.args = (f"[{name}] {exc.args[0]}",) + exc.args[1:]
        raise


def dense_random_system(n_dof, n_inputs, norm=0.95, seed=0):
    """Dense system with ``||A||_2 = norm`` and Gaussian ``B``.

    ``A = U diag(s) W^T`` with random orthogonal ``U, W`` and singular values
    uniform in ``(0, norm]``, the largest equal to ``norm``.
    """
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(int(seed), spawn_key=(STREAM_MODEL,))))
    U, _ = np.linalg.qr(rng.standard_normal((n_dof, n_dof)))
    W, _ = np.linalg.qr(rng.standard_normal((n_dof, n_dof)))
    s = np.sort(rng.uniform(0.0, norm, n_dof))[::-1]
    s[0] = norm
    A = (U * s) @ W.T
    B = rng.standard_normal((n_dof, n_inputs))
    return DenseLTI(A, B)


def build_system(config):
    """Queryable full-order system described by ``config``."""
    p = config.params
    with phase("model"):
        if config.model == "heat1d":
            cont = assemble_heat_1d(int(p.get("n_intervals", 133)),
                                    float(p.get("mu", 0.1)))
        elif config.model == "convdiff2d":
            cont = assemble_convdiff_2d(
                int(p.get("nx", 32)), int(p.get("ny", 8)), float(p.get("mu", 1.0)),
                velocity=tuple(p.get("velocity", (1.0, 1.0))))
        else:
            return dense_random_system(int(p.get("n_dof", 16)),
                                       int(p.get("n_inputs", 1)),
                                       float(p.get("norm", 0.95)),
                                       int(p.get("seed", 0)))
        return discretize(cont, TimeScheme(config.beta, config.dt))


def output_rows(config, system):
    """Output rows ``C`` (as 1-D arrays) for the names in ``config.outputs``.

    ``average`` is ``(1/N, ..., 1/N)``; ``boundary<j>`` integrates the
    finite-element state over Neumann segment j (1-based) of the 2-D model,
    ``boundary`` meaning the last segment.
    """
    rows = {}
    N = system.n_dof
    for name in config.outputs:
        if name == "average":
            rows[name] = np.full(N, 1.0 / N)
        elif name.startswith("boundary"):
            meta = getattr(getattr(system, "continuous", None), "meta", {})
            if "segment_traces" not in meta:
                raise ConfigError(f"output {name!r} needs the convdiff2d model")
            traces = meta["segment_traces"]
            j = int(name[len("boundary"):] or traces.shape[1])
            if not 1 <= j <= traces.shape[1]:
                raise ConfigError(f"no boundary segment {j}")
            rows[name] = traces[:, j - 1].copy()
        else:
            raise ConfigError(f"unknown output {name!r}")
    return rows


def input_signal(config, phase_name, n_inputs):
    spec = {"basis": config.basis_signal, "train": config.train_signal,
            "test": config.test_signal}[phase_name]
    horizon = {"basis": config.k_basis, "train": config.k_train,
               "test": config.j_test}[phase_name]
    stream = {"basis": STREAM_BASIS, "train": STREAM_TRAIN,
              "test": STREAM_TEST}[phase_name]
    with phase(f"signal:{phase_name}"):
        return signal_library(spec.name, spec.as_dict(), horizon, config.dt,
                              config.beta, n_inputs, RngStream(config.seed, stream))


def initial_test_state(config, N):
    if config.test_initial == "zero":
        return np.zeros(N)
    if config.test_initial == "ones":
        return np.ones(N)
    return RngStream(config.seed, STREAM_INITIAL).standard_normal(N)


@dataclass
class Artifacts:
    """Everything the online phase needs, keyed by basis dimension."""

    config_hash: str
    basis: PodBasis
    roms: dict
    ops: dict
    realization: NormBoundRealization
    manifest: dict


def run_offline(config, out_dir=None, system=None):
    """Offline phase: basis, operator and residual-operator inference, xi sampling.

    ``InsufficientData`` is raised before the system is queried when
    ``k_train`` cannot determine the residual operators for the largest
    basis dimension. Artifacts are written to ``out_dir`` when given.
    """
    with phase("config"):
        check_training_size(config)
    S = build_system(config) if system is None else system
    N, p = S.n_dof, S.n_inputs
    G_basis = input_signal(config, "basis", p)
    with phase("basis"):
        snapshots = simulate(S, np.zeros(N), G_basis).states.T
        basis = pod_basis(snapshots, config.n_max)
    G_train = input_signal(config, "train", p)
    roms, ops, objectives = {}, {}, {}
    for n in config.dims:
        b = basis.truncate(n)
        with phase(f"learn:n={n}"):
            data = [reproject_sample(S, b, np.zeros(N), G_train,
                                     keep_residuals=False)]
            if config.excitation:
                data += [reproject_sample(S, b, w0, g, keep_residuals=False)
                         for w0, g in design_excitation(b, p)]
            roms[n] = infer_operators(data)
            ops[n] = ResidualNormInference().fit(data, roms[n]).ops_
            objectives[n] = ops[n].objective
    with phase("norm_bounds"):
        realization = sample_norm_bounds(S, config.gamma, config.n_samples,
                                         config.j_test,
                                         RngStream(config.seed, STREAM_NORMS))
    manifest = {
        "config_hash": config.offline_hash(),
        "config": config.offline_fields(),
        "dims": list(config.dims),
        "n_dof": N,
        "n_inputs": p,
        "p_lb": realization.p_lb,
        "n_samples": realization.n_samples,
        "objectives": {str(n): objectives[n] for n in config.dims},
        "versions": versions(),
    }
    art = Artifacts(manifest["config_hash"], basis, roms, ops, realization,
                    manifest)
    if out_dir is not None:
        save_artifacts(art, out_dir)
    return art


def versions():
    return {"certrom": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__}


def save_artifacts(art, out_dir):
    """Write arrays as ``.npy`` files plus ``manifest.json``.

    ``.npy`` files carry no timestamps, so identical runs give identical bytes.
    """
    arr_dir = os.path.join(out_dir, "arrays")
    os.makedirs(arr_dir, exist_ok=True)

    def put(name, value):
        np.save(os.path.join(arr_dir, name + ".npy"), np.asarray(value))

    put("basis", art.basis.V)
    put("singular_values", art.basis.singular_values)
    r = art.realization
    put("xi", r.xi)
    put("gamma", r.gamma)
    put("theta_max_sq", r.theta_max_sq)
    for n, rom in art.roms.items():
        put(f"n{n}_A", rom.A_r)
        put(f"n{n}_B", rom.B_r)
        o = art.ops[n]
        for key in ("M1", "M2", "M3", "M4", "P1", "P2", "P3"):
            put(f"n{n}_{key}", getattr(o, key))
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(art.manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_artifacts(path, config=None):
    """Read artifacts; with ``config``, require a matching offline hash."""
    try:
        with open(os.path.join(path, "manifest.json"), encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise StaleArtifacts(f"no artifacts at {path}: {exc}") from exc
    if config is not None and manifest["config_hash"] != config.offline_hash():
        raise StaleArtifacts(
            f"artifacts in {path} were built from a different configuration "
            f"(hash {manifest['config_hash'][:12]}, expected "
            f"{config.offline_hash()[:12]}); rerun offline")
    arr_dir = os.path.join(path, "arrays")

    def get(name):
        return np.load(os.path.join(arr_dir, name + ".npy"))

    basis = PodBasis(get("basis"), get("singular_values"))
    roms, ops = {}, {}
    for n in manifest["dims"]:
        roms[n] = ReducedModel(get(f"n{n}_A"), get(f"n{n}_B"))
        ops[n] = ResidualNormOps(*(get(f"n{n}_{k}") for k in ("M1", "M2", "M3", "M4")),
                                 manifest["objectives"][str(n)],
                                 *(get(f"n{n}_{k}") for k in ("P1", "P2", "P3")))
    realization = NormBoundRealization(get("xi"), get("gamma"),
                                       int(manifest["n_samples"]),
                                       float(manifest["p_lb"]), get("theta_max_sq"))
    return Artifacts(manifest["config_hash"], basis, roms, ops, realization,
                     manifest)


def _check_hash(config, artifacts):
    if artifacts.config_hash != config.offline_hash():
        raise StaleArtifacts("artifacts do not match the configuration; "
                             "rerun offline")


def _reduced_run(config, artifacts, n, w0, G):
    b = artifacts.basis.truncate(n)
    rom, ops = artifacts.roms[n], artifacts.ops[n]
    red = simulate_reduced(rom, b.V.T @ w0, G)
    rho = residual_norms(ops, rom, red.states, G)
    e0 = float(np.linalg.norm(w0 - b.V @ (b.V.T @ w0)))
    return b, rom, red, rho, e0


def direct_residual_norms(system, V, reduced_states, G):
    """``||step(V w_k, g_{k+1}) - V w_{k+1}||`` by querying the full system."""
    lifted = reduced_states @ V.T
    R = system.step(lifted[:-1], G) - lifted[1:]
    return np.linalg.norm(R, axis=1)


def run_online(config, artifacts, reference=False, system=None):
    """Online phase: reduced prediction with learned error estimates.

    Without ``reference`` only reduced quantities are used and the full
    system is never queried. With ``reference`` the full test trajectory,
    the intrusive estimate with exact ``||A^l||_2`` and the intrusive reduced
    model are computed as well, which adds the ``ref_*`` comparison metrics.
    """
    _check_hash(config, artifacts)
    S = build_system(config) if system is None else system
    N, p = artifacts.basis.n_dof, S.n_inputs
    G = input_signal(config, "test", p)
    w0 = initial_test_state(config, N)
    outputs = output_rows(config, S)
    J = config.j_test
    table = MetricsTable()
    table.info.update(p_lb=artifacts.realization.p_lb,
                      n_samples=artifacts.realization.n_samples,
                      assumption="deterministic estimate assumes ||A||_2 <= 1")
    full = oracle = norms = None
    if reference:
        with phase("reference"):
            full = simulate(S, w0, G)
            oracle = S.oracle()
            norms = power_norms(oracle, J, stride=config.intrusive_stride)
            table.info["spectral_norm_A"] = float(norms[1]) if J >= 1 else 1.0
    t = config.dt * np.arange(J + 1)
    for n in config.dims:
        with phase(f"online:n={n}"):
            b, rom, red, rho, e0 = _reduced_run(config, artifacts, n, w0, G)
            certs = {"deterministic": deterministic_certificate(e0, rho),
                     "learned": learned_certificate(artifacts.realization, e0, rho)}
            if reference:
                certs["intrusive"] = intrusive_certificate(oracle, e0, rho,
                                                           norms=norms)
            table.merge(compute_metrics(full, red, b, certs, config.at_time,
                                        config.dt, config.metrics))
            lifted = red.states @ b.V.T
            for name, C in outputs.items():
                y_r = lifted @ C
                cn = float(np.linalg.norm(C))
                box = output_interval(cn, y_r[1:], certs["learned"])
                d0 = cn * certs["learned"].delta_from_zero[0]
                table.add_series(f"output_{name}_reduced", n, t, y_r)
                table.add_series(f"output_{name}_lower", n, t,
                                 np.concatenate([[y_r[0] - d0], box[:, 0]]))
                table.add_series(f"output_{name}_upper", n, t,
                                 np.concatenate([[y_r[0] + d0], box[:, 1]]))
                if reference:
                    table.add_series(f"output_{name}_true", n, t, full.states @ C)
            if reference:
                _reference_metrics(table, S, oracle, full, b, red, rho, G)
    return table


def _reference_metrics(table, S, oracle, full, b, red, rho, G):
    n, V = b.n, b.V
    red_i = simulate_reduced(intrusive_project(oracle, b), V.T @ full.states[0], G)
    rho_i = direct_residual_norms(S, V, red_i.states, G)
    W = full.states
    table.set("ref_e1_intrusive", n,
              _ratio(np.linalg.norm(W - red_i.states @ V.T),
                     np.linalg.norm(red_i.states)))
    table.set("ref_e2_intrusive", n, rho_i.mean())
    table.set("ref_e2_direct", n, direct_residual_norms(S, V, red.states, G).mean())


@dataclass
class CoverageResult:
    """Monte Carlo frequency with which the learned estimate held for all k.

    ``covered[n]`` counts realizations for which ``Delta_k >= error_k`` at
    every k; ``output_violations[name][n]`` counts time steps at which the
    state estimate held but the output left its interval.
    """

    reps: int
    p_lb: float
    covered: dict
    output_checks: dict
    output_violations: dict

    def frequency(self, n):
        return self.covered[n] / self.reps

    def standard_error(self, n):
        f = self.frequency(n)
        return float(np.sqrt(f * (1.0 - f) / self.reps))

    def passes(self, n):
        return self.frequency(n) >= self.p_lb - 3.0 * self.standard_error(n)


def run_coverage(config, reps, artifacts=None, system=None):
    """Repeat the xi sampling ``reps`` times and check the learned estimate.

    Realization r uses child stream r of a coverage stream, so runs are
    reproducible and independent of the offline realization.
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    S = build_system(config) if system is None else system
    if artifacts is None:
        artifacts = run_offline(config, system=S)
    _check_hash(config, artifacts)
    N, p, J = S.n_dof, S.n_inputs, config.j_test
    G = input_signal(config, "test", p)
    w0 = initial_test_state(config, N)
    outputs = output_rows(config, S)
    full = simulate(S, w0, G)
    runs = {}
    for n in config.dims:
        b, rom, red, rho, e0 = _reduced_run(config, artifacts, n, w0, G)
        lifted = red.states @ b.V.T
        err = np.linalg.norm(full.states - lifted, axis=1)
        out_err = {name: np.abs(full.states @ C - lifted @ C)
                   for name, C in outputs.items()}
        runs[n] = (e0, rho, err, out_err)
    covered = {n: 0 for n in config.dims}
    checks = {name: {n: 0 for n in config.dims} for name in outputs}
    violations = {name: {n: 0 for n in config.dims} for name in outputs}
    stream = RngStream(config.seed, STREAM_COVERAGE)
    p_lb = None
    for r in range(reps):
        with phase(f"coverage:rep={r}"):
            real = sample_norm_bounds(S, config.gamma, config.n_samples, J,
                                      stream.spawn(r))
        p_lb = real.p_lb
        for n, (e0, rho, err, out_err) in runs.items():
            delta = learned_certificate(real, e0, rho).delta_from_zero
            held = delta + BOUND_SLACK >= err
            covered[n] += bool(np.all(held))
            for name, C in outputs.items():
                width = float(np.linalg.norm(C)) * delta
                checks[name][n] += int(held.sum())
                violations[name][n] += int(np.sum(
                    held & (out_err[name] > width + BOUND_SLACK)))
    return CoverageResult(reps, p_lb, covered, checks, violations)
