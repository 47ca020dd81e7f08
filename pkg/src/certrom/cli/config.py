"""Experiment configuration read from INI-style text files.

A configuration has the sections ``model``, ``scheme``, ``horizon``,
``reduction``, ``signals``, ``estimator`` and ``output``. Signals are
written as ``name key=value ...``, e.g. ``exp_sin rate=1 freq=12*pi/5``.
Numeric values may use ``pi`` and the operators ``+ - * / **``.
"""

import ast
import configparser
import hashlib
import json
import math
import operator
import os
from dataclasses import asdict, dataclass, replace

from ..exceptions import ConfigError, InsufficientData
from ..learn import residual_unknowns

#: Environment variable that supplies the seed when a config omits it.
SEED_ENV = "CERTROM_SEED"

MODELS = ("heat1d", "convdiff2d", "dense_random")
METRICS = ("e1", "e2", "e3", "e4", "d1", "d2", "d3", "d4", "d5", "d6")

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
        ast.Div: operator.truediv, ast.Pow: operator.pow,
        ast.USub: operator.neg, ast.UAdd: operator.pos}
_NAMES = {"pi": math.pi, "e": math.e}


def parse_number(text):
    """Evaluate a small arithmetic expression such as ``12*pi/5``."""
    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"cannot evaluate {text!r}")
    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse number {text!r}") from exc


def parse_dims(text):
    """``"1-8"`` or ``"2, 4, 6"`` or a mix like ``"1-3, 5"``."""
    dims = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = (int(s) for s in part.split("-", 1))
            dims.extend(range(lo, hi + 1))
        else:
            dims.append(int(part))
    if not dims or min(dims) < 1:
        raise ConfigError(f"basis dimensions must be positive: {text!r}")
    return tuple(sorted(set(dims)))


@dataclass(frozen=True)
class SignalSpec:
    name: str
    params: tuple = ()

    @classmethod
    def parse(cls, text):
        tokens = text.split()
        if not tokens:
            raise ConfigError("empty signal specification")
        params = []
        for tok in tokens[1:]:
            if "=" not in tok:
                raise ConfigError(f"signal parameter {tok!r} is not key=value")
            key, value = tok.split("=", 1)
            params.append((key, float(parse_number(value))))
        return cls(tokens[0], tuple(sorted(params)))

    def as_dict(self):
        return dict(self.params)

    def __str__(self):
        return " ".join([self.name] + [f"{k}={v!r}" for k, v in self.params])


@dataclass(frozen=True)
class ExperimentConfig:
    """All inputs of an offline/online experiment.

    ``model_params`` is a sorted tuple of ``(key, value)`` pairs so the
    config stays hashable. ``gamma`` is a float or a tuple of length J.
    """

    model: str
    model_params: tuple
    beta: float
    dt: float
    k_basis: int
    k_train: int
    j_test: int
    dims: tuple
    basis_signal: SignalSpec
    train_signal: SignalSpec
    test_signal: SignalSpec
    test_initial: str = "zero"
    gamma: object = 1.0
    n_samples: int = 25
    seed: int = 0
    excitation: bool = False
    time_index: int = None
    metrics: tuple = METRICS
    outputs: tuple = ()
    intrusive_stride: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")
        for name in ("k_basis", "k_train", "j_test", "n_samples",
                     "intrusive_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.beta <= 1.0 or not self.dt > 0:
            raise ConfigError("need 0 <= beta <= 1 and dt > 0")
        if self.test_initial not in ("zero", "ones", "gaussian"):
            raise ConfigError(f"unknown test_initial {self.test_initial!r}")
        unknown = set(self.metrics) - set(METRICS)
        if unknown:
            raise ConfigError(f"unknown metrics {sorted(unknown)}")
        if self.time_index is not None and not 0 <= self.time_index <= self.j_test:
            raise ConfigError("time_index must lie in [0, j_test]")

    @property
    def params(self):
        return dict(self.model_params)

    @property
    def n_max(self):
        return max(self.dims)

    @property
    def at_time(self):
        return self.j_test if self.time_index is None else self.time_index

    def with_(self, **changes):
        return replace(self, **changes)

    def offline_fields(self):
        """The fields that determine the offline artifacts."""
        d = asdict(self)
        for key in ("test_signal", "test_initial", "time_index", "metrics",
                    "outputs", "intrusive_stride", "out_dir"):
            d.pop(key)
        d["basis_signal"] = str(self.basis_signal)
        d["train_signal"] = str(self.train_signal)
        return d

    def offline_hash(self):
        text = json.dumps(self.offline_fields(), sort_keys=True, default=list)
        return hashlib.sha256(text.encode()).hexdigest()

    def echo(self):
        d = asdict(self)
        for key in ("basis_signal", "train_signal", "test_signal"):
            d[key] = str(getattr(self, key))
        return d


def n_inputs(config):
    """Number of control inputs implied by the model parameters."""
    p = config.params
    if config.model == "heat1d":
        return 1
    if config.model == "convdiff2d":
        return 5
    return int(p.get("n_inputs", 1))


def check_training_size(config):
    """Raise InsufficientData unless the residual fit is determined for n_max."""
    p = n_inputs(config)
    q = residual_unknowns(config.n_max, p)
    rows = config.k_train + (config.n_max + p if config.excitation else 0)
    if rows < q:
        raise InsufficientData(
            f"k_train={config.k_train} gives {rows} residual samples but "
            f"n={config.n_max}, p={p} needs {q}")


_SCHEMA = {
    "model": None,
    "scheme": {"beta", "dt"},
    "horizon": {"k_basis", "k_train", "j_test", "time_index"},
    "reduction": {"dims", "excitation"},
    "signals": {"basis", "train", "test", "test_initial"},
    "estimator": {"gamma", "samples", "seed"},
    "output": {"dir", "metrics", "outputs", "intrusive_stride"},
}


def _model_value(text):
    if "," in text:
        return tuple(float(parse_number(t)) for t in text.split(","))
    v = parse_number(text)
    return int(v) if isinstance(v, int) else float(v)


def parse_config(text, source="<string>"):
    """Build an :class:`ExperimentConfig` from INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        allowed = _SCHEMA[section]
        if allowed is not None:
            extra = set(cp[section]) - allowed
            if extra:
                raise ConfigError(f"{source}: unknown keys {sorted(extra)} "
                                  f"in [{section}]")

    def get(section, key, default=None, required=False):
        if cp.has_option(section, key):
            return cp.get(section, key)
        if required:
            raise ConfigError(f"{source}: missing {section}.{key}")
        return default

    try:
        model = get("model", "kind", required=True)
        params = tuple(sorted((k, _model_value(v)) for k, v in cp["model"].items()
                              if k != "kind"))
        seed = get("estimator", "seed")
        if seed is None:
            seed = os.environ.get(SEED_ENV, "0")
        gamma_text = get("estimator", "gamma", "1")
        gamma = tuple(float(parse_number(g)) for g in gamma_text.split(","))
        gamma = gamma[0] if len(gamma) == 1 else gamma
        time_index = get("horizon", "time_index")
        metrics = get("output", "metrics")
        outputs = get("output", "outputs", "")
        return ExperimentConfig(
            model=model,
            model_params=params,
            beta=float(parse_number(get("scheme", "beta", required=True))),
            dt=float(parse_number(get("scheme", "dt", required=True))),
            k_basis=int(get("horizon", "k_basis", required=True)),
            k_train=int(get("horizon", "k_train", required=True)),
            j_test=int(get("horizon", "j_test", required=True)),
            dims=parse_dims(get("reduction", "dims", required=True)),
            basis_signal=SignalSpec.parse(get("signals", "basis", required=True)),
            train_signal=SignalSpec.parse(get("signals", "train", required=True)),
            test_signal=SignalSpec.parse(get("signals", "test", required=True)),
            test_initial=get("signals", "test_initial", "zero"),
            gamma=gamma,
            n_samples=int(get("estimator", "samples", "25")),
            seed=int(seed),
            excitation=cp.getboolean("reduction", "excitation", fallback=False),
            time_index=None if time_index is None else int(time_index),
            metrics=METRICS if metrics is None else
            tuple(m.strip() for m in metrics.split(",") if m.strip()),
            outputs=tuple(o.strip() for o in outputs.split(",") if o.strip()),
            intrusive_stride=int(get("output", "intrusive_stride", "1")),
            out_dir=get("output", "dir", "results"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path):
    """Read a config file, or a bundled preset given as ``preset:<name>``."""
    path = str(path)
    if path.startswith("preset:"):
        return parse_config(preset_text(path[len("preset:"):]), source=path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=path)


PRESETS = {
    "heat1d": """\
[model]
kind = heat1d
n_intervals = 133
mu = 0.1

[scheme]
beta = 1
dt = 0.01

[horizon]
k_basis = 500
k_train = 500
j_test = 500

[reduction]
dims = 1-8

[signals]
basis = exp_sin rate=1 freq=20*pi/5
train = gaussian sigma=1
test = exp_sin rate=1 freq=12*pi/5

[estimator]
gamma = 1
samples = 25
seed = 0

[output]
dir = results/heat1d
""",
    "convdiff2d": """\
# Desk-scale version of the 2-D benchmark with the mixed sinusoidal basis
# input; mesh 32 x 8 square elements, J = 5000 forward-Euler steps of 5e-5.
[model]
kind = convdiff2d
nx = 32
ny = 8
mu = 1
velocity = 1, 1

[scheme]
beta = 0
dt = 5e-5

[horizon]
k_basis = 5000
k_train = 5000
j_test = 5000

[reduction]
dims = 2, 4, 6, 8, 10

[signals]
basis = mixed_sin
train = sin2_gaussian
test = random_freq_sin

[estimator]
gamma = 1
samples = 40
seed = 0

[output]
dir = results/convdiff2d
outputs = average, boundary
intrusive_stride = 50
""",
    "convdiff2d_easy": """\
[model]
kind = convdiff2d
nx = 32
ny = 8
mu = 0.5
velocity = 1, 1

[scheme]
beta = 0
dt = 5e-5

[horizon]
k_basis = 5000
k_train = 5000
j_test = 5000

[reduction]
dims = 2, 4, 6, 8, 10

[signals]
basis = exp_sin rate=0 freq=2
train = sin2_gaussian
test = exp_sin rate=1 freq=1.75

[estimator]
gamma = 1
samples = 35
seed = 0

[output]
dir = results/convdiff2d_easy
outputs = average, boundary
intrusive_stride = 50
""",
    "dense_random": """\
[model]
kind = dense_random
n_dof = 16
n_inputs = 2
norm = 0.95
seed = 3

[scheme]
beta = 1
dt = 1

[horizon]
k_basis = 60
k_train = 60
j_test = 60

[reduction]
dims = 1-4
excitation = true

[signals]
basis = gaussian sigma=1
train = gaussian sigma=1
test = exp_sin rate=0 freq=0.3

[estimator]
gamma = 4
samples = 10
seed = 0

[output]
dir = results/dense_random
""",
}


def preset_text(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from "
                          f"{sorted(PRESETS)}") from None
