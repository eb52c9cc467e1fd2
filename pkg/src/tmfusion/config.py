"""Run configuration, checkpoint files, and the metrics CSV.

All three formats are JSON or CSV with floats rendered by repr(), so a
parse -> serialize -> parse cycle is bit-exact and two runs with the
same seed produce byte-identical files.
"""

import csv
import dataclasses
import json
import math

import numpy as np

from .losses import CenterBank, FusionConfig
from .model import ModelState, NetworkSpec, ScheduleState, TrainSettings
from .synth import CONDITIONS, GeneratorConfig, UnseenNoise

MODES = ("ctc", "tmf", "ce", "fmf")
TEMPORAL_MODES = ("ctc", "tmf")

METRIC_COLUMNS = (
    "eval_index", "batches", "lr", "train_loss", "val_score",
    "ter_clean", "ter_seen", "ter_unseen",
    "acc_clean", "acc_seen", "acc_unseen",
)


class ConfigError(ValueError):
    """A config file field is missing, mistyped, or inconsistent."""


@dataclasses.dataclass
class RunConfig:
    """Everything one training run needs, with defaults materialized."""

    mode: str = "tmf"
    seed: int = 0
    network: NetworkSpec = dataclasses.field(
        default_factory=lambda: NetworkSpec(8, [32, 16], 6))
    generator: GeneratorConfig = dataclasses.field(default_factory=GeneratorConfig)
    lam: float = 1e-3
    occupancy_mode: str = "paper_literal"
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    center_momentum: float = 1e-3
    occupancy_threshold: float = 0.01
    batch_size: int = 8
    max_batches: int = 2000
    eval_interval: int = 200
    halve_after: int = 3
    stop_after: int = 8
    train_conditions: tuple = ("clean", "seen")
    validation_fraction: float = 0.1
    num_train_sequences: int = 1000     # per condition, train files
    num_test_sequences: int = 300       # per condition, test files
    data_dir: str = "data"
    checkpoint_path: str = "checkpoint.json"
    metrics_path: str = "metrics.csv"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: expected one of {MODES}, got {self.mode!r}")
        want = self.generator.num_classes + (1 if self.temporal else 0)
        if self.network.num_classes != want:
            raise ConfigError(
                "network.num_classes: mode %r over %d data classes needs %d "
                "output units, got %d" % (self.mode, self.generator.num_classes,
                                          want, self.network.num_classes))
        for cond in self.train_conditions:
            if cond not in CONDITIONS:
                raise ConfigError(f"train_conditions: unknown condition {cond!r}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction: must lie strictly in (0, 1)")
        for field in ("lam", "learning_rate", "center_momentum"):
            if getattr(self, field) < 0:
                raise ConfigError(f"{field}: must be nonnegative")

    @property
    def temporal(self):
        return self.mode in TEMPORAL_MODES

    def fusion(self):
        return FusionConfig(
            lam=self.lam,
            mode="temporal" if self.temporal else "framewise",
            occupancy_mode=self.occupancy_mode)

    def settings(self):
        return TrainSettings(
            mode=self.mode, batch_size=self.batch_size,
            max_batches=self.max_batches, eval_interval=self.eval_interval,
            halve_after=self.halve_after, stop_after=self.stop_after,
            seed=self.seed, fusion=self.fusion())

    def new_state(self):
        return ModelState(self.network, seed=self.seed, lr=self.learning_rate,
                          beta1=self.beta1, beta2=self.beta2, eps=self.epsilon)

    def new_bank(self):
        return CenterBank(self.generator.num_classes, self.network.feature_dim,
                          momentum=self.center_momentum,
                          occupancy_threshold=self.occupancy_threshold)


def _reject_unknown(data, known, where):
    extra = set(data) - set(known)
    if extra:
        raise ConfigError(f"{where}: unknown field {sorted(extra)[0]!r}")


def _build(cls, data, where):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _reject_unknown(data, fields, where)
    kwargs = {}
    for name, value in data.items():
        if name == "unseen":
            value = _build(UnseenNoise, value, where + ".unseen")
        elif name in ("hidden",):
            value = list(value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    _reject_unknown(data, fields, "top level")
    kwargs = dict(data)
    if "network" in kwargs:
        kwargs["network"] = _build(NetworkSpec, kwargs["network"], "network")
    if "generator" in kwargs:
        kwargs["generator"] = _build(GeneratorConfig, kwargs["generator"], "generator")
    if "train_conditions" in kwargs:
        kwargs["train_conditions"] = tuple(kwargs["train_conditions"])
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg):
    data = dataclasses.asdict(cfg)
    data["train_conditions"] = list(cfg.train_conditions)
    data["generator"]["segment_length"] = list(cfg.generator.segment_length)
    data["generator"]["labels_per_sequence"] = list(cfg.generator.labels_per_sequence)
    return data


def load_config(path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    return config_from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
        fh.write("\n")


def _array_out(arr):
    return [[repr(float(v)) for v in row] for row in np.atleast_2d(arr)]


def _array_in(rows, shape):
    flat = [float(v) for row in rows for v in row]
    return np.array(flat).reshape(shape)


def save_checkpoint(path, state, bank, sched, mode, seed, step_count):
    """Write model, centers, optimizer, and schedule state as JSON."""
    shapes = {k: list(v.shape) for k, v in state.params.items()}
    data = {
        "format": "tmfusion-checkpoint-v1",
        "mode": mode,
        "seed": seed,
        "step_count": step_count,
        "lr": repr(float(state.lr)),
        "network": {
            "input_dim": state.spec.input_dim,
            "hidden": list(state.spec.hidden),
            "num_classes": state.spec.num_classes,
            "recurrent": state.spec.recurrent,
        },
        "shapes": shapes,
        "params": {k: _array_out(v) for k, v in state.params.items()},
        "adam_m": {k: _array_out(v) for k, v in state.adam_m.items()},
        "adam_v": {k: _array_out(v) for k, v in state.adam_v.items()},
        "adam": {"beta1": repr(float(state.beta1)),
                 "beta2": repr(float(state.beta2)),
                 "eps": repr(float(state.eps)),
                 "steps": state.step_count},
        "centers": {
            "num_classes": bank.num_classes,
            "dim": bank.dim,
            "momentum": repr(float(bank.momentum)),
            "occupancy_threshold": repr(float(bank.occupancy_threshold)),
            "values": _array_out(bank.centers),
        },
        "schedule": {
            "best": None if math.isinf(sched.best) else repr(float(sched.best)),
            "since_improvement": sched.since_improvement,
            "halve_after": sched.halve_after,
            "stop_after": sched.stop_after,
            "eval_interval": sched.eval_interval,
        },
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Read a checkpoint back; returns (state, bank, sched, meta)."""
    with open(path) as fh:
        data = json.load(fh)
    if data.get("format") != "tmfusion-checkpoint-v1":
        raise ConfigError("checkpoint: unrecognized format marker")
    net = data["network"]
    spec = NetworkSpec(net["input_dim"], list(net["hidden"]),
                       net["num_classes"], net["recurrent"])
    adam = data["adam"]
    state = ModelState(spec, seed=data["seed"], lr=float(data["lr"]),
                       beta1=float(adam["beta1"]), beta2=float(adam["beta2"]),
                       eps=float(adam["eps"]))
    for group, target in (("params", state.params), ("adam_m", state.adam_m),
                          ("adam_v", state.adam_v)):
        for name in state.param_names():
            target[name] = _array_in(data[group][name],
                                     tuple(data["shapes"][name]))
    state.step_count = adam["steps"]
    cen = data["centers"]
    bank = CenterBank(cen["num_classes"], cen["dim"],
                      momentum=float(cen["momentum"]),
                      occupancy_threshold=float(cen["occupancy_threshold"]))
    bank.centers = _array_in(cen["values"], (cen["num_classes"], cen["dim"]))
    sch = data["schedule"]
    sched = ScheduleState(
        halve_after=sch["halve_after"], stop_after=sch["stop_after"],
        eval_interval=sch["eval_interval"],
        best=float("-inf") if sch["best"] is None else float(sch["best"]),
        since_improvement=sch["since_improvement"])
    meta = {"mode": data["mode"], "seed": data["seed"],
            "step_count": data["step_count"]}
    return state, bank, sched, meta


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def open_metrics(path):
    """Create the metrics CSV with its fixed header; append-only handle."""
    fh = open(path, "w", newline="")
    writer = csv.writer(fh)
    writer.writerow(METRIC_COLUMNS)
    fh.flush()
    return fh, writer


def append_metrics(writer, fh, row):
    writer.writerow([_fmt(row.get(col)) for col in METRIC_COLUMNS])
    fh.flush()
