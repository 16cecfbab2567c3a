"""Run configuration: JSON file + command-line overrides -> typed configs.

A run config is a nested JSON object with fixed sections; unknown keys
anywhere are rejected so typos fail loudly. Precedence is flag > file >
default. The single top-level seed feeds data generation, training, and
splitting, which is what makes whole commands reproducible.
"""

import copy
import json

from .dataset import SyntheticSpec
from .errors import ConfigError, IoError
from .losses import AngularMarginConfig, DsamConfig
from .trainer import TrainConfig

DEFAULTS = {
    "seed": 0,
    "out_dir": "runs/out",
    "dataset_path": "",
    "data": {
        "n_classes": 8,
        "samples_per_class": 200,
        "input_dim": 16,
        "center_scale": 3.0,
        "sigma": 0.6,
        "modes_per_class": 3,
        "mode_scale": 1.0,
    },
    "train": {
        "base": "softmax",
        "use_dsam": False,
        "triplet_margin": 0.3,
        "P": 8,
        "Q": 8,
        "hidden": [32],
        "embedding_dim": 2,
        "lr": 0.01,
        "momentum": 0.9,
        "weight_decay": 0.0005,
        "lr_decay_factor": 0.1,
        "lr_decay_period": 10,
        "lr_floor": 1e-5,
        "epochs": 40,
    },
    "dsam": {"m_neg": 0.9, "gamma": 0.8, "lam": 0.05},
    "angular": {"s": 64.0, "m1": 1.0, "m2": 0.5, "m3": 0.0},
    "split": {"queries_per_class": 20, "max_rank": 50},
}


def _merge_strict(base, override, path=""):
    for key, value in override.items():
        if key not in base:
            raise ConfigError("unknown config key %r" % (path + key))
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError("%r must be an object" % (path + key))
            _merge_strict(base[key], value, path + key + ".")
        else:
            base[key] = value


def parse_override(text):
    """Turn one `section.key=value` string into a nested dict fragment.

    The value is parsed as JSON when possible, kept as a string otherwise
    (so base=softmax works without quoting).
    """
    if "=" not in text:
        raise ConfigError("override %r is not of the form key=value" % text)
    dotted, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except ValueError:
        value = raw
    fragment = value
    parts = dotted.split(".")
    if not all(parts):
        raise ConfigError("override key %r is malformed" % dotted)
    for part in reversed(parts):
        fragment = {part: fragment}
    return fragment


class RunConfig:
    """Validated view over the merged config dict."""

    def __init__(self, raw):
        self.raw = raw
        self.seed = raw["seed"]
        self.out_dir = raw["out_dir"]
        self.dataset_path = raw["dataset_path"]
        self.queries_per_class = raw["split"]["queries_per_class"]
        self.max_rank = raw["split"]["max_rank"]
        try:
            self.synthetic_spec = SyntheticSpec(seed=raw["seed"], **raw["data"])
            self.dsam = DsamConfig(**raw["dsam"])
            self.angular = AngularMarginConfig(**raw["angular"])
            self.train = TrainConfig(
                seed=raw["seed"],
                dsam=self.dsam,
                angular=self.angular,
                hidden=tuple(raw["train"]["hidden"]),
                **{k: v for k, v in raw["train"].items() if k != "hidden"}
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc))

    def dump_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.raw, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_run_config(path=None, overrides=(), seed=None, out_dir=None):
    """Build a RunConfig from defaults, an optional JSON file, `--set`
    override strings, and the dedicated seed/out flags (strongest)."""
    merged = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise IoError("cannot read config %s: %s" % (path, exc))
        except ValueError as exc:
            raise ConfigError("config %s is not valid JSON: %s" % (path, exc))
        if not isinstance(file_cfg, dict):
            raise ConfigError("config %s must be a JSON object" % path)
        _merge_strict(merged, file_cfg)
    for text in overrides:
        _merge_strict(merged, parse_override(text))
    if seed is not None:
        merged["seed"] = seed
    if out_dir is not None:
        merged["out_dir"] = out_dir
    return RunConfig(merged)
