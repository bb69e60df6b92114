"""Flat key-value experiment configuration.

Config files are lines of `dotted.key = value` with `#` comments. Every key
has a typed default; unknown keys and out-of-range values are rejected before
any work starts, and the effective (defaults-filled) config is echoed next to
the run outputs so a run can always be reproduced from its artifacts.
"""

from dataclasses import dataclass, field

from .data import ATTACK_KINDS, AttackConfig
from .errors import ConfigError
from .models import MODEL_KINDS, ModelSpec
from .topology import TOPOLOGY_KINDS

ALGORITHMS = ("ross", "dpsgd", "dmsgd")
DATA_SOURCES = ("blobs", "mnist")
SHAPLEY_MODES = ("auto", "exact", "mc")


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(part) for part in text.split(","))


# key -> (parser, default)
SCHEMA = {
    "run_id": (str, ""),
    "seed": (int, 42),
    "out_dir": (str, "out"),
    "topology.kind": (str, "full"),
    "topology.n": (int, 10),
    "model.kind": (str, "logistic"),
    "model.hidden": (_parse_int_list, ()),
    "data.source": (str, "blobs"),
    "data.train_samples": (int, 3000),
    "data.test_samples": (int, 600),
    "data.input_dim": (int, 10),
    "data.classes": (int, 3),
    "data.spread": (float, 10.0),
    "data.train_images": (str, ""),
    "data.train_labels": (str, ""),
    "data.test_images": (str, ""),
    "data.test_labels": (str, ""),
    "data.limit": (int, 0),
    "data.partition_mu": (float, 0.25),
    "data.validation_fraction": (float, 0.2),
    "attack.kind": (str, "none"),
    "attack.fraction": (float, 0.3),
    "attack.sigma": (float, 1.0),
    "attack.beta_lo": (float, -0.5),
    "attack.beta_hi": (float, 0.5),
    "train.algo": (str, "ross"),
    "train.rounds": (int, 150),
    "train.lr": (float, 0.001),
    "train.momentum": (float, 0.5),
    "train.batch": (int, 260),
    "shapley.mode": (str, "auto"),
    "shapley.mc_rounds": (int, 0),
    "shapley.validation_subsample": (int, 0),
    "shapley.dump": (_parse_bool, False),
    "diagnostics.enabled": (_parse_bool, True),
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    @property
    def run_id(self) -> str:
        return self.values["run_id"]

    @property
    def out_dir(self) -> str:
        return self.values["out_dir"]

    @property
    def attack(self) -> AttackConfig:
        return AttackConfig(
            kind=self.values["attack.kind"],
            fraction=self.values["attack.fraction"],
            sigma=self.values["attack.sigma"],
            beta_lo=self.values["attack.beta_lo"],
            beta_hi=self.values["attack.beta_hi"],
        )

    def model_spec(self, input_dim: int, num_classes: int) -> ModelSpec:
        return ModelSpec(
            kind=self.values["model.kind"],
            input_dim=input_dim,
            num_classes=num_classes,
            hidden=self.values["model.hidden"],
        )

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with dotted keys replaced (underscores map to dots)."""
        vals = dict(self.values)
        for key, value in overrides.items():
            dotted = key.replace("__", ".")
            if dotted not in SCHEMA:
                raise ConfigError(f"unknown config key {dotted!r}")
            vals[dotted] = value
        cfg = ExperimentConfig(vals)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        v = self.values

        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(v["topology.kind"] in TOPOLOGY_KINDS,
             f"topology.kind: {v['topology.kind']!r} not one of {TOPOLOGY_KINDS}")
        min_n = 3 if v["topology.kind"] == "ring" else 2
        need(v["topology.n"] >= min_n, f"topology.n: need at least {min_n} for {v['topology.kind']}")
        need(v["model.kind"] in MODEL_KINDS, f"model.kind: {v['model.kind']!r} not one of {MODEL_KINDS}")
        if v["model.kind"] == "mlp":
            need(len(v["model.hidden"]) > 0 and all(h > 0 for h in v["model.hidden"]),
                 "model.hidden: mlp needs positive layer sizes")
        else:
            need(v["model.hidden"] == (), "model.hidden: logistic takes no hidden layers")
        need(v["data.source"] in DATA_SOURCES, f"data.source: {v['data.source']!r} not one of {DATA_SOURCES}")
        need(v["data.classes"] >= 2, "data.classes: need at least 2")
        need(v["data.input_dim"] >= 1, "data.input_dim: must be positive")
        need(v["data.train_samples"] >= v["data.classes"], "data.train_samples: too small")
        need(v["data.test_samples"] >= v["data.classes"], "data.test_samples: too small")
        need(v["data.spread"] >= 0, "data.spread: must be non-negative")
        need(v["data.limit"] >= 0, "data.limit: must be non-negative (0 = all)")
        need(v["data.partition_mu"] > 0, "data.partition_mu: must be positive")
        need(0.0 < v["data.validation_fraction"] < 1.0, "data.validation_fraction: must lie in (0, 1)")
        need(v["attack.kind"] in ATTACK_KINDS,
             f"attack.kind: {v['attack.kind']!r} not one of {ATTACK_KINDS}")
        need(0.0 <= v["attack.fraction"] < 1.0, "attack.fraction: must lie in [0, 1)")
        need(v["attack.sigma"] >= 0, "attack.sigma: must be non-negative")
        need(v["attack.beta_lo"] <= v["attack.beta_hi"], "attack.beta_lo: must not exceed attack.beta_hi")
        need(v["train.algo"] in ALGORITHMS, f"train.algo: {v['train.algo']!r} not one of {ALGORITHMS}")
        need(v["train.rounds"] >= 1, "train.rounds: must be at least 1")
        need(v["train.lr"] > 0, "train.lr: must be positive")
        need(0.0 <= v["train.momentum"] < 1.0, "train.momentum: must lie in [0, 1)")
        need(v["train.batch"] >= 1, "train.batch: must be at least 1")
        need(v["shapley.mode"] in SHAPLEY_MODES,
             f"shapley.mode: {v['shapley.mode']!r} not one of {SHAPLEY_MODES}")
        need(v["shapley.mc_rounds"] >= 0, "shapley.mc_rounds: must be non-negative (0 = default)")
        need(v["shapley.validation_subsample"] >= 0, "shapley.validation_subsample: must be non-negative")
        if not v["run_id"]:
            v["run_id"] = (
                f"{v['train.algo']}-{v['topology.kind']}{v['topology.n']}"
                f"-{v['attack.kind']}-seed{v['seed']}"
            )

    def as_lines(self) -> list[str]:
        out = []
        for key in sorted(self.values):
            val = self.values[key]
            if isinstance(val, tuple):
                val = ",".join(str(x) for x in val)
            out.append(f"{key} = {val}")
        return out


def default_config() -> ExperimentConfig:
    cfg = ExperimentConfig({key: default for key, (_, default) in SCHEMA.items()})
    cfg.validate()
    return cfg


def parse_config_text(text: str, source: str = "<string>") -> ExperimentConfig:
    values = {key: default for key, (_, default) in SCHEMA.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        parser, _ = SCHEMA[key]
        try:
            values[key] = parser(val)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    cfg = ExperimentConfig(values)
    cfg.validate()
    return cfg


def parse_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))
