"""Experiment configuration: strict schema, presets, variants, ablations.

A config file is JSON:

    {
      "preset": "full" | "desk",          optional, default "full"
      "experiments": [ { ... }, ... ]     at least one
    }

Unknown keys anywhere are rejected with the offending path spelled out;
silent typo absorption is how benchmark results end up unreproducible.

Defaults resolve in three layers: preset scale values, then variant-tag
overrides (each named variant pins exactly one field group), then the
user's explicit values, which always win. Tap defaults come from the
architecture's registry.

Every resolved config has a content-addressed fingerprint: sha256 over
its canonical JSON form.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from ..errors import ConfigurationError
from ..zoo import ARCH_NAMES, build_arch

PRESETS = {
    "full": {"image_size": 512, "max_epochs": 5000, "checkpoint_epochs": (100, 2500, 5000)},
    "desk": {"image_size": 64, "max_epochs": 500, "checkpoint_epochs": (100, 250, 500)},
}

# each variant tag pins one field group relative to baseline
TAG_OVERRIDES = {
    "baseline": {},
    "variant_a": {"beta": 1e7},
    "variant_b": {"beta": 1e9},
    "variant_c": {"alpha": 10.0},
    "shallow_layers": {"content_tap": 1, "style_taps": (6,)},
    "deep_layers": {"content_tap": 3, "style_taps": (10,)},
    "multi_layer": {"content_tap": 2, "style_taps": (6, 8, 10)},
    "lr_conservative": {"learning_rate": 0.01},
    "lr_aggressive": {"learning_rate": 0.1},
    "lr_very_aggressive": {"learning_rate": 0.2},
}

_EXPERIMENT_KEYS = {
    "arch", "tag", "content", "style", "image_size", "alpha", "beta",
    "content_tap", "style_taps", "style_layer_weights", "learning_rate",
    "max_epochs", "checkpoint_epochs", "log_every", "seed", "weights",
}
_WEIGHT_KEYS = {"scheme", "seed", "path"}
_TOP_KEYS = {"preset", "experiments"}


@dataclass(frozen=True)
class WeightSource:
    scheme: str = "random"   # "random" | "file"
    seed: Optional[int] = None
    path: Optional[str] = None


@dataclass(frozen=True)
class ExperimentConfig:
    arch: str
    content: str
    style: str
    tag: str = "baseline"
    image_size: int = 512
    alpha: float = 1.0
    beta: float = 1e8
    content_tap: int = 2
    style_taps: Tuple[int, ...] = (8,)
    style_layer_weights: Optional[Dict[int, float]] = None
    learning_rate: float = 0.05
    max_epochs: int = 5000
    checkpoint_epochs: Tuple[int, ...] = (100, 2500, 5000)
    log_every: int = 10
    seed: int = 0
    weights: WeightSource = field(default_factory=WeightSource)

    def to_dict(self) -> dict:
        d = {
            "arch": self.arch,
            "tag": self.tag,
            "content": self.content,
            "style": self.style,
            "image_size": self.image_size,
            "alpha": self.alpha,
            "beta": self.beta,
            "content_tap": self.content_tap,
            "style_taps": list(self.style_taps),
            "style_layer_weights": (
                None if self.style_layer_weights is None
                else {str(k): v for k, v in sorted(self.style_layer_weights.items())}
            ),
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "checkpoint_epochs": list(self.checkpoint_epochs),
            "log_every": self.log_every,
            "seed": self.seed,
            "weights": {"scheme": self.weights.scheme, "seed": self.weights.seed,
                        "path": self.weights.path},
        }
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _reject_unknown(mapping: dict, allowed: set, path: str):
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigurationError(
            f"{path}.{unknown[0]}: unknown key (valid keys: {sorted(allowed)})"
        )


def _resolve_experiment(raw: dict, preset: str, index: int,
                        base_dir: str = ".") -> ExperimentConfig:
    path = f"experiments[{index}]"
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: must be an object")
    _reject_unknown(raw, _EXPERIMENT_KEYS, path)

    for key in ("arch", "content", "style"):
        if key not in raw:
            raise ConfigurationError(f"{path}.{key}: required key missing")

    arch = raw["arch"]
    if arch not in ARCH_NAMES:
        raise ConfigurationError(f"{path}.arch: unknown architecture {arch!r}; valid: {list(ARCH_NAMES)}")
    tag = raw.get("tag", "baseline")
    if tag not in TAG_OVERRIDES:
        raise ConfigurationError(f"{path}.tag: unknown variant {tag!r}; valid: {sorted(TAG_OVERRIDES)}")

    graph = build_arch(arch)
    resolved = {
        "image_size": PRESETS[preset]["image_size"],
        "alpha": 1.0,
        "beta": 1e8,
        "content_tap": graph.taps.content_default,
        "style_taps": tuple(graph.taps.style_defaults),
        "style_layer_weights": None,
        "learning_rate": 0.05,
        "max_epochs": PRESETS[preset]["max_epochs"],
        "checkpoint_epochs": PRESETS[preset]["checkpoint_epochs"],
        "log_every": 10,
        "seed": 0,
    }
    resolved.update(TAG_OVERRIDES[tag])

    for key in resolved:
        if key in raw and raw[key] is not None:
            resolved[key] = raw[key]

    if "weights" in raw:
        wraw = raw["weights"]
        if not isinstance(wraw, dict):
            raise ConfigurationError(f"{path}.weights: must be an object")
        _reject_unknown(wraw, _WEIGHT_KEYS, f"{path}.weights")
        scheme = wraw.get("scheme", "random")
        if scheme == "random":
            ws = WeightSource("random", seed=int(wraw.get("seed", resolved["seed"])))
        elif scheme == "file":
            if "path" not in wraw:
                raise ConfigurationError(f"{path}.weights.path: required for scheme 'file'")
            ws = WeightSource("file", path=os.path.join(base_dir, wraw["path"]))
        else:
            raise ConfigurationError(f"{path}.weights.scheme: must be 'random' or 'file', got {scheme!r}")
    else:
        ws = WeightSource("random", seed=int(resolved["seed"]))

    def _as_path(p):
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    cfg = ExperimentConfig(
        arch=arch,
        tag=tag,
        content=_as_path(str(raw["content"])),
        style=_as_path(str(raw["style"])),
        image_size=int(resolved["image_size"]),
        alpha=float(resolved["alpha"]),
        beta=float(resolved["beta"]),
        content_tap=int(resolved["content_tap"]),
        style_taps=tuple(int(t) for t in resolved["style_taps"]),
        style_layer_weights=(
            None if resolved["style_layer_weights"] is None
            else {int(k): float(v) for k, v in dict(resolved["style_layer_weights"]).items()}
        ),
        learning_rate=float(resolved["learning_rate"]),
        max_epochs=int(resolved["max_epochs"]),
        checkpoint_epochs=tuple(int(e) for e in resolved["checkpoint_epochs"]),
        log_every=int(resolved["log_every"]),
        seed=int(resolved["seed"]),
        weights=ws,
    )
    validate_config(cfg, where=path)
    return cfg


def validate_config(cfg: ExperimentConfig, where: str = "config"):
    graph = build_arch(cfg.arch)
    if cfg.alpha < 0 or cfg.beta < 0:
        raise ConfigurationError(f"{where}: alpha/beta must be non-negative")
    if not (cfg.learning_rate > 0):
        raise ConfigurationError(f"{where}: learning_rate must be > 0")
    if cfg.max_epochs < 1:
        raise ConfigurationError(f"{where}: max_epochs must be >= 1")
    if cfg.log_every < 1:
        raise ConfigurationError(f"{where}: log_every must be >= 1")
    if cfg.image_size < graph.min_input:
        raise ConfigurationError(
            f"{where}: image_size {cfg.image_size} below {cfg.arch} minimum {graph.min_input}"
        )
    for e in cfg.checkpoint_epochs:
        if not (1 <= e <= cfg.max_epochs):
            raise ConfigurationError(f"{where}: checkpoint epoch {e} outside [1, {cfg.max_epochs}]")
    ordinals = graph.taps.ordinals
    if cfg.content_tap not in ordinals:
        raise ConfigurationError(
            f"{where}: content tap {cfg.content_tap} not in {cfg.arch} registry {sorted(ordinals)}"
        )
    if not cfg.style_taps:
        raise ConfigurationError(f"{where}: style_taps must not be empty")
    for t in cfg.style_taps:
        if t not in ordinals:
            raise ConfigurationError(
                f"{where}: style tap {t} not in {cfg.arch} registry {sorted(ordinals)}"
            )
    if len(set(cfg.style_taps)) != len(cfg.style_taps):
        raise ConfigurationError(f"{where}: duplicate style taps {cfg.style_taps}")
    if cfg.style_layer_weights is not None:
        missing = [t for t in cfg.style_taps if t not in cfg.style_layer_weights]
        if missing:
            raise ConfigurationError(f"{where}: style_layer_weights missing taps {missing}")
        for t, w in cfg.style_layer_weights.items():
            if w < 0:
                raise ConfigurationError(f"{where}: style layer weight for tap {t} is negative")
    for name, p in (("content", cfg.content), ("style", cfg.style)):
        if not os.path.isfile(p):
            raise ConfigurationError(f"{where}: {name} image does not exist: {p}")
    if cfg.weights.scheme == "file" and not os.path.isfile(cfg.weights.path):
        raise ConfigurationError(f"{where}: weight file does not exist: {cfg.weights.path}")


def load_config(path) -> List[ExperimentConfig]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be an object")
    _reject_unknown(doc, _TOP_KEYS, "config")
    preset = doc.get("preset", "full")
    if preset not in PRESETS:
        raise ConfigurationError(f"config.preset: must be one of {sorted(PRESETS)}, got {preset!r}")
    experiments = doc.get("experiments")
    if not isinstance(experiments, list) or not experiments:
        raise ConfigurationError("config.experiments: must be a non-empty array")
    base_dir = os.path.dirname(os.path.abspath(path))
    return [
        _resolve_experiment(raw, preset, i, base_dir=base_dir)
        for i, raw in enumerate(experiments)
    ]


def make_ablation_sets(base: ExperimentConfig) -> Dict[int, List[ExperimentConfig]]:
    """The three published ablation families around a baseline config.

    Set 1 sweeps the content/style weight mix, set 2 the tap placement,
    set 3 the learning rate. Within a set, every non-baseline config
    differs from the baseline in exactly one field group plus its tag.
    """
    baseline = replace(base, tag="baseline")
    sets: Dict[int, List[ExperimentConfig]] = {}
    sets[1] = [
        baseline,
        replace(baseline, tag="variant_a", beta=1e7),
        replace(baseline, tag="variant_b", beta=1e9),
        replace(baseline, tag="variant_c", alpha=10.0),
    ]
    sets[2] = [
        baseline,
        replace(baseline, tag="shallow_layers", content_tap=1, style_taps=(6,)),
        replace(baseline, tag="deep_layers", content_tap=3, style_taps=(10,)),
        replace(baseline, tag="multi_layer", content_tap=2, style_taps=(6, 8, 10)),
    ]
    sets[3] = [
        baseline,
        replace(baseline, tag="lr_conservative", learning_rate=0.01),
        replace(baseline, tag="lr_aggressive", learning_rate=0.1),
        replace(baseline, tag="lr_very_aggressive", learning_rate=0.2),
    ]
    return sets
