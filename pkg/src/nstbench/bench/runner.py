"""Experiment execution: single runs, parallel batches, result records.

A record captures everything needed to reproduce and audit a run:
the resolved config, its fingerprint, run status, metrics against the
content image, the loss trace, artifact paths, and content digests of
the rendered outputs. `deterministic_digest` hashes only the fields
that must be bit-identical across reruns on any machine, so wall-clock
timings and machine identity stay out of it.
"""

import hashlib
import json
import math
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..errors import ConfigurationError, DivergenceError
from ..images import load_image, save_png, save_raw
from ..losses import LossWeights
from ..metrics import PerceptualConfig, deep_feature_distance, mse, psnr, ssim
from ..optimize import OptimConfig, OptimizationTrace, optimize
from ..profiling import machine_fingerprint
from ..weights import init_weights, load_weights
from ..zoo import build_arch
from .config import ExperimentConfig

# backbone used to score every run's output; fixed so scores are comparable
PERCEPTUAL_ARCH = "tiny_vgg"
PERCEPTUAL_SEED = 97


def default_parallelism(n_jobs: int) -> int:
    env = os.environ.get("NST_BENCH_THREADS")
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigurationError(f"NST_BENCH_THREADS must be an integer, got {env!r}")
        if cap < 1:
            raise ConfigurationError("NST_BENCH_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(n_jobs, cap))


def make_perceptual_config(image_size: Optional[int] = None) -> PerceptualConfig:
    graph = build_arch(PERCEPTUAL_ARCH)
    weights = init_weights(graph, seed=PERCEPTUAL_SEED)
    taps = tuple(sorted(graph.taps.ordinals))
    return PerceptualConfig(graph=graph, weights=weights, taps=taps)


@dataclass
class ExperimentRecord:
    config: dict
    fingerprint: str
    status: str                      # ok | diverged | config_error | failed
    failure_reason: Optional[str] = None
    failure_epoch: Optional[int] = None
    metrics: Dict[str, Optional[float]] = field(default_factory=dict)
    trace: List[dict] = field(default_factory=list)
    training_seconds: Optional[float] = None
    machine: Dict[str, object] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    output_digests: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "fingerprint": self.fingerprint,
            "status": self.status,
            "failure_reason": self.failure_reason,
            "failure_epoch": self.failure_epoch,
            "metrics": self.metrics,
            "trace": self.trace,
            "training_seconds": self.training_seconds,
            "machine": self.machine,
            "artifacts": self.artifacts,
            "output_digests": self.output_digests,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        return cls(
            config=d["config"],
            fingerprint=d["fingerprint"],
            status=d["status"],
            failure_reason=d.get("failure_reason"),
            failure_epoch=d.get("failure_epoch"),
            metrics=d.get("metrics", {}),
            trace=d.get("trace", []),
            training_seconds=d.get("training_seconds"),
            machine=d.get("machine", {}),
            artifacts=d.get("artifacts", {}),
            output_digests=d.get("output_digests", {}),
        )

    def deterministic_digest(self) -> str:
        """Hash of the reproducible portion of the record.

        Excludes wall-clock timing, machine identity, and absolute
        artifact paths; includes config, status, metrics, the full
        loss trace, and the rendered-output content digests.
        """
        payload = {
            "config": self.config,
            "fingerprint": self.fingerprint,
            "status": self.status,
            "failure_reason": self.failure_reason,
            "failure_epoch": self.failure_epoch,
            "metrics": {k: repr(v) for k, v in sorted(self.metrics.items())
                        if k != "training_seconds"},
            "trace": [
                {k: repr(p[k]) for k in ("epoch", "total", "content", "style")}
                for p in self.trace
            ],
            "output_digests": self.output_digests,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _raw_digest(img: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(img, dtype=np.float32).tobytes()).hexdigest()


def _score(output: np.ndarray, content: np.ndarray,
           perceptual: PerceptualConfig) -> Dict[str, Optional[float]]:
    m = float(mse(output, content))
    p = float(psnr(output, content))
    return {
        "ssim": float(ssim(output, content)),
        "psnr_db": None if math.isinf(p) else p,
        "mse": m,
        "deep_feature_distance": float(deep_feature_distance(output, content, perceptual)),
    }


def _null_metrics() -> Dict[str, Optional[float]]:
    return {"ssim": None, "psnr_db": None, "mse": None, "deep_feature_distance": None}


def _trace_rows(trace: OptimizationTrace) -> List[dict]:
    return [
        {"epoch": pt.epoch, "total": pt.total, "content": pt.content, "style": pt.style}
        for pt in trace.points
    ]


def run_single(cfg: ExperimentConfig, out_dir,
               perceptual: Optional[PerceptualConfig] = None) -> ExperimentRecord:
    """Run one experiment end to end and write its artifacts under out_dir."""
    record = ExperimentRecord(
        config=cfg.to_dict(),
        fingerprint=cfg.fingerprint(),
        status="ok",
        machine=machine_fingerprint(),
    )
    run_dir = os.path.join(out_dir, f"{cfg.arch}_{cfg.tag}_s{cfg.seed}_{record.fingerprint[:12]}")
    os.makedirs(run_dir, exist_ok=True)

    try:
        graph = build_arch(cfg.arch)
        if cfg.weights.scheme == "file":
            weights = load_weights(cfg.weights.path, graph)
        else:
            weights = init_weights(graph, seed=cfg.weights.seed)

        content = load_image(cfg.content, size=cfg.image_size)
        style = load_image(cfg.style, size=cfg.image_size)
        if perceptual is None:
            perceptual = make_perceptual_config()

        lw = LossWeights(
            alpha=cfg.alpha, beta=cfg.beta,
            content_tap=cfg.content_tap, style_taps=cfg.style_taps,
            style_layer_weights=cfg.style_layer_weights,
        )
        ocfg = OptimConfig(
            learning_rate=cfg.learning_rate, max_epochs=cfg.max_epochs,
            checkpoint_epochs=cfg.checkpoint_epochs, log_every=cfg.log_every,
            seed=cfg.seed,
        )
        output, trace = optimize(content, style, graph, weights, lw, ocfg)
    except DivergenceError as exc:
        record.status = "diverged"
        record.failure_reason = str(exc)
        record.failure_epoch = exc.epoch
        record.metrics = _null_metrics()
        trace = getattr(exc, "trace", None)
        if trace is not None:
            record.trace = _trace_rows(trace)
            record.training_seconds = trace.training_seconds
        return record
    except ConfigurationError as exc:
        record.status = "config_error"
        record.failure_reason = str(exc)
        record.metrics = _null_metrics()
        return record
    except Exception as exc:
        record.status = "failed"
        record.failure_reason = f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}"
        record.metrics = _null_metrics()
        return record

    record.trace = _trace_rows(trace)
    record.training_seconds = trace.training_seconds
    record.metrics = _score(output, content, perceptual)
    record.metrics["training_seconds"] = trace.training_seconds

    trace_path = os.path.join(run_dir, "trace.csv")
    trace.write_csv(trace_path)
    record.artifacts["trace_csv"] = os.path.relpath(trace_path, out_dir)

    final_png = os.path.join(run_dir, "final.png")
    final_raw = os.path.join(run_dir, "final.nstr")
    save_png(final_png, output)
    save_raw(final_raw, output)
    record.artifacts["final_png"] = os.path.relpath(final_png, out_dir)
    record.artifacts["final_raw"] = os.path.relpath(final_raw, out_dir)
    record.output_digests["final"] = _raw_digest(output)

    for epoch, img in sorted(trace.checkpoints.items()):
        png = os.path.join(run_dir, f"checkpoint_{epoch:05d}.png")
        raw = os.path.join(run_dir, f"checkpoint_{epoch:05d}.nstr")
        save_png(png, img)
        save_raw(raw, img)
        record.artifacts[f"checkpoint_{epoch}_png"] = os.path.relpath(png, out_dir)
        record.artifacts[f"checkpoint_{epoch}_raw"] = os.path.relpath(raw, out_dir)
        record.output_digests[f"checkpoint_{epoch}"] = _raw_digest(img)

    return record


def run_batch(configs: List[ExperimentConfig], out_dir,
              parallelism: Optional[int] = None) -> List[ExperimentRecord]:
    """Run a batch of experiments, isolating per-run failures.

    Records come back in input order regardless of completion order.
    One perceptual backbone is shared across the batch so the scoring
    reference is identical for every run.
    """
    if not configs:
        return []
    os.makedirs(out_dir, exist_ok=True)
    workers = parallelism if parallelism is not None else default_parallelism(len(configs))
    perceptual = make_perceptual_config()

    def job(cfg: ExperimentConfig) -> ExperimentRecord:
        return run_single(cfg, out_dir, perceptual=perceptual)

    if workers == 1:
        return [job(c) for c in configs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, configs))


def save_records(records: List[ExperimentRecord], path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump([r.to_dict() for r in records], fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_records(path) -> List[ExperimentRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return [ExperimentRecord.from_dict(d) for d in data]
