"""Report bundle: CSV tables, box plots, and a manifest from run records.

Byte-identity contract: every CSV except the timing columns is a pure
function of the records' reproducible fields. Floats are serialized
with repr() so equal values produce equal bytes, rows are sorted by
(arch, tag, seed, fingerprint), and writes go through a temp file and
os.replace so readers never see a half-written table. Wall-clock
timestamps appear in manifest.json and nowhere else.
"""

import datetime
import json
import math
import os
from typing import Dict, List, Optional, Sequence

from ..profiling import machine_fingerprint, profile_arch
from ..stats import one_way_anova, pairwise_tests
from ..zoo import build_arch
from .runner import ExperimentRecord
from .svgplot import boxplot_svg

SUMMARY_METRICS = ("ssim", "psnr_db", "deep_feature_distance", "training_seconds")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _write_atomic(path, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv(rows: List[Sequence], header: Sequence[str]) -> str:
    def cell(v):
        s = _fmt(v)
        if any(ch in s for ch in (",", '"', "\n")):
            s = '"' + s.replace('"', '""') + '"'
        return s

    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _sort_key(rec: ExperimentRecord):
    c = rec.config
    return (c.get("arch", ""), c.get("tag", ""), c.get("seed", 0), rec.fingerprint)


def _group_label(rec: ExperimentRecord, multi_arch: bool) -> str:
    c = rec.config
    return f"{c['arch']}:{c['tag']}" if multi_arch else c["tag"]


def _metric_groups(records: List[ExperimentRecord], metric: str) -> Dict[str, List[float]]:
    """Finite metric values from ok runs, keyed by group label, insertion-sorted."""
    multi_arch = len({r.config["arch"] for r in records}) > 1
    groups: Dict[str, List[float]] = {}
    for rec in sorted(records, key=_sort_key):
        label = _group_label(rec, multi_arch)
        groups.setdefault(label, [])
        if rec.status != "ok":
            continue
        v = rec.metrics.get(metric)
        if v is None:
            continue
        v = float(v)
        if math.isfinite(v):
            groups[label].append(v)
    return groups


def _mean_sd(values: List[float]):
    n = len(values)
    if n == 0:
        return None, None
    mean = sum(values) / n
    if n == 1:
        return mean, None
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)


def _records_csv(records: List[ExperimentRecord]) -> str:
    header = [
        "arch", "tag", "seed", "fingerprint", "status", "failure_epoch",
        "image_size", "alpha", "beta", "content_tap", "style_taps",
        "learning_rate", "max_epochs",
        "ssim", "psnr_db", "mse", "deep_feature_distance", "training_seconds",
        "final_digest", "deterministic_digest",
    ]
    rows = []
    for rec in sorted(records, key=_sort_key):
        c = rec.config
        rows.append([
            c["arch"], c["tag"], c["seed"], rec.fingerprint, rec.status,
            rec.failure_epoch,
            c["image_size"], float(c["alpha"]), float(c["beta"]), c["content_tap"],
            ";".join(str(t) for t in c["style_taps"]),
            float(c["learning_rate"]), c["max_epochs"],
            rec.metrics.get("ssim"), rec.metrics.get("psnr_db"), rec.metrics.get("mse"),
            rec.metrics.get("deep_feature_distance"), rec.training_seconds,
            rec.output_digests.get("final"), rec.deterministic_digest(),
        ])
    return _csv(rows, header)


def _summary_csv(records: List[ExperimentRecord]) -> str:
    header = ["group", "arch", "tag", "n_ok", "n_total"]
    for m in SUMMARY_METRICS:
        header += [f"{m}_mean", f"{m}_sd"]
    multi_arch = len({r.config["arch"] for r in records}) > 1
    by_group: Dict[str, List[ExperimentRecord]] = {}
    for rec in sorted(records, key=_sort_key):
        by_group.setdefault(_group_label(rec, multi_arch), []).append(rec)
    rows = []
    for label, recs in by_group.items():
        ok = [r for r in recs if r.status == "ok"]
        row = [label, recs[0].config["arch"], recs[0].config["tag"], len(ok), len(recs)]
        for m in SUMMARY_METRICS:
            vals = [
                float(r.metrics[m]) for r in ok
                if r.metrics.get(m) is not None and math.isfinite(float(r.metrics[m]))
            ]
            mean, sd = _mean_sd(vals)
            row += [mean, sd]
        rows.append(row)
    return _csv(rows, header)


def _anova_csv(records: List[ExperimentRecord], metric: str = "ssim") -> str:
    header = ["source", "sum_sq", "df", "mean_sq", "f_stat", "p_value", "eta_squared"]
    groups = {k: v for k, v in _metric_groups(records, metric).items() if len(v) >= 2}
    if len(groups) < 2:
        return _csv([], header)
    ordered = {k: groups[k] for k in sorted(groups)}
    res = one_way_anova(ordered)
    rows = [
        ["between", res.ss_between, res.df_between, res.ms_between, res.f_stat,
         res.p_value, res.eta_squared],
        ["within", res.ss_within, res.df_within, res.ms_within, None, None, None],
        ["total", res.ss_between + res.ss_within, res.df_between + res.df_within,
         None, None, None, None],
    ]
    return _csv(rows, header)


def _pairwise_csv(records: List[ExperimentRecord], metric: str = "ssim") -> str:
    header = ["group_a", "group_b", "n_a", "n_b", "mean_diff", "df", "t_stat",
              "p_value", "p_bonferroni", "cohens_d", "significant"]
    groups = {k: v for k, v in _metric_groups(records, metric).items() if len(v) >= 2}
    if len(groups) < 2:
        return _csv([], header)
    labels = sorted(groups)
    tests = pairwise_tests({k: groups[k] for k in labels})
    rows = []
    for t in tests:
        rows.append([
            t.label_a, t.label_b, t.n_a, t.n_b, t.mean_diff, t.df, t.t_stat,
            t.p_value, t.p_bonferroni, t.cohens_d, int(t.significant),
        ])
    return _csv(rows, header)


def _cost_csv(records: List[ExperimentRecord], with_timing: bool) -> str:
    header = ["arch", "image_size", "params_learnable", "params_millions",
              "flops_full", "flops_to_style_tap", "activation_total_bytes",
              "activation_peak_bytes", "forward_ms"]
    seen = {}
    for rec in sorted(records, key=_sort_key):
        key = (rec.config["arch"], rec.config["image_size"])
        seen.setdefault(key, True)
    rows = []
    for arch, size in sorted(seen):
        prof = profile_arch(build_arch(arch), (size, size), with_timing=with_timing,
                            repeats=3)
        rows.append([
            arch, size, prof.params_learnable, prof.params_millions, prof.flops_full,
            prof.flops_to_style_tap, prof.activation_total_bytes,
            prof.activation_peak_bytes, prof.forward_ms,
        ])
    return _csv(rows, header)


def emit_report(records: List[ExperimentRecord], out_dir,
                cost_timing: bool = False,
                stats_metric: str = "ssim") -> Dict[str, str]:
    """Write the full report bundle into out_dir; returns {name: path}."""
    os.makedirs(out_dir, exist_ok=True)
    files: Dict[str, str] = {}

    def emit(name: str, text: str):
        path = os.path.join(out_dir, name)
        _write_atomic(path, text)
        files[name] = path

    emit("records.csv", _records_csv(records))
    emit("summary.csv", _summary_csv(records))
    emit(f"anova_{stats_metric}.csv", _anova_csv(records, stats_metric))
    emit(f"pairwise_{stats_metric}.csv", _pairwise_csv(records, stats_metric))
    emit("cost.csv", _cost_csv(records, with_timing=cost_timing))

    for metric in SUMMARY_METRICS:
        groups = _metric_groups(records, metric)
        svg = boxplot_svg(groups, title=f"{metric} by group", ylabel=metric)
        emit(f"boxplot_{metric}.svg", svg)

    manifest = {
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "machine": machine_fingerprint(),
        "record_count": len(records),
        "config_fingerprints": sorted({r.fingerprint for r in records}),
        "files": sorted(files),
        "conventions": {
            "float_format": "repr",
            "row_order": "arch, tag, seed, fingerprint",
            "stats_metric": stats_metric,
            "timing_columns_not_reproducible": ["training_seconds",
                                                "forward_seconds_median"],
            "gram": "raw feature dot products, no normalization",
            "flops": "2*kh*kw*cin*cout per conv output element",
        },
    }
    path = os.path.join(out_dir, "manifest.json")
    _write_atomic(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    files["manifest.json"] = path
    return files
