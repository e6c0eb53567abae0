"""Command line entry point: nst-bench run | ablate | profile | stats | patterns.

Exit codes: 0 on success, 2 on configuration errors, 3 when a batch
completed but some runs did not finish ok.
"""

import argparse
import dataclasses
import json
import os
import sys

from ..errors import ConfigurationError
from ..images import save_png
from ..profiling import profile_arch
from ..zoo import ARCH_NAMES, build_arch
from .config import (ExperimentConfig, PRESETS, WeightSource, load_config,
                     make_ablation_sets, validate_config)
from .patterns import pattern_pair
from .report import emit_report
from .runner import load_records, run_batch, save_records

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _parse_seeds(text: str):
    try:
        seeds = tuple(int(s) for s in text.split(",") if s.strip() != "")
    except ValueError:
        raise ConfigurationError(f"--seeds must be comma-separated integers, got {text!r}")
    if not seeds:
        raise ConfigurationError("--seeds must name at least one seed")
    return seeds


def _finish_batch(records, out_dir, cost_timing: bool) -> int:
    save_records(records, os.path.join(out_dir, "records.json"))
    emit_report(records, out_dir, cost_timing=cost_timing)
    bad = [r for r in records if r.status != "ok"]
    for r in records:
        cfg = r.config
        line = f"{cfg['arch']}/{cfg['tag']}/seed{cfg['seed']}: {r.status}"
        if r.status == "ok":
            line += f" ssim={r.metrics.get('ssim'):.4f}" if r.metrics.get("ssim") is not None else ""
        print(line)
    print(f"{len(records) - len(bad)}/{len(records)} runs ok; report in {out_dir}")
    return EXIT_PARTIAL if bad else EXIT_OK


def cmd_run(args) -> int:
    configs = load_config(args.config)
    records = run_batch(configs, args.out, parallelism=args.threads)
    return _finish_batch(records, args.out, cost_timing=args.cost_timing)


def cmd_ablate(args) -> int:
    base = ExperimentConfig(
        arch=args.arch,
        content=args.content,
        style=args.style,
        image_size=PRESETS[args.preset]["image_size"],
        max_epochs=PRESETS[args.preset]["max_epochs"],
        checkpoint_epochs=PRESETS[args.preset]["checkpoint_epochs"],
        weights=WeightSource("random", seed=0),
    )
    graph = build_arch(args.arch)
    base = dataclasses.replace(
        base, content_tap=graph.taps.content_default,
        style_taps=tuple(graph.taps.style_defaults),
    )
    sets = make_ablation_sets(base)
    if args.set == "all":
        chosen = [cfg for idx in sorted(sets) for cfg in sets[idx]]
        # baseline appears once per set; drop repeats by tag
        seen = set()
        chosen = [c for c in chosen if not (c.tag in seen or seen.add(c.tag))]
    else:
        chosen = sets[int(args.set)]
    seeds = _parse_seeds(args.seeds)
    expanded = []
    for cfg in chosen:
        for seed in seeds:
            run_cfg = dataclasses.replace(cfg, seed=seed,
                                          weights=WeightSource("random", seed=seed))
            validate_config(run_cfg, where=f"{cfg.tag}/seed{seed}")
            expanded.append(run_cfg)
    records = run_batch(expanded, args.out, parallelism=args.threads)
    return _finish_batch(records, args.out, cost_timing=args.cost_timing)


def cmd_profile(args) -> int:
    names = list(ARCH_NAMES) if args.arch == "all" else [args.arch]
    rows = []
    for name in names:
        graph = build_arch(name)
        size = max(args.size, graph.min_input)
        prof = profile_arch(graph, (size, size), with_timing=not args.no_timing,
                            repeats=args.repeats)
        rows.append(prof)
        print(f"{name:14s} size={size:4d} params={prof.params_learnable:>12,d} "
              f"({prof.params_millions:7.2f}M) flops={prof.flops_full:>16,d} "
              f"to_style_tap={prof.flops_to_style_tap:>16,d} "
              f"act_total={prof.activation_total_bytes:>13,d}B "
              f"act_peak={prof.activation_peak_bytes:>13,d}B"
              + (f" fwd={prof.forward_ms:.1f}ms" if prof.forward_ms is not None else ""))
    if args.json:
        payload = [
            {
                "arch": p.arch, "input_hw": list(p.input_hw),
                "params_learnable": p.params_learnable,
                "params_non_learnable": p.params_non_learnable,
                "flops_full": p.flops_full, "flops_to_style_tap": p.flops_to_style_tap,
                "activation_total_bytes": p.activation_total_bytes,
                "activation_peak_bytes": p.activation_peak_bytes,
                "forward_ms": p.forward_ms,
            }
            for p in rows
        ]
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.json}")
    return EXIT_OK


def cmd_stats(args) -> int:
    records = load_records(args.records)
    emit_report(records, args.out, cost_timing=False, stats_metric=args.metric)
    print(f"stats tables for {len(records)} records in {args.out}")
    return EXIT_OK


def cmd_patterns(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    content, style = pattern_pair(args.size, args.seed)
    cpath = os.path.join(args.out, f"content_{args.size}_s{args.seed}.png")
    spath = os.path.join(args.out, f"style_{args.size}_s{args.seed}.png")
    save_png(cpath, content)
    save_png(spath, style)
    print(cpath)
    print(spath)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nst-bench",
        description="Style transfer benchmark harness: run experiments, "
                    "sweep ablations, profile architectures, redo stats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run experiments from a JSON config")
    p_run.add_argument("--config", required=True, help="experiment config JSON")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--threads", type=int, default=None, help="worker cap")
    p_run.add_argument("--cost-timing", action="store_true",
                       help="include forward timing in cost.csv")
    p_run.set_defaults(func=cmd_run)

    p_abl = sub.add_parser("ablate", help="run a published ablation family")
    p_abl.add_argument("--set", required=True, choices=["1", "2", "3", "all"],
                       help="1 weight mix, 2 tap placement, 3 learning rate")
    p_abl.add_argument("--arch", required=True, choices=sorted(ARCH_NAMES))
    p_abl.add_argument("--content", required=True, help="content image path")
    p_abl.add_argument("--style", required=True, help="style image path")
    p_abl.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    p_abl.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    p_abl.add_argument("--out", required=True, help="output directory")
    p_abl.add_argument("--threads", type=int, default=None, help="worker cap")
    p_abl.add_argument("--cost-timing", action="store_true",
                       help="include forward timing in cost.csv")
    p_abl.set_defaults(func=cmd_ablate)

    p_prof = sub.add_parser("profile", help="parameter/FLOP/memory/timing profile")
    p_prof.add_argument("--arch", default="all",
                        choices=sorted(ARCH_NAMES) + ["all"])
    p_prof.add_argument("--size", type=int, default=224, help="input height/width")
    p_prof.add_argument("--no-timing", action="store_true")
    p_prof.add_argument("--repeats", type=int, default=5)
    p_prof.add_argument("--json", default=None, help="also write a JSON profile")
    p_prof.set_defaults(func=cmd_profile)

    p_stats = sub.add_parser("stats", help="recompute report tables from saved records")
    p_stats.add_argument("--records", required=True, help="records.json path")
    p_stats.add_argument("--metric", default="ssim",
                         choices=["ssim", "psnr_db", "deep_feature_distance", "mse"])
    p_stats.add_argument("--out", required=True, help="output directory")
    p_stats.set_defaults(func=cmd_stats)

    p_pat = sub.add_parser("patterns", help="write a procedural content/style image pair")
    p_pat.add_argument("--out", required=True, help="output directory")
    p_pat.add_argument("--size", type=int, default=256)
    p_pat.add_argument("--seed", type=int, default=0)
    p_pat.set_defaults(func=cmd_patterns)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
