"""Bench harness: config resolution, batch execution, reports, CLI exit codes."""

import dataclasses
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nstbench.bench.cli import main
from nstbench.bench.config import (
    ExperimentConfig,
    WeightSource,
    load_config,
    make_ablation_sets,
    validate_config,
)
from nstbench.bench.patterns import pattern_pair
from nstbench.bench.report import emit_report
from nstbench.bench.runner import (
    default_parallelism,
    load_records,
    run_batch,
    run_single,
    save_records,
)
from nstbench.errors import ConfigurationError
from nstbench.images import save_png
from nstbench.weights import init_weights, save_weights
from nstbench.zoo import build_arch


@pytest.fixture(scope="module")
def image_pair(tmp_path_factory):
    d = tmp_path_factory.mktemp("imgs")
    content, style = pattern_pair(16, 0)
    cpath, spath = d / "content.png", d / "style.png"
    save_png(cpath, content)
    save_png(spath, style)
    return str(cpath), str(spath)


def _quick_config(content, style, **over):
    base = dict(
        arch="tiny_vgg", content=content, style=style,
        image_size=16, max_epochs=12, checkpoint_epochs=(12,), log_every=4,
        content_tap=2, style_taps=(1, 2, 3, 4),
        weights=WeightSource("random", seed=0),
    )
    base.update(over)
    return ExperimentConfig(**base)


def _write_config(path, experiments, preset=None):
    doc = {"experiments": experiments}
    if preset is not None:
        doc["preset"] = preset
    Path(path).write_text(json.dumps(doc))
    return str(path)


# -- config resolution --------------------------------------------------


def test_preset_defaults(tmp_path, image_pair):
    content, style = image_pair
    cfgs = load_config(_write_config(
        tmp_path / "c.json",
        [{"arch": "tiny_vgg", "content": content, "style": style}],
        preset="desk",
    ))
    assert len(cfgs) == 1
    c = cfgs[0]
    assert c.image_size == 64
    assert c.max_epochs == 500
    assert c.checkpoint_epochs == (100, 250, 500)
    assert c.tag == "baseline"
    assert c.alpha == 1.0 and c.beta == 1e8
    assert c.learning_rate == 0.05
    # tap defaults come from the architecture registry
    assert c.content_tap == 2
    assert c.style_taps == (1, 2, 3, 4)
    assert c.weights == WeightSource("random", seed=0)


def test_full_preset_is_default(tmp_path, image_pair):
    content, style = image_pair
    cfgs = load_config(_write_config(
        tmp_path / "c.json",
        [{"arch": "vgg16", "content": content, "style": style}],
    ))
    c = cfgs[0]
    assert c.image_size == 512
    assert c.max_epochs == 5000
    assert c.checkpoint_epochs == (100, 2500, 5000)
    assert c.style_taps == (8,)


def test_tag_override_then_user_wins(tmp_path, image_pair):
    content, style = image_pair
    cfgs = load_config(_write_config(
        tmp_path / "c.json",
        [
            {"arch": "tiny_vgg", "content": content, "style": style,
             "tag": "variant_a"},
            {"arch": "tiny_vgg", "content": content, "style": style,
             "tag": "variant_a", "beta": 5e6},
        ],
        preset="desk",
    ))
    assert cfgs[0].beta == 1e7       # tag fills the field
    assert cfgs[1].beta == 5e6       # explicit value beats the tag


def test_unknown_key_paths(tmp_path, image_pair):
    content, style = image_pair
    top = tmp_path / "a.json"
    top.write_text(json.dumps({"experiments": [], "extra": 1}))
    with pytest.raises(ConfigurationError, match=r"config\.extra: unknown key"):
        load_config(str(top))
    with pytest.raises(ConfigurationError, match=r"experiments\[0\]\.contnet: unknown key"):
        load_config(_write_config(
            tmp_path / "b.json",
            [{"arch": "tiny_vgg", "contnet": content, "style": style,
              "content": content}],
        ))
    with pytest.raises(ConfigurationError, match=r"experiments\[0\]\.weights\.sheme: unknown key"):
        load_config(_write_config(
            tmp_path / "c.json",
            [{"arch": "tiny_vgg", "content": content, "style": style,
              "weights": {"sheme": "random"}}],
        ))


def test_config_rejections(tmp_path, image_pair):
    content, style = image_pair

    def attempt(exp=None, preset=None, doc=None):
        p = tmp_path / "x.json"
        if doc is not None:
            p.write_text(json.dumps(doc))
        else:
            _write_config(p, [exp], preset=preset)
        return load_config(str(p))

    with pytest.raises(ConfigurationError, match="unknown architecture"):
        attempt({"arch": "vgg99", "content": content, "style": style})
    with pytest.raises(ConfigurationError, match="unknown variant"):
        attempt({"arch": "tiny_vgg", "content": content, "style": style,
                 "tag": "variant_z"})
    with pytest.raises(ConfigurationError, match=r"experiments\[0\]\.style: required"):
        attempt({"arch": "tiny_vgg", "content": content})
    with pytest.raises(ConfigurationError, match="must be one of"):
        attempt({"arch": "tiny_vgg", "content": content, "style": style},
                preset="huge")
    with pytest.raises(ConfigurationError, match="non-empty array"):
        attempt(doc={"experiments": []})
    with pytest.raises(ConfigurationError, match="must be an object"):
        attempt(doc={"experiments": ["nope"]})
    with pytest.raises(ConfigurationError, match="not valid JSON"):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        load_config(str(p))
    with pytest.raises(ConfigurationError, match="content image does not exist"):
        attempt({"arch": "tiny_vgg", "content": "/missing.png", "style": style})


def test_validate_config_field_checks(image_pair):
    content, style = image_pair
    good = _quick_config(content, style)
    validate_config(good)
    cases = [
        (dict(alpha=-1.0), "non-negative"),
        (dict(learning_rate=0.0), "learning_rate"),
        (dict(max_epochs=0), "max_epochs"),
        (dict(image_size=4), "below tiny_vgg minimum"),
        (dict(checkpoint_epochs=(99,)), "outside"),
        (dict(content_tap=9), "content tap 9"),
        (dict(style_taps=()), "must not be empty"),
        (dict(style_taps=(1, 1)), "duplicate style taps"),
        (dict(style_taps=(7,)), "style tap 7"),
        (dict(style_layer_weights={1: 1.0}, style_taps=(1, 2)), "missing taps"),
        (dict(style_layer_weights={1: -1.0}, style_taps=(1,)), "negative"),
    ]
    for over, needle in cases:
        bad = dataclasses.replace(good, **over)
        with pytest.raises(ConfigurationError, match=needle):
            validate_config(bad)


def test_relative_paths_resolve_against_config_dir(tmp_path):
    content, style = pattern_pair(16, 1)
    save_png(tmp_path / "c.png", content)
    save_png(tmp_path / "s.png", style)
    cfgs = load_config(_write_config(
        tmp_path / "cfg.json",
        [{"arch": "tiny_vgg", "content": "c.png", "style": "s.png"}],
        preset="desk",
    ))
    assert cfgs[0].content == str(tmp_path / "c.png")
    assert cfgs[0].style == str(tmp_path / "s.png")


def test_fingerprint_stability(image_pair):
    content, style = image_pair
    a = _quick_config(content, style)
    b = _quick_config(content, style)
    assert a.fingerprint() == b.fingerprint()
    assert len(a.fingerprint()) == 64
    assert set(a.fingerprint()) <= set("0123456789abcdef")
    for over in (dict(seed=1), dict(beta=1e7), dict(style_taps=(1, 2)),
                 dict(tag="variant_a")):
        assert dataclasses.replace(a, **over).fingerprint() != a.fingerprint()
    # canonical dict is json-serializable as-is
    json.dumps(a.to_dict())


def test_ablation_sets_vary_one_field_group(image_pair):
    content, style = image_pair
    base = ExperimentConfig(arch="vgg16", content=content, style=style)
    sets = make_ablation_sets(base)
    assert sorted(sets) == [1, 2, 3]
    allowed = {
        "variant_a": {"beta"}, "variant_b": {"beta"}, "variant_c": {"alpha"},
        "shallow_layers": {"content_tap", "style_taps"},
        "deep_layers": {"content_tap", "style_taps"},
        "multi_layer": {"content_tap", "style_taps"},
        "lr_conservative": {"learning_rate"},
        "lr_aggressive": {"learning_rate"},
        "lr_very_aggressive": {"learning_rate"},
    }
    for idx, family in sets.items():
        assert family[0].tag == "baseline"
        base_d = family[0].to_dict()
        for variant in family[1:]:
            var_d = variant.to_dict()
            diff = {k for k in base_d if base_d[k] != var_d[k]}
            assert "tag" in diff
            assert diff - {"tag"} <= allowed[variant.tag], (variant.tag, diff)
            assert diff - {"tag"}, variant.tag


# -- execution ----------------------------------------------------------


@pytest.fixture(scope="module")
def huge_weights(tmp_path_factory):
    # weights scaled far past any stable regime: forward overflows fast
    d = tmp_path_factory.mktemp("weights")
    graph = build_arch("tiny_vgg")
    w = init_weights(graph, seed=0)
    for layer in w.values():
        for key in layer:
            layer[key] = layer[key] * 1e20
    path = d / "huge.nstw"
    save_weights(path, graph, w)
    return str(path)


@pytest.fixture(scope="module")
def batch_results(tmp_path_factory, image_pair, huge_weights):
    content, style = image_pair
    out = tmp_path_factory.mktemp("batch")
    configs = [
        _quick_config(content, style, seed=0),
        _quick_config(content, style, seed=1,
                      weights=WeightSource("random", seed=1)),
        _quick_config(content, style, tag="variant_a", beta=1e7, seed=0),
        _quick_config(content, style, tag="variant_a", beta=1e7, seed=1,
                      weights=WeightSource("random", seed=1)),
        _quick_config(content, style, seed=2,
                      weights=WeightSource("file", path=huge_weights)),
    ]
    records = run_batch(configs, str(out), parallelism=2)
    return configs, records, str(out)


def test_batch_isolates_divergence(batch_results):
    configs, records, out = batch_results
    assert len(records) == 5
    # input order preserved
    assert [r.config["seed"] for r in records] == [c.seed for c in configs]
    ok = records[:4]
    for r in ok:
        assert r.status == "ok"
        assert 0.0 <= r.metrics["ssim"] <= 1.0
        assert r.metrics["mse"] >= 0.0
        assert r.metrics["deep_feature_distance"] >= 0.0
        assert r.trace[0]["epoch"] == 1
        assert r.trace[-1]["epoch"] == 12
        assert r.training_seconds > 0
        final = os.path.join(out, r.artifacts["final_png"])
        assert os.path.isfile(final)
        assert os.path.isfile(os.path.join(out, r.artifacts["trace_csv"]))
    bad = records[4]
    assert bad.status == "diverged"
    assert bad.failure_epoch >= 1
    assert bad.metrics["ssim"] is None
    assert "diverged" in bad.failure_reason or "finite" in bad.failure_reason


def test_run_single_config_error_status(tmp_path, image_pair):
    content, style = image_pair
    # invalid tap smuggled past load-time validation
    cfg = _quick_config(content, style, content_tap=9)
    rec = run_single(cfg, str(tmp_path))
    assert rec.status == "config_error"
    assert "9" in rec.failure_reason


def test_run_single_failed_status(tmp_path, image_pair):
    _, style = image_pair
    cfg = _quick_config("/missing/content.png", style)
    rec = run_single(cfg, str(tmp_path))
    assert rec.status == "failed"
    assert "FileNotFoundError" in rec.failure_reason


def test_records_roundtrip(tmp_path, batch_results):
    _, records, _ = batch_results
    path = tmp_path / "records.json"
    save_records(records, str(path))
    back = load_records(str(path))
    assert len(back) == len(records)
    for a, b in zip(records, back):
        assert a.to_dict() == b.to_dict()
        assert a.deterministic_digest() == b.deterministic_digest()


def test_deterministic_digest_scope(batch_results):
    _, records, _ = batch_results
    rec = records[0]
    d0 = rec.deterministic_digest()
    # timing and machine identity stay out of the digest
    clone = dataclasses.replace(rec, training_seconds=999.0,
                                machine={"cpu": "other"},
                                artifacts={"final_png": "elsewhere.png"},
                                metrics={**rec.metrics, "training_seconds": 123.0})
    assert clone.deterministic_digest() == d0
    shifted = dataclasses.replace(rec, metrics={**rec.metrics, "ssim": 0.0})
    assert shifted.deterministic_digest() != d0
    moved = dataclasses.replace(rec, status="failed")
    assert moved.deterministic_digest() != d0


def test_parallelism_env(monkeypatch):
    monkeypatch.delenv("NST_BENCH_THREADS", raising=False)
    assert default_parallelism(1) == 1
    assert default_parallelism(4) == min(4, os.cpu_count() or 1)
    monkeypatch.setenv("NST_BENCH_THREADS", "3")
    assert default_parallelism(8) == 3
    assert default_parallelism(2) == 2
    monkeypatch.setenv("NST_BENCH_THREADS", "0")
    with pytest.raises(ConfigurationError, match="NST_BENCH_THREADS"):
        default_parallelism(4)
    monkeypatch.setenv("NST_BENCH_THREADS", "lots")
    with pytest.raises(ConfigurationError, match="NST_BENCH_THREADS"):
        default_parallelism(4)


def test_pattern_pair_deterministic():
    c0, s0 = pattern_pair(16, 0)
    c1, s1 = pattern_pair(16, 0)
    assert np.array_equal(c0, c1) and np.array_equal(s0, s1)
    c2, _ = pattern_pair(16, 5)
    assert not np.array_equal(c0, c2)
    for img in (c0, s0):
        assert img.shape == (3, 16, 16)
        assert img.min() >= 0.0 and img.max() <= 1.0


# -- report bundle ------------------------------------------------------


def _read_csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), lines[1:]


def test_report_bundle(tmp_path, batch_results):
    _, records, _ = batch_results
    out = tmp_path / "report"
    files = emit_report(records, str(out))
    expected = {
        "records.csv", "summary.csv", "anova_ssim.csv", "pairwise_ssim.csv",
        "cost.csv", "manifest.json",
        "boxplot_ssim.svg", "boxplot_psnr_db.svg",
        "boxplot_deep_feature_distance.svg", "boxplot_training_seconds.svg",
    }
    assert set(files) == expected
    for p in files.values():
        assert os.path.isfile(p)

    header, rows = _read_csv(files["records.csv"])
    assert len(rows) == 5
    assert header[:5] == ["arch", "tag", "seed", "fingerprint", "status"]
    # sorted by (arch, tag, seed): baseline seeds 0,1,2 then variant_a 0,1
    tags = [r.split(",")[1] for r in rows]
    assert tags == ["baseline", "baseline", "baseline", "variant_a", "variant_a"]

    header, rows = _read_csv(files["summary.csv"])
    assert header == (
        ["group", "arch", "tag", "n_ok", "n_total"]
        + [f"{m}_{s}" for m in ("ssim", "psnr_db", "deep_feature_distance",
                                "training_seconds") for s in ("mean", "sd")]
    )
    assert len(rows) == 2
    by_group = {r.split(",")[0]: r.split(",") for r in rows}
    assert by_group["baseline"][3:5] == ["2", "3"]   # diverged run counted in total
    assert by_group["variant_a"][3:5] == ["2", "2"]

    header, rows = _read_csv(files["anova_ssim.csv"])
    assert [r.split(",")[0] for r in rows] == ["between", "within", "total"]
    header, rows = _read_csv(files["pairwise_ssim.csv"])
    assert len(rows) == 1
    assert rows[0].startswith("baseline,variant_a")

    header, rows = _read_csv(files["cost.csv"])
    assert len(rows) == 1
    assert rows[0].startswith("tiny_vgg,16")
    assert rows[0].endswith(",")      # no timing column content by default

    svg = Path(files["boxplot_ssim.svg"]).read_text()
    assert svg.count('class="box"') == 2
    assert "<svg" in svg and "</svg>" in svg

    manifest = json.loads(Path(files["manifest.json"]).read_text())
    assert manifest["record_count"] == 5
    assert manifest["files"] == sorted(set(files) - {"manifest.json"})
    assert len(manifest["config_fingerprints"]) == 5
    assert "generated_at" in manifest


def test_report_byte_identity(tmp_path, batch_results):
    _, records, _ = batch_results
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    f1 = emit_report(records, str(out1))
    f2 = emit_report(records, str(out2))
    for name in f1:
        if name == "manifest.json":
            continue    # carries the generation timestamp
        b1 = Path(f1[name]).read_bytes()
        b2 = Path(f2[name]).read_bytes()
        assert b1 == b2, name


def test_timestamps_only_in_manifest(tmp_path, batch_results):
    _, records, _ = batch_results
    out = tmp_path / "r3"
    files = emit_report(records, str(out))
    import re
    stamp = re.compile(r"\d{4}-\d{2}-\d{2}T\d{2}:\d{2}")
    for name, path in files.items():
        text = Path(path).read_text()
        if name == "manifest.json":
            assert stamp.search(text)
        else:
            assert not stamp.search(text), name


# -- CLI ----------------------------------------------------------------


def test_cli_run_ok_and_report(tmp_path, image_pair):
    content, style = image_pair
    cfg = _write_config(tmp_path / "cfg.json", [
        {"arch": "tiny_vgg", "content": content, "style": style,
         "image_size": 16, "max_epochs": 8, "checkpoint_epochs": [8],
         "log_every": 2},
    ])
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "records.json").is_file()
    assert (out / "summary.csv").is_file()
    recs = load_records(str(out / "records.json"))
    assert len(recs) == 1 and recs[0].status == "ok"


def test_cli_exit_2_on_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"experiments": [{"arch": "tiny_vgg",
                                                "contnet": "x.png"}]}))
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "configuration error" in err
    assert "contnet" in err


def test_cli_exit_3_on_partial_batch(tmp_path, image_pair, huge_weights, capsys):
    content, style = image_pair
    cfg = _write_config(tmp_path / "cfg.json", [
        {"arch": "tiny_vgg", "content": content, "style": style,
         "image_size": 16, "max_epochs": 6, "checkpoint_epochs": [6],
         "log_every": 2},
        {"arch": "tiny_vgg", "content": content, "style": style,
         "image_size": 16, "max_epochs": 6, "checkpoint_epochs": [6],
         "log_every": 2, "seed": 1,
         "weights": {"scheme": "file", "path": huge_weights}},
    ])
    out = tmp_path / "out"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 3
    assert "1/2 runs ok" in capsys.readouterr().out
    recs = load_records(str(out / "records.json"))
    assert [r.status for r in recs] == ["ok", "diverged"]


def test_cli_ablate_rejects_missing_taps(tmp_path, image_pair):
    # tap-placement family names ordinals the tiny registry lacks
    content, style = image_pair
    code = main(["ablate", "--set", "2", "--arch", "tiny_vgg",
                 "--content", content, "--style", style,
                 "--preset", "desk", "--seeds", "0",
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_ablate_rejects_bad_seeds(tmp_path, image_pair):
    content, style = image_pair
    code = main(["ablate", "--set", "1", "--arch", "tiny_vgg",
                 "--content", content, "--style", style,
                 "--preset", "desk", "--seeds", "a,b",
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_cli_profile_json(tmp_path):
    out = tmp_path / "prof.json"
    code = main(["profile", "--arch", "tiny_vgg", "--size", "16",
                 "--no-timing", "--json", str(out)])
    assert code == 0
    rows = json.loads(out.read_text())
    assert len(rows) == 1
    row = rows[0]
    assert row["arch"] == "tiny_vgg"
    assert row["params_learnable"] == 4296
    assert row["forward_ms"] is None
    # tiny archs tap every stage, so the deepest style tap spans the graph
    assert row["flops_full"] >= row["flops_to_style_tap"] > 0


def test_cli_stats_recompute(tmp_path, batch_results):
    _, records, _ = batch_results
    rec_path = tmp_path / "records.json"
    save_records(records, str(rec_path))
    out = tmp_path / "stats"
    code = main(["stats", "--records", str(rec_path),
                 "--metric", "deep_feature_distance", "--out", str(out)])
    assert code == 0
    assert (out / "anova_deep_feature_distance.csv").is_file()
    assert (out / "pairwise_deep_feature_distance.csv").is_file()


def test_cli_patterns(tmp_path):
    out = tmp_path / "pats"
    code = main(["patterns", "--out", str(out), "--size", "8", "--seed", "3"])
    assert code == 0
    assert (out / "content_8_s3.png").is_file()
    assert (out / "style_8_s3.png").is_file()


def test_console_script_installed():
    proc = subprocess.run(["nst-bench", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("run", "ablate", "profile", "stats", "patterns"):
        assert sub in proc.stdout
