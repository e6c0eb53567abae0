"""Optimizer loop: fixed points, determinism, divergence, trend properties."""

import numpy as np
import pytest

from nstbench.bench.patterns import pattern_pair
from nstbench.errors import ConfigurationError, DivergenceError
from nstbench.losses import LossWeights
from nstbench.optimize import OptimConfig, optimize
from nstbench.weights import init_weights
from nstbench.zoo import build_arch


@pytest.fixture(scope="module")
def tiny_setup():
    graph = build_arch("tiny_vgg")
    weights = init_weights(graph, seed=0)
    content, style = pattern_pair(64, 3)
    return graph, weights, content, style


def test_beta_zero_is_a_fixed_point(tiny_setup):
    """Pure content objective starts at its optimum and never moves."""
    graph, weights, content, style = tiny_setup
    c32 = np.ascontiguousarray(content[:, :32, :32])
    s32 = np.ascontiguousarray(style[:, :32, :32])
    lw = LossWeights(alpha=1.0, beta=0.0, content_tap=2, style_taps=(4,))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=200, checkpoint_epochs=(100, 200), seed=0)
    out, trace = optimize(c32, s32, graph, weights, lw, cfg)
    assert all(p.total == 0.0 for p in trace.points)
    np.testing.assert_allclose(out, c32, atol=1e-6)


def test_loss_decreases_from_early_epochs(tiny_setup):
    graph, weights, content, style = tiny_setup
    lw = LossWeights(alpha=1.0, beta=1e8, content_tap=2, style_taps=(1, 2, 3, 4))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=100, checkpoint_epochs=(100,), seed=0)
    out, trace = optimize(content, style, graph, weights, lw, cfg)
    logged = {p.epoch: p.total for p in trace.points}
    assert logged[100] < 0.5 * logged[10]
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_style_only_run_trends_down(tiny_setup):
    """With alpha=0 the logged style loss decreases over 50-epoch windows."""
    graph, weights, content, style = tiny_setup
    lw = LossWeights(alpha=0.0, beta=1e4, content_tap=2, style_taps=(1, 2, 3, 4))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=300, checkpoint_epochs=(300,), seed=0)
    _, trace = optimize(content, style, graph, weights, lw, cfg)
    logged = {p.epoch: p.style for p in trace.points}
    windows = [e for e in sorted(logged) if e + 50 in logged]
    assert len(windows) >= 20
    for e in windows:
        assert logged[e + 50] < logged[e]


def test_rerun_is_bit_identical(tiny_setup):
    graph, weights, content, style = tiny_setup
    lw = LossWeights(alpha=1.0, beta=1e8, content_tap=2, style_taps=(1, 2, 3, 4))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=60, checkpoint_epochs=(30, 60), seed=0)
    out1, tr1 = optimize(content, style, graph, weights, lw, cfg)
    out2, tr2 = optimize(content, style, graph, weights, lw, cfg)
    assert out1.tobytes() == out2.tobytes()
    assert [(p.epoch, p.total, p.content, p.style) for p in tr1.points] == \
           [(p.epoch, p.total, p.content, p.style) for p in tr2.points]
    for e in (30, 60):
        assert tr1.checkpoints[e].tobytes() == tr2.checkpoints[e].tobytes()


def test_checkpoints_and_logging_schedule(tiny_setup):
    graph, weights, content, style = tiny_setup
    lw = LossWeights(alpha=1.0, beta=1e8, content_tap=2, style_taps=(4,))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=25, checkpoint_epochs=(7, 20),
                      log_every=10, seed=0)
    out, trace = optimize(content, style, graph, weights, lw, cfg)
    assert sorted(trace.checkpoints) == [7, 20]
    epochs = [p.epoch for p in trace.points]
    assert epochs == [1, 7, 10, 20, 25]
    for img in trace.checkpoints.values():
        assert img.min() >= 0.0 and img.max() <= 1.0


def test_divergence_reports_epoch(tiny_setup):
    graph, _, content, style = tiny_setup
    weights = init_weights(graph, seed=0)
    huge = {
        lid: {k: (arr * np.float32(1e20)).astype(np.float32) for k, arr in entry.items()}
        for lid, entry in weights.items()
    }
    lw = LossWeights(alpha=1.0, beta=1e8, content_tap=2, style_taps=(1, 2, 3, 4))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=50, checkpoint_epochs=(50,), seed=0)
    with pytest.raises(DivergenceError) as exc_info:
        optimize(content, style, graph, huge, lw, cfg)
    assert exc_info.value.epoch == 1
    assert exc_info.value.trace.final_epoch == 1


def test_trace_csv_format(tiny_setup, tmp_path):
    graph, weights, content, style = tiny_setup
    lw = LossWeights(alpha=1.0, beta=1e8, content_tap=2, style_taps=(4,))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=12, checkpoint_epochs=(12,), seed=0)
    _, trace = optimize(content, style, graph, weights, lw, cfg)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "epoch,total_loss,content_loss,style_loss,wall_seconds"
    assert len(lines) == len(trace.points) + 1
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[1]) == trace.points[0].total


def test_optim_config_validation():
    with pytest.raises(ConfigurationError):
        OptimConfig(learning_rate=0.0).validate()
    with pytest.raises(ConfigurationError):
        OptimConfig(max_epochs=0).validate()
    with pytest.raises(ConfigurationError):
        OptimConfig(max_epochs=10, checkpoint_epochs=(20,)).validate()


def test_mismatched_image_sizes_rejected(tiny_setup):
    graph, weights, content, style = tiny_setup
    lw = LossWeights(alpha=1.0, beta=1e8, content_tap=2, style_taps=(4,))
    cfg = OptimConfig(learning_rate=0.05, max_epochs=5, checkpoint_epochs=(5,), seed=0)
    with pytest.raises(ConfigurationError):
        optimize(content, style[:, :32, :32], graph, weights, lw, cfg)
