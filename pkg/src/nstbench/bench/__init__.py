"""Batch harness: configs, runner, reports, CLI."""
