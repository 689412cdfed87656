"""Benchmark harness tests (mechanics, not absolute performance)."""

import numpy as np
import pytest

from lsmkit import BenchMismatchError, ValidationError
from lsmkit.bench import BenchResult, BenchSpec, CSV_FIELDS, run_bench, write_csv
from lsmkit.bench import _diff_report, _verify
from lsmkit.lif import LifParams


def _tiny_spec(**kw):
    base = dict(
        neuron_counts=(1, 8),
        batch_sizes=(1, 2),
        batch_layer_size=8,
        train_length=20,
        repetitions=3,
        warmup=0,
        seed=0,
    )
    base.update(kw)
    return BenchSpec(**base)


def test_spec_validation():
    with pytest.raises(ValidationError):
        BenchSpec(repetitions=2)
    with pytest.raises(ValidationError):
        BenchSpec(neuron_counts=(0,))
    with pytest.raises(ValidationError):
        BenchSpec(train_length=0)


def test_run_bench_produces_expected_rows():
    results = run_bench(_tiny_spec())
    # 2 sizes + 2 batch settings, scalar and vectorized each
    assert len(results) == 8
    keys = {(r.impl, r.n_neurons, r.batch) for r in results}
    assert ("vectorized", 1, 1) in keys
    assert ("scalar", 8, 2) in keys
    for r in results:
        assert r.median_ns > 0
        assert r.iqr_ns >= 0
        assert r.reps == 3


def test_scalar_skipped_above_work_limit():
    results = run_bench(_tiny_spec(scalar_limit=10))
    impls = {r.impl for r in results}
    assert impls == {"vectorized"}


def test_correctness_gate_runs_before_timing():
    # L=1, B=1 exercises the gate on the smallest configuration
    results = run_bench(_tiny_spec(neuron_counts=(1,), batch_sizes=(1,)))
    assert any(r.impl == "scalar" and r.n_neurons == 1 for r in results)


def test_verify_raises_with_diff_report():
    params = LifParams()
    rng = np.random.default_rng(0)
    currents = rng.uniform(0.0, 0.1, size=(4, 10))
    _verify(params, 4, 10, None, currents)  # healthy kernel passes
    a = np.zeros((2, 3))
    b = np.zeros((2, 3))
    b[1, 2] = 1.0
    report = _diff_report(a, b)
    assert "1 positions" in report and "(1, 2)" in report


def test_mismatch_aborts(monkeypatch):
    import lsmkit.bench as bench_mod

    def broken_scalar(state, params, currents):
        out = np.zeros_like(np.asarray(currents, dtype=float))
        out[0, 0] = 123.0
        return out

    monkeypatch.setattr(bench_mod, "run_spike_train_scalar", broken_scalar)
    with pytest.raises(BenchMismatchError, match="correctness gate"):
        run_bench(_tiny_spec(neuron_counts=(4,), batch_sizes=(1,)))


def test_csv_output(tmp_path):
    spec = _tiny_spec()
    results = run_bench(spec)
    path = tmp_path / "bench.csv"
    write_csv(path, results, spec)
    lines = path.read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    assert any("seed: 0" in l for l in meta)
    assert any("threads:" in l for l in meta)
    header_idx = next(i for i, l in enumerate(lines) if not l.startswith("#"))
    assert lines[header_idx] == ",".join(CSV_FIELDS)
    rows = lines[header_idx + 1 :]
    assert len(rows) == len(results)
    first = rows[0].split(",")
    assert first[0] in ("vectorized", "scalar")
    assert int(first[4]) > 0


def test_vectorized_beats_scalar_at_moderate_size():
    # direction only; uses a size where the outcome is unambiguous
    spec = _tiny_spec(neuron_counts=(300,), batch_sizes=(1,), train_length=50)
    results = run_bench(spec)
    med = {r.impl: r.median_ns for r in results if r.n_neurons == 300 and r.batch == 1}
    assert med["vectorized"] < med["scalar"]
