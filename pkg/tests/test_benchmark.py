"""Smoke test of the backend benchmark script."""

import importlib.util

from conftest import ROOT


def _load():
    spec = importlib.util.spec_from_file_location("bench_flow", ROOT / "benchmarks" / "bench_flow.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def test_benchmark_runs_and_backends_agree(capsys):
    mod = _load()
    mod.main(["--points", "32", "--repeat", "1"])
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split()[:2] == ["kernel", "backend"]
    for line in lines[1:]:
        assert float(line.split()[-1]) <= 1e-12
