"""Experiment reports on the trivially exact scenario and fitting helpers."""

import numpy as np
import pytest

from gyroscale.config import load_config
from gyroscale.experiments import fit_loglog, is_trivially_exact, non_increasing, run_experiment

from conftest import SCENARIOS


def test_fit_loglog_recovers_power_law():
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    fit = fit_loglog(eps, 3.0 * eps**1.5)
    assert fit["slope"] == pytest.approx(1.5, abs=1e-12) and fit["residual"] <= 1e-12
    assert fit_loglog(eps[:2], eps[:2]) is None
    assert fit_loglog(eps, np.array([1.0, 0.0, 0.0, 1.0])) is None


def test_non_increasing_slack():
    assert non_increasing([1.0, 1.04, 1.0], 0.05)
    assert not non_increasing([1.0, 1.06], 0.05)


@pytest.fixture(scope="module")
def trivial_cfg():
    cfg = load_config(SCENARIOS / "zero_isotropic.toml")
    assert is_trivially_exact(cfg)
    return cfg.with_overrides(sampling=cfg.sampling.__class__(cloud_size=1024, sub_cloud_size=64))


@pytest.mark.parametrize("name", ["two_scale_convergence", "first_order", "classical_mm", "macro_residual"])
def test_trivial_scenario_is_degenerate_exact(trivial_cfg, name):
    rep = run_experiment(name, trivial_cfg)
    assert rep.status == "degenerate-exact", [c for c in rep.checks if not c.passed]
    if name == "two_scale_convergence":
        assert not rep.slopes
        assert max(v for _, v in rep.metric("D")) <= 1e-8


def test_unknown_experiment(trivial_cfg):
    with pytest.raises(ValueError):
        run_experiment("nonsense", trivial_cfg)


def test_partial_report_on_error(trivial_cfg, monkeypatch):
    from gyroscale import experiments

    def boom(cfg, executor, rep):
        rep.add(0.2, "D", 1.0)
        raise RuntimeError("interrupted")

    monkeypatch.setitem(experiments.RUNNERS, "two_scale_convergence", boom)
    seen = []
    with pytest.raises(RuntimeError):
        run_experiment("two_scale_convergence", trivial_cfg, on_partial=seen.append)
    assert seen and seen[0].status == "error" and len(seen[0].rows) == 1
