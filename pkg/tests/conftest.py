"""Shared fixtures and the acceptance summary printed at the end of a run."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from gyroscale.kernel import FieldConfig, InitialDistribution

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# criterion number -> summary line, filled by test_acceptance.py
ACCEPTANCE_LINES = {}


def smooth_fields():
    return FieldConfig.smooth_bounded(e_amp=(0.3, 0.3, 0.3), b_amp=(0.2, 0.2, 0.2),
                                      E=(0.2, 0.3, -0.2), B=(0.3, 0.1, 0.2))


def uniform_fields():
    return FieldConfig.uniform(E=(0.3, -0.4, 0.5), B=(0.3, 0.2, -0.1))


def trivial_f0():
    return InitialDistribution.isotropic(sigma_x=1.0, sigma_v=1.0, sigma_x_perp=np.inf)


@pytest.fixture
def fields_smooth():
    return smooth_fields()


@pytest.fixture
def fields_uniform():
    return uniform_fields()


@pytest.fixture
def f0_gyro():
    return InitialDistribution.gyro_modulated(a=0.5, k=1)


@pytest.fixture
def f0_aniso():
    return InitialDistribution.anisotropic(x0=(0.1, -0.2, 0.3), sigma_x_axes=(1.0, 0.8, 1.2),
                                           sigma_v_axes=(1.0, 0.7, 1.3), v0=(0.2, 0.1, -0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
