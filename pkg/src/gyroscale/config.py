"""Scenario files: schema, validation, canonical serialization and hashing.

A scenario is a TOML file with flat sections::

    [scenario]    name, experiment, T, epsilon_list, seed, output_dir
    [fields]      family, E, B, e_amp, b_amp, wavenumber, envelope
    [f0]          family, x0, sigma_x, sigma_v, sigma_x_perp,
                  sigma_x_axes, sigma_v_axes, v0, a, k
    [sampling]    cloud, cloud_size, sub_cloud_size, n_alpha, n_tau, n_sigma,
                  box_half_width
    [integrator]  dt_max, substeps_per_gyroperiod, method
    [gradient]    method, fd_step
    [residual]    fd_x, fd_t_over_eps, n_t, cloud_size, points, t0_frac,
                  t1_frac, poly, deltas, manufactured_eps
    [acceptance]  slope_min, fit_residual_max, trend_slack, exact_threshold,
                  manufactured_tol, linearity_tol, freeze_tol, refinement_gain,
                  cloud_change_max

Only ``fields.family`` and ``f0.family`` are required.  Unknown sections or
keys are rejected.  :func:`dumps` writes every key explicitly in a fixed
order, so ``load -> dumps -> loads`` reproduces the configuration exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from dataclasses import dataclass, field, fields as dc_fields, replace
from pathlib import Path

from .corrector import GradientSpec
from .dynamics import IntegratorSpec
from .kernel import F0_FAMILIES, FIELD_CODES, FieldConfig, InitialDistribution

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

EXPERIMENTS = ("two_scale_convergence", "first_order", "classical_mm", "macro_residual")
CLOUD_TAGS = ("gauss-weighted", "low-discrepancy-box")


class ConfigError(ValueError):
    """Invalid scenario file or value.

    Attributes
    ----------
    key : str or None
        Dotted name of the offending key.
    line : int or None
        Line number of a syntax error.
    """

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class SamplingSpec:
    """Sample counts.  ``box_half_width`` is in units of the f0 widths."""

    cloud: str = "gauss-weighted"
    cloud_size: int = 16384
    sub_cloud_size: int = 512
    n_alpha: int = 64
    n_tau: int = 64
    n_sigma: int = 16
    box_half_width: float = 4.0


@dataclass(frozen=True)
class ResidualSpec:
    """Finite-difference steps and quadrature sizes for the weak residuals.

    ``t0_frac`` and ``t1_frac`` place the time support of the macro test
    function inside ``(0, T)``; ``deltas`` are the two perturbation weights of
    the linearity check.
    """

    fd_x: float = 1e-3
    fd_t_over_eps: float = 1e-3
    n_t: int = 16
    cloud_size: int = 512
    points: int = 32
    t0_frac: float = 0.4
    t1_frac: float = 0.9
    poly: str = "const"
    deltas: tuple = (1e-3, 1e-2)
    manufactured_eps: float = 0.01


@dataclass(frozen=True)
class AcceptanceSpec:
    """Gates applied to experiment metrics."""

    slope_min: float = 0.9
    fit_residual_max: float = 0.1
    trend_slack: float = 0.05
    exact_threshold: float = 1e-8
    manufactured_tol: float = 0.05
    linearity_tol: float = 0.1
    freeze_tol: float = 0.05
    refinement_gain: float = 2.0
    cloud_change_max: float = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully validated scenario."""

    fields: FieldConfig
    f0: InitialDistribution
    name: str = "scenario"
    experiment: str = "two_scale_convergence"
    T: float = 0.5
    epsilon_list: tuple = (0.2, 0.1, 0.05, 0.025)
    seed: int = 42
    output_dir: str = "results"
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    gradient: GradientSpec = field(default_factory=GradientSpec)
    residual: ResidualSpec = field(default_factory=ResidualSpec)
    acceptance: AcceptanceSpec = field(default_factory=AcceptanceSpec)

    def to_dict(self):
        """Nested plain dictionary with every key present, in schema order."""
        return {
            "scenario": {"name": self.name, "experiment": self.experiment, "T": self.T,
                         "epsilon_list": list(self.epsilon_list), "seed": self.seed,
                         "output_dir": self.output_dir},
            "fields": self.fields.to_dict(),
            "f0": self.f0.to_dict(),
            "sampling": _spec_dict(self.sampling),
            "integrator": self.integrator.to_dict(),
            "gradient": self.gradient.to_dict(),
            "residual": _spec_dict(self.residual),
            "acceptance": _spec_dict(self.acceptance),
        }

    def config_hash(self):
        """Short SHA-256 of the canonical content, ignoring ``output_dir``."""
        d = self.to_dict()
        d["scenario"] = {k: v for k, v in d["scenario"].items() if k != "output_dir"}
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_overrides(self, **kw):
        return replace(self, **kw)


def _spec_dict(spec):
    out = {}
    for f in dc_fields(spec):
        val = getattr(spec, f.name)
        out[f.name] = list(val) if isinstance(val, tuple) else val
    return out


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

_FIELD_KEYS = ("family", "E", "B", "e_amp", "b_amp", "wavenumber", "envelope")
_F0_KEYS = ("family", "x0", "sigma_x", "sigma_v", "sigma_x_perp", "sigma_x_axes", "sigma_v_axes",
            "v0", "a", "k")
_SCENARIO_KEYS = ("name", "experiment", "T", "epsilon_list", "seed", "output_dir")
SECTIONS = {
    "scenario": _SCENARIO_KEYS,
    "fields": _FIELD_KEYS,
    "f0": _F0_KEYS,
    "sampling": tuple(f.name for f in dc_fields(SamplingSpec)),
    "integrator": ("dt_max", "substeps_per_gyroperiod", "method"),
    "gradient": ("method", "fd_step"),
    "residual": tuple(f.name for f in dc_fields(ResidualSpec)),
    "acceptance": tuple(f.name for f in dc_fields(AcceptanceSpec)),
}
_VECTOR_KEYS = {"E", "B", "e_amp", "b_amp", "x0", "sigma_x_axes", "sigma_v_axes", "v0"}
_INT_KEYS = {"seed", "cloud_size", "sub_cloud_size", "n_alpha", "n_tau", "n_sigma",
             "substeps_per_gyroperiod", "n_t", "points", "k"}
_STR_KEYS = {"name", "experiment", "output_dir", "family", "cloud", "method", "poly"}


def _coerce(section, key, value):
    where = f"{section}.{key}"
    if key in _STR_KEYS:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string", where)
        return value
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer", where)
        return value
    if key in _VECTOR_KEYS:
        if not isinstance(value, list) or len(value) != 3 or not all(_is_number(c) for c in value):
            raise ConfigError(f"{where} must be a list of 3 numbers", where)
        return tuple(float(c) for c in value)
    if key in ("epsilon_list", "deltas"):
        if not isinstance(value, list) or not value or not all(_is_number(c) for c in value):
            raise ConfigError(f"{where} must be a nonempty list of numbers", where)
        return tuple(float(c) for c in value)
    if not _is_number(value):
        raise ConfigError(f"{where} must be a number", where)
    return float(value)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def _check(cond, key, message):
    if not cond:
        raise ConfigError(f"{key}: {message}", key)


def from_dict(data):
    """Validate a nested mapping (as parsed from TOML) into a :class:`ScenarioConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a table of sections")
    for sec in data:
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]", sec)
        if not isinstance(data[sec], dict):
            raise ConfigError(f"[{sec}] must be a section", sec)
        for key in data[sec]:
            if key not in SECTIONS[sec]:
                raise ConfigError(f"unknown key {sec}.{key}", f"{sec}.{key}")
    vals = {sec: {k: _coerce(sec, k, v) for k, v in data.get(sec, {}).items()} for sec in SECTIONS}

    for sec in ("fields", "f0"):
        _check("family" in vals[sec], f"{sec}.family", "required key is missing")
    _check(vals["fields"]["family"] in FIELD_CODES, "fields.family",
           f"must be one of {sorted(FIELD_CODES)}")
    _check(vals["f0"]["family"] in F0_FAMILIES, "f0.family", f"must be one of {list(F0_FAMILIES)}")
    try:
        fields = FieldConfig(**vals["fields"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"fields: {exc}", "fields") from None
    f0_args = dict(vals["f0"])
    if "k" in f0_args:
        f0_args["k"] = int(f0_args["k"])
    try:
        f0 = InitialDistribution(**f0_args)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"f0: {exc}", "f0") from None

    sc = vals["scenario"]
    T = sc.get("T", 0.5)
    _check(math.isfinite(T) and T > 0, "scenario.T", "must be positive and finite")
    eps = sc.get("epsilon_list", (0.2, 0.1, 0.05, 0.025))
    _check(all(e > 0 and math.isfinite(e) for e in eps), "scenario.epsilon_list",
           "entries must be positive")
    _check(all(a > b for a, b in zip(eps, eps[1:])), "scenario.epsilon_list",
           "must be strictly decreasing")
    exp = sc.get("experiment", "two_scale_convergence")
    _check(exp in EXPERIMENTS, "scenario.experiment", f"must be one of {list(EXPERIMENTS)}")
    seed = sc.get("seed", 42)
    _check(seed >= 0, "scenario.seed", "must be nonnegative")

    sampling = SamplingSpec(**vals["sampling"])
    _check(sampling.cloud in CLOUD_TAGS, "sampling.cloud", f"must be one of {list(CLOUD_TAGS)}")
    for key in ("cloud_size", "sub_cloud_size"):
        n = getattr(sampling, key)
        _check(_is_pow2(n) and n >= 16, f"sampling.{key}", "must be a power of two >= 16")
    for key, lo in (("n_alpha", 4), ("n_tau", 4), ("n_sigma", 8)):
        n = getattr(sampling, key)
        _check(n >= lo and n % 2 == 0, f"sampling.{key}", f"must be even and >= {lo}")
    _check(sampling.box_half_width > 0, "sampling.box_half_width", "must be positive")

    try:
        integrator = IntegratorSpec(**vals["integrator"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"integrator: {exc}", "integrator") from None
    try:
        gradient = GradientSpec(**vals["gradient"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"gradient: {exc}", "gradient") from None

    residual = ResidualSpec(**vals["residual"])
    for key in ("fd_x", "fd_t_over_eps", "manufactured_eps"):
        _check(getattr(residual, key) > 0, f"residual.{key}", "must be positive")
    _check(residual.n_t >= 2, "residual.n_t", "must be >= 2")
    _check(_is_pow2(residual.cloud_size) and residual.cloud_size >= 16, "residual.cloud_size",
           "must be a power of two >= 16")
    _check(residual.points >= 1, "residual.points", "must be >= 1")
    _check(0.0 < residual.t0_frac < residual.t1_frac <= 1.0, "residual.t0_frac",
           "need 0 < t0_frac < t1_frac <= 1")
    _check(residual.poly in ("const", "u2", "u2u3", "speed2"), "residual.poly",
           "must be one of const, u2, u2u3, speed2")
    _check(len(residual.deltas) == 2 and 0 < residual.deltas[0] < residual.deltas[1],
           "residual.deltas", "must be two increasing positive weights")

    acceptance = AcceptanceSpec(**vals["acceptance"])
    for f in dc_fields(AcceptanceSpec):
        if f.name != "slope_min":
            _check(getattr(acceptance, f.name) >= 0, f"acceptance.{f.name}", "must be nonnegative")

    return ScenarioConfig(
        fields=fields, f0=f0, name=sc.get("name", "scenario"), experiment=exp, T=T,
        epsilon_list=tuple(eps), seed=seed, output_dir=sc.get("output_dir", "results"),
        sampling=sampling, integrator=integrator, gradient=gradient, residual=residual,
        acceptance=acceptance,
    )


_LINE_RE = re.compile(r"line (\d+)")


def loads(text):
    """Parse and validate scenario text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = _LINE_RE.search(str(exc))
        line = int(m.group(1)) if m else None
        raise ConfigError(f"parse error: {exc}", line=line) from None
    return from_dict(data)


def load_config(path):
    """Load a scenario file.

    Raises
    ------
    FileNotFoundError
        The file does not exist.
    ConfigError
        Syntax error (with line number) or invalid value (with key).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"scenario file not found: {path}")
    return loads(path.read_text(encoding="utf-8"))


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(c) for c in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(config: ScenarioConfig):
    """Canonical TOML text with every key spelled out."""
    lines = []
    for sec, body in config.to_dict().items():
        lines.append(f"[{sec}]")
        for key, val in body.items():
            if isinstance(val, int) and not isinstance(val, bool) and key not in _INT_KEYS:
                val = float(val)
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    return "\n".join(lines)
