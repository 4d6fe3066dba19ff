"""Experiment configs: YAML files with five sections.

::

    problem:            # kind plus the parameters of that kind
      kind: polyak      # polyak | saddle | lagrangian | linear_ttsa | affine
      F_matrix: [[0.5]]
      F_offset: [0.5]
      noise_fast: {kind: additive_gaussian, scale: 0.5}
      noise_slow: {kind: additive_gaussian, scale: 0.5}
    schedule:
      regime: both_one_over_k   # or fast_one_over_k_a (needs a)
      beta: 4
      alpha: auto               # number, or auto
      a: null
      offset: auto              # number, or auto
      min_offset: 100           # relaxed-mode lower bound on the auto offset
      strict: false
    run:
      horizon: 100000
      trials: 1000              # 1 writes a single trajectory
      log_points: 200           # or stride: <int>
      base_seed: 0
      x0: [0.5]
      y0: [0.5]
      backend: auto             # auto | compiled | python | generic
    outputs:
      directory: out
      oracles: [aux_lemma, xstar_lipschitz, noise_variance]
      aux_k_max: 100000
      lipschitz_pairs: 1000
    checks:                     # evaluated by --check
      rate: {series: err_xy, window: [1000, 100000], range: [-1.15, -0.85]}
      bound_domination: false
      noise_slope: [-1.15, -0.85]
      final_err_xy: 1.0e-6
      constraint_residual: 1.0e-4

Per-kind parameters:

* ``polyak``: ``F_matrix``, ``F_offset``, ``noise_fast``, ``noise_slow``
* ``saddle``: ``P``, ``R``, ``C``, ``p``, ``r``, ``zeta``, ``noise_fast``, ``noise_slow``
* ``lagrangian``: ``Q``, ``q``, ``A``, ``b``, ``zeta``, ``noise_fast``
* ``linear_ttsa``: ``A11``, ``A12``, ``A21``, ``A22``, ``b1``, ``b2``, ``zeta``,
  ``noise_scale``; or ``random: {dim_fast, dim_slow, seed, margin, coupling}``
  in place of the matrices
* ``affine``: ``A``, ``B``, ``c``, ``C``, ``D``, ``e``, ``noise_fast``, ``noise_slow``

Noise entries are ``{kind: zero}``, ``{kind: additive_gaussian, scale: s}``
or ``{kind: multiplicative_affine, scale: c1}``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .core import NOISE_KINDS, NoiseModel, Problem
from .exceptions import ConfigError
from .problems import (LagrangianSpec, LinearTTSASpec, PolyakSpec, SaddleQuadraticSpec, make_affine_problem,
                       make_lagrangian, make_linear_ttsa, make_polyak, make_saddle, random_linear_ttsa_spec)
from .schedules import Regime, Schedule, build_schedule

__all__ = ["ExperimentConfig", "load_config", "parse_config", "ORACLES", "SERIES_NAMES"]

ORACLES = ("aux_lemma", "xstar_lipschitz", "noise_variance")
SERIES_NAMES = ("err_xy", "err_x", "err_z", "normU2")
BACKENDS = ("auto", "compiled", "python", "generic")

_PROBLEM_FIELDS = {
    "polyak": {"matrices": ("F_matrix",), "vectors": ("F_offset",), "noises": ("noise_fast", "noise_slow")},
    "saddle": {"matrices": ("P", "R", "C"), "vectors": ("p", "r"), "noises": ("noise_fast", "noise_slow"),
               "scalars": ("zeta",)},
    "lagrangian": {"matrices": ("Q", "A"), "vectors": ("q", "b"), "noises": ("noise_fast",), "scalars": ("zeta",)},
    "linear_ttsa": {"matrices": ("A11", "A12", "A21", "A22"), "vectors": ("b1", "b2"),
                    "scalars": ("zeta", "noise_scale")},
    "affine": {"matrices": ("A", "B", "C", "D"), "vectors": ("c", "e"), "noises": ("noise_fast", "noise_slow")},
}
_REQUIRED = {
    "polyak": ("F_matrix", "F_offset"),
    "saddle": ("P", "R", "C"),
    "lagrangian": ("Q", "q", "A", "b"),
    "linear_ttsa": ("A11", "A12", "A21", "A22"),
    "affine": ("A", "B", "c", "C", "D", "e"),
}
_RANDOM_FIELDS = {"dim_fast": int, "dim_slow": int, "seed": int, "margin": float, "coupling": float}


def _mapping(obj, path) -> dict:
    if obj is None:
        return {}
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected a mapping, got {type(obj).__name__}")
    return obj


def _unknown(d: dict, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", f"unknown field (allowed: {', '.join(sorted(allowed))})")


def _real(v, path, *, positive=False, nonneg=False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and v <= 0:
        raise ConfigError(path, f"must be > 0, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be >= 0, got {v!r}")
    return v


def _int(v, path, *, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return int(v)


def _vector(v, path) -> list:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a nonempty list of numbers")
    return [_real(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _matrix(v, path) -> list:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [[v]]
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a nonempty list of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(v)]
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(path, "rows have different lengths")
    return rows


def _noise(v, path) -> dict:
    d = _mapping(v, path)
    _unknown(d, ("kind", "scale"), path)
    kind = d.get("kind", "zero")
    if kind not in NOISE_KINDS:
        raise ConfigError(f"{path}.kind", f"must be one of {', '.join(NOISE_KINDS)}; got {kind!r}")
    scale = 0.0 if kind == "zero" else _real(d.get("scale", 0.0), f"{path}.scale", nonneg=True)
    return {"kind": kind, "scale": scale}


def _auto_or_real(v, path, positive=True):
    if v is None or v == "auto":
        return "auto"
    return _real(v, path, positive=positive)


def _range(v, path) -> list:
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(path, "expected [low, high]")
    lo, hi = _real(v[0], f"{path}[0]"), _real(v[1], f"{path}[1]")
    if lo > hi:
        raise ConfigError(path, "low exceeds high")
    return [lo, hi]


def _parse_problem(raw) -> dict:
    d = _mapping(raw, "problem")
    kind = d.get("kind")
    if kind not in _PROBLEM_FIELDS:
        raise ConfigError("problem.kind", f"must be one of {', '.join(_PROBLEM_FIELDS)}; got {kind!r}")
    spec = _PROBLEM_FIELDS[kind]
    allowed = {"kind", *spec.get("matrices", ()), *spec.get("vectors", ()), *spec.get("noises", ()),
               *spec.get("scalars", ())}
    if kind == "linear_ttsa":
        allowed.add("random")
    _unknown(d, allowed, "problem")
    out: dict[str, Any] = {"kind": kind}
    if kind == "linear_ttsa" and "random" in d:
        r = _mapping(d["random"], "problem.random")
        _unknown(r, _RANDOM_FIELDS, "problem.random")
        for name in ("dim_fast", "dim_slow", "seed"):
            if name not in r:
                raise ConfigError(f"problem.random.{name}", "required")
        rnd = {
            "dim_fast": _int(r["dim_fast"], "problem.random.dim_fast", minimum=1),
            "dim_slow": _int(r["dim_slow"], "problem.random.dim_slow", minimum=1),
            "seed": _int(r["seed"], "problem.random.seed", minimum=0),
            "margin": _real(r.get("margin", 0.5), "problem.random.margin", positive=True),
            "coupling": _real(r.get("coupling", 0.3), "problem.random.coupling", nonneg=True),
        }
        out["random"] = rnd
        required = ()
    else:
        required = _REQUIRED[kind]
    for name in required:
        if name not in d:
            raise ConfigError(f"problem.{name}", f"required for kind {kind}")
    for name in spec.get("matrices", ()):
        if name in d:
            out[name] = _matrix(d[name], f"problem.{name}")
    for name in spec.get("vectors", ()):
        if name in d:
            out[name] = _vector(d[name], f"problem.{name}")
    for name in spec.get("noises", ()):
        out[name] = _noise(d.get(name), f"problem.{name}")
    if "zeta" in spec.get("scalars", ()):
        out["zeta"] = _auto_or_real(d.get("zeta"), "problem.zeta")
    if "noise_scale" in spec.get("scalars", ()):
        out["noise_scale"] = _real(d.get("noise_scale", 0.0), "problem.noise_scale", nonneg=True)
    return out


def _parse_schedule(raw) -> dict:
    d = _mapping(raw, "schedule")
    _unknown(d, ("regime", "alpha", "beta", "a", "offset", "min_offset", "strict"), "schedule")
    try:
        regime = Regime(d.get("regime")).value
    except ValueError:
        raise ConfigError("schedule.regime",
                          f"must be one of {', '.join(r.value for r in Regime)}; got {d.get('regime')!r}") from None
    if "beta" not in d:
        raise ConfigError("schedule.beta", "required")
    a = d.get("a")
    if regime == Regime.BOTH_ONE_OVER_K.value and a is not None:
        raise ConfigError("schedule.a", "only allowed with regime fast_one_over_k_a")
    if regime == Regime.FAST_ONE_OVER_K_A.value:
        if a is None:
            raise ConfigError("schedule.a", "required with regime fast_one_over_k_a")
        a = _real(a, "schedule.a")
        if not 0.5 < a < 1:
            raise ConfigError("schedule.a", f"must lie in (0.5, 1); got {a!r}")
    strict = d.get("strict", False)
    if not isinstance(strict, bool):
        raise ConfigError("schedule.strict", "expected true or false")
    return {
        "regime": regime,
        "alpha": _auto_or_real(d.get("alpha"), "schedule.alpha"),
        "beta": _real(d["beta"], "schedule.beta", positive=True),
        "a": a,
        "offset": _auto_or_real(d.get("offset"), "schedule.offset"),
        "min_offset": _real(d.get("min_offset", 0.0), "schedule.min_offset", nonneg=True),
        "strict": strict,
    }


def _parse_run(raw) -> dict:
    d = _mapping(raw, "run")
    _unknown(d, ("horizon", "trials", "log_points", "stride", "base_seed", "x0", "y0", "backend"), "run")
    if "horizon" not in d:
        raise ConfigError("run.horizon", "required")
    has_stride = d.get("stride") is not None
    if has_stride and d.get("log_points") is not None:
        raise ConfigError("run.stride", "give either stride or log_points, not both")
    backend = d.get("backend", "auto")
    if backend not in BACKENDS:
        raise ConfigError("run.backend", f"must be one of {', '.join(BACKENDS)}; got {backend!r}")
    return {
        "horizon": _int(d["horizon"], "run.horizon", minimum=1),
        "trials": _int(d.get("trials", 1), "run.trials", minimum=1),
        "log_points": None if has_stride else _int(d.get("log_points") or 200, "run.log_points", minimum=2),
        "stride": _int(d["stride"], "run.stride", minimum=1) if has_stride else None,
        "base_seed": _int(d.get("base_seed", 0), "run.base_seed", minimum=0),
        "x0": _vector(d["x0"], "run.x0") if d.get("x0") is not None else None,
        "y0": _vector(d["y0"], "run.y0") if d.get("y0") is not None else None,
        "backend": backend,
    }


def _parse_outputs(raw) -> dict:
    d = _mapping(raw, "outputs")
    _unknown(d, ("directory", "oracles", "aux_k_max", "lipschitz_pairs", "aux_cells"), "outputs")
    oracles = d.get("oracles", list(ORACLES))
    if not isinstance(oracles, list) or any(o not in ORACLES for o in oracles):
        raise ConfigError("outputs.oracles", f"expected a list drawn from {', '.join(ORACLES)}")
    cells = d.get("aux_cells")
    if cells is not None:
        if not isinstance(cells, list):
            raise ConfigError("outputs.aux_cells", "expected a list of mappings")
        parsed = []
        for i, c in enumerate(cells):
            c = _mapping(c, f"outputs.aux_cells[{i}]")
            _unknown(c, ("epsilon", "q", "p", "beta", "K"), f"outputs.aux_cells[{i}]")
            missing = [k for k in ("epsilon", "q", "p", "beta", "K") if k not in c]
            if missing:
                raise ConfigError(f"outputs.aux_cells[{i}].{missing[0]}", "required")
            parsed.append({k: _real(c[k], f"outputs.aux_cells[{i}].{k}") for k in ("epsilon", "q", "p", "beta", "K")})
        cells = parsed
    directory = d.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("outputs.directory", "expected a nonempty path")
    return {
        "directory": directory,
        "oracles": list(oracles),
        "aux_k_max": _int(d.get("aux_k_max", 100_000), "outputs.aux_k_max", minimum=1),
        "lipschitz_pairs": _int(d.get("lipschitz_pairs", 1000), "outputs.lipschitz_pairs", minimum=1),
        "aux_cells": cells,
    }


def _parse_checks(raw) -> dict:
    d = _mapping(raw, "checks")
    _unknown(d, ("rate", "bound_domination", "noise_slope", "final_err_xy", "constraint_residual"), "checks")
    out: dict[str, Any] = {}
    if d.get("rate") is not None:
        r = _mapping(d["rate"], "checks.rate")
        _unknown(r, ("series", "window", "range"), "checks.rate")
        series = r.get("series", "err_xy")
        if series not in SERIES_NAMES:
            raise ConfigError("checks.rate.series", f"must be one of {', '.join(SERIES_NAMES)}")
        if "range" not in r:
            raise ConfigError("checks.rate.range", "required")
        out["rate"] = {"series": series,
                       "window": _range(r["window"], "checks.rate.window") if r.get("window") is not None else None,
                       "range": _range(r["range"], "checks.rate.range")}
    bd = d.get("bound_domination", False)
    if not isinstance(bd, bool):
        raise ConfigError("checks.bound_domination", "expected true or false")
    out["bound_domination"] = bd
    out["noise_slope"] = _range(d["noise_slope"], "checks.noise_slope") if d.get("noise_slope") is not None else None
    for name in ("final_err_xy", "constraint_residual"):
        out[name] = _real(d[name], f"checks.{name}", positive=True) if d.get(name) is not None else None
    return out


@dataclass
class ExperimentConfig:
    problem: dict
    schedule: dict
    run: dict
    outputs: dict = field(default_factory=lambda: _parse_outputs(None))
    checks: dict = field(default_factory=lambda: _parse_checks(None))

    def to_dict(self) -> dict:
        return copy.deepcopy({"problem": self.problem, "schedule": self.schedule, "run": self.run,
                              "outputs": self.outputs, "checks": self.checks})

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, seed: Optional[int] = None, trials: Optional[int] = None) -> "ExperimentConfig":
        d = self.to_dict()
        if seed is not None:
            d["run"]["base_seed"] = _int(seed, "--seed", minimum=0)
        if trials is not None:
            d["run"]["trials"] = _int(trials, "--trials", minimum=1)
        return parse_config(d)

    def build_problem(self) -> Problem:
        d = self.problem
        kind = d["kind"]
        arr = lambda name: None if d.get(name) is None else np.array(d[name], dtype=float)  # noqa: E731
        noise = lambda name: NoiseModel(d[name]["kind"], d[name]["scale"])  # noqa: E731
        zeta = None if d.get("zeta", "auto") == "auto" else d["zeta"]
        if kind == "polyak":
            return make_polyak(PolyakSpec(arr("F_matrix"), arr("F_offset"), noise("noise_fast"), noise("noise_slow")))
        if kind == "saddle":
            return make_saddle(SaddleQuadraticSpec(arr("P"), arr("R"), arr("C"), arr("p"), arr("r"), zeta,
                                                   noise("noise_fast"), noise("noise_slow")))
        if kind == "lagrangian":
            return make_lagrangian(LagrangianSpec(arr("Q"), arr("q"), arr("A"), arr("b"), zeta, noise("noise_fast")))
        if kind == "linear_ttsa":
            if "random" in d:
                spec = random_linear_ttsa_spec(noise_scale=d["noise_scale"], zeta=zeta, **d["random"])
            else:
                spec = LinearTTSASpec(arr("A11"), arr("A12"), arr("A21"), arr("A22"), arr("b1"), arr("b2"),
                                      zeta, d["noise_scale"])
            return make_linear_ttsa(spec)
        return make_affine_problem(arr("A"), arr("B"), arr("c"), arr("C"), arr("D"), arr("e"),
                                   noise("noise_fast"), noise("noise_slow"))

    def start(self, p: Problem):
        r = self.run
        x0 = np.zeros(p.dim_fast) if r["x0"] is None else np.array(r["x0"], dtype=float)
        y0 = np.zeros(p.dim_slow) if r["y0"] is None else np.array(r["y0"], dtype=float)
        if x0.size != p.dim_fast:
            raise ConfigError("run.x0", f"has length {x0.size}, problem needs {p.dim_fast}")
        if y0.size != p.dim_slow:
            raise ConfigError("run.y0", f"has length {y0.size}, problem needs {p.dim_slow}")
        return x0, y0

    def build_schedule(self, p: Problem) -> Schedule:
        s = self.schedule
        x0, y0 = self.start(p)
        return build_schedule(p, s["regime"], s["beta"],
                              alpha=None if s["alpha"] == "auto" else s["alpha"],
                              a=s["a"], offset=None if s["offset"] == "auto" else s["offset"],
                              strict=s["strict"], x0=x0, y0=y0, min_offset=s["min_offset"])


def parse_config(raw) -> ExperimentConfig:
    d = _mapping(raw, "config")
    _unknown(d, ("problem", "schedule", "run", "outputs", "checks"), "config")
    for sec in ("problem", "schedule", "run"):
        if sec not in d:
            raise ConfigError(sec, "section required")
    return ExperimentConfig(_parse_problem(d["problem"]), _parse_schedule(d["schedule"]), _parse_run(d["run"]),
                            _parse_outputs(d.get("outputs")), _parse_checks(d.get("checks")))


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"not valid YAML: {exc}") from None
    return parse_config(raw)
