"""Scenario files.

A scenario is a YAML mapping with the sections below; every key is
optional except where noted and unknown keys are rejected::

    name: fig1
    fidelity: desk            # desk | paper (paper: dt 1e-4, 1e4 paths)
    model:
      n_banks: 10
      mu_a: 0.1
      mu_l: 0.1
      a0: 0.1                 # required
      l0: 0.06                # required
      default_level: 0.0
      failed_banks: retain    # retain | remove
      sigma_a: 0.8            # number, or {breakpoint: value} schedule
      sigma_l: 0.6
      rho_a: {0: 0.0, 0.2: 0.5, 0.5: 0.0}
      rho_l: 0.0
    ideal:
      phi: 0.1                # constant ideal path for loss-dist runs
      psi: 0.06
    control:
      alpha: 10               # constant cooperation rates (loss-dist)
      gamma: 10
      lambda: [0.1, 0.1, 0.1, 0.1]
    simulation:
      t0: 0.0
      t1: 1.0
      dt: 0.001
      paths: 10000
      seed: 12345
      record_stride: 0
    riccati:
      T1: 1.0
      n_steps: 10000
      at: 0.0                 # schedule time the coefficients are frozen at
    governance:
      S1: 0.01
      S2: 0.05
      horizon: 3.0
      dtau: 0.25
      window: 1.0
      strategy_sets: [1a2a3, 1a2b3]
      n_inner: 2000
      phi0: 0.6
      psi0: 0.4
      riccati_steps: 10000
      baseline: true
      baseline_alpha: 10
      baseline_gamma: 10
      seeds: []               # extra seeds for the multi-seed summary

Schedule breakpoints are right-continuous: ``{0: 0.3, 0.2: 0.8}`` takes the
value 0.8 from ``t = 0.2`` on. Schedules written with left-open intervals
(value ``k`` on ``(b_k, b_{k+1}]``) can be given as::

    sigma_a:
      convention: left-open
      values: {0: 0.3, 0.2: 0.8, 0.5: 0.3}

which the loader converts by moving every breakpoint after the first
``LEFT_OPEN_SHIFT`` years to the right, so the jump instant keeps the
previous value.
"""
from __future__ import annotations

import copy
import re
from dataclasses import dataclass

import yaml

from .core_model import FAILED_BANK_MODES, IdealBankPath, ModelParams, Schedule
from .errors import DomainError, ScenarioError
from .governance import GovernanceScenario, parse_strategy_set
from .lq_control import ControlWeights, CooperationRates

DEFAULTS = {
    "name": "scenario",
    "fidelity": "desk",
    "model": {"n_banks": 10, "mu_a": 0.1, "mu_l": 0.1, "a0": None, "l0": None,
              "default_level": 0.0, "failed_banks": "retain", "sigma_a": None,
              "sigma_l": None, "rho_a": 0.0, "rho_l": 0.0},
    "ideal": {"phi": None, "psi": None},
    "control": {"alpha": 0.0, "gamma": 0.0, "lambda": [0.1, 0.1, 0.1, 0.1]},
    "simulation": {"t0": 0.0, "t1": 1.0, "dt": None, "paths": None, "seed": 12345,
                   "record_stride": 0},
    "riccati": {"T1": 1.0, "n_steps": 10000, "at": 0.0},
    "governance": {"S1": 0.01, "S2": 0.05, "horizon": 3.0, "dtau": 0.25, "window": 1.0,
                   "strategy_sets": ["1a2a3"], "n_inner": None, "phi0": None, "psi0": None,
                   "riccati_steps": 10000, "baseline": True, "baseline_alpha": 10.0,
                   "baseline_gamma": 10.0, "seeds": []},
}

class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-4`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9][0-9_]*)[eE][-+]?[0-9]+$"),
    list("-+0123456789."))


def _yaml_load(text):
    return yaml.load(text, Loader=_Loader)


LEFT_OPEN_SHIFT = 1e-9
CONVENTIONS = ("right-continuous", "left-open")

FIDELITY = {
    "desk": {"dt": 1e-3, "paths": 10_000, "n_inner": 2_000},
    "paper": {"dt": 1e-4, "paths": 10_000, "n_inner": 10_000},
}


def _line_map(text: str, source: str) -> dict:
    """Map dotted key paths to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"{source}:{line}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    out = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = f"{prefix}.{k.value}" if prefix else str(k.value)
                out[key] = k.start_mark.line + 1
                walk(v, key)

    if root is not None:
        walk(root, "")
    return out


@dataclass
class Scenario:
    """Validated scenario with the fully resolved configuration in ``config``."""

    config: dict
    source: str = "<memory>"

    @property
    def name(self) -> str:
        return self.config["name"]

    def params(self) -> ModelParams:
        m = self.config["model"]
        return ModelParams(
            m["n_banks"], m["mu_a"], m["mu_l"],
            _schedule(m["sigma_a"], "volatility"), _schedule(m["sigma_l"], "volatility"),
            _schedule(m["rho_a"], "correlation"), _schedule(m["rho_l"], "correlation"),
            m["a0"], m["l0"], m["default_level"], m["failed_banks"])

    def ideal(self) -> IdealBankPath:
        i, s = self.config["ideal"], self.config["simulation"]
        return IdealBankPath.constant(i["phi"], i["psi"], s["t0"], s["t1"])

    def rates(self) -> CooperationRates:
        c, s = self.config["control"], self.config["simulation"]
        return CooperationRates.constant(c["alpha"], c["gamma"], s["t0"], s["t1"])

    def weights(self) -> ControlWeights:
        return ControlWeights(*self.config["control"]["lambda"])

    def governance(self, strategy_set: str, seed: int | None = None) -> GovernanceScenario:
        g, s = self.config["governance"], self.config["simulation"]
        return GovernanceScenario(
            self.params(), self.weights(), g["S1"], g["S2"], g["horizon"], g["dtau"],
            g["window"], strategy_set, g["n_inner"], s["dt"],
            s["seed"] if seed is None else seed, g["phi0"], g["psi0"], g["riccati_steps"],
            g["baseline_alpha"], g["baseline_gamma"])


def _schedule(v, kind):
    if isinstance(v, dict) and "values" in v:
        items = sorted((float(a), float(b)) for a, b in v["values"].items())
        if v.get("convention", "right-continuous") == "left-open":
            items = [items[0]] + [(a + LEFT_OPEN_SHIFT, b) for a, b in items[1:]]
        return Schedule(tuple(a for a, _ in items), tuple(b for _, b in items), kind)
    if isinstance(v, dict):
        return Schedule.from_mapping(v, kind)
    return Schedule.constant(float(v), kind=kind)


def _merge(base: dict, data: dict, lines: dict, source: str, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in data.items():
        path = f"{prefix}.{k}" if prefix else str(k)
        if k not in base:
            raise ScenarioError(f"{source}:{lines.get(path, '?')}: unknown key '{path}'")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ScenarioError(f"{source}:{lines.get(path, '?')}: '{path}' must be a mapping")
            out[k] = _merge(base[k], v, lines, source, path)
        else:
            out[k] = v
    return out


def _set_override(cfg: dict, assignment: str):
    if "=" not in assignment:
        raise ScenarioError(f"override '{assignment}' must look like section.key=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ScenarioError(f"override: unknown section '{path}'")
        node = node[k]
    if keys[-1] not in node:
        raise ScenarioError(f"override: unknown key '{path}'")
    try:
        node[keys[-1]] = _yaml_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"override '{assignment}': {exc}") from None


def _num(cfg, path, lines, source, *, integer=False, positive=False, nonneg=False,
         allow_none=False):
    node = cfg
    for k in path.split("."):
        node = node[k]
    where = f"{source}:{lines.get(path, '?')}: '{path}'"
    if node is None:
        if allow_none:
            return
        raise ScenarioError(f"{where} is required")
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ScenarioError(f"{where} must be a number, got {node!r}")
    if integer and int(node) != node:
        raise ScenarioError(f"{where} must be an integer, got {node!r}")
    if positive and not node > 0:
        raise ScenarioError(f"{where} must be positive, got {node!r}")
    if nonneg and not node >= 0:
        raise ScenarioError(f"{where} must be nonnegative, got {node!r}")


def _check_schedule(cfg, path, lines, source):
    sec, key = path.split(".")
    v = cfg[sec][key]
    where = f"{source}:{lines.get(path, '?')}: '{path}'"
    if v is None:
        raise ScenarioError(f"{where} is required")
    if isinstance(v, dict) and ("values" in v or "convention" in v):
        extra = set(v) - {"values", "convention"}
        if extra:
            raise ScenarioError(f"{where} has unknown schedule keys {sorted(extra)}")
        if v.get("convention", "right-continuous") not in CONVENTIONS:
            raise ScenarioError(f"{where} convention must be one of {CONVENTIONS}")
        if not isinstance(v.get("values"), dict):
            raise ScenarioError(f"{where} needs a 'values' breakpoint mapping")
        v = v["values"]
    if isinstance(v, dict):
        if not v:
            raise ScenarioError(f"{where} schedule is empty")
        for bk, bv in v.items():
            if isinstance(bk, bool) or not isinstance(bk, (int, float)) \
                    or isinstance(bv, bool) or not isinstance(bv, (int, float)):
                raise ScenarioError(f"{where} schedule entries must be numbers: {bk!r}: {bv!r}")
    elif isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where} must be a number or a breakpoint mapping")


def resolve(data: dict | None, *, source: str = "<memory>", lines: dict | None = None,
            overrides=(), seed: int | None = None, paths: int | None = None,
            dt: float | None = None) -> Scenario:
    """Merge defaults, file contents, fidelity presets and overrides; validate."""
    lines = lines or {}
    data = data or {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    cfg = _merge(DEFAULTS, data, lines, source)
    for o in overrides:
        _set_override(cfg, o)
    fid = cfg["fidelity"]
    if fid not in FIDELITY:
        raise ScenarioError(f"{source}:{lines.get('fidelity', '?')}: fidelity must be one of "
                            f"{sorted(FIDELITY)}, got {fid!r}")
    preset = FIDELITY[fid]
    sim, gov, mod, ide = cfg["simulation"], cfg["governance"], cfg["model"], cfg["ideal"]
    if seed is not None:
        sim["seed"] = seed
    if paths is not None:
        sim["paths"] = paths
    if dt is not None:
        sim["dt"] = dt
    for k in ("dt", "paths"):
        if sim[k] is None:
            sim[k] = preset[k]
    if gov["n_inner"] is None:
        gov["n_inner"] = preset["n_inner"]
    if ide["phi"] is None:
        ide["phi"] = mod["a0"]
    if ide["psi"] is None:
        ide["psi"] = mod["l0"]
    if gov["phi0"] is None:
        gov["phi0"] = mod["a0"]
    if gov["psi0"] is None:
        gov["psi0"] = mod["l0"]

    for p in ("model.n_banks",):
        _num(cfg, p, lines, source, integer=True, positive=True)
    for p in ("model.a0", "model.l0", "simulation.dt", "riccati.T1", "governance.dtau",
              "governance.window", "governance.horizon"):
        _num(cfg, p, lines, source, positive=True)
    for p in ("model.mu_a", "model.mu_l", "simulation.t0", "simulation.t1", "ideal.phi",
              "ideal.psi", "control.alpha", "control.gamma", "governance.S1", "governance.S2",
              "governance.phi0", "governance.psi0", "governance.baseline_alpha",
              "governance.baseline_gamma", "riccati.at"):
        _num(cfg, p, lines, source)
    for p in ("model.default_level",):
        _num(cfg, p, lines, source, nonneg=True)
    for p in ("simulation.paths", "simulation.seed", "simulation.record_stride",
              "riccati.n_steps", "governance.n_inner", "governance.riccati_steps"):
        _num(cfg, p, lines, source, integer=True, nonneg=True)
    for p in ("model.sigma_a", "model.sigma_l", "model.rho_a", "model.rho_l"):
        _check_schedule(cfg, p, lines, source)
    if mod["failed_banks"] not in FAILED_BANK_MODES:
        raise ScenarioError(f"{source}:{lines.get('model.failed_banks', '?')}: "
                            f"'model.failed_banks' must be one of {FAILED_BANK_MODES}")
    lam = cfg["control"]["lambda"]
    if not (isinstance(lam, list) and len(lam) == 4
            and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in lam)):
        raise ScenarioError(f"{source}:{lines.get('control.lambda', '?')}: "
                            "'control.lambda' must be a list of four numbers")
    sets = gov["strategy_sets"]
    if isinstance(sets, str):
        sets = [sets]
    try:
        gov["strategy_sets"] = [parse_strategy_set(s)[0] for s in sets]
    except DomainError as exc:
        raise ScenarioError(f"{source}:{lines.get('governance.strategy_sets', '?')}: {exc}") from None
    if not isinstance(gov["seeds"], list) or not all(isinstance(s, int) for s in gov["seeds"]):
        raise ScenarioError(f"{source}:{lines.get('governance.seeds', '?')}: "
                            "'governance.seeds' must be a list of integers")
    if not isinstance(gov["baseline"], bool):
        raise ScenarioError(f"{source}:{lines.get('governance.baseline', '?')}: "
                            "'governance.baseline' must be true or false")
    # normalize numbers so the echoed configuration is stable
    for k in ("sigma_a", "sigma_l", "rho_a", "rho_l"):
        v = mod[k]
        if isinstance(v, dict) and "values" in v:
            mod[k] = {"convention": v.get("convention", "right-continuous"),
                      "values": {float(a): float(b) for a, b in sorted(v["values"].items())}}
        elif isinstance(v, dict):
            mod[k] = {float(a): float(b) for a, b in sorted(v.items())}
    sc = Scenario(cfg, source)
    try:
        sc.params()
        sc.weights()
    except DomainError as exc:
        raise ScenarioError(f"{source}: inadmissible model: {exc}") from None
    return sc


def load(path, **kw) -> Scenario:
    """Read and validate a scenario file (see module docstring for keys)."""
    source = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"{source}: cannot read scenario: {exc.strerror}") from None
    lines = _line_map(text, source)
    try:
        data = _yaml_load(text)
    except yaml.YAMLError as exc:  # pragma: no cover - compose already parsed it
        raise ScenarioError(f"{source}: invalid YAML: {exc}") from None
    return resolve(data, source=source, lines=lines, **kw)
