"""Scenario files: versioned TOML describing one run.

Schema (version 1)::

    schema_version = 1
    kind = "integrate"          # integrate | classify | verify | scan | corpus
    preset = "thomas_fermi"     # optional; fills [equation] and [problem]
    ic_grid = [[1.0, 0.0]]      # scan (and optional extra ICs for verify)

    [equation]
    order = 2
    lambda = 1.5
    [equation.phi]
    tag = "power"               # power | exp_root | exp_quadratic | oscillating_mix | bounded_oscillation
    coefficient = 1.0
    sigma = -0.5

    [problem]
    t0 = 1.0
    init = [144.0, -432.0]
    t_end = 100.0

    [controls]                  # rtol, atol, max_step, min_step, blowup_threshold, method
    [classifier]                # ClassifierConfig field overrides
    [input]                     # csv = "path", derivative = 0
    [output]                    # path = "report.json", format = "json" | "csv"

Validation collects every problem with its field path before failing.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli
import tomli_w

from .asymptotics import ClassifierConfig
from .equations import PHI_TAGS, PhiSpec
from .errors import ConfigurationError, EFLabError

SCHEMA_VERSION = 1
KINDS = ("integrate", "classify", "verify", "scan", "corpus")
FORMATS = ("json", "csv")
METHODS = ("auto", "direct", "log_time")

PHI_PARAMS = {
    "power": {"coefficient": float, "sigma": float},
    "exp_root": {"sign": int, "horizon": float},
    "exp_quadratic": {"sign": int, "horizon": float},
    "oscillating_mix": {"horizon": float},
    "bounded_oscillation": {},
}

PRESETS = {
    "thomas_fermi": {
        "equation": {"order": 2, "lambda": 1.5, "phi": {"tag": "power", "coefficient": 1.0, "sigma": -0.5}},
        "problem": {"t0": 1.0, "init": [144.0, -432.0], "t_end": 100.0},
    },
    "cubic_oscillator": {
        "equation": {"order": 2, "lambda": 3.0, "phi": {"tag": "power", "coefficient": -1.0, "sigma": 0.0}},
        "problem": {"t0": 0.0, "init": [1.0, 0.0], "t_end": 100.0},
    },
    "riccati": {
        "equation": {"order": 1, "lambda": 2.0, "phi": {"tag": "power", "coefficient": 1.0, "sigma": 0.0}},
        "problem": {"t0": 0.0, "init": [1.0], "t_end": 2.0},
    },
}


class ScenarioError(ConfigurationError):
    """Every schema violation found in one scenario."""

    def __init__(self, problems: list[str], source: str = ""):
        self.problems = list(problems)
        head = f"{source}: " if source else ""
        super().__init__(head + "; ".join(self.problems))


@dataclass(frozen=True)
class EquationConfig:
    order: int
    lam: float
    phi_tag: str
    phi_params: dict = field(default_factory=dict)

    def phi(self) -> PhiSpec:
        return PhiSpec.from_tag(self.phi_tag, **self.phi_params)

    def build(self):
        from .equations import EFEquation
        return EFEquation(self.order, self.phi(), self.lam)


@dataclass(frozen=True)
class ProblemConfig:
    t0: float
    t_end: float
    init: tuple | None = None


@dataclass(frozen=True)
class ControlsConfig:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float | None = None
    min_step: float | None = None
    blowup_threshold: float = 1e12
    method: str = "auto"


@dataclass(frozen=True)
class InputConfig:
    csv: str | None = None
    derivative: int = 0


@dataclass(frozen=True)
class OutputConfig:
    path: str | None = None
    format: str = "json"


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str
    schema_version: int = SCHEMA_VERSION
    preset: str | None = None
    equation: EquationConfig | None = None
    problem: ProblemConfig | None = None
    controls: ControlsConfig = field(default_factory=ControlsConfig)
    classifier: dict = field(default_factory=dict)
    ic_grid: tuple | None = None
    input: InputConfig = field(default_factory=InputConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(**self.classifier)


# --- parsing ------------------------------------------------------------------


class _Collector:
    def __init__(self):
        self.problems: list[str] = []

    def add(self, path: str, msg: str):
        self.problems.append(f"{path}: {msg}")

    def number(self, table: dict, key: str, path: str, required=False, default=None, kind=float):
        if key not in table:
            if required:
                self.add(f"{path}.{key}" if path else key, "missing required field")
            return default
        v = table[key]
        where = f"{path}.{key}" if path else key
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.add(where, f"expected a number, got {type(v).__name__}")
            return default
        if not math.isfinite(v):
            self.add(where, "must be finite")
            return default
        if kind is int:
            if int(v) != v:
                self.add(where, "expected an integer")
                return default
            return int(v)
        return float(v)

    def text(self, table: dict, key: str, path: str, choices=None, default=None):
        if key not in table:
            return default
        v = table[key]
        where = f"{path}.{key}" if path else key
        if not isinstance(v, str):
            self.add(where, f"expected a string, got {type(v).__name__}")
            return default
        if choices is not None and v not in choices:
            self.add(where, f"unknown value {v!r}; expected one of {', '.join(choices)}")
            return default
        return v

    def vector(self, v, where: str):
        if not isinstance(v, list):
            self.add(where, "expected an array of numbers")
            return None
        out = []
        for k, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                self.add(f"{where}[{k}]", "expected a number")
                return None
            if not math.isfinite(x):
                self.add(f"{where}[{k}]", "must be finite")
                return None
            out.append(float(x))
        return tuple(out)

    def unknown(self, table: dict, allowed, path: str):
        for key in table:
            if key not in allowed:
                self.add(f"{path}.{key}" if path else key, "unknown field")


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if k == "phi" and isinstance(v, dict) and isinstance(out.get(k), dict) \
                and v.get("tag", out[k].get("tag")) != out[k].get("tag"):
            out[k] = v  # a different phi family shares no parameters
        elif isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_equation(raw, c: _Collector) -> EquationConfig | None:
    if not isinstance(raw, dict):
        c.add("equation", "expected a table")
        return None
    c.unknown(raw, ("order", "lambda", "phi"), "equation")
    order = c.number(raw, "order", "equation", required=True, kind=int)
    lam = c.number(raw, "lambda", "equation", required=True)
    if order is not None and order < 1:
        c.add("equation.order", "must be a positive integer")
        order = None
    if lam is not None and not lam > 0:
        c.add("equation.lambda", "must be positive")
        lam = None
    phi = raw.get("phi")
    if not isinstance(phi, dict):
        c.add("equation.phi", "missing required table" if phi is None else "expected a table")
        return None
    tag = phi.get("tag")
    if tag is None:
        c.add("equation.phi.tag", "missing required field")
        return None
    if tag not in PHI_TAGS:
        c.add("equation.phi.tag", f"unknown phi tag {tag!r}; expected one of {', '.join(PHI_TAGS)}")
        return None
    spec = PHI_PARAMS[tag]
    c.unknown({k: v for k, v in phi.items() if k != "tag"}, spec, "equation.phi")
    params = {}
    for key, kind in spec.items():
        v = c.number(phi, key, "equation.phi", kind=kind)
        if v is not None:
            params[key] = v
    if order is None or lam is None:
        return None
    try:
        PhiSpec.from_tag(tag, **params)
    except EFLabError as exc:
        c.add("equation.phi", str(exc))
        return None
    return EquationConfig(order, lam, tag, dict(sorted(params.items())))


def _parse_problem(raw, c: _Collector) -> ProblemConfig | None:
    if not isinstance(raw, dict):
        c.add("problem", "expected a table")
        return None
    c.unknown(raw, ("t0", "t_end", "init"), "problem")
    t0 = c.number(raw, "t0", "problem", default=1.0)
    t_end = c.number(raw, "t_end", "problem", required=True)
    init = c.vector(raw["init"], "problem.init") if "init" in raw else None
    if t0 is None or t_end is None:
        return None
    if not t_end > t0:
        c.add("problem.t_end", f"must exceed t0 = {t0!r}")
    return ProblemConfig(t0, t_end, init)


def _parse_controls(raw, c: _Collector) -> ControlsConfig:
    if not isinstance(raw, dict):
        c.add("controls", "expected a table")
        return ControlsConfig()
    c.unknown(raw, ("rtol", "atol", "max_step", "min_step", "blowup_threshold", "method"), "controls")
    d = ControlsConfig()
    vals = {}
    for key in ("rtol", "atol", "max_step", "min_step", "blowup_threshold"):
        v = c.number(raw, key, "controls", default=getattr(d, key))
        if v is not None and not v > 0:
            c.add(f"controls.{key}", "must be positive")
            v = getattr(d, key)
        vals[key] = v
    vals["method"] = c.text(raw, "method", "controls", METHODS, d.method)
    return ControlsConfig(**vals)


def _parse_classifier(raw, c: _Collector) -> dict:
    if not isinstance(raw, dict):
        c.add("classifier", "expected a table")
        return {}
    kinds = {f.name: (int if f.type in ("int", int) else float) for f in dataclasses.fields(ClassifierConfig)}
    c.unknown(raw, kinds, "classifier")
    out = {}
    for key, kind in kinds.items():
        v = c.number(raw, key, "classifier", kind=kind)
        if v is not None:
            out[key] = v
    try:
        ClassifierConfig(**out)
    except ConfigurationError as exc:
        c.add("classifier", str(exc))
    return dict(sorted(out.items()))


def _validate(cfg: ScenarioConfig, c: _Collector):
    eq, pr = cfg.equation, cfg.problem
    needs_eq = cfg.kind in ("integrate", "verify", "scan") or (cfg.kind == "classify" and cfg.input.csv is None)
    if needs_eq and eq is None and not any(p.startswith("equation") for p in c.problems):
        c.add("equation", f"required for kind = {cfg.kind!r}")
    if cfg.kind in ("integrate", "verify", "scan") and pr is None and not any(
            p.startswith("problem") for p in c.problems):
        c.add("problem", f"required for kind = {cfg.kind!r}")
    if cfg.kind in ("integrate", "verify") and pr is not None and pr.init is None:
        c.add("problem.init", f"required for kind = {cfg.kind!r}")
    if cfg.kind == "scan" and cfg.ic_grid is None:
        c.add("ic_grid", "required for kind = 'scan'")
    if cfg.kind == "verify" and eq is not None and not eq.lam > 1:
        c.add("equation.lambda", "superlinear (lambda > 1) required for verify")
    if eq is not None and pr is not None:
        if pr.init is not None and len(pr.init) != eq.order:
            c.add("problem.init", f"needs {eq.order} entries, got {len(pr.init)}")
        phi = eq.phi()
        if (phi.singular_at_origin and pr.t0 <= 0) or not phi.defined_at(pr.t0):
            c.add("problem.t0", f"singular phi at t0 = {pr.t0!r} ({phi.label})")
    if eq is not None and cfg.ic_grid:
        for k, ic in enumerate(cfg.ic_grid):
            if len(ic) != eq.order:
                c.add(f"ic_grid[{k}]", f"needs {eq.order} entries, got {len(ic)}")
    if cfg.input.derivative < 0 or (eq is not None and cfg.input.derivative >= eq.order):
        c.add("input.derivative", "must lie in [0, order - 1]")


def parse_scenario_dict(raw: dict, source: str = "") -> ScenarioConfig:
    c = _Collector()
    c.unknown(raw, ("schema_version", "kind", "preset", "equation", "problem", "controls",
                    "classifier", "ic_grid", "input", "output"), "")
    version = c.number(raw, "schema_version", "", required=True, kind=int)
    if version is not None and version != SCHEMA_VERSION:
        c.add("schema_version", f"unsupported version {version}; this tool reads {SCHEMA_VERSION}")
    kind = c.text(raw, "kind", "", KINDS)
    if "kind" not in raw:
        c.add("kind", "missing required field")
    preset = c.text(raw, "preset", "", tuple(PRESETS))

    base = PRESETS.get(preset, {}) if preset else {}
    eq_raw = _merge(base.get("equation", {}), raw.get("equation", {})) \
        if isinstance(raw.get("equation", {}), dict) else raw["equation"]
    pr_raw = _merge(base.get("problem", {}), raw.get("problem", {})) \
        if isinstance(raw.get("problem", {}), dict) else raw["problem"]
    equation = _parse_equation(eq_raw, c) if eq_raw else None
    problem = _parse_problem(pr_raw, c) if pr_raw else None
    controls = _parse_controls(raw.get("controls", {}), c)
    classifier = _parse_classifier(raw.get("classifier", {}), c)

    ic_grid = None
    if "ic_grid" in raw:
        if not isinstance(raw["ic_grid"], list):
            c.add("ic_grid", "expected an array of arrays")
        else:
            vecs = [c.vector(v, f"ic_grid[{k}]") for k, v in enumerate(raw["ic_grid"])]
            if all(v is not None for v in vecs):
                ic_grid = tuple(vecs)

    inp = raw.get("input", {})
    if not isinstance(inp, dict):
        c.add("input", "expected a table")
        inp = {}
    c.unknown(inp, ("csv", "derivative"), "input")
    input_cfg = InputConfig(c.text(inp, "csv", "input"), c.number(inp, "derivative", "input", default=0, kind=int))

    out = raw.get("output", {})
    if not isinstance(out, dict):
        c.add("output", "expected a table")
        out = {}
    c.unknown(out, ("path", "format"), "output")
    output_cfg = OutputConfig(c.text(out, "path", "output"), c.text(out, "format", "output", FORMATS, "json"))

    if kind is None:
        raise ScenarioError(c.problems, source)
    cfg = ScenarioConfig(kind=kind, schema_version=SCHEMA_VERSION, preset=preset, equation=equation,
                         problem=problem, controls=controls, classifier=classifier, ic_grid=ic_grid,
                         input=input_cfg, output=output_cfg)
    _validate(cfg, c)
    if c.problems:
        raise ScenarioError(c.problems, source)
    return cfg


def parse_scenario_text(text: str, source: str = "") -> ScenarioConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError([f"<toml>: {exc}"], source) from None
    return parse_scenario_dict(raw, source)


def parse_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read scenario ({exc.strerror})") from None
    return parse_scenario_text(text, str(path))


# --- emitting -----------------------------------------------------------------


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Plain-data echo of a config; ``parse_scenario_dict`` inverts it."""
    out = {"schema_version": cfg.schema_version, "kind": cfg.kind}
    if cfg.preset:
        out["preset"] = cfg.preset
    if cfg.ic_grid is not None:
        out["ic_grid"] = [list(v) for v in cfg.ic_grid]
    if cfg.equation is not None:
        e = cfg.equation
        out["equation"] = {"order": e.order, "lambda": e.lam, "phi": {"tag": e.phi_tag, **e.phi_params}}
    if cfg.problem is not None:
        p = cfg.problem
        prob = {"t0": p.t0, "t_end": p.t_end}
        if p.init is not None:
            prob["init"] = list(p.init)
        out["problem"] = prob
    out["controls"] = _drop_none(dataclasses.asdict(cfg.controls))
    if cfg.classifier:
        out["classifier"] = dict(cfg.classifier)
    out["input"] = _drop_none(dataclasses.asdict(cfg.input))
    out["output"] = _drop_none(dataclasses.asdict(cfg.output))
    return out


def scenario_to_toml(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(scenario_to_dict(cfg))


def with_overrides(cfg: ScenarioConfig, rtol=None, atol=None, t_end=None) -> ScenarioConfig:
    """Apply command-line overrides and re-validate."""
    controls = cfg.controls
    if rtol is not None:
        controls = dataclasses.replace(controls, rtol=rtol)
    if atol is not None:
        controls = dataclasses.replace(controls, atol=atol)
    problem = cfg.problem
    if t_end is not None:
        if problem is None:
            raise ScenarioError(["--t-end: scenario has no [problem] section"])
        problem = dataclasses.replace(problem, t_end=t_end)
    updated = dataclasses.replace(cfg, controls=controls, problem=problem)
    return parse_scenario_dict(scenario_to_dict(updated), "command line")


def example_scenarios() -> dict[str, str]:
    """Small scenarios shipped with the tool (also used by the plumbing check)."""
    return {
        "integrate_thomas_fermi": 'schema_version = 1\nkind = "integrate"\npreset = "thomas_fermi"\n',
        "verify_thomas_fermi": 'schema_version = 1\nkind = "verify"\npreset = "thomas_fermi"\n',
        "scan_cubic_oscillator": (
            'schema_version = 1\nkind = "scan"\npreset = "cubic_oscillator"\n'
            'ic_grid = [[1.0, 0.0], [0.0, 1.0], [2.0, 0.0], [-1.0, 0.0], [1.0, 1.0],\n'
            '           [0.0, -2.0], [1.5, -0.5], [-2.0, 1.0], [0.5, 1.0]]\n'
        ),
        "classify_oscillating_mix": (
            'schema_version = 1\nkind = "classify"\n\n[equation]\norder = 1\nlambda = 2.0\n\n'
            '[equation.phi]\ntag = "oscillating_mix"\n\n'
            '[classifier]\nblock_count = 8\ntail_blocks = 4\n'
        ),
        "corpus": 'schema_version = 1\nkind = "corpus"\n',
    }
