"""Running scenarios and rendering their reports.

JSON reports keep keys in a fixed order and print floats with 17
significant digits; infinite exponents appear as the strings "+inf" and
"-inf".  Wall time is left out unless asked for, so identical scenarios
give byte-identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    ClassifierConfig,
    GrowthClass,
    SampleSeries,
    classify_growth,
    read_series_csv,
)
from .errors import ConfigurationError, EFLabError
from .odecore import IntegrationControls, ReachedEnd, StepFailure, integrate
from .scenario import ScenarioConfig, scenario_to_dict
from .theorems import (
    TheoremVerdict,
    classify_longterm,
    classify_trajectory,
    lemma2_from_scan,
    longterm_to_dict,
    scan,
    theorem3_bound,
    theorem3_from_trajectory,
)

TOOL = "eflab"
BOUND_SLACK = 0.1


@dataclass
class RunReport:
    kind: str
    scenario: dict
    results: list
    passed: bool
    notes: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    csv_header: list = field(default_factory=list)
    csv_rows: list = field(default_factory=list)
    wall_time: float | None = None

    def to_dict(self) -> dict:
        out = {
            "tool": TOOL,
            "version": __version__,
            "kind": self.kind,
            "passed": self.passed,
            "scenario": self.scenario,
            "summary": self.summary,
            "results": self.results,
            "notes": self.notes,
        }
        if self.wall_time is not None:
            out["wall_time_s"] = self.wall_time
        return out


# --- rendering ----------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"+inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _render(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for k, (key, val) in enumerate(obj.items()):
            out.append(pad + json.dumps(str(key), ensure_ascii=False) + ": ")
            _render(val, indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            out.append("[]")
            return
        out.append("[\n")
        for k, val in enumerate(items):
            out.append(pad)
            _render(val, indent, level + 1, out)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(obj, indent: int = 2) -> str:
    out: list[str] = []
    _render(obj, indent, 0, out)
    return "".join(out) + "\n"


def render_json(report: RunReport) -> str:
    return to_json(report.to_dict())


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v)).strip('"')
    return str(v)


def render_csv(report: RunReport) -> str:
    if not report.csv_header:
        raise ConfigurationError(f"kind {report.kind!r} has no CSV form")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(report.csv_header)
    for row in report.csv_rows:
        w.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def emit_report(report: RunReport, fmt: str = "json", path: str | Path | None = None) -> str:
    """Render and, when ``path`` is given, write the report; returns the text."""
    if fmt not in ("json", "csv"):
        raise ConfigurationError(f"unknown format {fmt!r}")
    text = render_json(report) if fmt == "json" else render_csv(report)
    if path is not None:
        path = Path(path)
        try:
            with path.open("w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"{path}: cannot write report ({exc.strerror})") from exc
    return text


# --- running ------------------------------------------------------------------


def _controls(cfg: ScenarioConfig) -> IntegrationControls:
    c = cfg.controls
    return IntegrationControls(t_end=cfg.problem.t_end, rtol=c.rtol, atol=c.atol, max_step=c.max_step,
                               blowup_threshold=c.blowup_threshold, min_step=c.min_step)


def _integrate(cfg: ScenarioConfig, init=None, label=""):
    eq = cfg.equation.build()
    problem = eq.problem(cfg.problem.t0, init if init is not None else cfg.problem.init,
                         label or eq.describe())
    return integrate(problem, _controls(cfg), cfg.controls.method)


def _state_header(order: int) -> list[str]:
    return ["t"] + [f"y{k}" for k in range(order)]


def _run_integrate(cfg: ScenarioConfig) -> RunReport:
    traj = _integrate(cfg)
    item = {"item": "trajectory", **traj.summary(), "longterm": longterm_to_dict(classify_longterm(traj))}
    rows = [[t, *s] for t, s in zip(traj.times, traj.states)]
    return RunReport("integrate", scenario_to_dict(cfg), [item],
                     passed=not isinstance(traj.status, StepFailure),
                     csv_header=_state_header(traj.order), csv_rows=rows)


def _classify_series(cfg: ScenarioConfig, config: ClassifierConfig):
    notes = []
    if cfg.input.csv is not None:
        return read_series_csv(cfg.input.csv), {"source": "csv", "path": cfg.input.csv}, notes
    if cfg.problem is not None and cfg.problem.init is not None:
        traj = _integrate(cfg)
        if not isinstance(traj.status, ReachedEnd):
            raise EFLabError(f"integration did not reach t_end: {traj.status!r}")
        rep_grid = classify_trajectory(traj, config, cfg.input.derivative)
        return rep_grid, {"source": "trajectory", "derivative": cfg.input.derivative}, notes
    phi = cfg.equation.phi()
    src = {"source": "phi", "phi": phi.label, "known_pi": phi.known_pi, "known_xi": phi.known_xi}
    if phi.tag == "oscillating_mix":
        notes.append("t + exp(t) cos t: only the upper exponent +inf is asserted; the function "
                     "changes sign in every period, so the lower exponent is -inf by definition "
                     "and is flagged, not checked")
    t_end = cfg.problem.t_end if cfg.problem is not None else None
    return phi.sample(t_end, config), src, notes


def _run_classify(cfg: ScenarioConfig) -> RunReport:
    config = cfg.classifier_config()
    try:
        series, src, notes = _classify_series(cfg, config)
        if isinstance(series, SampleSeries):
            report = classify_growth(series, config)
            rows = [[t, v] for t, v in zip(series.times, series.values)]
        else:
            report, rows = series, []
        item = {"item": "growth", **src, **report.to_dict()}
        return RunReport("classify", scenario_to_dict(cfg), [item], True, notes,
                         csv_header=["t", "value"] if rows else [], csv_rows=rows)
    except (EFLabError, OSError) as exc:
        item = {"item": "growth", "error": f"{type(exc).__name__}: {exc}"}
        return RunReport("classify", scenario_to_dict(cfg), [item], False)


def _bound_verdict(cfg: ScenarioConfig, growth) -> TheoremVerdict:
    eq = cfg.equation
    if eq.phi_tag != "power" or not eq.phi_params.get("sigma", 0.0) > -eq.order:
        return TheoremVerdict("T3.bound", "not_applicable", details="phi is not a power with sigma > -n")
    bound = theorem3_bound(eq.order, eq.phi_params.get("sigma", 0.0), eq.lam)
    if growth is None:
        return TheoremVerdict("T3.bound", "not_applicable", details="no growth report")
    if not growth.confident:
        return TheoremVerdict("T3.bound", "undetermined", details="growth report not confident")
    if growth.growth_class is GrowthClass.S2 or growth.pi_hat == -math.inf:
        return TheoremVerdict("T3.bound", "holds", math.inf, f"pi_hat = -inf <= {bound:.6g}")
    if growth.growth_class is GrowthClass.S1:
        return TheoremVerdict("T3.bound", "fails", -math.inf, "solution classifies S1")
    margin = bound - growth.pi_hat
    return TheoremVerdict("T3.bound", "holds" if margin >= -BOUND_SLACK else "fails", margin,
                          f"pi_hat={growth.pi_hat:.6g}, bound={bound:.6g}")


def _verify_one(cfg: ScenarioConfig, init) -> dict:
    traj = _integrate(cfg, init)
    verdicts = []
    growth = None
    if isinstance(traj.status, ReachedEnd):
        growth = classify_trajectory(traj, cfg.classifier_config())
        s1 = growth.growth_class is GrowthClass.S1 and growth.confident
        verdicts.append(TheoremVerdict("L2", "fails" if s1 else "holds",
                                       details=f"classified {growth.growth_class.value}"))
    else:
        verdicts.append(TheoremVerdict("L2", "not_applicable",
                                       details="no solution on the whole window"))
    t3 = theorem3_from_trajectory(traj)
    if not t3.applicable:
        verdicts.append(TheoremVerdict("T3.vanishing", "not_applicable", details="did not reach t_end"))
    elif t3.holds:
        verdicts.append(TheoremVerdict("T3.vanishing", "holds", details=f"i = {t3.smallest_index}"))
    else:
        # a missing trend in a finite window is not evidence against the claim
        verdicts.append(TheoremVerdict("T3.vanishing", "undetermined",
                                       details="no vanishing trend found for the top derivative"))
    verdicts.append(_bound_verdict(cfg, growth))
    return {
        "item": "verify",
        "init": list(init),
        "trajectory": traj.summary(),
        "growth": growth.to_dict() if growth is not None else None,
        "longterm": longterm_to_dict(classify_longterm(traj)),
        "theorem3": t3.to_dict(),
        "verdicts": [v.to_dict() for v in verdicts],
    }


def _run_verify(cfg: ScenarioConfig) -> RunReport:
    inits = [cfg.problem.init] + list(cfg.ic_grid or ())
    results, rows = [], []
    for init in inits:
        try:
            r = _verify_one(cfg, init)
        except EFLabError as exc:
            r = {"item": "verify", "init": list(init), "error": f"{type(exc).__name__}: {exc}"}
        results.append(r)
        for v in r.get("verdicts", []):
            rows.append([" ".join(_csv_cell(x) for x in init), v["clause"], v["status"],
                         "" if v["margin"] is None else v["margin"], v["details"]])
    passed = all("error" not in r and all(v["status"] != "fails" for v in r["verdicts"]) for r in results)
    return RunReport("verify", scenario_to_dict(cfg), results, passed,
                     csv_header=["init", "clause", "status", "margin", "details"], csv_rows=rows)


def _run_scan(cfg: ScenarioConfig, jobs: int) -> RunReport:
    eq = cfg.equation.build()
    entries = scan(eq, cfg.ic_grid, _controls(cfg), cfg.classifier_config(), cfg.problem.t0, jobs)
    lemma = lemma2_from_scan(entries)
    tallies = {k: 0 for k in ("oscillatory", "monotone_to_zero", "blow_up", "undetermined")}
    rows = []
    for e in entries:
        kind = e.longterm.kind
        tallies[kind] = tallies.get(kind, 0) + 1
        g = e.growth
        rows.append([e.index, " ".join(_csv_cell(x) for x in e.init), e.trajectory.status.kind,
                     kind, g.growth_class.value if g else "", g.pi_hat if g else "",
                     g.xi_hat if g else "", e.theorem3.smallest_index if e.theorem3.applicable else ""])
    summary = {
        "lemma2": {k: v for k, v in lemma.to_dict().items() if k != "entries"},
        "longterm": tallies,
    }
    passed = lemma.passed and not any(e.error for e in entries)
    return RunReport("scan", scenario_to_dict(cfg), [e.to_dict() for e in entries], passed,
                     summary=summary,
                     csv_header=["index", "init", "status", "longterm", "class", "pi_hat", "xi_hat",
                                 "smallest_index"],
                     csv_rows=rows)


def _run_corpus(cfg: ScenarioConfig, jobs: int) -> RunReport:
    from .acceptance import run_corpus

    results = run_corpus(jobs)
    rows = [[r.number, r.name, "PASS" if r.passed else "FAIL", r.tolerance] for r in results]
    return RunReport("corpus", scenario_to_dict(cfg), [r.to_dict() for r in results],
                     all(r.passed for r in results),
                     summary={"criteria": len(results), "passed": sum(r.passed for r in results)},
                     csv_header=["criterion", "name", "result", "tolerance"], csv_rows=rows)


def run_scenario(cfg: ScenarioConfig, jobs: int = 1, timing: bool = False) -> RunReport:
    """Execute a validated scenario; ``jobs`` only changes how scans are scheduled."""
    start = time.perf_counter()
    runners = {
        "integrate": lambda: _run_integrate(cfg),
        "classify": lambda: _run_classify(cfg),
        "verify": lambda: _run_verify(cfg),
        "scan": lambda: _run_scan(cfg, jobs),
        "corpus": lambda: _run_corpus(cfg, jobs),
    }
    report = runners[cfg.kind]()
    if timing:
        report.wall_time = time.perf_counter() - start
    return report
