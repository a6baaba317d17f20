"""Built-in acceptance corpus.

Each criterion is a function returning a ``CriterionResult``.  ``run_corpus``
runs them in order; criteria 7 to 9 share one scan.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .asymptotics import (
    POS_INF,
    ClassifierConfig,
    GrowthClass,
    SampleSeries,
    analysis_grid,
    classify_growth,
    geometric_grid,
    sample_function,
)
from .equations import (
    EFEquation,
    PhiSpec,
    power_law_solution,
    thomas_fermi_equation,
)
from .errors import EFLabError
from .odecore import (
    BlowUp,
    IntegrationControls,
    IVProblem,
    ReachedEnd,
    fixed_step_solve,
    integrate,
)
from .theorems import (
    MonotoneToZero,
    Oscillatory,
    Undetermined,
    check_theorem1,
    lemma2_from_scan,
    pi_identity_residual,
    scan,
    theorem3_bound,
)

CLASSIFIER_TOL = 0.05
SCALE_FACTORS = (0.5, 2.0, 10.0, -3.0)
SCALE_TOL = 1e-9
IDENTITY_TOL = 0.1
BOUND_TOL = 0.1
T1_MARGIN = -0.1
SCAN_T_END = 100.0

# The envelope of t + e^t cos t only escapes visibly with coarse blocks on
# the short window where e^t stays finite.
MIX_CONFIG = ClassifierConfig(block_count=8, tail_blocks=4)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    tolerance: str
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"criterion {self.number:2d} {'PASS' if self.passed else 'FAIL'}  {self.name}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "tolerance": self.tolerance, "details": self.details}


# --- shared corpora -----------------------------------------------------------


@dataclass(frozen=True)
class CorpusFunction:
    label: str
    f: Callable
    t_end: float
    config: ClassifierConfig = field(default_factory=ClassifierConfig)

    def series(self, t_start: float = 1.0) -> SampleSeries:
        return sample_function(self.f, t_start, self.t_end, self.config, self.label)


POWER_DEGREES = (-3, -1, 0, 1, 2, 3)


def _power(d: float) -> Callable:
    return lambda t: np.power(t, float(d))


def classifier_corpus() -> list[tuple[CorpusFunction, dict]]:
    """Corpus functions paired with what is asserted about them."""
    out = []
    for d in POWER_DEGREES:
        out.append((CorpusFunction(f"t^{d}", _power(d), 1e6), {"pi": float(d), "xi": float(d)}))
    for phi, cls in ((PhiSpec.exp_root(1), GrowthClass.S1), (PhiSpec.exp_quadratic(1), GrowthClass.S1),
                     (PhiSpec.exp_root(-1), GrowthClass.S2), (PhiSpec.exp_quadratic(-1), GrowthClass.S2)):
        out.append((CorpusFunction(phi.label, phi.evaluator, phi.horizon), {"class": cls}))
    mix = PhiSpec.oscillating_mix()
    out.append((CorpusFunction(mix.label, mix.evaluator, mix.horizon, MIX_CONFIG), {"xi": POS_INF}))
    return out


_scan_cache: dict = {}


def scan_families():
    """The three families scanned for the exclusion and vanishing checks."""
    tf = thomas_fermi_equation()
    osc = EFEquation(2, PhiSpec.power(-1.0, 0.0), 3.0)
    ric = EFEquation(1, PhiSpec.power(1.0, 0.0), 2.0)
    return [
        ("thomas_fermi", tf, 1.0,
         [(144.0, -432.0), (0.0, 0.0), (1.0, 0.0), (1.0, -1.0), (10.0, -20.0),
          (144.0, -400.0), (-1.0, 0.0), (0.5, 0.5), (100.0, -300.0)]),
        ("cubic_oscillator", osc, 0.0, OSCILLATOR_ICS),
        ("riccati", ric, 0.0, [(0.5,), (1.0,), (2.0,), (0.1,), (-0.5,), (-1.0,), (-2.0,), (0.0,), (-0.2,)]),
    ]


OSCILLATOR_ICS = [(1.0, 0.0), (0.0, 1.0), (2.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (0.0, -2.0),
                  (1.5, -0.5), (-2.0, 1.0), (0.5, 1.0)]


def shared_scan(jobs: int = 1) -> dict:
    # results do not depend on jobs, so one cached copy serves every caller
    if "scan" not in _scan_cache:
        controls = IntegrationControls(t_end=SCAN_T_END)
        _scan_cache["scan"] = {
            name: scan(eq, ics, controls, t0=t0, jobs=jobs)
            for name, eq, t0, ics in scan_families()
        }
    return _scan_cache["scan"]


# --- criteria -----------------------------------------------------------------


def criterion_1() -> CriterionResult:
    problem = thomas_fermi_equation().problem(1.0, (144.0, -432.0), "Thomas-Fermi")
    start = time.perf_counter()
    traj = integrate(problem, IntegrationControls(t_end=100.0, rtol=1e-9))
    elapsed = time.perf_counter() - start
    grid = geometric_grid(1.0, 100.0, 1.001)
    exact = 144.0 * grid ** -3.0
    err = float(np.max(np.abs(traj.evaluate(grid)[:, 0] - exact) / exact))
    passed = isinstance(traj.status, ReachedEnd) and err <= 1e-6 and elapsed < 1.0
    # For contrast: stepping in t itself amplifies rounding like t^7.8 relative to
    # the solution, so the direct route loses the decaying branch before t = 100.
    direct = integrate(problem, IntegrationControls(t_end=10.0, rtol=1e-9), method="direct")
    g10 = geometric_grid(1.0, 10.0, 1.001)
    direct_err = float(np.max(np.abs(direct.evaluate(g10)[:, 0] * g10 ** 3 / 144.0 - 1.0)))
    return CriterionResult(1, "Thomas-Fermi exact solution 144 t^-3", passed,
                           "max relative error <= 1e-6 at rtol 1e-9; runtime < 1 s",
                           {"max_rel_error": err, "runtime_s_below_1": elapsed < 1.0,
                            "method": traj.method, "accepted_steps": traj.accepted_steps,
                            "direct_route_rel_error_to_t10": direct_err})


def criterion_2() -> CriterionResult:
    rows, ok = [], True
    for cf, expect in classifier_corpus():
        rep = classify_growth(cf.series(), cf.config)
        good = True
        if "class" in expect:
            good = rep.growth_class is expect["class"]
        if "pi" in expect:
            good = good and abs(rep.pi_hat - expect["pi"]) <= CLASSIFIER_TOL
        if "xi" in expect:
            if math.isinf(expect["xi"]):
                good = good and rep.xi_hat == expect["xi"]
            else:
                good = good and abs(rep.xi_hat - expect["xi"]) <= CLASSIFIER_TOL
        ok = ok and good
        rows.append({"label": cf.label, "class": rep.growth_class.value, "pi_hat": rep.pi_hat,
                     "xi_hat": rep.xi_hat, "confident": rep.confident, "ok": good})
    notes = ["t + exp(t) cos t: lower exponent flagged, not asserted; the function has a "
             "zero in every period, so its liminf envelope vanishes and pi_hat = -inf, "
             "not the value 1 sometimes quoted for it"]
    return CriterionResult(2, "classifier corpus", ok, f"+-{CLASSIFIER_TOL} on power exponents",
                           {"functions": rows, "notes": notes})


def criterion_3() -> CriterionResult:
    rows, ok = [], True
    corpus = [cf for cf, _ in classifier_corpus()]
    corpus.append(CorpusFunction("t (2 + cos t)", PhiSpec.bounded_oscillation().evaluator, 1e6))
    for cf in corpus:
        base_series = cf.series()
        base = classify_growth(base_series, cf.config)
        worst = 0.0
        same = True
        for k in SCALE_FACTORS:
            rep = classify_growth(base_series.scaled(k), cf.config)
            same = same and rep.growth_class is base.growth_class
            for a, b in ((rep.pi_hat, base.pi_hat), (rep.xi_hat, base.xi_hat)):
                if math.isfinite(a) and math.isfinite(b):
                    worst = max(worst, abs(a - b))
                elif a != b:
                    same = False
        good = same and worst <= SCALE_TOL
        ok = ok and good
        rows.append({"label": cf.label, "class": base.growth_class.value, "max_diff": worst, "ok": good})
    return CriterionResult(3, "scale invariance", ok, f"class unchanged; exponents within {SCALE_TOL}",
                           {"factors": list(SCALE_FACTORS), "functions": rows})


def _antiderivative(fprime: Callable, t_end: float, config: ClassifierConfig) -> SampleSeries:
    grid = analysis_grid(1.0, t_end, config)
    values = cumulative_trapezoid(fprime(grid), grid, initial=0.0)
    return SampleSeries(grid, values)


def theorem1_pairs():
    """(label, f, f', t_end) with closed-form derivatives."""
    s3 = [
        ("t^3", lambda t: t ** 3, lambda t: 3 * t ** 2, 1e6),
        ("t^2", lambda t: t ** 2, lambda t: 2 * t, 1e6),
        ("t^1.5", lambda t: t ** 1.5, lambda t: 1.5 * t ** 0.5, 1e6),
        ("t", lambda t: t, lambda t: np.ones_like(t), 1e6),
        ("t^-1", lambda t: 1 / t, lambda t: -t ** -2.0, 1e6),
        ("t^-3", lambda t: t ** -3.0, lambda t: -3 * t ** -4.0, 1e6),
        ("t (2 + cos t)", lambda t: t * (2 + np.cos(t)), lambda t: 2 + np.cos(t) - t * np.sin(t), 1e6),
    ]
    s2 = [
        ("exp(-sqrt t)", lambda t: np.exp(-np.sqrt(t)), lambda t: -np.exp(-np.sqrt(t)) / (2 * np.sqrt(t)), 4e5),
        ("exp(-t^2)", lambda t: np.exp(-t * t), lambda t: -2 * t * np.exp(-t * t), 25.0),
        ("exp(-t)", lambda t: np.exp(-t), lambda t: -np.exp(-t), 500.0),
    ]
    s1_prime = [
        ("exp(sqrt t)", lambda t: np.exp(np.sqrt(t)), 4e5),
        ("t exp(sqrt t)", lambda t: t * np.exp(np.sqrt(t)), 4e5),
        ("exp(t)", np.exp, 500.0),
    ]
    return s3, s2, s1_prime


def criterion_4() -> CriterionResult:
    cfg = ClassifierConfig()
    s3, s2, s1_prime = theorem1_pairs()
    rows = []
    counts = {"T1.i": 0, "T1.ii": 0, "T1.iii": 0}
    bad = []

    def record(label, f_series, fp_series, clause):
        verdicts = check_theorem1(classify_growth(f_series, cfg), classify_growth(fp_series, cfg))
        v = next(v for v in verdicts if v.clause == clause)
        good = v.holds and (v.margin is None or v.margin >= T1_MARGIN)
        if good:
            counts[clause] += 1
        else:
            bad.append(label)
        others = [w.clause for w in verdicts if w.status == "fails"]
        if others:
            bad.append(f"{label}: {','.join(others)}")
        rows.append({"label": label, "clause": clause, "status": v.status, "margin": v.margin})

    for label, f, fp, t_end in s3:
        record(label, sample_function(f, 1.0, t_end, cfg), sample_function(fp, 1.0, t_end, cfg), "T1.i")
    for label, f, fp, t_end in s2:
        record(label, sample_function(f, 1.0, t_end, cfg), sample_function(fp, 1.0, t_end, cfg), "T1.ii")
    for label, fp, t_end in s1_prime:
        # f is the numeric antiderivative from t = 1; skip its initial zero block
        f_series = _antiderivative(fp, t_end, cfg)
        keep = f_series.times >= 2.0
        f_series = SampleSeries(f_series.times[keep], f_series.values[keep], label)
        record(f"int {label}", f_series, sample_function(fp, 2.0, t_end, cfg), "T1.iii")

    passed = counts["T1.i"] >= 6 and counts["T1.ii"] >= 2 and counts["T1.iii"] >= 2 and not bad
    return CriterionResult(4, "derivative rules", passed,
                           "margin >= -0.1 on >= 6 S3 pairs; >= 2 S2; >= 2 S1 derivatives",
                           {"counts": counts, "failures": bad, "pairs": rows})


def identity_triples():
    """(label, phi, y, lambda, t_end)."""
    return [
        ("t^-1/2, 144 t^-3, 3/2", _power(-0.5), lambda t: 144 * t ** -3.0, 1.5, 1e6),
        ("1, t, 2", _power(0), _power(1), 2.0, 1e6),
        ("t, t^-1, 3", _power(1), _power(-1), 3.0, 1e6),
        ("t^-1/2, t^2, 3/2", _power(-0.5), _power(2), 1.5, 1e6),
        ("t^-1, t (2 + cos t), 2", _power(-1), lambda t: t * (2 + np.cos(t)), 2.0, 1e6),
        ("2 t^1/2, -t^-2, 5/4", lambda t: 2 * t ** 0.5, lambda t: -t ** -2.0, 1.25, 1e6),
    ]


def criterion_5() -> CriterionResult:
    cfg = ClassifierConfig()
    rows, good_count, ok = [], 0, True
    for label, phi, y, lam, t_end in identity_triples():
        composed = lambda t, phi=phi, y=y, lam=lam: phi(t) * np.abs(y(t)) ** lam * np.sign(y(t))
        reps = [classify_growth(sample_function(g, 1.0, t_end, cfg), cfg) for g in (phi, y, composed)]
        try:
            res = pi_identity_residual(reps[0], reps[1], lam, reps[2])
        except EFLabError as exc:
            rows.append({"label": label, "error": str(exc)})
            ok = False
            continue
        good = abs(res) <= IDENTITY_TOL
        good_count += good
        ok = ok and good
        rows.append({"label": label, "residual": res, "ok": good})
    return CriterionResult(5, "composition identity", ok and good_count >= 5,
                           f"|residual| <= {IDENTITY_TOL} on >= 5 triples", {"triples": rows})


BOUND_CASES = ((2, -0.5, 1.5), (2, 0.0, 3.0), (1, 0.0, 2.0))


def criterion_6() -> CriterionResult:
    cfg = ClassifierConfig()
    rows, ok = [], True
    for n, sigma, lam in BOUND_CASES:
        m = (sigma + n) / (1 - lam)
        # phi0 takes the sign of m(m-1)...(m-n+1) so that a real amplitude exists
        phi0 = math.copysign(1.0, math.prod(m - k for k in range(n)))
        sol = power_law_solution(n, sigma, lam, phi0)
        rep = classify_growth(sample_function(sol.value, 1.0, 1e6, cfg), cfg)
        bound = theorem3_bound(n, sigma, lam)
        good = abs(rep.pi_hat - bound) <= BOUND_TOL
        ok = ok and good
        rows.append({"n": n, "sigma": sigma, "lambda": lam, "phi0": phi0, "pi_hat": rep.pi_hat,
                     "bound": bound, "ok": good})
    return CriterionResult(6, "exponent bound attained by power-law solutions", ok,
                           f"|pi_hat - bound| <= {BOUND_TOL}", {"cases": rows})


def criterion_7(jobs: int = 1) -> CriterionResult:
    families = shared_scan(jobs)
    total, rows, ok = 0, [], True
    for name, entries in families.items():
        rep = lemma2_from_scan(entries)
        total += len(entries)
        ok = ok and rep.passed
        rows.append({"family": name, "ics": len(entries), "reached_end": rep.reached_end,
                     "blow_ups": rep.blow_ups, "step_failures": rep.step_failures,
                     "confident_s1": rep.confident_s1})
    return CriterionResult(7, "no confident S1 among surviving solutions", ok and total >= 25,
                           "zero confident S1 over >= 25 ICs", {"total_ics": total, "families": rows})


def criterion_8(jobs: int = 1) -> CriterionResult:
    families = shared_scan(jobs)
    rows, ok, checked = [], True, 0
    for name, entries in families.items():
        for e in entries:
            if not isinstance(e.trajectory.status, ReachedEnd):
                continue
            checked += 1
            n = e.trajectory.order
            i = e.theorem3.smallest_index
            good = i is not None and i <= n
            ok = ok and good
            rows.append({"family": name, "init": list(e.init), "smallest_index": i, "order": n})
    return CriterionResult(8, "vanishing subsequences", ok and checked > 0,
                           "smallest index i <= n for every surviving solution",
                           {"checked": checked, "runs": rows})


def criterion_9(jobs: int = 1) -> CriterionResult:
    families = shared_scan(jobs)
    osc = families["cubic_oscillator"]
    kinds = [type(e.longterm).__name__ for e in osc]
    all_osc = len(osc) == 9 and all(isinstance(e.longterm, Oscillatory) for e in osc)
    tf = next(e for e in families["thomas_fermi"] if e.init == (144.0, -432.0))
    tf_mono = isinstance(tf.longterm, MonotoneToZero)
    undetermined = sum(isinstance(e.longterm, Undetermined) for e in list(osc) + [tf])
    passed = all_osc and tf_mono and undetermined == 0
    return CriterionResult(9, "oscillation or monotone decay", passed,
                           "9/9 oscillator runs Oscillatory; decaying run MonotoneToZero; 0 Undetermined",
                           {"oscillator": kinds, "thomas_fermi": type(tf.longterm).__name__,
                            "undetermined": undetermined})


def convergence_slope(steps=(0.4, 0.2, 0.1)) -> tuple[float, list[float]]:
    """Observed order of fixed-step DOPRI on y'' = -y, y(0) = 0, y'(0) = 1, t in [0, 4]."""
    problem = IVProblem(2, lambda t, y: -y, 0.0, (0.0, 1.0), "harmonic")
    errors = []
    for h in steps:
        y = fixed_step_solve(problem, h, 4.0)
        errors.append(float(np.max(np.abs(y - [math.sin(4.0), math.cos(4.0)]))))
    slope = float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
    return slope, errors


def energy_drift(t_end: float = 100.0) -> float:
    problem = EFEquation(2, PhiSpec.power(-1.0, 0.0), 3.0).problem(0.0, (1.0, 0.0), "cubic oscillator")
    traj = integrate(problem, IntegrationControls(t_end=t_end))
    y, v = traj.states[:, 0], traj.states[:, 1]
    energy = 0.5 * v ** 2 + 0.25 * y ** 4
    return float(np.max(np.abs(energy - energy[0])))


def riccati_blowup() -> float:
    traj = integrate(IVProblem(1, lambda t, y: y * y, 0.0, (1.0,), "y' = y^2"),
                     IntegrationControls(t_end=2.0))
    return traj.status.t_star if isinstance(traj.status, BlowUp) else math.nan


def criterion_10() -> CriterionResult:
    slope, errors = convergence_slope()
    drift = energy_drift()
    t_star = riccati_blowup()
    passed = slope >= 4.5 and drift < 1e-6 and abs(t_star - 1.0) <= 0.01
    return CriterionResult(10, "integrator properties", passed,
                           "slope >= 4.5; energy drift < 1e-6; |t* - 1| <= 0.01",
                           {"convergence_slope": slope, "errors": errors, "energy_drift": drift,
                            "blowup_time": t_star})


def criterion_11() -> CriterionResult:
    from .scenario import example_scenarios, parse_scenario_text, scenario_to_toml
    from .report import render_json, run_scenario

    roundtrip_ok, names = True, []
    for name, text in example_scenarios().items():
        cfg = parse_scenario_text(text, name)
        again = parse_scenario_text(scenario_to_toml(cfg), name)
        roundtrip_ok = roundtrip_ok and again == cfg
        names.append(name)
    cfg = parse_scenario_text(example_scenarios()["integrate_thomas_fermi"])
    first = render_json(run_scenario(cfg))
    second = render_json(run_scenario(cfg))
    deterministic = first == second
    return CriterionResult(11, "scenario round-trip and deterministic reports",
                           roundtrip_ok and deterministic,
                           "parse(emit(config)) == config; byte-identical re-run",
                           {"scenarios": names, "roundtrip": roundtrip_ok, "deterministic": deterministic})


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11)


def run_criterion(fn, jobs: int = 1) -> CriterionResult:
    number = CRITERIA.index(fn) + 1
    try:
        return fn(jobs) if number in (7, 8, 9) else fn()
    except Exception as exc:  # a crashing criterion is a failed criterion
        return CriterionResult(number, fn.__name__, False, "", {"error": f"{type(exc).__name__}: {exc}"})


def run_corpus(jobs: int = 1) -> list[CriterionResult]:
    return [run_criterion(fn, jobs) for fn in CRITERIA]
