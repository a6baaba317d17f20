"""Emden-Fowler right-hand sides, the phi catalog and assumption checkers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import (
    NEG_INF,
    POS_INF,
    ClassifierConfig,
    GrowthClass,
    SampleSeries,
    classify_growth,
    sample_function,
)
from .errors import ConfigurationError, ConstructionError, DomainError, EFLabError, EvaluationError
from .odecore import IVProblem, PowerScaling

PHI_TAGS = ("power", "exp_root", "exp_quadratic", "oscillating_mix", "bounded_oscillation")

DEFAULT_HORIZON = 1e6


@dataclass(frozen=True, eq=False)
class PhiSpec:
    """A coefficient function phi(t) with its known growth exponents, if any.

    ``evaluator`` must accept numpy arrays.  ``known_pi``/``known_xi`` are
    None where no value is asserted; ``horizon`` is the largest t at which
    sampling stays inside double range.
    """

    tag: str
    params: dict
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    known_pi: float | None = None
    known_xi: float | None = None
    horizon: float = DEFAULT_HORIZON
    label: str = ""

    @classmethod
    def power(cls, coefficient: float = 1.0, sigma: float = 0.0) -> "PhiSpec":
        if coefficient == 0 or not math.isfinite(coefficient):
            raise ConfigurationError("power coefficient must be finite and nonzero")
        if not math.isfinite(sigma):
            raise ConfigurationError("power sigma must be finite")
        a, s = float(coefficient), float(sigma)
        return cls("power", {"coefficient": a, "sigma": s},
                   lambda t: a * np.power(t, s), s, s, label=_power_label(a, s))

    @classmethod
    def exp_root(cls, sign: int = 1, horizon: float = 4e5) -> "PhiSpec":
        sign = _unit_sign(sign)
        known = POS_INF if sign > 0 else NEG_INF
        return cls("exp_root", {"sign": sign}, lambda t: np.exp(sign * np.sqrt(t)),
                   known, known, horizon, "exp(+sqrt t)" if sign > 0 else "exp(-sqrt t)")

    @classmethod
    def exp_quadratic(cls, sign: int = 1, horizon: float = 25.0) -> "PhiSpec":
        sign = _unit_sign(sign)
        known = POS_INF if sign > 0 else NEG_INF
        return cls("exp_quadratic", {"sign": sign}, lambda t: np.exp(sign * np.square(t)),
                   known, known, horizon, "exp(+t^2)" if sign > 0 else "exp(-t^2)")

    @classmethod
    def oscillating_mix(cls, horizon: float = 50.0) -> "PhiSpec":
        # t + e^t cos t: upper exponent +inf.  No lower exponent is asserted:
        # the function has a zero in every period, so its liminf envelope vanishes.
        return cls("oscillating_mix", {}, lambda t: t + np.exp(t) * np.cos(t),
                   None, POS_INF, horizon, "t + exp(t) cos t")

    @classmethod
    def bounded_oscillation(cls) -> "PhiSpec":
        return cls("bounded_oscillation", {}, lambda t: t * (2.0 + np.cos(t)),
                   1.0, 1.0, label="t (2 + cos t)")

    @classmethod
    def custom(cls, evaluator, known_pi=None, known_xi=None, horizon=DEFAULT_HORIZON,
               label="custom") -> "PhiSpec":
        return cls("custom", {}, evaluator, known_pi, known_xi, horizon, label)

    @classmethod
    def from_tag(cls, tag: str, **params) -> "PhiSpec":
        builders = {
            "power": cls.power,
            "exp_root": cls.exp_root,
            "exp_quadratic": cls.exp_quadratic,
            "oscillating_mix": cls.oscillating_mix,
            "bounded_oscillation": cls.bounded_oscillation,
        }
        if tag not in builders:
            raise ConfigurationError(f"unknown phi tag {tag!r}; expected one of {', '.join(PHI_TAGS)}")
        return builders[tag](**params)

    @property
    def singular_at_origin(self) -> bool:
        return self.tag == "power" and self.params["sigma"] < 0

    def defined_at(self, t: float) -> bool:
        if self.tag == "power":
            s = self.params["sigma"]
            if t == 0:
                return s >= 0
            return t > 0 or float(s).is_integer()
        if self.tag == "exp_root":
            return t >= 0
        return True

    def __call__(self, t):
        if np.ndim(t) == 0:
            t = float(t)
            if not self.defined_at(t):
                raise DomainError(f"phi {self.label!r} undefined at t={t!r}")
            with np.errstate(over="ignore", invalid="ignore"):
                value = float(self.evaluator(t))
            if not math.isfinite(value):
                raise DomainError(f"phi {self.label!r} not finite at t={t!r}")
            return value
        return self.evaluator(np.asarray(t, dtype=float))

    def sample(self, t_end: float | None = None, config: ClassifierConfig | None = None,
               t_start: float = 1.0) -> SampleSeries:
        t_end = self.horizon if t_end is None else min(t_end, self.horizon)
        return sample_function(self.evaluator, t_start, t_end, config, self.label)

    def to_dict(self) -> dict:
        return {"tag": self.tag, **self.params}


def _unit_sign(sign) -> int:
    if sign not in (1, -1):
        raise ConfigurationError(f"sign must be +1 or -1, got {sign!r}")
    return int(sign)


def _power_label(a: float, s: float) -> str:
    core = "1" if s == 0 else f"t^{s:g}"
    return core if a == 1 else f"{a:g} {core}"


@dataclass(frozen=True, eq=False)
class EFEquation:
    """``y^(n) = phi(t) |y|^lam sgn y``."""

    order: int
    phi: PhiSpec
    lam: float

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ConfigurationError("order must be a positive integer")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigurationError(f"lambda must be positive, got {self.lam!r}")

    @property
    def superlinear(self) -> bool:
        return self.lam > 1

    @property
    def scaling(self) -> PowerScaling | None:
        if self.phi.tag != "power":
            return None
        return PowerScaling(self.phi.params["coefficient"], self.phi.params["sigma"], self.lam)

    def rhs(self) -> "EFRhs":
        return make_ef_rhs(self)

    def problem(self, t0: float, init, label: str = "") -> IVProblem:
        if not self.phi.defined_at(t0) or (self.phi.singular_at_origin and t0 <= 0):
            raise DomainError(f"phi {self.phi.label!r} is singular at t0={t0!r}")
        return IVProblem(self.order, self.rhs(), t0, tuple(init), label or self.describe(), self.scaling)

    def describe(self) -> str:
        return f"y^({self.order}) = {self.phi.label} |y|^{self.lam:g} sgn y"

    def to_dict(self) -> dict:
        return {"order": self.order, "lambda": self.lam, "phi": self.phi.to_dict()}


class EFRhs:
    """``(t, y) -> phi(t) |y|^lam sgn y``; scalar or array arguments."""

    def __init__(self, equation: EFEquation):
        self.equation = equation
        self.phi = equation.phi
        self.lam = float(equation.lam)

    def __call__(self, t, y):
        if np.ndim(t) == 0 and np.ndim(y) == 0:
            p = self.phi(t)
            y = float(y)
            if y == 0.0:
                return 0.0
            return p * abs(y) ** self.lam * (1.0 if y > 0 else -1.0)
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return self.phi(t) * np.abs(y) ** self.lam * np.sign(y)


def make_ef_rhs(equation: EFEquation) -> EFRhs:
    return EFRhs(equation)


@dataclass(frozen=True)
class ProblemTemplate:
    """An equation awaiting initial data; ``t0`` must be at least ``min_t0``."""

    equation: EFEquation
    min_t0: float = 1.0
    label: str = ""

    @property
    def order(self) -> int:
        return self.equation.order

    @property
    def rhs(self) -> EFRhs:
        return self.equation.rhs()

    def problem(self, init, t0: float = 1.0) -> IVProblem:
        if t0 < self.min_t0:
            raise DomainError(f"t0 must be >= {self.min_t0}, got {t0!r}")
        return self.equation.problem(t0, init, self.label)


def thomas_fermi_equation() -> EFEquation:
    return EFEquation(2, PhiSpec.power(1.0, -0.5), 1.5)


def thomas_fermi_preset() -> ProblemTemplate:
    return ProblemTemplate(thomas_fermi_equation(), 1.0, "Thomas-Fermi")


@dataclass(frozen=True)
class AssumptionParams:
    nu: float
    mu: float
    c: float

    def validate(self, n: int) -> None:
        problems = []
        if not self.nu > 1:
            problems.append(f"nu must exceed 1, got {self.nu!r}")
        if not self.mu > 1:
            problems.append(f"mu must exceed 1, got {self.mu!r}")
        if not self.c > -n:
            problems.append(f"c must exceed -n = {-n}, got {self.c!r}")
        if problems:
            raise ConfigurationError("; ".join(problems))


@dataclass(frozen=True)
class PowerLawSolution:
    """``sign * C * t^m`` solving ``y^(n) = phi0 t^sigma |y|^lam sgn y``."""

    C: float
    m: float
    sigma: float
    lam: float
    n: int
    sign: int
    phi0: float

    @property
    def falling_factorial(self) -> float:
        return math.prod(self.m - k for k in range(self.n))

    def value(self, t):
        return self.sign * self.C * np.power(t, self.m)

    def derivative(self, t, k: int):
        coeff = math.prod(self.m - i for i in range(k))
        return self.sign * self.C * coeff * np.power(t, self.m - k)

    def initial_state(self, t0: float) -> tuple[float, ...]:
        return tuple(float(self.derivative(t0, k)) for k in range(self.n))

    def equation(self) -> EFEquation:
        return EFEquation(self.n, PhiSpec.power(self.phi0, self.sigma), self.lam)

    def problem(self, t0: float = 1.0) -> IVProblem:
        return self.equation().problem(t0, self.initial_state(t0), f"power-law solution t^{self.m:g}")

    def residual(self, t: float) -> float:
        lhs = float(self.derivative(t, self.n))
        y = float(self.value(t))
        rhs = self.phi0 * t ** self.sigma * abs(y) ** self.lam * math.copysign(1.0, y)
        return abs(lhs - rhs) / abs(lhs)


RESIDUAL_POINTS = (1.0, 2.0, 5.0, 10.0, 100.0)


def power_law_solution(n: int, sigma: float, lam: float, phi0: float, sign: int = 1) -> PowerLawSolution:
    if not lam > 1:
        raise ConfigurationError(f"lambda must exceed 1, got {lam!r}")
    if not sigma + n > 0:
        raise ConfigurationError(f"need sigma + n > 0, got sigma={sigma!r}, n={n!r}")
    if phi0 == 0:
        raise ConfigurationError("phi0 must be nonzero")
    m = (sigma + n) / (1.0 - lam)
    P = math.prod(m - k for k in range(n))
    if not P / phi0 > 0:
        raise ConstructionError(
            f"no real positive C: P/phi0 = {P / phi0!r} <= 0 (P = m(m-1)...(m-n+1) = {P!r})"
        )
    C = (P / phi0) ** (1.0 / (lam - 1.0))
    sol = PowerLawSolution(C, m, float(sigma), float(lam), int(n), _unit_sign(sign), float(phi0))
    worst = max(sol.residual(t) for t in RESIDUAL_POINTS)
    if worst > 1e-10:
        raise ConstructionError(f"substitution residual {worst:.3e} exceeds 1e-10")
    return sol


# --- falsification checks ---------------------------------------------------

SAMPLES_ONLY = (
    "falsification on a finite corpus of sampled functions over finite windows; "
    "a PASS is not a proof"
)


@dataclass(frozen=True)
class FalsificationEntry:
    label: str
    status: str  # "PASS", "FAIL" or "INDETERMINATE"
    growth_class: str | None = None
    margin: float | None = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label, "status": self.status, "class": self.growth_class,
            "margin": self.margin, "detail": self.detail,
        }


@dataclass(frozen=True)
class FalsificationReport:
    assumption: str
    passed: bool
    entries: tuple[FalsificationEntry, ...]
    warnings: tuple[str, ...] = ()
    caveat: str = SAMPLES_ONLY

    def to_dict(self) -> dict:
        return {
            "assumption": self.assumption,
            "passed": self.passed,
            "caveat": self.caveat,
            "warnings": list(self.warnings),
            "entries": [e.to_dict() for e in self.entries],
        }


def apply_rhs(F, t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Evaluate ``F`` elementwise, vectorised when ``F`` supports arrays."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            out = np.asarray(F(t, y), dtype=float)
            if out.shape == t.shape:
                return out
        except (TypeError, ValueError, ArithmeticError):
            pass
        out = np.empty_like(t)
        for i, (ti, yi) in enumerate(zip(t, y)):
            try:
                out[i] = F(float(ti), float(yi))
            except (OverflowError, EvaluationError, DomainError):
                out[i] = math.inf
        return out


def assumption_i_corpus() -> list[PhiSpec]:
    return [
        PhiSpec.exp_root(1),
        PhiSpec.exp_quadratic(1, horizon=15.0),
        PhiSpec.custom(lambda t: t * np.exp(np.sqrt(t)), POS_INF, POS_INF, 4e5, "t exp(sqrt t)"),
    ]


def assumption_ii_corpus() -> list[PhiSpec]:
    powers = [PhiSpec.custom(lambda t, d=d: np.power(t, float(d)), float(d), float(d),
                             label=f"t^{d}") for d in (-3, -1, 0, 1, 2, 3)]
    return powers + [PhiSpec.bounded_oscillation()]


def check_assumption_i(F, nu: float, corpus: list[PhiSpec] | None = None,
                       horizon: float = 1e5, config: ClassifierConfig | None = None) -> FalsificationReport:
    """Does ``F(t, f(t)) / f(t)^nu`` classify S1 for every S1-class corpus entry?"""
    if not nu > 1:
        raise ConfigurationError(f"nu must exceed 1, got {nu!r}")
    config = config or ClassifierConfig()
    corpus = assumption_i_corpus() if corpus is None else corpus
    entries = []
    for f in corpus:
        series = f.sample(horizon, config)
        t, fv = series.times, series.values
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ratio = apply_rhs(F, t, fv) / np.power(fv, nu)
        if np.any(fv <= 0):
            entries.append(FalsificationEntry(f.label, "INDETERMINATE",
                                              detail="corpus function not positive"))
            continue
        if not np.all(np.isfinite(ratio)) or not np.all(np.isfinite(fv)):
            entries.append(FalsificationEntry(f.label, "INDETERMINATE",
                                              detail="overflow while forming F(t, f)/f^nu"))
            continue
        report = classify_growth(SampleSeries(t, ratio, f"F(t,{f.label})/f^{nu:g}"), config)
        ok = report.growth_class is GrowthClass.S1
        entries.append(FalsificationEntry(
            f.label, "PASS" if ok else "FAIL", report.growth_class.value,
            detail=f"pi_hat={report.pi_hat!r}, xi_hat={report.xi_hat!r}",
        ))
    warnings = []
    if not entries:
        warnings.append("empty corpus: vacuous pass")
    if any(e.status == "INDETERMINATE" for e in entries):
        warnings.append("some entries were indeterminate")
    passed = not any(e.status == "FAIL" for e in entries)
    return FalsificationReport("i", passed, tuple(entries), tuple(warnings))


ASSUMPTION_II_SLACK = 0.1


def check_assumption_ii(F, params: AssumptionParams, n: int, corpus: list[PhiSpec] | None = None,
                        config: ClassifierConfig | None = None) -> FalsificationReport:
    """Is ``pi(F(t, f(t))) >= mu pi(f) + c`` (up to 0.1) with an S3 composite, for each corpus f?"""
    params.validate(n)
    config = config or ClassifierConfig()
    corpus = assumption_ii_corpus() if corpus is None else corpus
    entries = []
    for f in corpus:
        series = f.sample(None, config)
        if f.known_pi is not None and math.isfinite(f.known_pi):
            pi_f = f.known_pi
        else:
            pi_f = classify_growth(series, config).pi_hat
        if not math.isfinite(pi_f):
            entries.append(FalsificationEntry(f.label, "INDETERMINATE",
                                              detail="corpus function has no finite lower exponent"))
            continue
        composed = SampleSeries(series.times, apply_rhs(F, series.times, series.values),
                                f"F(t,{f.label})")
        try:
            report = classify_growth(composed.finite_prefix(), config)
        except EFLabError as exc:  # resolution loss after overflow truncation
            entries.append(FalsificationEntry(f.label, "INDETERMINATE", detail=str(exc)))
            continue
        if report.growth_class is not GrowthClass.S3:
            entries.append(FalsificationEntry(
                f.label, "FAIL", report.growth_class.value,
                detail=f"composite is {report.growth_class.value}, not S3",
            ))
            continue
        bound = params.mu * pi_f + params.c
        margin = report.pi_hat - bound
        ok = margin >= -ASSUMPTION_II_SLACK
        entries.append(FalsificationEntry(
            f.label, "PASS" if ok else "FAIL", "S3", margin,
            f"pi_hat(F o f)={report.pi_hat:.6g} vs mu*pi(f)+c={bound:.6g}",
        ))
    warnings = [] if entries else ["empty corpus: vacuous pass"]
    passed = not any(e.status == "FAIL" for e in entries)
    return FalsificationReport("ii", passed, tuple(entries), tuple(warnings))
