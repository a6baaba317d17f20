"""Checks of the derivative rules, the exponent identity, the exclusion of
fast-growing solutions, vanishing subsequences and the long-term dichotomy
on concrete functions and trajectories.

Every check here is evidence from finite windows.  Verdicts that cannot be
settled on the data are reported as undetermined instead of being guessed.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .asymptotics import (
    NEG_INF,
    POS_INF,
    ClassifierConfig,
    GrowthClass,
    GrowthReport,
    SampleSeries,
    analysis_grid,
    classify_growth,
)
from .equations import EFEquation
from .errors import ConfigurationError, HypothesisViolation, ResolutionError
from .odecore import (
    BlowUp,
    IntegrationControls,
    IVProblem,
    ReachedEnd,
    StepFailure,
    Trajectory,
    integrate,
    sign_changes,
    status_to_dict,
)

T1_SLACK = 0.1
IDENTITY_PHI_FLATNESS = 0.05


@dataclass(frozen=True)
class TheoremVerdict:
    clause: str
    status: str  # "holds", "fails", "not_applicable" or "undetermined"
    margin: float | None = None
    details: str = ""

    @property
    def holds(self) -> bool:
        return self.status == "holds"

    def to_dict(self) -> dict:
        return {"clause": self.clause, "status": self.status, "holds": self.holds,
                "margin": self.margin, "details": self.details}


def _is_s3(r: GrowthReport) -> bool:
    return r.growth_class is GrowthClass.S3


def check_theorem1(f_report: GrowthReport, fprime_report: GrowthReport) -> list[TheoremVerdict]:
    """Derivative rules for a function ``f`` and its derivative ``f'``.

    T1.i   both S3        => pi(f') <= pi(f) - 1        (slack 0.1)
    T1.ii  f in S2        => f' in S2, or S3 with pi(f') = -inf
    T1.iii f' in S1       => f in S1
    T1.cor pi(f) = -inf   => pi(f') = -inf
    """
    clauses = ("T1.i", "T1.ii", "T1.iii", "T1.cor")
    if not (f_report.confident and fprime_report.confident):
        return [TheoremVerdict(c, "undetermined", details="input report not confident")
                for c in clauses]
    f, fp = f_report, fprime_report
    out = []

    if _is_s3(f) and _is_s3(fp):
        if fp.pi_hat == NEG_INF:
            out.append(TheoremVerdict("T1.i", "holds", POS_INF, "pi(f') = -inf"))
        elif f.pi_hat == NEG_INF:
            out.append(TheoremVerdict("T1.i", "fails", NEG_INF, "pi(f) = -inf but pi(f') finite"))
        else:
            margin = (f.pi_hat - 1.0) - fp.pi_hat
            status = "holds" if margin >= -T1_SLACK else "fails"
            out.append(TheoremVerdict("T1.i", status, margin,
                                      f"pi(f')={fp.pi_hat:.6g}, pi(f)-1={f.pi_hat - 1:.6g}"))
    else:
        out.append(TheoremVerdict("T1.i", "not_applicable", details="f and f' not both S3"))

    if f.growth_class is GrowthClass.S2:
        ok = fp.growth_class is GrowthClass.S2 or (_is_s3(fp) and fp.pi_hat == NEG_INF)
        out.append(TheoremVerdict("T1.ii", "holds" if ok else "fails",
                                  details=f"f' is {fp.growth_class.value}, pi(f')={fp.pi_hat!r}"))
    else:
        out.append(TheoremVerdict("T1.ii", "not_applicable", details="f not S2"))

    if fp.growth_class is GrowthClass.S1:
        ok = f.growth_class is GrowthClass.S1
        out.append(TheoremVerdict("T1.iii", "holds" if ok else "fails",
                                  details=f"f is {f.growth_class.value}"))
    else:
        out.append(TheoremVerdict("T1.iii", "not_applicable", details="f' not S1"))

    if _is_s3(f) and f.pi_hat == NEG_INF:
        ok = fp.pi_hat == NEG_INF
        out.append(TheoremVerdict("T1.cor", "holds" if ok else "fails",
                                  details=f"pi(f')={fp.pi_hat!r}"))
    else:
        out.append(TheoremVerdict("T1.cor", "not_applicable", details="pi(f) is not -inf"))
    return out


def pi_identity_residual(phi_report: GrowthReport, y_report: GrowthReport, lam: float,
                         composed_report: GrowthReport) -> float:
    """``pi(phi |y|^lam sgn y) - (lam pi(y) + pi(phi))``; needs pi(phi) = xi(phi)."""
    if not _is_s3(phi_report) or not (math.isfinite(phi_report.pi_hat) and math.isfinite(phi_report.xi_hat)):
        raise HypothesisViolation("phi must be S3 with finite exponents")
    if abs(phi_report.xi_hat - phi_report.pi_hat) > IDENTITY_PHI_FLATNESS:
        raise HypothesisViolation(
            f"phi needs pi = xi; got pi={phi_report.pi_hat:.6g}, xi={phi_report.xi_hat:.6g}"
        )
    if not _is_s3(y_report) or not math.isfinite(y_report.pi_hat):
        raise HypothesisViolation("y must be S3 with a finite lower exponent")
    if not math.isfinite(composed_report.pi_hat):
        raise HypothesisViolation("composed function has a sentinel lower exponent")
    return composed_report.pi_hat - (lam * y_report.pi_hat + phi_report.pi_hat)


def theorem3_bound(n: int, c: float, mu: float) -> float:
    """Upper bound ``-(n + c)/(mu - 1)`` on pi(y); negative whenever mu > 1 and c > -n."""
    if not mu > 1:
        raise ConfigurationError(f"mu must exceed 1, got {mu!r}")
    if not c > -n:
        raise ConfigurationError(f"c must exceed -n = {-n}, got {c!r}")
    return -(n + c) / (mu - 1.0)


# --- trajectory analysis ------------------------------------------------------

MIN_BLOCKS = 10


@dataclass(frozen=True)
class WindowConfig:
    """Sampling of a trajectory on the log-time axis ``tau = ln(1 + t - t0)``."""

    samples: int = 4000
    blocks: int = 20
    window_fraction: float = 0.25
    min_points: int = 5
    decay_factor: float = 0.1

    def __post_init__(self):
        if self.blocks < MIN_BLOCKS:
            raise ResolutionError(f"need at least {MIN_BLOCKS} blocks, got {self.blocks}")
        if self.samples < 2 * self.blocks:
            raise ResolutionError("need at least two samples per block")
        if not 0 < self.window_fraction <= 1:
            raise ConfigurationError("window_fraction must lie in (0, 1]")


def _tau(t, t0):
    return np.log1p(np.asarray(t, dtype=float) - t0)


def _log_time_grid(t0: float, t_last: float, samples: int, tau_start: float = 0.0) -> np.ndarray:
    tau_end = float(_tau(t_last, t0))
    grid = t0 + np.expm1(np.linspace(tau_start, tau_end, samples))
    grid[-1] = t_last
    if tau_start == 0.0:
        grid[0] = t0
    return np.unique(grid)


def derivative_values(trajectory: Trajectory, grid: np.ndarray, j: int) -> np.ndarray:
    """``y^(j)`` on ``grid``; ``j = n`` is evaluated through the right-hand side."""
    n = trajectory.order
    if not 0 <= j <= n:
        raise ConfigurationError(f"derivative index must lie in [0, {n}], got {j}")
    states = trajectory.evaluate(grid)
    if j < n:
        return states[:, j]
    rhs = trajectory.problem.rhs
    return np.array([rhs(float(t), float(y)) for t, y in zip(grid, states[:, 0])])


@dataclass(frozen=True, eq=False)
class VanishingReport:
    derivative_index: int
    times: np.ndarray
    values: np.ndarray
    trend_established: bool
    tail_crossings: int = 0

    def to_dict(self) -> dict:
        return {
            "derivative_index": self.derivative_index,
            "trend_established": self.trend_established,
            "tail_crossings": self.tail_crossings,
            "times": [float(t) for t in self.times],
            "values": [float(v) for v in self.values],
        }


def _longest_nonincreasing(mags: Sequence[float]) -> list[int]:
    """Indices of a longest subsequence with nonincreasing magnitudes."""
    keys = [-m for m in mags]  # nonincreasing mags == nondecreasing keys
    tails: list[float] = []
    tail_idx: list[int] = []
    parent = [-1] * len(keys)
    for i, k in enumerate(keys):
        pos = bisect.bisect_right(tails, k)
        if pos == len(tails):
            tails.append(k)
            tail_idx.append(i)
        else:
            tails[pos] = k
            tail_idx[pos] = i
        parent[i] = tail_idx[pos - 1] if pos > 0 else -1
    chain = []
    i = tail_idx[-1] if tail_idx else -1
    while i >= 0:
        chain.append(i)
        i = parent[i]
    return chain[::-1]


def find_vanishing_subsequence(trajectory: Trajectory, j: int,
                               window: WindowConfig | None = None) -> VanishingReport:
    """Pick increasing ``t_k`` along which ``|y^(j)(t_k)|`` is nonincreasing.

    Candidates are the zero crossings of ``y^(j)`` and the per-block minima of
    ``|y^(j)|`` on the log-time grid.  The trend counts as established when at
    least ``min_points`` are selected and the last magnitude is at most
    ``decay_factor`` times the first, or when a crossing falls in the final
    window.
    """
    window = window or WindowConfig()
    t0, t_last = float(trajectory.times[0]), trajectory.t_last
    if len(trajectory.times) < 2 or not t_last > t0:
        raise ResolutionError("trajectory too short for subsequence search")
    grid = _log_time_grid(t0, t_last, window.samples)
    values = derivative_values(trajectory, grid, j)
    series = SampleSeries(grid, values, f"y^({j})")
    crossings = sign_changes(series)

    tau = _tau(grid, t0)
    edges = np.linspace(0.0, tau[-1], window.blocks + 1)
    block = np.clip(np.searchsorted(edges, tau, side="right") - 1, 0, window.blocks - 1)
    mags = np.abs(values)
    cand_t = list(crossings)
    cand_v = list(derivative_values(trajectory, crossings, j)) if len(crossings) else []
    for b in range(window.blocks):
        members = np.nonzero(block == b)[0]
        if len(members) == 0:
            continue
        k = members[np.argmin(mags[members])]
        cand_t.append(grid[k])
        cand_v.append(values[k])
    order = np.argsort(cand_t, kind="stable")
    cand_t = np.asarray(cand_t)[order]
    cand_v = np.asarray(cand_v, dtype=float)[order]
    keep = np.concatenate([[True], np.diff(cand_t) > 0]) if len(cand_t) else np.array([], bool)
    cand_t, cand_v = cand_t[keep], cand_v[keep]

    chain = _longest_nonincreasing(list(np.abs(cand_v)))
    times, vals = cand_t[chain], cand_v[chain]
    tail_start = tau[-1] * (1.0 - window.window_fraction)
    tail_crossings = int(np.count_nonzero(_tau(crossings, t0) >= tail_start)) if len(crossings) else 0
    decayed = (
        len(chain) >= window.min_points
        and abs(vals[-1]) <= window.decay_factor * abs(vals[0])
    )
    return VanishingReport(j, times, vals, bool(decayed or tail_crossings > 0), tail_crossings)


@dataclass(frozen=True, eq=False)
class Theorem3Result:
    applicable: bool
    smallest_index: int | None
    reports: tuple[VanishingReport, ...] = ()
    status: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.applicable and self.smallest_index is not None and \
            self.smallest_index <= len(self.reports) - 1

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "smallest_index": self.smallest_index,
            "holds": self.holds,
            "status": self.status,
            "established": [r.trend_established for r in self.reports],
        }


def theorem3_from_trajectory(trajectory: Trajectory, window: WindowConfig | None = None) -> Theorem3Result:
    status = status_to_dict(trajectory.status)
    if not isinstance(trajectory.status, ReachedEnd):
        return Theorem3Result(False, None, (), status)
    n = trajectory.order
    reports = tuple(find_vanishing_subsequence(trajectory, j, window) for j in range(n + 1))
    i = n + 1
    for j in range(n, -1, -1):
        if not reports[j].trend_established:
            break
        i = j
    return Theorem3Result(True, i, reports, status)


def check_theorem3(problem: IVProblem, controls: IntegrationControls,
                   window: WindowConfig | None = None) -> Theorem3Result:
    """Smallest ``i`` such that every ``y^(j)``, ``i <= j <= n``, has a vanishing subsequence.

    ``i = n + 1`` signals that even the top derivative showed no such trend.
    """
    return theorem3_from_trajectory(integrate(problem, controls), window)


@dataclass(frozen=True)
class Oscillatory:
    crossing_count: int
    kind = "oscillatory"


@dataclass(frozen=True)
class MonotoneToZero:
    window_start: float
    kind = "monotone_to_zero"


@dataclass(frozen=True)
class Undetermined:
    reason: str
    kind = "undetermined"


LongTermClass = Union[Oscillatory, MonotoneToZero, BlowUp, Undetermined]

OSCILLATION_CROSSINGS = 5
MONOTONE_DECAY = 0.2


def longterm_to_dict(c: LongTermClass) -> dict:
    if isinstance(c, Oscillatory):
        return {"kind": c.kind, "crossing_count": c.crossing_count}
    if isinstance(c, MonotoneToZero):
        return {"kind": c.kind, "window_start": float(c.window_start)}
    if isinstance(c, BlowUp):
        return {"kind": c.kind, "t_star": float(c.t_star)}
    return {"kind": c.kind, "reason": c.reason}


def classify_longterm(trajectory: Trajectory, window_fraction: float = 0.25,
                      samples: int = 2000) -> LongTermClass:
    """Oscillatory, monotone decay to zero, blow-up, or undetermined.

    The final window is the last ``window_fraction`` of the log-time axis
    ``ln(1 + t - t0)``.
    """
    if not 0 < window_fraction <= 1:
        raise ConfigurationError("window_fraction must lie in (0, 1]")
    status = trajectory.status
    if isinstance(status, BlowUp):
        return BlowUp(status.t_star)
    if isinstance(status, StepFailure):
        return Undetermined(f"integration failed at t={status.t_fail!r}: {status.reason}")
    t0, t_last = float(trajectory.times[0]), trajectory.t_last
    tau_end = float(_tau(t_last, t0))
    tau_start = tau_end * (1.0 - window_fraction)
    grid = _log_time_grid(t0, t_last, samples, tau_start)
    y = trajectory.evaluate(grid)[:, 0]

    nonzero = y != 0
    crossings = 0
    if nonzero.sum() >= 2:
        crossings = len(sign_changes(SampleSeries(grid[nonzero], y[nonzero])))
    if crossings >= OSCILLATION_CROSSINGS:
        return Oscillatory(crossings)

    mags = np.abs(y)
    noise = 1e-12 * float(mags.max(initial=0.0))
    nonincreasing = bool(np.all(np.diff(mags) <= noise))
    if nonincreasing and mags[-1] <= MONOTONE_DECAY * mags[0]:
        return MonotoneToZero(float(grid[0]))
    if crossings:
        return Undetermined(f"only {crossings} sign changes in the final window")
    if not nonincreasing:
        return Undetermined("|y| not monotone in the final window")
    return Undetermined(
        f"|y| decayed only by a factor {mags[-1] / mags[0]:.3g} across the final window"
    )


# --- scans -------------------------------------------------------------------


def classify_trajectory(trajectory: Trajectory, config: ClassifierConfig | None = None,
                        j: int = 0) -> GrowthReport:
    """Growth class of ``y^(j)`` over ``[max(t0, 1), t_last]``."""
    config = config or ClassifierConfig()
    t_start = max(float(trajectory.times[0]), 1.0)
    if not trajectory.t_last > t_start:
        raise ResolutionError("trajectory does not extend beyond t = 1")
    grid = analysis_grid(t_start, trajectory.t_last, config)
    values = derivative_values(trajectory, grid, j)
    return classify_growth(SampleSeries(grid, values, trajectory.problem.label), config)


@dataclass(frozen=True, eq=False)
class ScanEntry:
    index: int
    init: tuple[float, ...]
    trajectory: Trajectory
    growth: GrowthReport | None
    longterm: LongTermClass
    theorem3: Theorem3Result
    error: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "init": list(self.init),
            "trajectory": self.trajectory.summary(),
            "growth": self.growth.to_dict() if self.growth is not None else None,
            "longterm": longterm_to_dict(self.longterm),
            "theorem3": self.theorem3.to_dict(),
            "error": self.error,
        }


def _scan_one(index, init, problem, controls, config, window) -> ScanEntry:
    p = problem.with_init(init, label=f"{problem.label} #{index}")
    traj = integrate(p, controls)
    growth, error = None, ""
    if isinstance(traj.status, ReachedEnd):
        try:
            growth = classify_trajectory(traj, config)
        except ResolutionError as exc:
            error = str(exc)
    return ScanEntry(index, tuple(init), traj, growth, classify_longterm(traj),
                     theorem3_from_trajectory(traj, window), error)


def scan(equation: EFEquation, ic_grid: Sequence[Sequence[float]], controls: IntegrationControls,
         config: ClassifierConfig | None = None, t0: float = 1.0, jobs: int = 1,
         window: WindowConfig | None = None) -> list[ScanEntry]:
    """Integrate, classify and check every initial vector; results keep ``ic_grid`` order."""
    config = config or ClassifierConfig()
    template = equation.problem(t0, [0.0] * equation.order, equation.describe())
    for k, init in enumerate(ic_grid):
        if len(init) != equation.order:
            raise ConfigurationError(f"ic_grid[{k}] has {len(init)} entries, need {equation.order}")
    args = [(k, tuple(float(v) for v in init), template, controls, config, window)
            for k, init in enumerate(ic_grid)]
    if jobs > 1 and len(args) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda a: _scan_one(*a), args))
    return [_scan_one(*a) for a in args]


@dataclass(frozen=True, eq=False)
class Lemma2Report:
    passed: bool
    entries: tuple[ScanEntry, ...]
    reached_end: int
    blow_ups: int
    step_failures: int
    confident_s1: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "reached_end": self.reached_end,
            "blow_ups": self.blow_ups,
            "step_failures": self.step_failures,
            "confident_s1": self.confident_s1,
            "entries": [
                {
                    "index": e.index,
                    "init": list(e.init),
                    "status": status_to_dict(e.trajectory.status),
                    "class": e.growth.growth_class.value if e.growth else None,
                    "confident": e.growth.confident if e.growth else None,
                }
                for e in self.entries
            ],
        }


def lemma2_from_scan(entries: Sequence[ScanEntry]) -> Lemma2Report:
    reached = [e for e in entries if isinstance(e.trajectory.status, ReachedEnd)]
    blow = sum(isinstance(e.trajectory.status, BlowUp) for e in entries)
    fail = sum(isinstance(e.trajectory.status, StepFailure) for e in entries)
    s1 = sum(
        1 for e in reached
        if e.growth is not None and e.growth.growth_class is GrowthClass.S1 and e.growth.confident
    )
    return Lemma2Report(s1 == 0, tuple(entries), len(reached), blow, fail, s1)


def lemma2_harness(equation: EFEquation, ic_grid, controls: IntegrationControls,
                   config: ClassifierConfig | None = None, t0: float = 1.0,
                   jobs: int = 1) -> Lemma2Report:
    """No trajectory that survives to ``t_end`` may classify S1 with confidence.

    Blow-ups are consistent with the claim (no solution on a half-line) and
    are counted separately.
    """
    if not equation.superlinear:
        raise HypothesisViolation("the exclusion of S1 solutions is checked for lambda > 1 only")
    return lemma2_from_scan(scan(equation, ic_grid, controls, config, t0, jobs))
