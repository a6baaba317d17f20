"""Adaptive Dormand-Prince 5(4) integration of scalar n-th order IVPs.

The equation ``y^(n) = F(t, y)`` is reduced to the first-order system
``(y, y', ..., y^(n-1))' = (y', ..., y^(n-1), F(t, y))`` and advanced with
the DOPRI5 pair, PI step-size control and the classical quartic continuous
extension.  Integration stops at ``t_end``, when ``|y|`` crosses the
blow-up threshold, or when the step controller collapses below ``min_step``.

Problems that carry a :class:`PowerScaling` (``F = a t^sigma |y|^lam sgn y``)
and start at ``t0 > 0`` are integrated by default in log time: with
``s = ln t`` and ``y = t^m u(s)``, ``m = (sigma + n) / (1 - lam)``, the
equation becomes autonomous and every power-law particular solution is an
equilibrium of the ``u`` system.  Forward integration in ``t`` cannot track
those solutions, because perturbations grow like a positive power of ``t``
relative to them; in log time the equilibrium is represented exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .asymptotics import SampleSeries
from .errors import ConfigurationError, DomainError, EvaluationError

Rhs = Callable[[float, float], float]

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b - b_hat, used for the local error estimate
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension (Hairer, Norsett & Wanner, contd5)
_D = np.array([
    -12715105075 / 11282082432,
    0.0,
    87487479700 / 32700410799,
    -10690763975 / 1880347072,
    701980252875 / 199316789632,
    -1453857185 / 822651844,
    69997945 / 29380423,
])

_SAFETY = 0.9
_FAC_MIN = 0.2   # largest shrink per step
_FAC_MAX = 10.0  # largest growth per step
_BETA = 0.04     # PI stabilisation
_MAX_STEPS = 2_000_000


@dataclass(frozen=True)
class PowerScaling:
    """Declares that the right-hand side is ``coefficient * t^sigma * |y|^lam * sgn y``."""

    coefficient: float
    sigma: float
    lam: float

    def exponent(self, order: int) -> float:
        return (self.sigma + order) / (1.0 - self.lam)


@dataclass(frozen=True)
class IVProblem:
    order: int
    rhs: Rhs
    t0: float
    init: tuple[float, ...]
    label: str = ""
    scaling: PowerScaling | None = None

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ConfigurationError(f"order must be a positive integer, got {self.order!r}")
        init = tuple(float(v) for v in self.init)
        if len(init) != self.order:
            raise ConfigurationError(
                f"init must have {self.order} entries (y, y', ...), got {len(init)}"
            )
        if not all(math.isfinite(v) for v in init) or not math.isfinite(self.t0):
            raise ConfigurationError("initial time and values must be finite")
        object.__setattr__(self, "init", init)
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "order", int(self.order))

    def with_init(self, init, t0: float | None = None, label: str | None = None) -> "IVProblem":
        return IVProblem(
            self.order, self.rhs, self.t0 if t0 is None else t0, tuple(init),
            self.label if label is None else label, self.scaling,
        )


@dataclass(frozen=True)
class IntegrationControls:
    t_end: float
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float | None = None
    blowup_threshold: float = 1e12
    min_step: float | None = None

    def resolved(self, t0: float) -> "IntegrationControls":
        """Validate against ``t0`` and fill the span-dependent defaults."""
        errors = []
        for name in ("t_end", "rtol", "atol", "blowup_threshold"):
            if not math.isfinite(getattr(self, name)):
                errors.append(f"{name} must be finite")
        if not self.t_end > t0:
            errors.append(f"t_end={self.t_end!r} must exceed t0={t0!r}")
        if not self.rtol > 0:
            errors.append("rtol must be positive")
        if not self.atol > 0:
            errors.append("atol must be positive")
        if not self.blowup_threshold > 0:
            errors.append("blowup_threshold must be positive")
        if errors:
            raise ConfigurationError("; ".join(errors))
        span = self.t_end - t0
        max_step = span if self.max_step is None else self.max_step
        min_step = 1e-18 * span if self.min_step is None else self.min_step
        if not 0 < min_step < max_step:
            raise ConfigurationError(
                f"need 0 < min_step < max_step, got min_step={min_step!r}, max_step={max_step!r}"
            )
        return IntegrationControls(
            t_end=float(self.t_end), rtol=float(self.rtol), atol=float(self.atol),
            max_step=float(max_step), blowup_threshold=float(self.blowup_threshold),
            min_step=float(min_step),
        )


@dataclass(frozen=True)
class ReachedEnd:
    kind = "reached_end"


@dataclass(frozen=True)
class BlowUp:
    t_star: float
    kind = "blow_up"


@dataclass(frozen=True)
class StepFailure:
    t_fail: float
    reason: str = ""
    kind = "step_failure"


TerminationStatus = Union[ReachedEnd, BlowUp, StepFailure]


def status_to_dict(status: TerminationStatus) -> dict:
    if isinstance(status, BlowUp):
        return {"kind": status.kind, "t_star": float(status.t_star)}
    if isinstance(status, StepFailure):
        return {"kind": status.kind, "t_fail": float(status.t_fail), "reason": status.reason}
    return {"kind": status.kind}


class _PiecewiseDense:
    """Quartic continuous extension over accepted steps.

    Segment ``k`` spans ``[knots[k], knots[k+1]]``; ``seg_h[k]`` is the full
    step that produced it (longer than the segment only for a final step cut
    short at a blow-up crossing).
    """

    def __init__(self, knots, seg_h, seg_coef):
        self.knots = knots
        self.seg_h = seg_h
        self.seg_coef = seg_coef

    def __call__(self, x: np.ndarray) -> np.ndarray:
        n_seg = len(self.knots) - 1
        idx = np.clip(np.searchsorted(self.knots, x, side="right") - 1, 0, n_seg - 1)
        theta = ((x - self.knots[idx]) / self.seg_h[idx])[:, None]
        coef = self.seg_coef[idx]
        r1, r2, r3, r4, r5 = (coef[:, i, :] for i in range(5))
        return r1 + theta * (r2 + (1 - theta) * (r3 + theta * (r4 + (1 - theta) * r5)))


class _LogTimeDense:
    """Maps the ``u(s)`` interpolant back to ``(y, y', ...)`` at times ``t``."""

    def __init__(self, inner: _PiecewiseDense, transform: "_LogTimeTransform"):
        self.inner = inner
        self.transform = transform

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.transform.to_y(x, self.inner(np.log(x)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense numerical solution; ``states[k]`` holds ``(y, y', ..., y^(n-1))`` at ``times[k]``."""

    problem: IVProblem
    controls: IntegrationControls
    times: np.ndarray
    states: np.ndarray
    status: TerminationStatus
    accepted_steps: int
    rejected_steps: int
    method: str = "direct"
    _dense: Callable = field(default=None, repr=False)

    @property
    def order(self) -> int:
        return self.problem.order

    @property
    def t_last(self) -> float:
        return float(self.times[-1])

    def evaluate(self, grid) -> np.ndarray:
        """Interpolated states at ``grid``, shape ``(len(grid), n)``."""
        grid = np.atleast_1d(np.asarray(grid, dtype=float))
        times = self.times
        bad = ~((grid >= times[0]) & (grid <= times[-1]))
        if np.any(bad):
            point = float(grid[np.argmax(bad)])
            raise DomainError(
                f"grid point {point!r} outside trajectory domain [{times[0]!r}, {times[-1]!r}]"
            )
        if len(times) == 1:
            return np.repeat(self.states[:1], len(grid), axis=0)
        out = self._dense(grid)
        # stored states are returned verbatim at step endpoints
        hit = np.minimum(np.searchsorted(times, grid, side="left"), len(times) - 1)
        exact = times[hit] == grid
        out[exact] = self.states[hit[exact]]
        return out

    def summary(self) -> dict:
        return {
            "label": self.problem.label,
            "method": self.method,
            "status": status_to_dict(self.status),
            "t0": float(self.times[0]),
            "t_last": self.t_last,
            "final_state": [float(v) for v in self.states[-1]],
            "accepted_steps": int(self.accepted_steps),
            "rejected_steps": int(self.rejected_steps),
        }


def state_derivative(problem: IVProblem, t: float, state: Sequence[float]) -> np.ndarray:
    """First-order form of ``y^(n) = F(t, y)``."""
    y = float(state[0])
    try:
        top = float(problem.rhs(t, y))
    except EvaluationError:
        raise
    except (ArithmeticError, ValueError) as exc:
        raise EvaluationError(t, y, f"right-hand side failed at t={t!r}, y={y!r}: {exc}") from exc
    if not math.isfinite(top):
        raise EvaluationError(t, y)
    out = np.empty(problem.order)
    out[:-1] = state[1:]
    out[-1] = top
    return out


def _stages(fun, t: float, y: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    k = np.empty((7, len(y)))
    k[0] = k1
    for s in range(1, 7):
        ys = y + h * np.dot(_A[s], k[:s])
        if not np.all(np.isfinite(ys)):
            raise EvaluationError(t + _C[s] * h, float(ys[0]), "non-finite stage value")
        k[s] = fun(t + _C[s] * h, ys)
    return k


def _dense_coefficients(y0, y1, k, h) -> np.ndarray:
    r2 = y1 - y0
    r3 = h * k[0] - r2
    r4 = r2 - h * k[6] - r3
    r5 = h * np.dot(_D, k)
    return np.stack([y0, r2, r3, r4, r5])


def _eval_segment(coef: np.ndarray, theta: float) -> np.ndarray:
    r1, r2, r3, r4, r5 = coef
    return r1 + theta * (r2 + (1 - theta) * (r3 + theta * (r4 + (1 - theta) * r5)))


def _initial_step(fun, t0, y0, f0, ctl) -> float:
    # Hairer-Norsett-Wanner starting step heuristic
    sc = ctl.atol + ctl.rtol * np.abs(y0)
    d0 = np.max(np.abs(y0) / sc)
    d1 = np.max(np.abs(f0) / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, ctl.max_step, ctl.t_end - t0)
    try:
        f1 = fun(t0 + h0, y0 + h0 * f0)
    except EvaluationError:
        return max(ctl.min_step * 10, h0 * 1e-3)
    d2 = np.max(np.abs(f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return max(min(100 * h0, h1, ctl.max_step, ctl.t_end - t0), ctl.min_step * 10)


def _locate_crossing(magnitude, coef, t_left, h, threshold, min_step) -> float:
    """Bisection on the interpolant for ``magnitude = threshold`` inside one step."""
    lo, hi = 0.0, 1.0
    tol = min_step / h
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if magnitude(t_left + mid * h, _eval_segment(coef, mid)) >= threshold:
            hi = mid
        else:
            lo = mid
    return hi


def _dopri(fun, t0, y0, ctl, magnitude):
    """Core adaptive loop over a first-order system ``w' = fun(t, w)``.

    Returns ``(knots, states, seg_h, seg_coef, status, accepted, rejected)``;
    ``status`` times are in the loop's own time variable.
    """
    t = t0
    y = np.array(y0, dtype=float)
    knots, states, seg_h, seg_coef = [t], [y.copy()], [], []
    accepted = rejected = 0

    def done(status):
        coef = np.array(seg_coef) if seg_coef else np.zeros((0, 5, len(y0)))
        return (np.array(knots), np.array(states).reshape(len(states), len(y0)),
                np.array(seg_h), coef, status, accepted, rejected)

    if magnitude(t, y) >= ctl.blowup_threshold:
        raise ConfigurationError("initial |y| already exceeds the blow-up threshold")
    try:
        f = fun(t, y)
    except EvaluationError as exc:
        return done(StepFailure(float(t), str(exc)))

    h = _initial_step(fun, t, y, f, ctl)
    err_old = 1e-4
    last_rejected = False

    while True:
        if accepted + rejected > _MAX_STEPS:
            return done(StepFailure(float(t), "step budget exhausted"))
        final = h >= ctl.t_end - t
        if final:
            h = ctl.t_end - t
        elif h < ctl.min_step:
            return done(StepFailure(float(t), f"step size {float(h):.3e} below min_step"))
        if t + h == t:
            return done(StepFailure(float(t), "step size below floating-point resolution"))

        try:
            k = _stages(fun, t, y, h, f)
            y_new = y + h * np.dot(_B, k)
            if not np.all(np.isfinite(y_new)):
                raise EvaluationError(t + h, float(y_new[0]), "non-finite step result")
            k[6] = fun(t + h, y_new)
            scale = ctl.atol + ctl.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(h * np.dot(_E, k)) / scale))
        except EvaluationError:
            # a failed trial evaluation counts as a hard rejection
            rejected += 1
            last_rejected = True
            h *= _FAC_MIN
            continue

        if err > 1.0:
            rejected += 1
            h /= min(1 / _FAC_MIN, err ** (0.2 - 0.75 * _BETA) / _SAFETY)
            last_rejected = True
            continue

        coef = _dense_coefficients(y, y_new, k, h)
        accepted += 1
        t_new = ctl.t_end if final else t + h
        seg_h.append(h)
        seg_coef.append(coef)
        if magnitude(t_new, y_new) >= ctl.blowup_threshold:
            theta = _locate_crossing(magnitude, coef, t, h, ctl.blowup_threshold, ctl.min_step)
            t_star = t + theta * h
            state_star = _eval_segment(coef, theta)
            if not (t_star > t and np.all(np.isfinite(state_star))):
                t_star, state_star = t_new, y_new
            knots.append(t_star)
            states.append(state_star)
            return done(BlowUp(float(t_star)))
        knots.append(t_new)
        states.append(y_new.copy())
        if final:
            return done(ReachedEnd())
        t, y, f = t_new, y_new, k[6]

        fac = err ** (0.2 - 0.75 * _BETA) / err_old ** _BETA if err > 0 else 0.0
        fac = min(1 / _FAC_MIN, max(1 / _FAC_MAX, fac / _SAFETY))
        h_new = h / fac
        if last_rejected:
            h_new = min(h_new, h)
        h = min(h_new, ctl.max_step)
        err_old = max(err, 1e-4)
        last_rejected = False


class _LogTimeTransform:
    """Change of variables ``y(t) = t^m u(ln t)`` for power-law right-hand sides."""

    def __init__(self, order: int, scaling: PowerScaling):
        self.n = order
        self.a = float(scaling.coefficient)
        self.lam = float(scaling.lam)
        self.m = scaling.exponent(order)
        # rows[k] = coefficients (ascending) of prod_{i<k} (x + m - i):
        #   t^(k - m) y^(k) = sum_j rows[k][j] u^(j)
        rows = [np.array([1.0])]
        for k in range(1, order + 1):
            rows.append(np.convolve(rows[-1], np.array([self.m - (k - 1), 1.0])))
        self.rows = rows
        self.top = rows[order]  # monic, degree n

    def rhs(self, s: float, w: np.ndarray) -> np.ndarray:
        u = float(w[0])
        nonlin = self.a * abs(u) ** self.lam * (1.0 if u > 0 else -1.0 if u < 0 else 0.0)
        top = nonlin - float(np.dot(self.top[:-1], w))
        if not math.isfinite(top):
            raise EvaluationError(math.exp(s), u)
        out = np.empty(self.n)
        out[:-1] = w[1:]
        out[-1] = top
        return out

    def magnitude(self, s: float, w: np.ndarray) -> float:
        u = abs(float(w[0]))
        if u == 0.0:
            return 0.0
        expo = self.m * s + math.log(u)
        return math.exp(expo) if expo < 700 else math.inf

    def from_y(self, t: float, y_state: Sequence[float]) -> np.ndarray:
        w = np.zeros(self.n)
        for k in range(self.n):
            target = float(y_state[k]) * t ** (k - self.m)
            w[k] = target - float(np.dot(self.rows[k][:k], w[:k]))
        return w

    def to_y(self, t: np.ndarray, w: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty((len(t), self.n))
        for k in range(self.n):
            out[:, k] = t ** (self.m - k) * (w[:, : k + 1] @ self.rows[k])
        return out


def _uses_log_time(problem: IVProblem, method: str) -> bool:
    if method == "direct":
        return False
    eligible = (
        problem.scaling is not None and problem.t0 > 0 and problem.scaling.lam != 1.0
    )
    if method == "log_time":
        if not eligible:
            raise ConfigurationError(
                "log-time integration needs a power-law right-hand side with lam != 1 and t0 > 0"
            )
        return True
    if method != "auto":
        raise ConfigurationError(f"unknown integration method {method!r}")
    return eligible


def integrate(problem: IVProblem, controls: IntegrationControls, method: str = "auto") -> Trajectory:
    """Integrate ``problem`` up to ``controls.t_end``.

    ``method`` is ``"direct"``, ``"log_time"`` or ``"auto"`` (log time
    whenever the problem carries a power-law scaling and starts at t0 > 0).
    """
    ctl = controls.resolved(problem.t0)
    if not _uses_log_time(problem, method):
        fun = lambda t, w: state_derivative(problem, t, w)
        mag = lambda t, w: abs(float(w[0]))
        knots, states, seg_h, coef, status, acc, rej = _dopri(fun, problem.t0, problem.init, ctl, mag)
        return Trajectory(
            problem=problem, controls=ctl, times=knots, states=states, status=status,
            accepted_steps=acc, rejected_steps=rej, method="direct",
            _dense=_PiecewiseDense(knots, seg_h, coef),
        )

    tr = _LogTimeTransform(problem.order, problem.scaling)
    s0, s_end = math.log(problem.t0), math.log(ctl.t_end)
    span = s_end - s0
    ctl_s = IntegrationControls(
        t_end=s_end, rtol=ctl.rtol, atol=ctl.atol,
        max_step=span, blowup_threshold=ctl.blowup_threshold,
        min_step=ctl.min_step * span / (ctl.t_end - problem.t0),
    ).resolved(s0)
    w0 = tr.from_y(problem.t0, problem.init)
    knots, w_states, seg_h, coef, status, acc, rej = _dopri(tr.rhs, s0, w0, ctl_s, tr.magnitude)
    times = np.exp(knots)
    times[0] = problem.t0
    if isinstance(status, ReachedEnd):
        times[-1] = ctl.t_end
        t_status = status
    elif isinstance(status, BlowUp):
        t_status = BlowUp(float(np.exp(status.t_star)))
    else:
        t_status = StepFailure(float(np.exp(status.t_fail)), status.reason)
    states = tr.to_y(times, w_states)
    states[0] = problem.init
    dense = _LogTimeDense(_PiecewiseDense(knots, seg_h, coef), tr)
    return Trajectory(
        problem=problem, controls=ctl, times=times, states=states, status=t_status,
        accepted_steps=acc, rejected_steps=rej, method="log_time", _dense=dense,
    )


def fixed_step_solve(problem: IVProblem, h: float, t_end: float) -> np.ndarray:
    """Plain fifth-order DOPRI steps of size ``h``; returns the state at ``t_end``."""
    steps = int(round((t_end - problem.t0) / h))
    if steps < 1 or not math.isclose(steps * h, t_end - problem.t0, rel_tol=1e-9):
        raise ConfigurationError("t_end - t0 must be a positive multiple of h")
    fun = lambda t, w: state_derivative(problem, t, w)
    t = problem.t0
    y = np.array(problem.init, dtype=float)
    for i in range(steps):
        k = _stages(fun, t, y, h, fun(t, y))
        y = y + h * np.dot(_B, k)
        t = problem.t0 + (i + 1) * h
    return y


def resample(trajectory: Trajectory, grid, derivative_index: int = 0,
             label: str | None = None) -> SampleSeries:
    """Dense-output values of ``y^(j)`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    if not 0 <= derivative_index < trajectory.order:
        raise ConfigurationError(
            f"derivative_index must lie in [0, {trajectory.order - 1}], got {derivative_index}"
        )
    if grid.ndim != 1 or len(grid) == 0:
        raise ConfigurationError("grid must be a nonempty vector")
    if np.any(np.diff(grid) <= 0):
        raise ConfigurationError("grid must be strictly increasing")
    values = trajectory.evaluate(grid)[:, derivative_index]
    if label is None:
        base = trajectory.problem.label or "y"
        label = f"{base}^({derivative_index})" if derivative_index else base
    return SampleSeries(grid, values, label)


def sign_changes(series: SampleSeries) -> np.ndarray:
    """Crossing times: exact zeros at samples plus linear-interpolated strict alternations."""
    t = np.asarray(series.times, dtype=float)
    v = np.asarray(series.values, dtype=float)
    zeros = t[v == 0.0]
    strict = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
    t0, t1, v0, v1 = t[strict], t[strict + 1], v[strict], v[strict + 1]
    interp = t0 + (t1 - t0) * v0 / (v0 - v1)
    return np.sort(np.concatenate([zeros, interp]))
