"""Explicit Euler integration of W_t = Div(A(W) DW) + g(W) with step-size control,
blow-up detection and diagnostics recording."""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import functionals
from .errors import ConvergenceError
from .mesh import FieldSet, flux_divergence_padded, gradient, integrate, pad

LAMBDA_FLOOR = 1e-12

REACHED_T = "ReachedT"
BLOWUP = "BlowupDetected"
DT_FLOOR = "StabilityFloor"
NUMERICAL_FAILURE = "NumericalFailure"
WALL_LIMIT = "WallClockLimit"


@dataclass
class RunConfig:
    safety: float = 0.5
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    threshold: float = 1e6
    # cap dt so one step changes W by at most this fraction through g
    reaction_fraction: float | None = 0.05
    output_interval: float | None = None
    diagnostics: tuple[str, ...] = ("l2",)
    accumulate: tuple[str, ...] = ()
    params: dict = field(default_factory=dict)
    max_steps: int = 50_000_000
    # seconds; None runs to completion
    max_wall: float | None = None


@dataclass
class RunState:
    field: FieldSet
    time: float = 0.0
    steps: int = 0
    dt_history: list[float] = field(default_factory=list)


@dataclass
class RunReport:
    termination: str
    time: float
    max_value: float
    diagnostics: functionals.DiagnosticsSeries
    final: FieldSet
    steps: int
    location: tuple | None = None
    accumulated: dict[str, float] = field(default_factory=dict)

    def summary(self) -> str:
        lines = [f"termination = {self.termination}", f"time = {self.time!r}", f"steps = {self.steps}", f"max_abs = {self.max_value!r}"]
        if self.termination == REACHED_T:
            lines.append("note = no blow-up observed before T_end")
        if self.location is not None:
            lines.append("location = " + ",".join(str(i) for i in self.location))
        return "\n".join(lines) + "\n"


def _row_sums(A: np.ndarray, layout: str) -> np.ndarray:
    A = np.abs(A)
    return A.sum(axis=1) if layout == "component" else A.sum(axis=(2, 3))


def max_row_sum(model, W: np.ndarray) -> float:
    """max over cells of the largest row sum of |A(W)|."""
    return float(_row_sums(model.tensor_field(W), model.layout).max())


def _limit(grid, lam: float, sup: float, rate: float, safety: float, dt_max: float, reaction_fraction) -> float:
    dt = safety * min(h * h for h in grid.spacing) / (2 * grid.dim * max(lam, LAMBDA_FLOOR))
    if reaction_fraction is not None and rate > 0:
        dt = min(dt, reaction_fraction * max(sup, 1.0) / rate)
    return min(dt, dt_max)


def _dt_raw(state: RunState, model, safety: float, dt_max: float, reaction_fraction: float | None) -> float:
    W = state.field.values
    rate = 0.0
    if reaction_fraction is not None and not model.reaction.needs_gradient:
        rate = float(np.sqrt((model.reaction_field(W) ** 2).sum(axis=0)).max())
    return _limit(state.field.grid, max_row_sum(model, W), state.field.sup(), rate, safety, dt_max, reaction_fraction)


def stable_dt(state: RunState, model, safety: float = 0.5, dt_min: float = 1e-12, dt_max: float = 1e-2, reaction_fraction: float | None = None) -> float:
    """safety * min h^2 / (2 dim Lambda), Lambda the max row sum of |A| floored at 1e-12.

    Optionally capped by a reaction-rate limit; never below ``dt_min`` and
    never above ``dt_max``.
    """
    return max(_dt_raw(state, model, safety, dt_max, reaction_fraction), dt_min)


def _evaluate(model, field_: FieldSet):
    """(Div(A DW) + g, max row sum of |A| over cells, max |g|) from one tensor evaluation."""
    grid = field_.grid
    Wp = pad(grid, field_.values)
    Ap = model.tensor_field(Wp)
    out = flux_divergence_padded(grid.spacing, Wp, Ap, model.layout)
    inner = (Ellipsis,) + (slice(1, -1),) * grid.dim
    lam = float(_row_sums(Ap[inner], model.layout).max())
    DW = gradient(grid, field_).values if model.reaction.needs_gradient else None
    g = model.reaction_field(field_.values, DW)
    rate = 0.0 if DW is not None else float(np.sqrt((g**2).sum(axis=0)).max())
    return out + g, lam, rate


def rhs(model, field_: FieldSet) -> np.ndarray:
    """Div(A(W) DW) + g(W) at cell centres."""
    return _evaluate(model, field_)[0]


def step(state: RunState, model, dt: float) -> RunState:
    """One forward-Euler step; a non-finite result is returned as is for the caller to flag."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        new = state.field.values + dt * rhs(model, state.field)
    t = state.time + dt
    return RunState(FieldSet(state.field.grid, new, t), t, state.steps + 1, state.dt_history + [dt])


def detect_blowup(state: RunState, threshold: float = 1e6) -> bool:
    if not state.field.is_finite():
        return True
    return state.field.sup() >= threshold


def run(model, W0: FieldSet, T_end: float, config: RunConfig | None = None) -> RunReport:
    """Integrate to ``T_end`` or until blow-up, dt floor or a non-finite value."""
    if not T_end > 0:
        raise ValueError("T_end must be positive")
    cfg = config or RunConfig()
    interval = cfg.output_interval or T_end / 100
    series = functionals.DiagnosticsSeries(["dt", "sup"] + list(cfg.diagnostics) + [f"int_{n}" for n in cfg.accumulate])
    acc = {n: 0.0 for n in cfg.accumulate}

    def record(st: RunState, dt: float):
        vals = functionals.evaluate(cfg.diagnostics, st.field, model, cfg.params)
        vals.update({f"int_{n}": v for n, v in acc.items()})
        vals["dt"] = dt
        vals["sup"] = st.field.sup()
        series.append(st.time, vals)

    state = RunState(W0.copy(), W0.time, 0, [])
    state.field.time = state.time
    t_start = state.time
    record(state, 0.0)
    sup = state.field.sup()
    next_out = t_start + interval
    t_final = t_start + T_end
    termination, location = REACHED_T, None
    # dt history is kept by the loop rather than on every state copy
    history: list[float] = []
    deadline = None if cfg.max_wall is None else _time.monotonic() + cfg.max_wall
    while state.time < t_final - 1e-14 * max(1.0, abs(t_final)):
        if state.steps >= cfg.max_steps:
            termination = DT_FLOOR
            break
        if deadline is not None and state.steps % 64 == 0 and _time.monotonic() > deadline:
            termination = WALL_LIMIT
            break
        F, lam, rate = _evaluate(model, state.field)
        dt = _limit(state.field.grid, lam, sup, rate, cfg.safety, cfg.dt_max, cfg.reaction_fraction)
        if dt < cfg.dt_min:
            termination = DT_FLOOR
            break
        dt = min(dt, next_out - state.time, t_final - state.time)
        rates = functionals.evaluate(cfg.accumulate, state.field, model, cfg.params) if cfg.accumulate else {}
        with np.errstate(over="ignore", invalid="ignore"):
            new = state.field.values + dt * F
        t = state.time + dt
        if abs(t - next_out) <= 1e-12 * max(1.0, abs(t)):
            t = next_out
        if abs(t - t_final) <= 1e-12 * max(1.0, abs(t)):
            t = t_final
        state = RunState(FieldSet(state.field.grid, new, t), t, state.steps + 1, history)
        history.append(dt)
        for n, r in rates.items():
            acc[n] += r * dt
        sup = state.field.sup()
        if not np.isfinite(sup):
            termination, location = NUMERICAL_FAILURE, state.field.first_nonfinite()
            break
        if sup >= cfg.threshold:
            termination = BLOWUP
            record(state, dt)
            break
        if t >= next_out or t >= t_final:
            record(state, dt)
            next_out += interval
    max_value = state.field.sup()
    return RunReport(termination, state.time, max_value, series, state.field, state.steps, location, acc)


def steady_state(model, W0: FieldSet, tol: float = 1e-8, max_time: float = 1e3, safety: float = 0.5, check_every: int = 200) -> tuple[FieldSet, float]:
    """March forward Euler until the L2 norm of the right-hand side drops to ``tol``.

    Returns (field, residual). Raises ConvergenceError if ``max_time`` passes first.
    """
    field_ = W0.copy()
    t = 0.0
    n = 0
    while t < max_time:
        F, lam, _ = _evaluate(model, field_)
        if n % check_every == 0:
            res = float(np.sqrt(integrate(field_.grid, (F**2).sum(axis=0))))
            if not np.isfinite(res):
                raise ConvergenceError(f"steady march produced a non-finite residual at t={t}")
            if res <= tol:
                return FieldSet(field_.grid, field_.values, t), res
        dt = safety * min(h * h for h in field_.grid.spacing) / (2 * field_.grid.dim * max(lam, LAMBDA_FLOOR))
        field_ = FieldSet(field_.grid, field_.values + dt * F, t + dt)
        t += dt
        n += 1
    raise ConvergenceError(f"no steady state within t={max_time} (residual {res:.3g})")
