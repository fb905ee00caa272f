"""Feedback policies from a solved value field, trajectory rollout, and
discounted cost accounting.

The policy at a state checks the obstacles in a fixed priority order
(impulse, then player-2 switch, then player-1 switch) and otherwise plays
the saddle of the one-step continue values over the control grids.  Events
are instantaneous: the clock does not advance while they are applied, and a
guard allows at most one impulse and one switch per player per time step so
that a too-loose binding tolerance cannot chatter forever.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .discretize import GridSpec, default_time_step, interp_weights, semigroup_step
from .operators import Variant
from .problem import ProblemSpec, eval_dynamics, eval_running_cost

__all__ = [
    "PolicyDecision",
    "SwitchEvent",
    "ImpulseEvent",
    "HybridTrajectory",
    "ChatterError",
    "decide",
    "simulate",
    "evaluate_cost",
    "rollout_value_gap",
    "RolloutReport",
]

CONTINUE = "continue"
SWITCH1 = "switch1"
SWITCH2 = "switch2"
IMPULSE = "impulse"

# ten times the default solver tolerance: binding detection must sit above
# fixed-point noise
DEFAULT_ACTION_TOL = 1e-8


class ChatterError(RuntimeError):
    """A second impulse (or second switch by one player) was requested within
    a single time step; the binding tolerance is too large for this field."""


@dataclass(frozen=True)
class PolicyDecision:
    kind: str
    u1: float | None = None
    u2: float | None = None
    target: int | None = None          # mode index for switches
    impulse_index: int | None = None


@dataclass
class SwitchEvent:
    time: float
    player: int
    from_mode: int
    to_mode: int
    cost: float


@dataclass
class ImpulseEvent:
    time: float
    index: int
    vector: np.ndarray
    cost: float


@dataclass
class HybridTrajectory:
    """Step-sampled rollout record with per-term discounted accumulators.

    Rows describe the state after any same-instant events: ``states[n]`` is
    the position at time ``times[n]`` from which controls ``controls[n]``
    act over the next step, incurring running cost ``step_costs[n]``.
    """

    dt: float
    discount: float
    times: np.ndarray
    states: np.ndarray        # (steps, n)
    modes: np.ndarray         # (steps, 2) int
    controls: np.ndarray      # (steps, 2)
    step_costs: np.ndarray    # (steps,) running-cost samples k(...)
    event_flags: np.ndarray   # (steps, 3) ints: impulses, p1 switches, p2 switches
    switch1_events: list[SwitchEvent] = field(default_factory=list)
    switch2_events: list[SwitchEvent] = field(default_factory=list)
    impulse_events: list[ImpulseEvent] = field(default_factory=list)
    running_total: float = 0.0    # discounted integral of k
    switch1_total: float = 0.0    # discounted player-1 switching outlay (enters J with -)
    switch2_total: float = 0.0    # discounted player-2 switching outlay (enters J with +)
    impulse_total: float = 0.0    # discounted impulse outlay (enters J with +)

    @property
    def steps(self) -> int:
        return len(self.times)

    def total_cost(self) -> float:
        return (self.running_total - self.switch1_total
                + self.switch2_total + self.impulse_total)


class _Policy:
    """Pointwise decision helper for a fixed (field, grid, step) context."""

    def __init__(self, spec: ProblemSpec, grid: GridSpec, values: np.ndarray,
                 dt: float, action_tol: float, variant: Variant):
        self.spec = spec
        self.grid = grid
        self.values = values
        self.dt = dt
        self.action_tol = action_tol
        self.variant = variant
        self.gamma = math.exp(-spec.discount * dt)
        self.weight = (1.0 - self.gamma) / spec.discount
        self.step_matrix = semigroup_step(spec.generator, dt)

    def value_at(self, x: np.ndarray, d1: int, d2: int) -> float:
        idx, wts = interp_weights(self.grid, x.reshape(1, -1))
        return float((self.values[d1, d2][idx[0]] * wts[0]).sum())

    def decide(self, x: np.ndarray, d1: int, d2: int) -> PolicyDecision:
        spec = self.spec
        here = self.value_at(x, d1, d2)

        if spec.impulses:
            cands = [imp.cost + self.value_at(self.grid.clamp(x + imp.vector), d1, d2)
                     for imp in spec.impulses]
            j = int(np.argmin(cands))
            if cands[j] <= here + self.action_tol:
                return PolicyDecision(IMPULSE, impulse_index=j)

        if spec.m2 > 1:
            cands2 = [spec.switch_cost_2[d2, o] + self.value_at(x, d1, o)
                      if o != d2 else math.inf for o in range(spec.m2)]
            o2 = int(np.argmin(cands2))
            if cands2[o2] <= here + self.action_tol:
                return PolicyDecision(SWITCH2, target=o2)

        if spec.m1 > 1:
            cands1 = [self.value_at(x, o, d2) - spec.switch_cost_1[d1, o]
                      if o != d1 else -math.inf for o in range(spec.m1)]
            o1 = int(np.argmax(cands1))
            if cands1[o1] >= here - self.action_tol:
                return PolicyDecision(SWITCH1, target=o1)

        u1, u2 = self._saddle_controls(x, d1, d2)
        return PolicyDecision(CONTINUE, u1=u1, u2=u2)

    def _continue_table(self, x: np.ndarray, d1: int, d2: int) -> np.ndarray:
        spec = self.spec
        q = np.empty((len(spec.u1_levels), len(spec.u2_levels)))
        lin = self.step_matrix @ x
        for a, u1 in enumerate(spec.u1_levels):
            for b, u2 in enumerate(spec.u2_levels):
                foot = self.grid.clamp(
                    lin + self.dt * eval_dynamics(spec, d1, d2, x, float(u1), float(u2)))
                k = float(eval_running_cost(spec, d1, d2, x, float(u1), float(u2)))
                q[a, b] = self.weight * k + self.gamma * self.value_at(foot, d1, d2)
        return q

    def _saddle_controls(self, x: np.ndarray, d1: int, d2: int) -> tuple[float, float]:
        spec = self.spec
        q = self._continue_table(x, d1, d2)
        if self.variant is Variant.PLUS:
            a = int(q.min(axis=1).argmax())    # player 1 commits first
            b = int(q[a].argmin())
        else:
            b = int(q.max(axis=0).argmin())    # player 2 commits first
            a = int(q[:, b].argmax())
        return float(spec.u1_levels[a]), float(spec.u2_levels[b])


def decide(spec: ProblemSpec, grid: GridSpec, values: np.ndarray, x, d1: int, d2: int,
           dt: float, action_tol: float = DEFAULT_ACTION_TOL,
           variant: Variant = Variant.PLUS) -> PolicyDecision:
    """One feedback decision at state ``x`` in modes (d1, d2).

    Obstacles are checked in the order impulse, player-2 switch, player-1
    switch, each binding when within ``action_tol`` of the local value; ties
    inside a category resolve to the lowest index.  Otherwise the saddle
    controls of the one-step continue table are returned.
    """
    policy = _Policy(spec, grid, values, dt, action_tol, variant)
    return policy.decide(np.asarray(x, dtype=float), d1, d2)


def simulate(spec: ProblemSpec, grid: GridSpec, values: np.ndarray, x0, d1: int, d2: int,
             horizon: float, dt: float | None = None,
             action_tol: float = DEFAULT_ACTION_TOL,
             variant: Variant = Variant.PLUS) -> HybridTrajectory:
    """Roll the feedback policy out to ``horizon``.

    Events fire at the current instant without advancing the clock; at most
    one impulse and one switch per player may fire per step (ChatterError
    otherwise, which indicates ``action_tol`` is too coarse).
    """
    if dt is None:
        dt = _default_sim_step(spec, grid)
    policy = _Policy(spec, grid, values, dt, action_tol, variant)
    lam = spec.discount

    x = grid.clamp(np.asarray(x0, dtype=float))
    times, states, modes, controls, step_costs, flags = [], [], [], [], [], []
    traj = HybridTrajectory(
        dt=dt, discount=lam, times=np.empty(0), states=np.empty((0, spec.dimension)),
        modes=np.empty((0, 2), dtype=int), controls=np.empty((0, 2)),
        step_costs=np.empty(0), event_flags=np.empty((0, 3), dtype=int))

    n = 0
    t = 0.0
    while t < horizon - 1e-12:
        used = {IMPULSE: 0, SWITCH1: 0, SWITCH2: 0}
        disc = math.exp(-lam * t)
        while True:
            decision = policy.decide(x, d1, d2)
            if decision.kind == CONTINUE:
                break
            if used[decision.kind]:
                raise ChatterError(
                    f"repeated {decision.kind} request at t={t:.6g}; "
                    "action_tol is too large for this field")
            used[decision.kind] += 1
            if decision.kind == IMPULSE:
                imp = spec.impulses[decision.impulse_index]
                traj.impulse_events.append(ImpulseEvent(t, decision.impulse_index,
                                                        imp.vector, imp.cost))
                traj.impulse_total += disc * imp.cost
                x = grid.clamp(x + imp.vector)
            elif decision.kind == SWITCH2:
                cost = float(spec.switch_cost_2[d2, decision.target])
                traj.switch2_events.append(SwitchEvent(t, 2, d2, decision.target, cost))
                traj.switch2_total += disc * cost
                d2 = decision.target
            else:
                cost = float(spec.switch_cost_1[d1, decision.target])
                traj.switch1_events.append(SwitchEvent(t, 1, d1, decision.target, cost))
                traj.switch1_total += disc * cost
                d1 = decision.target

        u1, u2 = decision.u1, decision.u2
        k_val = float(eval_running_cost(spec, d1, d2, x, u1, u2))
        times.append(t)
        states.append(x.copy())
        modes.append((d1, d2))
        controls.append((u1, u2))
        step_costs.append(k_val)
        flags.append((used[IMPULSE], used[SWITCH1], used[SWITCH2]))
        traj.running_total += disc * policy.weight * k_val

        drift = eval_dynamics(spec, d1, d2, x, u1, u2)
        x = grid.clamp(policy.step_matrix @ x + dt * drift)
        n += 1
        t = n * dt

    traj.times = np.asarray(times)
    traj.states = np.asarray(states).reshape(len(times), spec.dimension)
    traj.modes = np.asarray(modes, dtype=int).reshape(len(times), 2)
    traj.controls = np.asarray(controls).reshape(len(times), 2)
    traj.step_costs = np.asarray(step_costs)
    traj.event_flags = np.asarray(flags, dtype=int).reshape(len(times), 3)
    return traj


def _default_sim_step(spec: ProblemSpec, grid: GridSpec) -> float:
    # cheap drift bound: sample the grid corners and midpoint per control pair
    probe = np.vstack([grid.box[:, 0], grid.box[:, 1], grid.box.mean(axis=1)])
    f_sup = 0.0
    for (i1, i2) in spec.mode_pairs():
        for u1 in spec.u1_levels:
            for u2 in spec.u2_levels:
                f = eval_dynamics(spec, i1, i2, probe, float(u1), float(u2))
                f_sup = max(f_sup, float(np.linalg.norm(f, axis=-1).max()))
    return default_time_step(spec, grid, f_sup)


def evaluate_cost(traj: HybridTrajectory, discount: float) -> float:
    """Recompute the four-term discounted cost from the trajectory record.

    Independent of the accumulators filled during simulation: discounts are
    re-derived from event times and the recorded raw magnitudes.
    """
    gamma_w = (1.0 - math.exp(-discount * traj.dt)) / discount
    running = sum(math.exp(-discount * t) * gamma_w * k
                  for t, k in zip(traj.times, traj.step_costs))
    c1 = sum(math.exp(-discount * e.time) * e.cost for e in traj.switch1_events)
    c2 = sum(math.exp(-discount * e.time) * e.cost for e in traj.switch2_events)
    imp = sum(math.exp(-discount * e.time) * e.cost for e in traj.impulse_events)
    return running - c1 + c2 + imp


@dataclass
class RolloutRow:
    start: tuple
    value: float
    cost: float

    @property
    def gap(self) -> float:
        return abs(self.cost - self.value)

    @property
    def relative_gap(self) -> float:
        return self.gap / max(abs(self.value), 1e-12)


@dataclass
class RolloutReport:
    rows: list[RolloutRow]
    horizon: float

    @property
    def max_gap(self) -> float:
        return max((r.gap for r in self.rows), default=0.0)

    @property
    def max_relative_gap(self) -> float:
        return max((r.relative_gap for r in self.rows), default=0.0)

    def to_text(self) -> str:
        lines = [f"rollout-vs-value report (horizon {self.horizon:g})"]
        for r in self.rows:
            lines.append(f"  start {r.start}: value {r.value:.9e}, rollout {r.cost:.9e}, "
                         f"gap {r.gap:.3e} ({100 * r.relative_gap:.3f}%)")
        lines.append(f"  max gap {self.max_gap:.3e}, max relative {100 * self.max_relative_gap:.4f}%")
        return "\n".join(lines) + "\n"


def rollout_value_gap(spec: ProblemSpec, grid: GridSpec, values: np.ndarray,
                      starts, horizon: float, dt: float | None = None,
                      action_tol: float = DEFAULT_ACTION_TOL,
                      variant: Variant = Variant.PLUS) -> RolloutReport:
    """Simulate from each (x, d1, d2) start and compare cost to the field."""
    rows = []
    for (x, d1, d2) in starts:
        x = np.asarray(x, dtype=float)
        traj = simulate(spec, grid, values, x, d1, d2, horizon, dt=dt,
                        action_tol=action_tol, variant=variant)
        idx, wts = interp_weights(grid, grid.clamp(x).reshape(1, -1))
        v0 = float((values[d1, d2][idx[0]] * wts[0]).sum())
        rows.append(RolloutRow(start=(tuple(np.atleast_1d(x).tolist()), d1, d2),
                               value=v0, cost=evaluate_cost(traj, spec.discount)))
    return RolloutReport(rows=rows, horizon=horizon)
