"""Hamiltonians, switching/impulse obstacles, the one-step value update, and
pointwise residuals of the double-obstacle system.

Value fields are plain arrays of shape ``(m1, m2, n_points)``.  Conventions:

* ``Variant.PLUS``: player 1 commits first in the continue branch
  (max over u1 of min over u2); the matching Hamiltonian ordering is
  min over u1 of max over u2 of ``<-p, f> - k``.
* ``Variant.MINUS``: the swapped-and-reversed ordering.
* Missing obstacles are +/- infinity and drop out of the projection
  ``T[V] = max(upper_switch, min(lower_switch, impulse, continue))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .discretize import BellmanTables, GridSpec, build_tables, interp_weights, interpolate_many
from .problem import ProblemSpec, eval_dynamics, eval_running_cost

__all__ = [
    "Variant",
    "hamiltonian",
    "isaacs_gap",
    "switch_obstacle_lower",
    "switch_obstacle_upper",
    "impulse_obstacle",
    "switch_lower_field",
    "switch_upper_field",
    "impulse_field",
    "continue_field",
    "bellman_update",
    "ResidualField",
    "sqvi_residual",
]


class Variant(enum.Enum):
    """Which player's commitment order defines the saddle of the control step."""

    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown variant {name!r}; use 'plus' or 'minus'") from None


# ---------------------------------------------------------------------------
# Hamiltonians

def _control_table(spec: ProblemSpec, d1: int, d2: int, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """<-p, f(x,u1,d1,u2,d2)> - k(...) enumerated over the control grids."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    nu1, nu2 = len(spec.u1_levels), len(spec.u2_levels)
    table = np.empty((nu1, nu2))
    for a, u1 in enumerate(spec.u1_levels):
        for b, u2 in enumerate(spec.u2_levels):
            fval = eval_dynamics(spec, d1, d2, x, float(u1), float(u2))
            kval = eval_running_cost(spec, d1, d2, x, float(u1), float(u2))
            table[a, b] = -float(np.dot(p, fval)) - float(kval)
    return table


def hamiltonian(spec: ProblemSpec, variant: Variant, d1: int, d2: int, x, p) -> float:
    """Saddle of the enumerated control table in the requested order."""
    table = _control_table(spec, d1, d2, x, p)
    if variant is Variant.PLUS:
        return float(table.max(axis=1).min())  # min over u1 of max over u2
    return float(table.min(axis=0).max())      # max over u2 of min over u1


def isaacs_gap(spec: ProblemSpec, grid: GridSpec, costate_samples: int = 16,
               seed: int = 0) -> float:
    """Largest |H_plus - H_minus| over grid points, mode pairs, and costates.

    The costate set always contains the zero vector and +/- unit vectors;
    ``costate_samples`` additional standard-normal draws are seeded for
    reproducibility.  A measured gap of zero certifies that both orderings of
    the control saddle agree on the sampled set.
    """
    rng = np.random.default_rng(seed)
    n = spec.dimension
    canonical = [np.zeros(n)]
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0
        canonical.extend([e.copy(), -e])
    costates = np.array(canonical + list(rng.standard_normal((costate_samples, n))))

    pts = grid.points
    gap = 0.0
    for (i1, i2) in spec.mode_pairs():
        nu1, nu2 = len(spec.u1_levels), len(spec.u2_levels)
        f = np.empty((nu1, nu2, grid.n_points, n))
        k = np.empty((nu1, nu2, grid.n_points))
        for a, u1 in enumerate(spec.u1_levels):
            for b, u2 in enumerate(spec.u2_levels):
                f[a, b] = eval_dynamics(spec, i1, i2, pts, float(u1), float(u2))
                k[a, b] = eval_running_cost(spec, i1, i2, pts, float(u1), float(u2))
        for p in costates:
            table = -(f @ p) - k  # (nu1, nu2, npts)
            plus = table.max(axis=1).min(axis=0)
            minus = table.min(axis=0).max(axis=0)
            gap = max(gap, float(np.abs(plus - minus).max()))
    return gap


# ---------------------------------------------------------------------------
# obstacle operators

def switch_lower_field(values: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Best player-2 switch: min over other d2 of V[d1, d2'] + c2(d2, d2').

    +inf (inactive) where player 2 has a single mode.
    """
    m1, m2, npts = values.shape
    out = np.full_like(values, np.inf)
    for i2 in range(m2):
        for j2 in range(m2):
            if j2 == i2:
                continue
            cand = values[:, j2, :] + spec.switch_cost_2[i2, j2]
            out[:, i2, :] = np.minimum(out[:, i2, :], cand)
    return out


def switch_upper_field(values: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Best player-1 switch: max over other d1 of V[d1', d2] - c1(d1, d1').

    -inf (inactive) where player 1 has a single mode.
    """
    m1, m2, npts = values.shape
    out = np.full_like(values, -np.inf)
    for i1 in range(m1):
        for j1 in range(m1):
            if j1 == i1:
                continue
            cand = values[j1, :, :] - spec.switch_cost_1[i1, j1]
            out[i1, :, :] = np.maximum(out[i1, :, :], cand)
    return out


def impulse_field(values: np.ndarray, tables: BellmanTables) -> np.ndarray:
    """Best impulse: min over the menu of V[d1,d2](clamped x + xi) + cost.

    +inf (inactive) when the menu is empty.
    """
    m1, m2, npts = values.shape
    if tables.imp_costs.size == 0:
        return np.full_like(values, np.inf)
    out = np.full_like(values, np.inf)
    for j in range(tables.imp_costs.size):
        idx, wts = tables.imp_idx[j], tables.imp_wts[j]
        for (i1, i2) in tables.spec.mode_pairs():
            cand = interpolate_many(values[i1, i2], idx, wts) + tables.imp_costs[j]
            out[i1, i2] = np.minimum(out[i1, i2], cand)
    return out


def switch_obstacle_lower(values: np.ndarray, spec: ProblemSpec, x_idx: int,
                          d1: int, d2: int) -> float:
    if spec.m2 == 1:
        return np.inf
    cands = [values[d1, j2, x_idx] + spec.switch_cost_2[d2, j2]
             for j2 in range(spec.m2) if j2 != d2]
    return float(min(cands))


def switch_obstacle_upper(values: np.ndarray, spec: ProblemSpec, x_idx: int,
                          d1: int, d2: int) -> float:
    if spec.m1 == 1:
        return -np.inf
    cands = [values[j1, d2, x_idx] - spec.switch_cost_1[d1, j1]
             for j1 in range(spec.m1) if j1 != d1]
    return float(max(cands))


def impulse_obstacle(values: np.ndarray, spec: ProblemSpec, grid: GridSpec, x,
                     d1: int, d2: int) -> float:
    """Impulse obstacle at an arbitrary (possibly off-node) state."""
    if not spec.impulses:
        return np.inf
    x = np.asarray(x, dtype=float)
    best = np.inf
    for imp in spec.impulses:
        idx, wts = interp_weights(grid, grid.clamp(x + imp.vector).reshape(1, -1))
        best = min(best, float((values[d1, d2][idx[0]] * wts[0]).sum()) + imp.cost)
    return best


# ---------------------------------------------------------------------------
# one-step update

def continue_field(values: np.ndarray, tables: BellmanTables, variant: Variant) -> np.ndarray:
    """Saddle over the control grids of quadrature cost plus discounted
    interpolated value at the propagated foot."""
    m1, m2, npts = values.shape
    out = np.empty_like(values)
    for (i1, i2) in tables.spec.mode_pairs():
        slab = values[i1, i2]
        q = (tables.weight * tables.k[i1, i2]
             + tables.gamma * interpolate_many(slab, tables.foot_idx[i1, i2],
                                               tables.foot_wts[i1, i2]))
        if variant is Variant.PLUS:
            out[i1, i2] = q.min(axis=1).max(axis=0)  # max over u1 of min over u2
        else:
            out[i1, i2] = q.max(axis=0).min(axis=0)  # min over u2 of max over u1
    return out


def bellman_update(values: np.ndarray, spec: ProblemSpec, grid: GridSpec,
                   dt: float | None = None, variant: Variant = Variant.PLUS,
                   tables: BellmanTables | None = None) -> np.ndarray:
    """One sweep of the double-obstacle dynamic-programming operator.

    Reads only the previous field (Jacobi update): every point is computed
    from the same input array, so the result is independent of sweep order.
    """
    if tables is None:
        tables = build_tables(spec, grid, dt)
    cont = continue_field(values, tables, variant)
    lower = switch_lower_field(values, spec)
    upper = switch_upper_field(values, spec)
    imp = impulse_field(values, tables)
    return np.maximum(upper, np.minimum(np.minimum(lower, imp), cont))


# ---------------------------------------------------------------------------
# residuals

@dataclass
class ResidualField:
    """Pointwise diagnostics for a candidate value field.

    ``pde`` is ``lambda*V + <Ax, DV> + H(x, DV)`` with central-difference
    gradients (one-sided on the box faces; face values are informational
    only).  ``hji1``/``hji2`` are the two double-obstacle compositions whose
    common root characterizes the solution; ``fixed_point`` is ``|T[V]-V|``.
    Obstacle gaps are signed so that nonnegative means feasible.
    """

    pde: np.ndarray          # (m1, m2, npts)
    hji1: np.ndarray
    hji2: np.ndarray
    fixed_point: np.ndarray
    gap_upper: np.ndarray    # V - upper_switch  (>= 0 wanted)
    gap_lower: np.ndarray    # lower_switch - V  (>= 0 wanted)
    gap_impulse: np.ndarray  # impulse - V       (>= 0 wanted)
    interior: np.ndarray     # (npts,) bool

    def max_interior(self, field: np.ndarray) -> float:
        return float(np.abs(field[..., self.interior]).max())


def _gradient(values_slab: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Central differences inside, one-sided on faces; shape (npts, n)."""
    shaped = values_slab.reshape(grid.counts)
    grads = []
    for d in range(grid.dimension):
        grads.append(np.gradient(shaped, grid.spacing[d], axis=d, edge_order=1).reshape(-1))
    return np.stack(grads, axis=-1)


def sqvi_residual(values: np.ndarray, spec: ProblemSpec, grid: GridSpec,
                  dt: float | None = None, variant: Variant = Variant.PLUS,
                  tables: BellmanTables | None = None) -> ResidualField:
    if tables is None:
        tables = build_tables(spec, grid, dt)
    lam = spec.discount
    pts = grid.points
    ax = pts @ spec.generator.T  # rows A @ x

    m1, m2, npts = values.shape
    pde = np.empty_like(values)
    for (i1, i2) in spec.mode_pairs():
        dv = _gradient(values[i1, i2], grid)
        table = -np.einsum("abpn,pn->abp", tables.f[i1, i2], dv) - tables.k[i1, i2]
        if variant is Variant.PLUS:
            ham = table.max(axis=1).min(axis=0)
        else:
            ham = table.min(axis=0).max(axis=0)
        pde[i1, i2] = lam * values[i1, i2] + np.einsum("pn,pn->p", ax, dv) + ham

    lower = switch_lower_field(values, spec)
    upper = switch_upper_field(values, spec)
    imp = impulse_field(values, tables)

    v_minus_lower = values - lower    # -inf where inactive
    v_minus_imp = values - imp
    v_minus_upper = values - upper    # +inf where inactive

    hji1 = np.minimum(np.maximum(np.maximum(pde, v_minus_lower), v_minus_imp), v_minus_upper)
    hji2 = np.maximum(np.maximum(np.minimum(pde, v_minus_upper), v_minus_lower), v_minus_imp)

    updated = np.maximum(upper, np.minimum(np.minimum(lower, imp),
                                           continue_field(values, tables, variant)))
    return ResidualField(
        pde=pde,
        hji1=hji1,
        hji2=hji2,
        fixed_point=np.abs(updated - values),
        gap_upper=values - upper,
        gap_lower=lower - values,
        gap_impulse=imp - values,
        interior=grid.interior_mask(),
    )
