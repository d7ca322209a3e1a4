"""Backward-Euler integration of the subgradient flow of a convex instance."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import CriticalSet, _pieces_separable
from .errors import CapabilityError, UsageError
from .model import FunctionInstance, as_point, evaluate

MAX_FLOW_STEP = 0.25
MONITOR_TOL = 1e-10


def prox_f(instance: FunctionInstance, x, tau: float) -> np.ndarray:
    """Exact ``argmin_u f(u) + ||u - x||^2 / (2 tau)`` for convex quadratic-plus-separable instances.

    The objective is strongly convex, so its unique stationary point is found
    either by a linear solve, coordinatewise, or by enumerating piece patterns.
    """
    if not instance.convex:
        raise CapabilityError(f"{instance.name}: proximal steps are only exact for convex instances")
    if not tau > 0:
        raise UsageError(f"step must be positive, got {tau}")
    sm, ns = instance.smooth, instance.nonsmooth
    if not sm.is_quadratic:
        raise CapabilityError(f"{instance.name}: smooth part is not quadratic")
    x = as_point(instance, x)
    Q, q, p = np.asarray(sm.Q), np.asarray(sm.q), instance.p
    if ns.kind == "zero":
        return np.linalg.solve(np.eye(p) + tau * Q, x - tau * q)
    if not ns.separable:
        raise CapabilityError(f"{instance.name}: no exact proximal step for {ns.kind!r}")
    if np.count_nonzero(Q - np.diag(np.diag(Q))) == 0:
        return np.array([ns.table.shifted(Q[i, i], q[i]).prox(float(x[i]), tau) for i in range(p)])
    pieces = _pieces_separable(p, Q + np.eye(p) / tau, q - x / tau, ns.table)
    points = [pc.origin for pc in pieces if pc.dim == 0]
    if not points:
        raise CapabilityError(f"{instance.name}: proximal subproblem has no isolated stationary point")
    return min(points, key=lambda u: evaluate(instance, u) + float((u - x) @ (u - x)) / (2 * tau))


@dataclass(frozen=True)
class Trajectory:
    instance: FunctionInstance
    x0: np.ndarray
    tau: float
    horizon: float
    states: np.ndarray  # (K+1, p)
    values: np.ndarray  # f(x_k)
    step_norms: np.ndarray  # ||x_{k+1} - x_k||

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    @property
    def limit(self) -> np.ndarray:
        return self.states[-1]


def integrate_flow(instance: FunctionInstance, x0, tau: float, T: float) -> Trajectory:
    """Proximal-point states ``x_{k+1} = prox_{tau f}(x_k)`` for ``K = T / tau`` steps."""
    if not instance.convex:
        raise CapabilityError(f"{instance.name}: the flow monitors assume a convex instance")
    if not 0 < tau <= MAX_FLOW_STEP:
        raise UsageError(f"step must lie in (0, {MAX_FLOW_STEP}], got {tau}")
    if not T > 0:
        raise UsageError(f"horizon must be positive, got {T}")
    K = round(T / tau)
    if abs(K * tau - T) > 1e-9 * max(1.0, T):
        raise UsageError(f"horizon {T} is not a whole number of steps of size {tau}")
    x = as_point(instance, x0)
    if evaluate(instance, x) == math.inf:
        raise UsageError(f"{instance.name}: start point is outside dom f")
    states = [x]
    for _ in range(K):
        x = prox_f(instance, x, tau)
        states.append(x)
    states = np.array(states)
    values = np.array([evaluate(instance, s) for s in states])
    return Trajectory(instance, states[0], float(tau), float(T), states, values,
                      np.linalg.norm(np.diff(states, axis=0), axis=1))


@dataclass(frozen=True)
class FlowReport:
    monotone_values: bool
    first_ascent: int | None  # step k with f(x_{k+1}) > f(x_k) + tol
    fejer: bool
    fejer_violation: dict | None
    terminal_distance: float
    terminal_ok: bool
    energy: bool
    first_energy_violation: int | None
    limit: np.ndarray = field(repr=False)
    limit_value: float = math.nan

    @property
    def passed(self) -> bool:
        return self.monotone_values and self.fejer and self.terminal_ok and self.energy

    def to_json(self) -> dict:
        return {
            "energy": self.energy,
            "fejer": self.fejer,
            "first_ascent": self.first_ascent,
            "first_energy_violation": self.first_energy_violation,
            "limit": self.limit.tolist(),
            "limit_value": self.limit_value,
            "monotone_values": self.monotone_values,
            "passed": self.passed,
            "terminal_distance": self.terminal_distance,
            "terminal_ok": self.terminal_ok,
        }


def verify_flow_properties(traj: Trajectory, cs: CriticalSet, tol: float = MONITOR_TOL,
                           grid_scale: float = 1.0) -> FlowReport:
    """Check descent, Fejer monotonicity, terminal criticality and the energy inequality.

    Values are recomputed from the stored states, so a tampered trajectory
    is caught even if its cached values were left alone.
    """
    inst, X = traj.instance, traj.states
    f = np.array([evaluate(inst, s) for s in X])
    drops = f[:-1] - f[1:]

    ascent = np.nonzero(drops < -tol)[0]
    first_ascent = int(ascent[0]) if ascent.size else None

    fejer_violation = None
    for z in cs.grid(grid_scale):
        d = np.linalg.norm(X - z, axis=1)
        bad = np.nonzero(np.diff(d) > tol)[0]
        if bad.size:
            fejer_violation = {"point": z.tolist(), "step": int(bad[0])}
            break

    steps = np.sum(np.diff(X, axis=0) ** 2, axis=1)
    energy_bad = np.nonzero(drops < steps / traj.tau - tol)[0]
    first_energy = int(energy_bad[0]) if energy_bad.size else None

    term = cs.distance(X[-1])
    return FlowReport(
        monotone_values=first_ascent is None,
        first_ascent=first_ascent,
        fejer=fejer_violation is None,
        fejer_violation=fejer_violation,
        terminal_distance=term,
        terminal_ok=term <= tol,
        energy=first_energy is None,
        first_energy_violation=first_energy,
        limit=X[-1].copy(),
        limit_value=float(f[-1]),
    )
