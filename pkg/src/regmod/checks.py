"""Executable cross-checks between the estimated moduli, and a proximal-gradient run.

Each implication between regularity properties becomes one named check.
A check either passes, fails, or is skipped with the premise that is
missing; it is never silently dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import CriticalSet, enumerate_critical_set
from .errors import UsageError
from .estimators import EstimateBundle
from .model import FunctionInstance, as_point, prox_regularity_constant
from .prox import ProxRequest, prox_h, residual_map

DEFAULT_TOL = 0.05


@dataclass(frozen=True)
class Check:
    id: str
    name: str
    constant: str
    relation: str  # "<=", ">=" or ">"
    lhs: float = math.nan
    rhs: float = math.nan
    status: str = "skipped"  # "pass" | "fail" | "skipped"
    reason: str | None = None
    samples: int | None = None
    violations: int | None = None

    @property
    def slack(self) -> float:
        if self.status == "skipped":
            return math.nan
        if self.relation == "<=":
            return self.rhs - self.lhs
        return self.lhs - self.rhs

    def to_json(self) -> dict:
        out = {
            "constant": self.constant,
            "id": self.id,
            "lhs": self.lhs,
            "name": self.name,
            "reason": self.reason,
            "relation": self.relation,
            "rhs": self.rhs,
            "slack": self.slack,
            "status": self.status,
        }
        if self.samples is not None:
            out["samples"] = self.samples
            out["violations"] = self.violations
        return out


def _decide(lhs: float, rhs: float, relation: str) -> str:
    if math.isnan(lhs) or math.isnan(rhs):
        return "fail"
    ok = {"<=": lhs <= rhs, ">=": lhs >= rhs, ">": lhs > rhs}[relation]
    return "pass" if ok else "fail"


@dataclass(frozen=True)
class ImplicationReport:
    instance: str
    base: np.ndarray
    premises: dict
    checks: tuple
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def by_id(self, cid: str) -> Check:
        return next(c for c in self.checks if c.id == cid)

    def to_json(self) -> dict:
        return {
            "base": self.base.tolist(),
            "checks": [c.to_json() for c in self.checks],
            "instance": self.instance,
            "premises": self.premises,
            "tol": self.tol,
        }


def _usable(est) -> bool:
    return est is not None and math.isfinite(est.value) and not est.divergence


def cross_check(instance: FunctionInstance, xbar, bundle: EstimateBundle, rho: float | None = None,
                tol: float = DEFAULT_TOL) -> ImplicationReport:
    """Evaluate every implication on one shared sample cloud.

    ``rho`` defaults to the instance's analytic prox-regularity constant.
    Pointwise checks use the raw samples; aggregate checks compare the
    estimated moduli with the constants that appear in the proofs.
    """
    if not isinstance(bundle, EstimateBundle):
        raise UsageError("cross_check needs an EstimateBundle")
    xbar = as_point(instance, xbar)
    cloud = bundle.cloud
    if cloud.instance.source != instance.source or not np.array_equal(cloud.base, xbar):
        raise UsageError("estimates were computed for a different instance or base point")
    rho_source = "supplied"
    if rho is None:
        rho, rho_source = prox_regularity_constant(instance), "analytic"
    if rho is None:
        rho_source = "unavailable"

    kl, sub, qg, lt = bundle.kl, bundle.subregularity, bundle.growth, bundle.luo_tseng
    pm = instance.premises
    convex, cont, local_min = instance.convex, pm.continuous_on_crit, pm.crit_local_min or instance.convex
    h_convex = instance.nonsmooth.convex
    c = kl.value if kl is not None else math.nan
    nu = qg.value if qg is not None else math.nan
    kap = sub.value if sub is not None else math.nan
    lo, hi = 1.0 - tol, 1.0 + tol

    def skip(cid, name, const, rel, reason):
        return Check(cid, name, const, rel, reason=reason)

    def missing(**named):
        for label, est in named.items():
            if est is None:
                return f"{label} estimate unavailable: {bundle.unavailable.get(label, 'not computed')}"
        return None

    # pointwise quantities on the cloud
    gap, sd, cd, rn = cloud.fgap, cloud.sdist, cloud.cdist, cloud.rnorm
    strict = gap > 1e-12

    def pointwise(cid, name, const, num, den, bound, mask):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(den[mask] > 0, num[mask] / den[mask], math.inf)
        ratio = ratio[~((num[mask] <= 0) & (den[mask] <= 0))]
        worst = float(np.max(ratio)) if ratio.size else 0.0
        viol = int(np.sum(ratio > bound))
        return Check(cid, name, const, "<=", worst, bound, "pass" if viol == 0 else "fail",
                     samples=int(ratio.size), violations=viol)

    checks = []

    # A: growth => KL with c >= sqrt(nu)
    cid, name, const = "A", "qg=>kl", "c >= sqrt(nu)"
    why = missing(kl=kl, growth=qg)
    if why:
        checks.append(skip(cid, name, const, ">=", why))
    elif not (convex or (cont and local_min)):
        checks.append(skip(cid, name, const, ">=", "needs a convex f, or f continuous at a local minimizer"))
    elif not nu > 0:
        checks.append(skip(cid, name, const, ">=", "quadratic growth fails"))
    else:
        rhs = math.sqrt(nu) * lo
        checks.append(Check(cid, name, const, ">=", c, rhs, _decide(c, rhs, ">=")))

    # B: KL => growth with nu >= c^2/4
    cid, name, const = "B", "kl=>qg", "nu >= c^2/4"
    why = missing(kl=kl, growth=qg)
    if why:
        checks.append(skip(cid, name, const, ">=", why))
    elif not (cont and local_min):
        checks.append(skip(cid, name, const, ">=", "needs f continuous at a local minimizer"))
    elif kl.divergence:
        checks.append(skip(cid, name, const, ">=", "KL constant degenerates as the radius shrinks"))
    else:
        rhs = c * c / 4.0 * lo
        checks.append(Check(cid, name, const, ">=", nu, rhs, _decide(nu, rhs, ">=")))

    # C: subregularity + uniform prox-regularity => KL, pointwise
    cid, name, const = "C", "subreg+prox-regular=>kl", "f(x)-f(xbar) <= (kappa + rho kappa^2/2) dist^2(0, df(x))"
    why = missing(subregularity=sub)
    if why:
        checks.append(skip(cid, name, const, "<=", why))
    elif not _usable(sub):
        checks.append(skip(cid, name, const, "<=", "subregularity fails"))
    elif rho is None:
        checks.append(skip(cid, name, const, "<=", "no prox-regularity constant available"))
    elif not pm.crit_values_below:
        checks.append(skip(cid, name, const, "<=", "critical values near the base point may exceed f(xbar)"))
    else:
        bound = (kap + rho * kap * kap / 2.0) * hi
        checks.append(pointwise(cid, name, const, gap, sd * sd, bound, strict))

    # D: subregularity => Luo-Tseng, pointwise, constant kappa(1+L)+1
    cid, name, const = "D", "subreg=>luo-tseng", "dist(x, crit f) <= (kappa (1+L) + 1) ||R(x)||"
    why = missing(subregularity=sub)
    if why:
        checks.append(skip(cid, name, const, "<=", why))
    elif not _usable(sub):
        checks.append(skip(cid, name, const, "<=", "subregularity fails"))
    elif not instance.composite:
        checks.append(skip(cid, name, const, "<=", "no proximal residual for this instance"))
    else:
        bound = (kap * (1.0 + instance.L) + 1.0) * hi
        checks.append(pointwise(cid, name, const, cd, rn, bound, np.ones(len(cloud), dtype=bool)))

    # E: subregularity at a local minimizer => positive growth
    cid, name, const = "E", "subreg=>qg", "nu > 0"
    why = missing(subregularity=sub, growth=qg)
    if why:
        checks.append(skip(cid, name, const, ">", why))
    elif not _usable(sub):
        checks.append(skip(cid, name, const, ">", "subregularity fails"))
    elif not local_min:
        checks.append(skip(cid, name, const, ">", "base point is not a local minimizer"))
    else:
        checks.append(Check(cid, name, const, ">", nu, 0.0, _decide(nu, 0.0, ">")))

    # F: KL + growth + continuity => subregularity with kappa = 2/c^2
    cid, name, const = "F", "kl=>subreg", "kappa <= 2/c^2"
    why = missing(kl=kl, subregularity=sub, growth=qg)
    if why:
        checks.append(skip(cid, name, const, "<=", why))
    elif not (cont and local_min):
        checks.append(skip(cid, name, const, "<=", "needs f continuous at a local minimizer"))
    elif not (c > 0 and not kl.divergence):
        checks.append(skip(cid, name, const, "<=", "KL constant degenerates as the radius shrinks"))
    elif not nu > 0:
        checks.append(skip(cid, name, const, "<=", "quadratic growth fails"))
    else:
        rhs = 2.0 / (c * c) * hi
        checks.append(Check(cid, name, const, "<=", kap, rhs, _decide(kap, rhs, "<=")))

    # G: Luo-Tseng => subregularity for convex h, since ||R(x)|| <= dist(0, df(x))
    cid, name, const = "G", "luo-tseng=>subreg", "kappa <= varpi"
    why = missing(luo_tseng=lt, subregularity=sub)
    if why:
        checks.append(skip(cid, name, const, "<=", why))
    elif not h_convex:
        checks.append(skip(cid, name, const, "<=", "nonsmooth part is not convex"))
    elif not cont:
        checks.append(skip(cid, name, const, "<=", "f is not continuous on crit f"))
    elif not _usable(lt):
        checks.append(skip(cid, name, const, "<=", "Luo-Tseng bound fails"))
    else:
        rhs = lt.value * hi
        checks.append(Check(cid, name, const, "<=", kap, rhs, _decide(kap, rhs, "<=")))

    # H: Luo-Tseng => KL for convex h, pointwise with varpi in place of kappa
    cid, name, const = "H", "luo-tseng=>kl", "f(x)-f(xbar) <= (varpi + rho varpi^2/2) dist^2(0, df(x))"
    why = missing(luo_tseng=lt)
    if why:
        checks.append(skip(cid, name, const, "<=", why))
    elif not h_convex:
        checks.append(skip(cid, name, const, "<=", "nonsmooth part is not convex"))
    elif not pm.crit_values_below:
        checks.append(skip(cid, name, const, "<=", "critical values near the base point may exceed f(xbar)"))
    elif rho is None:
        checks.append(skip(cid, name, const, "<=", "no prox-regularity constant available"))
    elif not _usable(lt):
        checks.append(skip(cid, name, const, "<=", "Luo-Tseng bound fails"))
    else:
        w = lt.value
        bound = (w + rho * w * w / 2.0) * hi
        checks.append(pointwise(cid, name, const, gap, sd * sd, bound, strict))

    # J: growth => subregularity for convex f, kappa <= 1/nu
    cid, name, const = "J", "qg=>subreg", "kappa <= 1/nu"
    why = missing(subregularity=sub, growth=qg)
    if why:
        checks.append(skip(cid, name, const, "<=", why))
    elif not convex:
        checks.append(skip(cid, name, const, "<=", "f is not convex"))
    elif not nu > 0:
        checks.append(skip(cid, name, const, "<=", "quadratic growth fails"))
    else:
        rhs = hi / nu
        checks.append(Check(cid, name, const, "<=", kap, rhs, _decide(kap, rhs, "<=")))

    premises = {
        "crit_values_below": pm.crit_values_below,
        "continuous_on_crit": cont,
        "convex": convex,
        "crit_local_min": local_min,
        "rho": rho if rho is not None else math.nan,
        "rho_source": rho_source,
    }
    return ImplicationReport(instance.name, xbar, premises, tuple(checks), tol)


@dataclass(frozen=True)
class ConvergenceRecord:
    instance: str
    tau: float
    iterates: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    rate: float
    diverged: bool
    method: str  # "prox-gradient" or "gradient"

    def to_json(self) -> dict:
        return {
            "diverged": self.diverged,
            "final_distance": float(self.distances[-1]),
            "iterations": int(self.iterates.shape[0] - 1),
            "method": self.method,
            "rate": self.rate,
            "tau": self.tau,
        }


def _tail_rate(dist: np.ndarray) -> float:
    # geometric rate from the later half of the iterates still off the critical set
    pos = np.nonzero(dist > 1e-13)[0]
    if pos.size < 3:
        return 0.0 if dist[-1] <= 1e-13 else math.nan
    k = pos[pos.size // 2:]
    slope = np.polyfit(k.astype(float), np.log(dist[k]), 1)[0]
    return float(math.exp(slope))


def prox_grad_run(instance: FunctionInstance, x0, tau: float, K: int,
                  cs: CriticalSet | None = None) -> ConvergenceRecord:
    """Run ``x+ = prox_{tau h}(x - tau grad g(x))`` and fit a geometric rate on the tail.

    Instances without a proximal kernel run plain gradient steps on their
    smooth part instead; that is how the negative control is exercised.
    """
    x = as_point(instance, x0)
    if not tau > 0 or tau > 1.0 / instance.L + 1e-12:
        raise UsageError(f"step must lie in (0, 1/L] = (0, {1.0 / instance.L:.6g}], got {tau}")
    if K < 1:
        raise UsageError("need at least one iteration")
    if cs is None:
        cs = enumerate_critical_set(instance)
    sm, ns = instance.smooth, instance.nonsmooth
    method = "prox-gradient" if instance.composite else "gradient"
    xs = [x]
    for _ in range(K):
        z = x - tau * sm.grad(x)
        x = prox_h(ProxRequest(ns, z, tau)) if instance.composite else z
        xs.append(x)
        if not np.all(np.isfinite(x)):
            break
    xs = np.array(xs)
    dist = np.array([cs.distance(v) if np.all(np.isfinite(v)) else math.inf for v in xs])
    if instance.composite:
        res = np.array([np.linalg.norm(residual_map(instance, v)) if np.all(np.isfinite(v)) else math.inf
                        for v in xs])
    else:
        res = np.array([np.linalg.norm(tau * sm.grad(v)) for v in xs])
    diverged = not np.all(np.isfinite(dist))
    for k in range(len(dist) - 50):
        if dist[k] > 0 and dist[k + 50] > 10 * dist[k]:
            diverged = True
            break
    rate = math.nan if diverged else _tail_rate(dist)
    return ConvergenceRecord(instance.name, float(tau), xs, dist, res, rate, diverged, method)
