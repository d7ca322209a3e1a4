"""Sampling estimators for the regularity moduli.

All estimates are extremal statistics over a seeded sample cloud around a
base point: the worst ratio seen on the cloud is the best constant the
cloud certifies. Samples are drawn in shells ``eps/2 <= ||x - xbar|| <= eps``,
one shell per radius in the schedule, so a per-radius value describes the
function at that scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import CriticalSet, enumerate_critical_set
from .errors import CapabilityError, InsufficientData, NoExactFormula, UsageError
from .model import (
    FunctionInstance,
    as_point,
    evaluate,
    random_subgradient,
    reference_level,
    sampling_coordinates,
    subdiff_distance,
)
from .prox import residual_map

STRICT_GAP = 1e-12
ZERO_RATIO = 1e-14
CRIT_ZERO = 1e-10
RESIDUAL_ZERO = 1e-12
MIN_SAMPLES = 32
MIN_KL_SAMPLES = 16
SHELL_INNER = 0.5


@dataclass(frozen=True)
class SampleCloud:
    instance: FunctionInstance
    base: np.ndarray
    radii: tuple
    n: int
    seed: int
    base_value: float
    level: float
    points: np.ndarray
    radius_index: np.ndarray
    fgap: np.ndarray
    sdist: np.ndarray
    cdist: np.ndarray
    rnorm: np.ndarray
    rejected: int = 0
    critical_set: CriticalSet | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, mask) -> "SampleCloud":
        mask = np.asarray(mask)
        return SampleCloud(
            self.instance, self.base, self.radii, self.n, self.seed, self.base_value, self.level,
            self.points[mask], self.radius_index[mask], self.fgap[mask], self.sdist[mask],
            self.cdist[mask], self.rnorm[mask], self.rejected, self.critical_set,
        )


def _check_schedule(schedule) -> tuple:
    radii = tuple(float(r) for r in schedule)
    if not radii or any(not r > 0 for r in radii):
        raise UsageError("radius schedule must be a nonempty list of positive radii")
    if any(a <= b for a, b in zip(radii, radii[1:])):
        raise UsageError("radius schedule must be strictly decreasing")
    return radii


def sample_cloud(instance: FunctionInstance, xbar, schedule, n: int, seed: int,
                 cs: CriticalSet | None = None) -> SampleCloud:
    """Draw ``n`` samples per radius near ``xbar`` and cache every oracle value.

    For indicator instances only the support coordinates of ``xbar`` move,
    which keeps the samples on the feasible manifold. Points without an exact
    subdifferential formula or outside dom f are redrawn.
    """
    xbar = as_point(instance, xbar)
    radii = _check_schedule(schedule)
    if n < MIN_SAMPLES:
        raise UsageError(f"need at least {MIN_SAMPLES} samples per radius, got {n}")
    base_value = evaluate(instance, xbar)
    if base_value == math.inf:
        raise UsageError(f"{instance.name}: base point is outside dom f")
    if cs is None:
        cs = enumerate_critical_set(instance)
    coords = sampling_coordinates(instance, xbar)
    if coords.size == 0:
        raise UsageError(f"{instance.name}: no coordinate can move near the base point")
    level = reference_level(instance, xbar)
    rng = np.random.default_rng(seed)

    rows, rejected = [], 0
    for j, eps in enumerate(radii):
        accepted, attempts = 0, 0
        while accepted < n:
            if attempts > 100 * n:
                raise InsufficientData(f"{instance.name}: could not place {n} samples at radius {eps}")
            attempts += 1
            direction = rng.standard_normal(coords.size)
            direction /= np.linalg.norm(direction)
            r = eps * (SHELL_INNER + (1.0 - SHELL_INNER) * rng.random())
            x = xbar.copy()
            x[coords] += r * direction
            fx = evaluate(instance, x)
            if fx == math.inf:
                rejected += 1
                continue
            try:
                sd = subdiff_distance(instance, x)
            except NoExactFormula:
                rejected += 1
                continue
            rn = float(np.linalg.norm(residual_map(instance, x))) if instance.composite else math.nan
            rows.append((j, x, fx - level, sd, cs.distance(x), rn))
            accepted += 1

    return SampleCloud(
        instance=instance,
        base=xbar,
        radii=radii,
        n=n,
        seed=seed,
        base_value=base_value,
        level=level,
        points=np.array([r[1] for r in rows]),
        radius_index=np.array([r[0] for r in rows], dtype=int),
        fgap=np.array([r[2] for r in rows]),
        sdist=np.array([r[3] for r in rows]),
        cdist=np.array([r[4] for r in rows]),
        rnorm=np.array([r[5] for r in rows]),
        rejected=rejected,
        critical_set=cs,
    )


@dataclass(frozen=True)
class ModulusEstimate:
    kind: str  # "kl" | "subregularity" | "quadratic-growth" | "luo-tseng" | "prox-regularity"
    value: float
    per_radius: tuple
    radii: tuple
    divergence: bool
    growth_factors: tuple
    samples_used: int
    samples_total: int
    details: dict = field(default_factory=dict)


def _growth_factor(prev: float, cur: float) -> float:
    if math.isnan(prev) or math.isnan(cur):
        return math.nan
    if prev == cur:
        return 1.0
    if prev == 0.0 or prev == -math.inf:
        return math.inf
    return cur / prev


def divergence_check(per_radius, worsens: str) -> tuple[bool, tuple]:
    """Growth factors between consecutive radii and the divergence flag.

    ``worsens`` is ``"up"`` when a larger modulus is worse (subregularity,
    Luo-Tseng) and ``"down"`` when a smaller one is (KL constant, growth
    modulus); the factors are taken on the worsening orientation. The flag
    is set when at least two consecutive factors are 2 or more.
    """
    vals = np.asarray(per_radius, dtype=float)
    if worsens == "down":
        with np.errstate(divide="ignore"):
            vals = np.where(vals > 0, 1.0 / vals, math.inf)
    factors = tuple(float(_growth_factor(a, b)) for a, b in zip(vals, vals[1:]))
    run = best = 0
    for fac in factors:
        run = run + 1 if fac >= 2.0 else 0
        best = max(best, run)
    return best >= 2, factors


def _per_radius(cloud: SampleCloud, values: np.ndarray, used: np.ndarray, reduce) -> tuple:
    out = []
    for j in range(len(cloud.radii)):
        sel = used & (cloud.radius_index == j)
        out.append(float(reduce(values[sel])) if np.any(sel) else math.nan)
    return tuple(out)


def _estimate(cloud, kind, values, used, reduce, worsens, details) -> ModulusEstimate:
    per = _per_radius(cloud, values, used, reduce)
    div, factors = divergence_check(per, worsens)
    value = float(reduce(values[used])) if np.any(used) else math.nan
    return ModulusEstimate(kind, value, per, cloud.radii, div, factors, int(np.sum(used)), len(cloud), details)


def estimate_kl(cloud: SampleCloud) -> ModulusEstimate:
    """KL exponent and constant for the desingularizer ``c sqrt(s)``.

    ``value`` is the constant: the smallest ``dist(0, ∂f(x)) / sqrt(f(x) - level)``
    over samples strictly above the level. ``details["theta"]`` is the
    least-squares slope of log-distance against log-gap.
    """
    strict = cloud.fgap > STRICT_GAP
    if np.sum(strict) < MIN_KL_SAMPLES:
        raise InsufficientData(
            f"{cloud.instance.name}: only {int(np.sum(strict))} samples strictly above f(xbar); "
            f"need {MIN_KL_SAMPLES}"
        )
    ratio = np.full(len(cloud), math.nan)
    ratio[strict] = cloud.sdist[strict] / np.sqrt(cloud.fgap[strict])

    fit = strict & (cloud.sdist > 0) & np.isfinite(cloud.sdist)
    lg, ls = np.log(cloud.fgap[fit]), np.log(cloud.sdist[fit])
    order = np.lexsort((ls, lg))
    lg, ls = lg[order], ls[order]
    theta = intercept = resid = math.nan
    if lg.size >= 2 and np.ptp(lg) > 0:
        theta, intercept = np.polyfit(lg, ls, 1)
        resid = float(np.sqrt(np.mean((ls - (theta * lg + intercept)) ** 2)))
    details = {
        "theta": float(theta),
        "fit_intercept": float(intercept),
        "fit_residual": resid,
        "fit_samples": int(lg.size),
        "window_max_gap": float(np.max(cloud.fgap[strict])),
    }
    return _estimate(cloud, "kl", ratio, strict, np.min, "down", details)


def estimate_subregularity(cloud: SampleCloud) -> ModulusEstimate:
    """``max dist(x, crit f) / dist(0, ∂f(x))`` over the cloud.

    0/0 samples are skipped; a zero denominator with a positive numerator
    records an infinite ratio.
    """
    num, den = cloud.cdist, cloud.sdist
    both_zero = (num <= ZERO_RATIO) & (den <= ZERO_RATIO)
    used = ~both_zero
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > ZERO_RATIO, num / den, math.inf)
    est = _estimate(cloud, "subregularity", ratio, used, np.max, "up", {})
    if not np.any(used):
        est = ModulusEstimate(est.kind, 0.0, est.per_radius, est.radii, False, est.growth_factors, 0, len(cloud), {})
    return est


def estimate_quadratic_growth(cloud: SampleCloud) -> ModulusEstimate:
    """``min (f(x) - level) / dist^2(x, crit f)``; nonpositive values mean growth fails."""
    cs = cloud.critical_set
    if cs is not None and cs.distance(cloud.base) > 1e-9:
        raise UsageError(f"{cloud.instance.name}: quadratic growth needs a critical base point")
    used = cloud.cdist > CRIT_ZERO
    nu = np.full(len(cloud), math.nan)
    nu[used] = cloud.fgap[used] / cloud.cdist[used] ** 2
    est = _estimate(cloud, "quadratic-growth", nu, used, np.min, "down", {})
    est.details["growth_failure"] = bool(not est.value > 0)
    return est


def check_luo_tseng(cloud: SampleCloud) -> ModulusEstimate:
    """``max dist(x, crit f) / ||R(x)||`` with ``R`` the unit-step residual map."""
    if not cloud.instance.composite:
        raise CapabilityError(f"{cloud.instance.name}: not a composite instance with a proximal kernel")
    used = cloud.rnorm > RESIDUAL_ZERO
    ratio = np.full(len(cloud), math.nan)
    ratio[used] = cloud.cdist[used] / cloud.rnorm[used]
    est = _estimate(cloud, "luo-tseng", ratio, used, np.max, "up", {})
    est.details["max_residual"] = float(np.max(cloud.rnorm)) if len(cloud) else math.nan
    est.details["zero_residual_off_crit"] = int(np.sum(~used & (cloud.cdist > 1e-9)))
    return est


@dataclass(frozen=True)
class ProxRegularityReport:
    rho: float
    delta: float
    worst_slack: float
    passed: bool
    pairs: int
    violation: dict | None = None

    def as_estimate(self) -> ModulusEstimate:
        return ModulusEstimate(
            "prox-regularity", self.rho, (), (), False, (), self.pairs, self.pairs,
            {"worst_slack": self.worst_slack, "passed": self.passed, "delta": self.delta},
        )


def _ball_point(rng, center, coords, radius):
    direction = rng.standard_normal(coords.size)
    direction /= np.linalg.norm(direction)
    x = center.copy()
    x[coords] += radius * rng.random() ** (1.0 / coords.size) * direction
    return x


def check_prox_regularity(instance: FunctionInstance, xbar, rho: float, delta: float,
                          pair_count: int, seed: int) -> ProxRegularityReport:
    """Worst slack of ``f(y) - f(x) - <v, y-x> + rho/2 ||y-x||^2`` over seeded pairs.

    ``x`` ranges over dom f near ``xbar`` with ``f(x) <= f(xbar) + delta``.
    ``v`` alternates between the least-norm subgradient and a random one.
    ``y`` alternates between on-manifold points and arbitrary points of the
    ball (which may fall outside dom f, where the slack is +inf).
    """
    from .model import min_norm_subgradient

    xbar = as_point(instance, xbar)
    if not delta > 0:
        raise UsageError("delta must be positive")
    if rho < 0:
        raise UsageError("rho must be nonnegative")
    fbar = evaluate(instance, xbar)
    if fbar == math.inf:
        raise UsageError(f"{instance.name}: base point is outside dom f")
    coords = sampling_coordinates(instance, xbar)
    every = np.arange(instance.p)
    rng = np.random.default_rng(seed)

    worst, witness, done, attempts = math.inf, None, 0, 0
    while done < pair_count:
        attempts += 1
        if attempts > 100 * pair_count:
            raise InsufficientData(f"{instance.name}: could not draw {pair_count} admissible pairs")
        x = _ball_point(rng, xbar, coords, delta)
        fx = evaluate(instance, x)
        if fx == math.inf or fx > fbar + delta:
            continue
        try:
            v = min_norm_subgradient(instance, x) if done % 2 == 0 else random_subgradient(instance, x, rng)
        except NoExactFormula:
            continue
        y = _ball_point(rng, xbar, coords if done % 4 < 2 else every, delta)
        fy = evaluate(instance, y)
        d = y - x
        slack = math.inf if fy == math.inf else fy - fx - float(v @ d) + 0.5 * rho * float(d @ d)
        if slack < worst:
            worst = slack
            witness = {"x": x.tolist(), "y": y.tolist(), "v": v.tolist(), "slack": slack}
        done += 1
    passed = worst >= -1e-10
    return ProxRegularityReport(float(rho), float(delta), float(worst), passed, done, None if passed else witness)


@dataclass(frozen=True)
class EstimateBundle:
    """All estimates computed on one shared cloud; unavailable ones carry a reason."""

    cloud: SampleCloud
    kl: ModulusEstimate | None
    subregularity: ModulusEstimate | None
    growth: ModulusEstimate | None
    luo_tseng: ModulusEstimate | None
    unavailable: dict = field(default_factory=dict)


def estimate_all(cloud: SampleCloud) -> EstimateBundle:
    out, unavailable = {}, {}
    for key, fn in (
        ("kl", estimate_kl),
        ("subregularity", estimate_subregularity),
        ("growth", estimate_quadratic_growth),
        ("luo_tseng", check_luo_tseng),
    ):
        try:
            out[key] = fn(cloud)
        except (InsufficientData, CapabilityError, UsageError) as exc:
            out[key] = None
            unavailable[key] = str(exc)
    return EstimateBundle(cloud, unavailable=unavailable, **out)
