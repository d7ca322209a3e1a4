"""Structured functions ``f = g + h`` and their first-order oracles.

``g`` is smooth (a quadratic form, a least-squares term, the scalar quartic,
or absent) and ``h`` is one of a handful of nonsmooth parts with closed-form
subdifferentials. Instances are immutable once loaded and every oracle here
is a pure function of ``(instance, x)``.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CapabilityError, ConfigError, NoExactFormula, UsageError

BOX_RADIUS_DEFAULT = 10.0
MAX_SPARSE_DIM = 24

FAMILIES = (
    "zero-norm-quadratic",
    "zero-norm-quadratic-nonneg",
    "zero-norm-indicator",
    "bilinear-zero-norm",
    "quadratic",
    "l1-quadratic",
    "least-squares",
    "plq-least-squares",
    "quartic-gap",
)

_ALLOWED_KEYS = {
    "family", "name", "description", "p", "kappa0", "M", "A", "b", "lambda",
    "box_radius", "m", "plq", "premises",
}


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PLQTable:
    """Convex scalar piecewise linear-quadratic function.

    Piece ``k`` covers ``[breaks[k-1], breaks[k]]`` (unbounded at both ends)
    and equals ``a/2 t^2 + b t + c`` with ``(a, b, c) = coeffs[k]``.
    """

    breaks: tuple
    coeffs: tuple

    @classmethod
    def l1(cls, lam: float) -> "PLQTable":
        return cls((0.0,), ((0.0, -lam, 0.0), (0.0, lam, 0.0)))

    def validate(self, path: str = "plq") -> None:
        if len(self.coeffs) != len(self.breaks) + 1:
            raise ConfigError(path, "need exactly one more piece than breakpoints")
        if any(b1 >= b2 for b1, b2 in zip(self.breaks, self.breaks[1:])):
            raise ConfigError(f"{path}.breaks", "must be strictly increasing")
        for k, (a, _, _) in enumerate(self.coeffs):
            if a < 0:
                raise ConfigError(f"{path}.pieces[{k}]", "curvature must be nonnegative")
        for j, t in enumerate(self.breaks):
            left, right = self._value_on(j, t), self._value_on(j + 1, t)
            if abs(left - right) > 1e-12 * (1 + abs(left)):
                raise ConfigError(f"{path}.breaks[{j}]", "pieces must join continuously")
            if self._slope_on(j, t) > self._slope_on(j + 1, t) + 1e-12:
                raise ConfigError(f"{path}.breaks[{j}]", "slopes must not decrease (convexity)")

    def interval(self, k: int) -> tuple[float, float]:
        lo = self.breaks[k - 1] if k > 0 else -math.inf
        hi = self.breaks[k] if k < len(self.breaks) else math.inf
        return lo, hi

    def _value_on(self, k: int, t: float) -> float:
        a, b, c = self.coeffs[k]
        return 0.5 * a * t * t + b * t + c

    def _slope_on(self, k: int, t: float) -> float:
        a, b, _ = self.coeffs[k]
        return a * t + b

    def value(self, t: float) -> float:
        return self._value_on(bisect.bisect_left(self.breaks, t), t)

    def derivative_interval(self, t: float) -> tuple[float, float]:
        k = bisect.bisect_left(self.breaks, t)
        if k < len(self.breaks) and self.breaks[k] == t:
            return self._slope_on(k, t), self._slope_on(k + 1, t)
        s = self._slope_on(k, t)
        return s, s

    def shifted(self, da: float, db: float) -> "PLQTable":
        """Table of ``phi(t) + da/2 t^2 + db t``."""
        return PLQTable(self.breaks, tuple((a + da, b + db, c) for a, b, c in self.coeffs))

    def prox(self, z: float, tau: float) -> float:
        # Objective is convex: clipping each piece's stationary point to the
        # piece and keeping the best candidate is exact.
        best_u, best_v = None, math.inf
        for k, (a, b, _) in enumerate(self.coeffs):
            lo, hi = self.interval(k)
            u = min(max((z - tau * b) / (1.0 + tau * a), lo), hi)
            v = self._value_on(k, u) + (u - z) ** 2 / (2.0 * tau)
            if v < best_v:
                best_u, best_v = u, v
        return float(best_u)

    def to_config(self) -> dict:
        return {"breaks": list(self.breaks), "pieces": [list(c) for c in self.coeffs]}


@dataclass(frozen=True)
class SmoothPart:
    """``g``: quadratic ``1/2 x'Qx + q'x + const`` (least squares keeps ``A, b``), or quartic."""

    kind: str  # "none" | "quadratic" | "least-squares" | "quartic"
    Q: np.ndarray
    q: np.ndarray
    const: float = 0.0
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    def value(self, x: np.ndarray) -> float:
        if self.kind == "quartic":
            return float(np.sum(x ** 4))
        if self.kind == "least-squares":
            r = self.A @ x - self.b
            return 0.5 * float(r @ r)
        return 0.5 * float(x @ self.Q @ x) + float(self.q @ x) + self.const

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "quartic":
            return 4.0 * x ** 3
        return self.Q @ x + self.q

    @property
    def is_quadratic(self) -> bool:
        return self.kind != "quartic"


@dataclass(frozen=True)
class NonsmoothPart:
    """``h``: one of the closed-form nonsmooth parts.

    ``blocks`` holds ``(indices, level)`` pairs for the sparsity indicators;
    the single-block case is the plain zero-norm set ``{x : ||x||_0 <= kappa0}``.
    """

    kind: str  # "zero" | "l1" | "plq" | "sparsity" | "sparsity-nonneg" | "point-jump"
    lam: float = 0.0
    table: PLQTable | None = None
    blocks: tuple = ()

    @property
    def separable(self) -> bool:
        return self.kind in ("l1", "plq")

    @property
    def convex(self) -> bool:
        return self.kind in ("zero", "l1", "plq")

    @property
    def indicator(self) -> bool:
        return self.kind in ("sparsity", "sparsity-nonneg")


@dataclass(frozen=True)
class Premises:
    """Hypotheses the implication theorems condition on.

    They cannot be decided from samples, so the catalog asserts them.
    ``continuous_on_crit`` means continuity of f relative to dom f at critical points.
    ``crit_values_below`` means critical points near a critical point never
    take a larger value (the separation of stationary values).
    """

    continuous_on_crit: bool = False
    crit_values_below: bool = False
    crit_local_min: bool = False

    def to_config(self) -> dict:
        return {
            "crit_values_below": self.crit_values_below,
            "continuous_on_crit": self.continuous_on_crit,
            "crit_local_min": self.crit_local_min,
        }


@dataclass(frozen=True)
class FunctionInstance:
    name: str
    family: str
    p: int
    smooth: SmoothPart
    nonsmooth: NonsmoothPart
    convex: bool
    L: float
    box_radius: float
    premises: Premises
    source: str  # canonical JSON of the validated config
    description: str = ""
    m: int | None = None  # bilinear family: columns of U and V

    def to_config(self) -> dict:
        return json.loads(self.source)

    @property
    def composite(self) -> bool:
        """True when ``prox_h`` has a closed-form kernel."""
        return self.nonsmooth.kind != "point-jump"


# ---------------------------------------------------------------- oracles

def as_point(instance: FunctionInstance, x) -> np.ndarray:
    """Validate ``x`` as a finite vector of the instance's dimension."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != instance.p:
        raise UsageError(f"{instance.name}: expected a vector of length {instance.p}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise UsageError(f"{instance.name}: point must be finite")
    return x


def _h_value(ns: NonsmoothPart, x: np.ndarray) -> float:
    kind = ns.kind
    if kind == "zero":
        return 0.0
    if kind == "l1":
        return ns.lam * float(np.sum(np.abs(x)))
    if kind == "plq":
        return float(sum(ns.table.value(float(t)) for t in x))
    if kind == "sparsity":
        for idx, level in ns.blocks:
            if np.count_nonzero(x[list(idx)]) > level:
                return math.inf
        return 0.0
    if kind == "sparsity-nonneg":
        (idx, level), = ns.blocks
        if np.any(x < 0) or np.count_nonzero(x) > level:
            return math.inf
        return 0.0
    if kind == "point-jump":
        return -1.0 if x[0] == 0.0 else 0.0
    raise CapabilityError(f"unknown nonsmooth part {kind!r}")


def evaluate(instance: FunctionInstance, x) -> float:
    """``f(x) = g(x) + h(x)``; ``+inf`` exactly when ``x`` is outside dom h.

    For the quartic-gap instance this is ``x**4`` off the origin and ``-1`` at it.
    """
    x = as_point(instance, x)
    hv = _h_value(instance.nonsmooth, x)
    if hv == math.inf:
        return math.inf
    return instance.smooth.value(x) + hv


def in_domain(instance: FunctionInstance, x) -> bool:
    return evaluate(instance, x) < math.inf


def smooth_gradient(instance: FunctionInstance, x) -> np.ndarray:
    """``grad g(x)``; the symmetrized matrix times x for quadratic parts."""
    return instance.smooth.grad(as_point(instance, x))


def _normal_free_mask(instance: FunctionInstance, x: np.ndarray) -> np.ndarray:
    """Coordinates along which the normal cone of the sparsity set is trivial.

    At a point whose every block has exactly ``level`` nonzeros the normal cone
    is the span of the off-support coordinates, so only the support matters.
    Any other in-domain point has no exact formula here.
    """
    keep = np.zeros(instance.p, dtype=bool)
    for idx, level in instance.nonsmooth.blocks:
        idx = np.asarray(idx)
        xb = x[idx]
        nnz = np.count_nonzero(xb)
        if instance.nonsmooth.kind == "sparsity" and level >= len(idx):
            keep[idx] = True
        elif nnz == level:
            keep[idx[xb != 0]] = True
        else:
            raise NoExactFormula(
                f"{instance.name}: support size {nnz} below level {level}; "
                "no exact subdifferential formula at partial-support points"
            )
    return keep


def _separable_intervals(ns: NonsmoothPart, x: np.ndarray) -> np.ndarray:
    return np.array([ns.table.derivative_interval(float(t)) for t in x]).reshape(-1, 2)


def subdiff_distance(instance: FunctionInstance, x) -> float:
    """Exact ``dist(0, ∂f(x))``; ``+inf`` off the domain.

    Raises ``NoExactFormula`` at partial-support points of the sparsity
    indicators.
    """
    x = as_point(instance, x)
    if not in_domain(instance, x):
        return math.inf
    ns = instance.nonsmooth
    grad = instance.smooth.grad(x)
    if ns.kind == "zero":
        return float(np.linalg.norm(grad))
    if ns.separable:
        iv = _separable_intervals(ns, x)
        w = -grad
        d = np.maximum(np.maximum(iv[:, 0] - w, w - iv[:, 1]), 0.0)
        return float(np.linalg.norm(d))
    if ns.indicator:
        keep = _normal_free_mask(instance, x)
        return float(np.linalg.norm(grad[keep]))
    if ns.kind == "point-jump":
        return 0.0 if x[0] == 0.0 else float(abs(grad[0]))
    raise CapabilityError(f"{instance.name}: no subdifferential formula for {ns.kind!r}")


def min_norm_subgradient(instance: FunctionInstance, x) -> np.ndarray:
    """The least-norm element of ``∂f(x)`` (same domain rules as ``subdiff_distance``)."""
    x = as_point(instance, x)
    if not in_domain(instance, x):
        raise UsageError(f"{instance.name}: point outside dom f")
    ns = instance.nonsmooth
    grad = instance.smooth.grad(x)
    if ns.kind == "zero":
        return grad
    if ns.separable:
        iv = _separable_intervals(ns, x)
        return grad + np.clip(-grad, iv[:, 0], iv[:, 1])
    if ns.indicator:
        keep = _normal_free_mask(instance, x)
        return np.where(keep, grad, 0.0)
    if ns.kind == "point-jump":
        return np.zeros(1) if x[0] == 0.0 else grad
    raise CapabilityError(f"{instance.name}: no subdifferential formula for {ns.kind!r}")


def random_subgradient(instance: FunctionInstance, x, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """A random element of ``∂f(x)``: the normal/interval part drawn at random."""
    x = as_point(instance, x)
    if not in_domain(instance, x):
        raise UsageError(f"{instance.name}: point outside dom f")
    ns = instance.nonsmooth
    grad = instance.smooth.grad(x)
    if ns.kind == "zero":
        return grad
    if ns.separable:
        iv = _separable_intervals(ns, x)
        return grad + iv[:, 0] + rng.random(instance.p) * (iv[:, 1] - iv[:, 0])
    if ns.indicator:
        keep = _normal_free_mask(instance, x)
        return np.where(keep, grad, grad + scale * rng.standard_normal(instance.p))
    if ns.kind == "point-jump":
        if x[0] == 0.0:
            return scale * rng.standard_normal(1)
        return grad
    raise CapabilityError(f"{instance.name}: no subdifferential formula for {ns.kind!r}")


def sampling_coordinates(instance: FunctionInstance, xbar) -> np.ndarray:
    """Coordinates that may move when sampling near ``xbar`` without leaving dom f.

    Indicator instances keep the support of ``xbar``; every other family
    moves freely.
    """
    xbar = as_point(instance, xbar)
    ns = instance.nonsmooth
    if not ns.indicator:
        return np.arange(instance.p)
    coords = []
    for idx, level in ns.blocks:
        idx = np.asarray(idx)
        if ns.kind == "sparsity" and level >= len(idx):
            coords.extend(idx.tolist())
        else:
            coords.extend(idx[xbar[idx] != 0].tolist())
    return np.array(sorted(coords), dtype=int)


def reference_level(instance: FunctionInstance, xbar) -> float:
    """Level the f-gaps are measured from.

    This is ``f(xbar)`` except at the isolated downward jump of the
    quartic-gap instance, where it is the limit of f over the punctured
    neighbourhood (0). Measured from -1 instead, the gaps never drop below 1.
    """
    xbar = as_point(instance, xbar)
    if instance.nonsmooth.kind == "point-jump" and xbar[0] == 0.0:
        return 0.0
    return evaluate(instance, xbar)


def prox_regularity_constant(instance: FunctionInstance) -> float | None:
    """A valid ``rho`` for the lower-quadratic subgradient inequality near full-support points.

    A quadratic g satisfies ``g(y) >= g(x) + <∇g(x), y-x> - ||Q||/2 ||y-x||^2``,
    and every supported h satisfies the inequality with rho = 0 at those points.
    Returns ``None`` when no such constant exists (the quartic-gap jump).
    """
    if instance.nonsmooth.kind == "point-jump":
        return None
    return instance.L


# ---------------------------------------------------------------- loading

def _get(cfg: Mapping, key: str, required: bool = True):
    if key not in cfg:
        if required:
            raise ConfigError(key, "required field missing")
        return None
    return cfg[key]


def _matrix(cfg: Mapping, key: str, shape=None) -> np.ndarray:
    raw = _get(cfg, key)
    try:
        a = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(key, "must be a numeric matrix") from None
    if a.ndim != 2:
        raise ConfigError(key, f"must be a 2-d matrix, got {a.ndim}-d")
    if shape is not None:
        for axis, want in enumerate(shape):
            if want is not None and a.shape[axis] != want:
                raise ConfigError(key, f"expected shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(key, "entries must be finite")
    return a


def _vector(cfg: Mapping, key: str, length=None) -> np.ndarray:
    raw = _get(cfg, key)
    try:
        a = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(key, "must be a numeric vector") from None
    if a.ndim != 1 or (length is not None and a.shape[0] != length):
        raise ConfigError(key, f"expected a vector of length {length}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(key, "entries must be finite")
    return a


def _int(cfg: Mapping, key: str, required: bool = True) -> int | None:
    raw = _get(cfg, key, required)
    if raw is None:
        return None
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(key, "must be an integer")
    return raw


def _positive(cfg: Mapping, key: str, default: float) -> float:
    raw = cfg.get(key, default)
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or not raw > 0:
        raise ConfigError(key, "must be a positive number")
    return float(raw)


def _resolve_p(cfg: Mapping, inferred: int) -> int:
    p = _int(cfg, "p", required=False)
    if p is not None and p != inferred:
        raise ConfigError("p", f"declared p={p} but the data implies p={inferred}")
    if inferred < 1:
        raise ConfigError("p", "must be positive")
    return inferred


def _kappa(cfg: Mapping, size: int) -> int:
    k = _int(cfg, "kappa0")
    if not 1 <= k <= size:
        raise ConfigError("kappa0", f"must satisfy 1 <= kappa0 <= {size}, got {k}")
    return k


def _quadratic_part(M: np.ndarray) -> SmoothPart:
    Mbar = 0.5 * (M + M.T)
    return SmoothPart("quadratic", _readonly(Mbar), _readonly(np.zeros(M.shape[0])))


def _least_squares_part(cfg: Mapping) -> SmoothPart:
    A = _matrix(cfg, "A")
    b = _vector(cfg, "b", A.shape[0])
    return SmoothPart(
        "least-squares", _readonly(A.T @ A), _readonly(-A.T @ b), 0.5 * float(b @ b),
        A=_readonly(A), b=_readonly(b),
    )


def _lambda(cfg: Mapping, required: bool) -> float:
    raw = cfg.get("lambda", None if required else 0.0)
    if raw is None:
        raise ConfigError("lambda", "required field missing")
    if isinstance(raw, bool) or not isinstance(raw, (int, float)) or raw < 0:
        raise ConfigError("lambda", "must be a nonnegative number")
    return float(raw)


def _premises(cfg: Mapping, convex: bool) -> Premises:
    raw = cfg.get("premises", {})
    if not isinstance(raw, Mapping):
        raise ConfigError("premises", "must be an object")
    known = {"continuous_on_crit", "crit_values_below", "crit_local_min"}
    for key, val in raw.items():
        if key not in known:
            raise ConfigError(f"premises.{key}", "unknown premise")
        if not isinstance(val, bool):
            raise ConfigError(f"premises.{key}", "must be a boolean")
    # Convex: crit f is the minimizer set, continuity holds relative to the
    # domain for the supported families, and stationary values coincide.
    default = convex
    return Premises(
        continuous_on_crit=raw.get("continuous_on_crit", default),
        crit_values_below=raw.get("crit_values_below", default),
        crit_local_min=raw.get("crit_local_min", default),
    )


def _canonical(cfg: Mapping) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def load_instance(config) -> FunctionInstance:
    """Build a validated instance from a JSON string or an already-parsed mapping."""
    if isinstance(config, (str, bytes)):
        try:
            config = json.loads(config)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"invalid JSON: {exc}") from None
    if not isinstance(config, Mapping):
        raise ConfigError("", "instance config must be a JSON object")
    for key in config:
        if key not in _ALLOWED_KEYS:
            raise ConfigError(key, "unknown field")
    family = _get(config, "family")
    if family not in FAMILIES:
        raise ConfigError("family", f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")

    m = None
    if family in ("zero-norm-quadratic", "zero-norm-quadratic-nonneg"):
        M = _matrix(config, "M")
        if M.shape[0] != M.shape[1]:
            raise ConfigError("M", "must be square")
        p = _resolve_p(config, M.shape[0])
        k = _kappa(config, p)
        smooth = _quadratic_part(M)
        kind = "sparsity" if family == "zero-norm-quadratic" else "sparsity-nonneg"
        nonsmooth = NonsmoothPart(kind, blocks=((tuple(range(p)), k),))
    elif family == "zero-norm-indicator":
        p = _int(config, "p")
        if p is None or p < 1:
            raise ConfigError("p", "must be a positive integer")
        k = _kappa(config, p)
        smooth = SmoothPart("none", _readonly(np.zeros((p, p))), _readonly(np.zeros(p)))
        nonsmooth = NonsmoothPart("sparsity", blocks=((tuple(range(p)), k),))
    elif family == "bilinear-zero-norm":
        A = _matrix(config, "A")
        if A.shape[0] != A.shape[1]:
            raise ConfigError("A", "must be square (n x n)")
        n = A.shape[0]
        m = _int(config, "m")
        if m < 1:
            raise ConfigError("m", "must be a positive integer")
        p = _resolve_p(config, 2 * n * m)
        k = _kappa(config, n * m)
        K = np.kron(np.eye(m), A)  # vec(A V) = (I_m ⊗ A) vec(V), column-major vec
        Q = np.block([[np.zeros((n * m, n * m)), K], [K.T, np.zeros((n * m, n * m))]])
        smooth = SmoothPart("quadratic", _readonly(Q), _readonly(np.zeros(p)))
        nonsmooth = NonsmoothPart(
            "sparsity", blocks=((tuple(range(n * m)), k), (tuple(range(n * m, p)), k))
        )
    elif family == "quadratic":
        M = _matrix(config, "M")
        if M.shape[0] != M.shape[1]:
            raise ConfigError("M", "must be square")
        p = _resolve_p(config, M.shape[0])
        smooth = _quadratic_part(M)
        nonsmooth = NonsmoothPart("zero")
    elif family == "l1-quadratic":
        M = _matrix(config, "M")
        if M.shape[0] != M.shape[1]:
            raise ConfigError("M", "must be square")
        p = _resolve_p(config, M.shape[0])
        lam = _lambda(config, required=True)
        smooth = _quadratic_part(M)
        nonsmooth = NonsmoothPart("l1", lam=lam, table=PLQTable.l1(lam))
    elif family == "least-squares":
        smooth = _least_squares_part(config)
        p = _resolve_p(config, smooth.A.shape[1])
        lam = _lambda(config, required=False)
        nonsmooth = NonsmoothPart("l1", lam=lam, table=PLQTable.l1(lam)) if lam > 0 else NonsmoothPart("zero")
    elif family == "plq-least-squares":
        smooth = _least_squares_part(config)
        p = _resolve_p(config, smooth.A.shape[1])
        raw = _get(config, "plq")
        if not isinstance(raw, Mapping) or "breaks" not in raw or "pieces" not in raw:
            raise ConfigError("plq", "must be an object with 'breaks' and 'pieces'")
        try:
            table = PLQTable(
                tuple(float(t) for t in raw["breaks"]),
                tuple(tuple(float(c) for c in piece) for piece in raw["pieces"]),
            )
        except (TypeError, ValueError):
            raise ConfigError("plq", "breaks and pieces must be numeric") from None
        if any(len(c) != 3 for c in table.coeffs):
            raise ConfigError("plq.pieces", "each piece is [a, b, c]")
        table.validate()
        nonsmooth = NonsmoothPart("plq", table=table)
    else:  # quartic-gap
        p = _resolve_p(config, 1)
        smooth = SmoothPart("quartic", _readonly(np.zeros((1, 1))), _readonly(np.zeros(1)))
        nonsmooth = NonsmoothPart("point-jump")

    if nonsmooth.indicator and p > MAX_SPARSE_DIM:
        raise ConfigError("p", f"sparsity instances are limited to p <= {MAX_SPARSE_DIM}")

    box = _positive(config, "box_radius", BOX_RADIUS_DEFAULT)
    if smooth.kind == "quartic":
        L = 12.0 * box * box
        smooth_convex = True
    else:
        L = float(np.linalg.norm(smooth.Q, 2)) if p else 0.0
        lmin = float(np.linalg.eigvalsh(smooth.Q)[0])
        smooth_convex = lmin >= -1e-12 * max(1.0, L)
    convex = smooth_convex and nonsmooth.convex

    name = config.get("name", family)
    if not isinstance(name, str) or not name:
        raise ConfigError("name", "must be a nonempty string")
    description = config.get("description", "")
    if not isinstance(description, str):
        raise ConfigError("description", "must be a string")

    return FunctionInstance(
        name=name,
        family=family,
        p=p,
        smooth=smooth,
        nonsmooth=nonsmooth,
        convex=convex,
        L=L,
        box_radius=box,
        premises=_premises(config, convex),
        source=_canonical(config),
        description=description,
        m=m,
    )


def vec_bilinear(U, V) -> np.ndarray:
    """Stack two n-by-m matrices as one vector (column-major)."""
    return np.concatenate([np.asarray(U, float).flatten(order="F"), np.asarray(V, float).flatten(order="F")])


def unvec_bilinear(instance: FunctionInstance, x) -> tuple[np.ndarray, np.ndarray]:
    x = as_point(instance, x)
    half = instance.p // 2
    n = half // instance.m
    return (x[:half].reshape((n, instance.m), order="F"), x[half:].reshape((n, instance.m), order="F"))


# ---------------------------------------------------------------- catalog

def _catalog_dir():
    return resources.files("regmod") / "data" / "catalog"


def catalog_names() -> list[str]:
    return sorted(p.name[:-5] for p in _catalog_dir().iterdir() if p.name.endswith(".json"))


def load_catalog() -> dict[str, FunctionInstance]:
    return {name: get_instance(name) for name in catalog_names()}


def get_instance(ref: str) -> FunctionInstance:
    """Resolve a catalog name or a path to an instance JSON file."""
    entry = _catalog_dir() / f"{ref}.json"
    if entry.is_file():
        return load_instance(entry.read_text(encoding="utf-8"))
    path = Path(ref)
    if path.is_file():
        return load_instance(path.read_text(encoding="utf-8"))
    raise ConfigError("instance", f"{ref!r} is neither a catalog name nor a readable file")
