"""Closed-form proximal kernels and the unit-step proximal-gradient residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, UsageError
from .model import FunctionInstance, NonsmoothPart, as_point


@dataclass(frozen=True)
class ProxRequest:
    nonsmooth: NonsmoothPart
    z: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise UsageError(f"prox step must be positive, got {self.tau}")


def project_sparse(z, kappa0: int) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_0 <= kappa0}`` (hard thresholding).

    Keeps the ``kappa0`` largest magnitudes; ties go to the lowest index.
    """
    z = np.asarray(z, dtype=float)
    if not 1 <= kappa0 <= z.shape[0]:
        raise UsageError(f"kappa0 must lie in [1, {z.shape[0]}], got {kappa0}")
    keep = np.argsort(-np.abs(z), kind="stable")[:kappa0]
    out = np.zeros_like(z)
    out[keep] = z[keep]
    return out


def project_sparse_nonneg(z, kappa0: int) -> np.ndarray:
    """Projection onto the nonnegative ``kappa0``-sparse vectors.

    Clamping first is exact: for a nonnegative target the negative entries
    can never beat zero.
    """
    return project_sparse(np.maximum(np.asarray(z, dtype=float), 0.0), kappa0)


def prox_h(req: ProxRequest) -> np.ndarray:
    """Minimizer of ``h(u) + ||u - z||^2 / (2 tau)`` for the supported ``h``."""
    ns, z, tau = req.nonsmooth, np.asarray(req.z, dtype=float), req.tau
    if ns.kind == "zero":
        return z.copy()
    if ns.kind == "l1":
        t = tau * ns.lam
        return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    if ns.kind == "plq":
        return np.array([ns.table.prox(float(v), tau) for v in z])
    if ns.kind == "sparsity":
        out = np.zeros_like(z)
        for idx, level in ns.blocks:
            idx = list(idx)
            out[idx] = project_sparse(z[idx], min(level, len(idx)))
        return out
    if ns.kind == "sparsity-nonneg":
        (_, level), = ns.blocks
        return project_sparse_nonneg(z, level)
    raise CapabilityError(f"no closed-form proximal kernel for {ns.kind!r}")


def residual_map(instance: FunctionInstance, x) -> np.ndarray:
    """``prox_h(x - ∇g(x)) - x`` with unit step."""
    x = as_point(instance, x)
    if not instance.composite:
        raise CapabilityError(f"{instance.name}: no closed-form proximal kernel for its nonsmooth part")
    return prox_h(ProxRequest(instance.nonsmooth, x - instance.smooth.grad(x), 1.0)) - x
