"""Exact critical sets ``(∂f)^{-1}(0)`` by brute-force enumeration.

Every supported family has a critical set that is a finite union of
polyhedra. Each polyhedron is enumerated from a combinatorial choice
(a support, a sign/piece pattern, an active face) and stored as an affine
hull ``origin + span(basis)`` plus inequalities in hull coordinates.
Distances are exact: the projection onto a polyhedron equals the
projection onto the affine hull of its active face, so the minimum over
feasible face projections is the true distance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DomainError
from .model import FunctionInstance, as_point

_RANK_TOL = 1e-10
_FEAS_TOL = 1e-9
_SNAP_TOL = 1e-15
MAX_PATTERNS = 50_000
MAX_FACES = 4096


def _affine_solution(E: np.ndarray, e: np.ndarray, n: int):
    """Min-norm solution and orthonormal null basis of ``E x = e`` (``None`` if inconsistent)."""
    if E.shape[0] == 0:
        return np.zeros(n), np.eye(n)
    U, s, Vt = np.linalg.svd(E, full_matrices=True)
    r = int(np.sum(s > _RANK_TOL * max(1.0, s[0] if s.size else 0.0)))
    x0 = Vt[:r].T @ ((U[:, :r].T @ e) / s[:r])
    if np.linalg.norm(E @ x0 - e) > 1e-9 * (1.0 + np.linalg.norm(e)):
        return None
    return x0, Vt[r:].T


@dataclass(frozen=True)
class CriticalPiece:
    """One polyhedron ``{origin + basis t : G t >= g}`` of the critical set."""

    support: tuple
    origin: np.ndarray
    basis: np.ndarray  # p x d, orthonormal columns
    G: np.ndarray  # inequalities in hull coordinates
    g: np.ndarray
    faces_t0: np.ndarray = field(repr=False)
    faces_proj: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_subspace_like(self) -> bool:
        """No inequality constraints: the piece is its affine hull."""
        return self.G.shape[0] == 0

    def project(self, x: np.ndarray) -> np.ndarray:
        y = self.basis.T @ (x - self.origin)
        if self.G.shape[0] == 0:
            t = y
        else:
            cands = self.faces_t0 + np.einsum("fij,fj->fi", self.faces_proj, y - self.faces_t0)
            viol = np.min(cands @ self.G.T - self.g, axis=1, initial=math.inf)
            scale = 1.0 + np.linalg.norm(y)
            ok = viol >= -_FEAS_TOL * scale
            gaps = np.sum((cands - y) ** 2, axis=1)
            if np.any(ok):
                gaps = np.where(ok, gaps, math.inf)
            else:  # numerically marginal; keep the least violating candidate
                gaps = -viol
            t = cands[int(np.argmin(gaps))]
        out = self.origin + self.basis @ t
        # coordinates the hull pins keep their exact value, and rounding
        # residue at zero is cleared so projected points stay inside dom f
        out[self.pinned] = self.origin[self.pinned]
        out[np.abs(out) <= _SNAP_TOL * (1.0 + np.abs(self.origin).max(initial=0.0))] = 0.0
        return out

    @property
    def pinned(self) -> np.ndarray:
        return np.linalg.norm(self.basis, axis=1) <= _RANK_TOL

    def distance(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(x - self.project(x)))

    def to_json(self) -> dict:
        return {
            "support": list(self.support),
            "dim": self.dim,
            "origin": self.origin.tolist(),
            "basis": self.basis.T.tolist(),
            "inequalities": {"G": (self.G @ self.basis.T).tolist(), "g": (self.g + self.G @ (self.basis.T @ self.origin)).tolist()},
        }


def _make_piece(p: int, E, e, Gx, gx, support):
    sol = _affine_solution(np.asarray(E, float).reshape(-1, p), np.asarray(e, float), p)
    if sol is None:
        return None
    x0, N = sol
    x0[np.abs(x0) <= _SNAP_TOL * (1.0 + np.abs(x0).max(initial=0.0))] = 0.0
    Gx = np.asarray(Gx, float).reshape(-1, p)
    gx = np.asarray(gx, float)
    Gt = Gx @ N
    gt = gx - Gx @ x0
    rows = []
    for i in range(Gt.shape[0]):
        nrm = np.linalg.norm(Gt[i])
        if nrm <= _RANK_TOL:
            if gt[i] > _FEAS_TOL * (1.0 + np.linalg.norm(x0)):
                return None  # constant constraint violated: empty piece
            continue
        rows.append((Gt[i] / nrm, gt[i] / nrm))
    d = N.shape[1]
    G = np.array([r[0] for r in rows]) if rows else np.zeros((0, d))
    g = np.array([r[1] for r in rows]) if rows else np.zeros(0)
    t0s, projs = _faces(G, g, d)
    if G.shape[0] and t0s.shape[0] == 0:
        return None
    return CriticalPiece(tuple(support), x0, N, G, g, t0s, projs)


def _faces(G: np.ndarray, g: np.ndarray, d: int):
    r = G.shape[0]
    if r == 0:
        return np.zeros((1, d)), np.eye(d)[None]  # unused: no inequalities
    subsets = [w for k in range(0, min(r, d) + 1) for w in itertools.combinations(range(r), k)]
    if len(subsets) > MAX_FACES:
        raise CapabilityError(f"critical piece has {len(subsets)} candidate faces (limit {MAX_FACES})")
    seen, t0s, projs = set(), [], []
    for w in subsets:
        sol = _affine_solution(G[list(w)], g[list(w)], d)
        if sol is None:
            continue
        t0, N = sol
        if N.shape[1] == 0 and np.min(G @ t0 - g) < -_FEAS_TOL * (1 + np.linalg.norm(t0)):
            continue
        P = N @ N.T
        key = (tuple(np.round(t0, 9)), tuple(np.round(P, 9).ravel()))
        if key in seen:
            continue
        seen.add(key)
        t0s.append(t0)
        projs.append(P)
    if not t0s:
        return np.zeros((0, d)), np.zeros((0, d, d))
    return np.array(t0s), np.array(projs)


@dataclass(frozen=True)
class CriticalSet:
    instance_name: str
    p: int
    pieces: tuple

    def __post_init__(self):
        flat = [pc for pc in self.pieces if pc.is_subspace_like]
        object.__setattr__(self, "_flat_origins", np.array([pc.origin for pc in flat]).reshape(-1, self.p))
        object.__setattr__(
            self, "_flat_projs", np.array([pc.basis @ pc.basis.T for pc in flat]).reshape(-1, self.p, self.p)
        )
        object.__setattr__(self, "_others", tuple(pc for pc in self.pieces if not pc.is_subspace_like))

    def _check(self, x) -> np.ndarray:
        if not self.pieces:
            raise DomainError(f"{self.instance_name}: critical set is empty")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.p,):
            raise DomainError(f"expected a vector of length {self.p}")
        return x

    def distance(self, x) -> float:
        x = self._check(x)
        best = math.inf
        if self._flat_origins.shape[0]:
            diff = x - self._flat_origins
            res = diff - np.einsum("kij,kj->ki", self._flat_projs, diff)
            best = float(np.sqrt(np.min(np.sum(res * res, axis=1))))
        for pc in self._others:
            best = min(best, pc.distance(x))
        return best

    def project(self, x) -> np.ndarray:
        x = self._check(x)
        cands = [pc.project(x) for pc in self.pieces]
        return cands[int(np.argmin([np.linalg.norm(x - c) for c in cands]))]

    def sample_points(self, rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
        """Random points on the set: Gaussian points in a random piece's hull, projected onto the piece."""
        out = np.empty((n, self.p))
        for i in range(n):
            pc = self.pieces[int(rng.integers(len(self.pieces)))]
            t = scale * rng.standard_normal(pc.dim)
            out[i] = pc.project(pc.origin + pc.basis @ t)
        return out

    def grid(self, scale: float = 1.0, steps=(-2, -1, 0, 1, 2)) -> np.ndarray:
        """Deterministic points on every piece (origin moved along each basis direction)."""
        pts = []
        for pc in self.pieces:
            if pc.dim == 0:
                pts.append(pc.origin)
                continue
            for j in range(pc.dim):
                for s in steps:
                    pts.append(pc.project(pc.origin + s * scale * pc.basis[:, j]))
        return np.unique(np.round(np.array(pts), 14), axis=0)

    def to_json(self) -> dict:
        return {"instance": self.instance_name, "p": self.p, "components": [pc.to_json() for pc in self.pieces]}


def critical_distance(cs: CriticalSet, x) -> float:
    """Exact ``dist(x, crit f)``."""
    return cs.distance(x)


# ---------------------------------------------------------------- enumeration

def _quadratic_data(instance: FunctionInstance):
    sm = instance.smooth
    if not sm.is_quadratic:
        raise CapabilityError(f"{instance.name}: smooth part is not quadratic")
    return np.asarray(sm.Q), np.asarray(sm.q)


def _pieces_plain(p, Q, q):
    pc = _make_piece(p, Q, -q, np.zeros((0, p)), np.zeros(0), range(p))
    return [pc] if pc is not None else []


def _pieces_separable(p, Q, q, table):
    nb = len(table.breaks)
    options = [("piece", k) for k in range(nb + 1)] + [("break", j) for j in range(nb)]
    if len(options) ** p > MAX_PATTERNS:
        raise CapabilityError(f"{len(options)}^{p} sign/piece patterns exceed the enumeration limit")
    eye = np.eye(p)
    pieces = []
    for pattern in itertools.product(options, repeat=p):
        E, e, G, g, support = [], [], [], [], []
        for i, (what, k) in enumerate(pattern):
            if what == "piece":
                a, b, _ = table.coeffs[k]
                E.append(Q[i] + a * eye[i])
                e.append(-q[i] - b)
                lo, hi = table.interval(k)
                if lo > -math.inf:
                    G.append(eye[i]); g.append(lo)
                if hi < math.inf:
                    G.append(-eye[i]); g.append(-hi)
                support.append(i)
            else:
                t = table.breaks[k]
                dl, dr = table.derivative_interval(t)
                E.append(eye[i]); e.append(t)
                G.append(-Q[i]); g.append(dl + q[i])
                G.append(Q[i]); g.append(-dr - q[i])
                if t != 0.0:
                    support.append(i)
        pc = _make_piece(p, np.array(E), np.array(e), np.array(G).reshape(-1, p), np.array(g), support)
        if pc is not None:
            pieces.append(pc)
    return pieces


def _pieces_sparse(p, Q, q, blocks):
    per_block = []
    for idx, level in blocks:
        idx = tuple(idx)
        per_block.append([idx] if level >= len(idx) else list(itertools.combinations(idx, level)))
    total = math.prod(len(c) for c in per_block)
    if total > MAX_PATTERNS:
        raise CapabilityError(f"{total} supports exceed the enumeration limit")
    eye = np.eye(p)
    pieces = []
    for choice in itertools.product(*per_block):
        I = sorted(itertools.chain.from_iterable(choice))
        off = [j for j in range(p) if j not in I]
        E = np.vstack([eye[off], Q[I]])
        e = np.concatenate([np.zeros(len(off)), -q[I]])
        pc = _make_piece(p, E, e, np.zeros((0, p)), np.zeros(0), I)
        if pc is not None:
            pieces.append(pc)
    return pieces


def _pieces_sparse_nonneg(p, Q, q, level):
    # Limiting normal cone of {x >= 0, ||x||_0 <= k} at x with support A and
    # zero set Z: {v : v_A = 0, and v_Z <= 0 or ||v_Z||_0 <= p - k}.
    eye = np.eye(p)
    pieces = []
    for I in itertools.combinations(range(p), level):
        I = list(I)
        off = [j for j in range(p) if j not in I]
        E = np.vstack([eye[off], Q[I]])
        e = np.concatenate([np.zeros(len(off)), -q[I]])
        pc = _make_piece(p, E, e, eye[I], np.zeros(len(I)), I)
        if pc is not None:
            pieces.append(pc)
    for size in range(level):
        for A in itertools.combinations(range(p), size):
            A = list(A)
            Z = [j for j in range(p) if j not in A]
            E = np.vstack([eye[Z], Q[A]])
            e = np.concatenate([np.zeros(len(Z)), -q[A]])
            G = np.vstack([eye[A], Q[Z]])
            g = np.concatenate([np.zeros(len(A)), -q[Z]])
            pc = _make_piece(p, E, e, G, g, A)
            if pc is not None:
                pieces.append(pc)
    return pieces


def _dedupe(pieces):
    seen, out = set(), []
    for pc in pieces:
        key = (
            tuple(np.round(pc.origin, 10)),
            tuple(np.round(pc.basis @ pc.basis.T, 10).ravel()),
            tuple(np.round(pc.G @ pc.basis.T, 10).ravel()),
            tuple(np.round(pc.g, 10)),
        )
        if key not in seen:
            seen.add(key)
            out.append(pc)
    # isolated points already covered by a larger piece carry no information
    points = [pc for pc in out if pc.dim == 0]
    larger = [pc for pc in out if pc.dim > 0]
    kept_points = [pt for pt in points if not any(pc.distance(pt.origin) <= 1e-12 for pc in larger)]
    return larger + kept_points


def enumerate_critical_set(instance: FunctionInstance) -> CriticalSet:
    """Enumerate ``crit f`` as a union of polyhedral pieces."""
    p, ns = instance.p, instance.nonsmooth
    if ns.kind == "point-jump":
        pieces = [_make_piece(p, np.eye(p), np.zeros(p), np.zeros((0, p)), np.zeros(0), ())]
    else:
        Q, q = _quadratic_data(instance)
        if ns.kind == "zero":
            pieces = _pieces_plain(p, Q, q)
        elif ns.separable:
            pieces = _pieces_separable(p, Q, q, ns.table)
        elif ns.kind == "sparsity":
            pieces = _pieces_sparse(p, Q, q, ns.blocks)
        elif ns.kind == "sparsity-nonneg":
            (_, level), = ns.blocks
            pieces = _pieces_sparse_nonneg(p, Q, q, level)
        else:
            raise CapabilityError(f"{instance.name}: no critical-set enumeration for {ns.kind!r}")
    return CriticalSet(instance.name, p, tuple(_dedupe(pieces)))


def is_critical(cs: CriticalSet, instance: FunctionInstance, x, tol: float = 1e-9) -> bool:
    return cs.distance(as_point(instance, x)) <= tol
