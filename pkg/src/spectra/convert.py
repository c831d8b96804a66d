"""Conversions from classical set representations into shadows.

H-polyhedra and ellipsoids become spectrahedrons directly; zonotopes,
p-norm balls, constrained zonotopes, and ellipsotopes are assembled from
those primitives with the exact set operations (affine images of box or
ball-product latent sets intersected with the stated equalities).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import ops
from .errors import ContractViolation
from .pencil import BlockGroup, Shadow, SymSparse


def _as_matrix(mat, rows=None, cols=None, what="matrix") -> np.ndarray:
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    if rows is not None and mat.shape[0] != rows:
        raise ValueError(f"{what} has {mat.shape[0]} rows, expected {rows}")
    if cols is not None and mat.shape[1] != cols:
        raise ValueError(f"{what} has {mat.shape[1]} columns, expected {cols}")
    return mat


@dataclass(frozen=True, eq=False)
class HPolyhedron:
    """``{x : A x <= b}``."""

    a_matrix: np.ndarray
    b_vector: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, what="A")
        b = np.asarray(self.b_vector, dtype=float).reshape(-1)
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"A has {a.shape[0]} rows but b has length {b.shape[0]}")
        object.__setattr__(self, "a_matrix", a)
        object.__setattr__(self, "b_vector", b)

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(np.all(self.a_matrix @ np.asarray(x) <= self.b_vector + tol))


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``{x : (x - c)^T Q^{-1} (x - c) <= 1}`` with ``Q`` positive definite."""

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        q = _as_matrix(self.shape, rows=c.shape[0], cols=c.shape[0], what="Q")
        if np.abs(q - q.T).max(initial=0.0) > 1e-9 * (1.0 + np.abs(q).max(initial=0.0)):
            raise ContractViolation("ellipsoid shape matrix must be symmetric")
        q = 0.5 * (q + q.T)
        if float(np.linalg.eigvalsh(q)[0]) <= 0.0:
            raise ContractViolation("ellipsoid shape matrix must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", q)

    def contains(self, x, tol: float = 1e-9) -> bool:
        d = np.asarray(x) - self.center
        return float(d @ np.linalg.solve(self.shape, d)) <= 1.0 + tol


@dataclass(frozen=True, eq=False)
class Zonotope:
    """``{c + G xi : ||xi||_inf <= 1}``."""

    center: np.ndarray
    generators: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        g = np.asarray(self.generators, dtype=float)
        if g.size == 0:
            g = g.reshape(c.shape[0], 0)
        g = np.atleast_2d(g)
        if g.shape[0] != c.shape[0]:
            raise ValueError(f"G has {g.shape[0]} rows but the center has length {c.shape[0]}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)

    def support(self, a) -> float:
        a = np.asarray(a, dtype=float)
        return float(a @ self.center + np.abs(a @ self.generators).sum())


@dataclass(frozen=True, eq=False)
class Ellipsotope:
    """``{c + G xi : ||xi<J>||_p <= 1 for J in the index set, A xi = b}``.

    The index sets must partition the generator indices; a constrained
    zonotope is the special case ``p = inf`` with singleton index sets.
    """

    p: Fraction | float
    center: np.ndarray
    generators: np.ndarray
    constraint_a: np.ndarray | None = None
    constraint_b: np.ndarray | None = None
    index_sets: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(-1)
        g = _as_matrix(self.generators, rows=c.shape[0], what="G")
        n_g = g.shape[1]
        p = self.p if self.p == math.inf else Fraction(self.p)
        if p != math.inf and p < 1:
            raise ContractViolation(f"p must satisfy p >= 1, got {p}")
        idx = tuple(tuple(int(i) for i in grp) for grp in self.index_sets)
        if not idx:
            idx = (tuple(range(1, n_g + 1)),)
        flat = [i for grp in idx for i in grp]
        if sorted(flat) != list(range(1, n_g + 1)):
            raise ContractViolation(
                f"index sets must partition 1..{n_g}, got {idx}"
            )
        a = self.constraint_a
        b = self.constraint_b
        if (a is None) != (b is None):
            raise ContractViolation("constraint matrix and offset must be given together")
        if a is not None:
            a = _as_matrix(a, cols=n_g, what="constraint A")
            b = np.asarray(b, dtype=float).reshape(-1)
            if b.shape[0] != a.shape[0]:
                raise ContractViolation("constraint A and b have inconsistent rows")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "constraint_a", a)
        object.__setattr__(self, "constraint_b", b)
        object.__setattr__(self, "index_sets", idx)


def constrained_zonotope(center, generators, constraint_a=None, constraint_b=None) -> Ellipsotope:
    """Constrained zonotope as the ``p = inf`` ellipsotope with singleton index sets."""
    g = np.atleast_2d(np.asarray(generators, dtype=float))
    return Ellipsotope(
        math.inf, center, g, constraint_a, constraint_b,
        tuple((j,) for j in range(1, g.shape[1] + 1)),
    )


def from_hpolyhedron(poly: HPolyhedron) -> Shadow:
    """Diagonal spectrahedron with one slot per inequality.

    The pencil is diagonal, so each inequality is stored as its own 1x1
    block; solvers then see scalar cones instead of one large PSD cone.
    """
    a, b = poly.a_matrix, poly.b_vector
    n_c, n = a.shape
    if n_c == 0:
        raise ContractViolation("an H-polyhedron needs at least one inequality")
    blocks = tuple(
        BlockGroup(
            1,
            SymSparse.diag([b[row]]),
            tuple(SymSparse.diag([-a[row, i]]) for i in range(n)),
            (),
        )
        for row in range(n_c)
    )
    return Shadow(n, 0, blocks)


def from_ellipsoid(ell: Ellipsoid) -> Shadow:
    """Schur-complement pencil of size ``n + 1``."""
    c, q = ell.center, ell.shape
    n = c.shape[0]
    lam_entries = [
        (r + 1, col + 1, float(q[r, col]))
        for col in range(n)
        for r in range(col + 1)
        if q[r, col] != 0.0
    ]
    lam_entries.extend((i + 1, n + 1, float(-c[i])) for i in range(n) if c[i] != 0.0)
    lam_entries.append((n + 1, n + 1, 1.0))
    a_mats = tuple(SymSparse(n + 1, ((i + 1, n + 1, 1.0),)) for i in range(n))
    return Shadow(n, 0, (BlockGroup(n + 1, SymSparse(n + 1, tuple(lam_entries)), a_mats, ()),))


def _box(n: int) -> Shadow:
    """Unit infinity-norm ball as an H-polyhedron shadow."""
    return from_hpolyhedron(HPolyhedron(np.vstack([np.eye(n), -np.eye(n)]), np.ones(2 * n)))


def _singleton(point: np.ndarray) -> Shadow:
    point = np.asarray(point, dtype=float).reshape(-1)
    return from_hpolyhedron(
        HPolyhedron(np.vstack([np.eye(point.shape[0]), -np.eye(point.shape[0])]),
                    np.concatenate([point, -point]))
    )


def from_zonotope(zono: Zonotope) -> Shadow:
    """Affine image ``c + G o B_inf`` of the latent unit box."""
    c, g = zono.center, zono.generators
    if g.shape[1] == 0:
        return _singleton(c)
    return ops.translate(ops.linear_map(_box(g.shape[1]), g), c)


def from_pnorm_ball(dim: int, p) -> Shadow:
    """Unit ``p``-norm ball for rational ``p >= 1`` or ``p = inf``.

    The finite-``p`` route uses only in-house machinery: lifted weights
    ``t`` on the simplex and per-coordinate memberships
    ``(t_i, w_i) in S(1/p)`` bounding ``|x_i| <= w_i <= t_i^{1/p}``.
    """
    if dim < 1:
        raise ContractViolation(f"ball dimension must be positive, got {dim}")
    if p == math.inf:
        return _box(dim)
    p = Fraction(p)
    if p < 1:
        raise ContractViolation(f"p must satisfy p >= 1, got {p}")
    sq = ops.build_sq_set(ops.SqSetParams.from_q(Fraction(1, 1) / p))
    mq = sq.m
    # Lifted layout: t (dim), w (dim), then one tower per coordinate.
    m_out = 2 * dim + dim * mq
    n = dim
    blocks = []

    def slot_mat(size, entries):
        return SymSparse(size, tuple(entries))

    # sum t_i = 1 via two singletons.
    for sign in (1.0, -1.0):
        lam = SymSparse(1, ((1, 1, sign),))
        placed = {("y", i + 1): slot_mat(1, [(1, 1, -sign)]) for i in range(dim)}
        blocks.append(ops._block(1, lam, n, m_out, placed))
    # |x_i| <= w_i via two singletons per coordinate.
    for i in range(dim):
        for sign in (1.0, -1.0):
            blocks.append(ops._block(1, SymSparse.zero(1), n, m_out, {
                ("x", i + 1): slot_mat(1, [(1, 1, -sign)]),
                ("y", dim + i + 1): slot_mat(1, [(1, 1, 1.0)]),
            }))
    # (t_i, w_i) in S(1/p).
    for i in range(dim):
        w_off = 2 * dim + i * mq
        remap = {("x", 1): ("y", i + 1), ("x", 2): ("y", dim + i + 1)}
        remap.update({("y", k): ("y", w_off + k) for k in range(1, mq + 1)})
        for blk in sq.blocks:
            placed = {}
            for src, mat in zip((("x", 1), ("x", 2)), blk.a_mats):
                if not mat.is_zero:
                    placed[remap[src]] = mat
            for k, mat in enumerate(blk.b_mats, start=1):
                if not mat.is_zero:
                    placed[remap[("y", k)]] = mat
            blocks.append(ops._block(blk.block_size, blk.lam, n, m_out, placed))
    return Shadow(n, m_out, tuple(blocks))


def from_ellipsotope(etope: Ellipsotope) -> Shadow:
    """Ball product intersected with the equality polyhedra, then ``c + G o (.)``."""
    n_g = etope.generators.shape[1]
    if n_g == 0:
        return _singleton(etope.center)
    balls = [from_pnorm_ball(len(grp), etope.p) for grp in etope.index_sets]
    latent = balls[0]
    for ball in balls[1:]:
        latent = ops.cartesian_product(latent, ball)
    order = [i for grp in etope.index_sets for i in grp]
    if order != list(range(1, n_g + 1)):
        perm = np.zeros((n_g, n_g))
        for pos, gen_idx in enumerate(order):
            perm[gen_idx - 1, pos] = 1.0
        latent = ops.linear_map(latent, perm)
    if etope.constraint_a is not None and etope.constraint_a.shape[0] > 0:
        a, b = etope.constraint_a, etope.constraint_b
        latent = ops.intersect(latent, from_hpolyhedron(HPolyhedron(a, b)))
        latent = ops.intersect(latent, from_hpolyhedron(HPolyhedron(-a, -b)))
    return ops.translate(ops.linear_map(latent, etope.generators), etope.center)
