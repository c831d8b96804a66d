"""Exact set operations on spectrahedral shadows.

Each operation returns a new shadow whose membership set is the stated
image, sum, hull, etc., built by rearranging pencil blocks; none of them
approximates. Hull-type operations (conic hull, convex hull, polytopic map)
agree with the target set up to topological boundary and return an
exactness flag telling the caller when equality is guaranteed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from . import backend, validate
from .errors import ContractViolation, DimensionMismatch, SolverFailure
from .pencil import (
    BlockGroup,
    MergePlan,
    Shadow,
    SymSparse,
    combine,
    diag_concat,
)

#: Singular values below this (relative to the largest) count as zero.
SVD_RTOL = 1e-10

Target = tuple[str, int]


def _block(size: int, lam: SymSparse, n: int, m: int,
           placed: dict[Target, SymSparse]) -> BlockGroup:
    a = [SymSparse.zero(size)] * n
    b = [SymSparse.zero(size)] * m
    for (kind, idx), mat in placed.items():
        slots = a if kind == "x" else b
        if not slots[idx - 1].is_zero:
            mat = combine(size, [(1.0, slots[idx - 1]), (1.0, mat)])
        slots[idx - 1] = mat
    return BlockGroup(size, lam, tuple(a), tuple(b))


def translate(shadow: Shadow, offset: Sequence[float]) -> Shadow:
    """``S + b``: absorb the translation into the constant term blockwise."""
    offset = np.asarray(offset, dtype=float).reshape(-1)
    if offset.shape[0] != shadow.n:
        raise DimensionMismatch(f"offset has length {offset.shape[0]}, shadow has n = {shadow.n}")
    if not offset.any():
        return shadow
    blocks = []
    for blk in shadow.blocks:
        lam = combine(blk.block_size,
                      [(1.0, blk.lam), *((-float(b), mat) for b, mat in zip(offset, blk.a_mats))])
        blocks.append(BlockGroup(blk.block_size, lam, blk.a_mats, blk.b_mats))
    return Shadow(shadow.n, shadow.m, tuple(blocks))


def _mix_x(shadow: Shadow, weights: np.ndarray) -> Shadow:
    """Reweight the ambient coefficients: new ``A'_j = sum_i weights[i, j] A_i``.

    With ``weights = T^{-1}`` this is the invertible linear map; with
    ``weights = T`` (n x l) it is the linear inverse map onto ``R^l``.
    """
    n_out = weights.shape[1]
    blocks = []
    for blk in shadow.blocks:
        a_new = tuple(
            combine(blk.block_size,
                    ((float(weights[i, j]), blk.a_mats[i]) for i in range(shadow.n)))
            for j in range(n_out)
        )
        blocks.append(BlockGroup(blk.block_size, blk.lam, a_new, blk.b_mats))
    return Shadow(n_out, shadow.m, tuple(blocks))


def linear_map(shadow: Shadow, t_matrix: np.ndarray) -> Shadow:
    """Image ``T o S = {T x : x in S}`` for an arbitrary ``l x n`` matrix.

    Square well-conditioned maps take the in-place reweighting route (no
    growth); otherwise the SVD route adds ``2(l - r)`` singleton blocks that
    pin the collapsed output coordinates and turns the ``n - r`` null input
    directions into lifted variables.
    """
    t_matrix = np.atleast_2d(np.asarray(t_matrix, dtype=float))
    if t_matrix.shape[1] != shadow.n:
        raise DimensionMismatch(f"map has {t_matrix.shape[1]} columns, shadow has n = {shadow.n}")
    l_out = t_matrix.shape[0]
    svals = np.linalg.svd(t_matrix, compute_uv=False)
    smax = float(svals[0]) if svals.size else 0.0
    if l_out == shadow.n and smax > 0.0 and float(svals[-1]) > SVD_RTOL * smax:
        return _mix_x(shadow, np.linalg.inv(t_matrix))

    u_mat, svals, vt_mat = np.linalg.svd(t_matrix)
    rank = int(np.sum(svals > SVD_RTOL * smax)) if smax > 0.0 else 0

    rotated = _mix_x(shadow, vt_mat.T)  # V^T o S
    m_out = shadow.m + (shadow.n - rank)
    blocks = []
    for blk in rotated.blocks:
        a_new = [SymSparse.zero(blk.block_size)] * l_out
        for i in range(rank):
            a_new[i] = blk.a_mats[i].scaled(1.0 / float(svals[i]))
        b_new = list(blk.b_mats) + [blk.a_mats[k] for k in range(rank, shadow.n)]
        blocks.append(BlockGroup(blk.block_size, blk.lam, tuple(a_new), tuple(b_new)))
    for i in range(rank, l_out):
        for sign in (1.0, -1.0):
            blocks.append(_block(1, SymSparse.zero(1), l_out, m_out,
                                 {("x", i + 1): SymSparse(1, ((1, 1, sign),))}))
    scaled = Shadow(l_out, m_out, tuple(blocks))
    return _mix_x(scaled, u_mat.T)  # U o (D o V^T o S)


def linear_inverse_map(shadow: Shadow, t_matrix: np.ndarray) -> Shadow:
    """Preimage ``S o T = {z : T z in S}`` for an ``n x l`` matrix."""
    t_matrix = np.atleast_2d(np.asarray(t_matrix, dtype=float))
    if t_matrix.shape[0] != shadow.n:
        raise DimensionMismatch(f"map has {t_matrix.shape[0]} rows, shadow has n = {shadow.n}")
    return _mix_x(shadow, t_matrix)


def _widen_with_negated(shadow: Shadow) -> Shadow:
    """Double the ambient block: ``(z, u)`` with membership ``z - u in S``."""
    blocks = [
        BlockGroup(blk.block_size, blk.lam,
                   blk.a_mats + tuple(-mat for mat in blk.a_mats), blk.b_mats)
        for blk in shadow.blocks
    ]
    return Shadow(2 * shadow.n, shadow.m, tuple(blocks))


def minkowski_sum(first: Shadow, second: Shadow) -> Shadow:
    """``S1 (+) S2`` via the coupled stack: lifted ``u`` ranges over ``S2``."""
    if first.n != second.n:
        raise DimensionMismatch(f"ambient dimensions differ: {first.n} vs {second.n}")
    n = first.n
    m_out = n + first.m + second.m
    widened = _widen_with_negated(first)
    plan_first = MergePlan(
        tuple(("x", i) for i in range(1, n + 1)) + tuple(("y", i) for i in range(1, n + 1)),
        tuple(("y", n + j) for j in range(1, first.m + 1)),
    )
    plan_second = MergePlan(
        tuple(("y", i) for i in range(1, n + 1)),
        tuple(("y", n + first.m + j) for j in range(1, second.m + 1)),
    )
    return diag_concat([widened, second], [plan_first, plan_second], n, m_out)


def intersect(first: Shadow, second: Shadow) -> Shadow:
    """``S1 ∩ S2``: stacked blocks sharing the ambient variables."""
    if first.n != second.n:
        raise DimensionMismatch(f"ambient dimensions differ: {first.n} vs {second.n}")
    m_out = first.m + second.m
    plans = [
        MergePlan.identity(first.n, first.m),
        MergePlan.identity(second.n, second.m, y_offset=first.m),
    ]
    return diag_concat([first, second], plans, first.n, m_out)


def cartesian_product(first: Shadow, second: Shadow) -> Shadow:
    """``S1 x S2`` in ``R^{n1+n2}``: pure concatenation."""
    plans = [
        MergePlan.identity(first.n, first.m),
        MergePlan.identity(second.n, second.m, x_offset=first.n, y_offset=first.m),
    ]
    return diag_concat([first, second], plans, first.n + second.n, first.m + second.m)


# ---------------------------------------------------------------------------
# The power-inequality set S(q) = {x in R^2 : x1^q >= x2 >= 0}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SqSetParams:
    """Exponent ``q = c1/c2`` in lowest terms with the tower depth ``l``."""

    c1: int
    c2: int
    l: int = -1

    def __post_init__(self):
        if self.c2 < 1 or not (0 <= self.c1 <= self.c2):
            raise ValueError(f"need 0 <= c1 <= c2 with c2 >= 1, got ({self.c1}, {self.c2})")
        if math.gcd(self.c1, self.c2) != 1:
            raise ValueError(f"({self.c1}, {self.c2}) is not in lowest terms")
        depth = 0
        while 2**depth < self.c2:
            depth += 1
        if self.l == -1:
            object.__setattr__(self, "l", depth)
        elif self.l != depth:
            raise ValueError(f"l = {self.l} but the smallest valid depth is {depth}")

    @classmethod
    def from_q(cls, q: Fraction) -> "SqSetParams":
        q = Fraction(q)
        if not 0 <= q <= 1:
            raise ValueError(f"q must lie in [0, 1], got {q}")
        return cls(q.numerator, q.denominator)

    @property
    def q(self) -> Fraction:
        return Fraction(self.c1, self.c2)


def _affine_entry(expr: dict, placed_row: int, placed_col: int,
                  lam_entries: list, var_entries: dict) -> None:
    for key, coeff in expr.items():
        if coeff == 0.0:
            continue
        if key is None:
            lam_entries.append((placed_row, placed_col, coeff))
        else:
            var_entries.setdefault(key, []).append((placed_row, placed_col, coeff))


def build_sq_set(params: SqSetParams) -> Shadow:
    """Pure-shadow form of ``{x : x1^q >= x2 >= 0}`` via rotated-cone towers.

    Level-0 slots are split among ``x1``, the constant one, and ``x2``
    according to ``(c1, c2)``; each level squares away one exponent bit with
    a 3x3 rotated-cone block. All defining equalities are eliminated by
    substitution, and a singleton block pins ``x2 >= 0`` (which the tower
    alone does not force when ``c2`` is a power of two). The corner cases
    ``q = 0`` and ``q = 1`` collapse to plain linear constraints.
    """
    x1, x2 = ("x", 1), ("x", 2)
    if params.c1 == params.c2:  # q = 1: x1 >= x2 >= 0
        return Shadow(2, 0, (
            _block(1, SymSparse.zero(1), 2, 0, {x1: SymSparse(1, ((1, 1, 1.0),)),
                                                x2: SymSparse(1, ((1, 1, -1.0),))}),
            _block(1, SymSparse.zero(1), 2, 0, {x2: SymSparse(1, ((1, 1, 1.0),))}),
        ))
    if params.c1 == 0:  # q = 0: 1 >= x2 >= 0
        return Shadow(2, 0, (
            _block(1, SymSparse(1, ((1, 1, 1.0),)), 2, 0, {x2: SymSparse(1, ((1, 1, -1.0),))}),
            _block(1, SymSparse.zero(1), 2, 0, {x2: SymSparse(1, ((1, 1, 1.0),))}),
        ))

    depth = params.l
    width = 2**depth
    # Affine expressions over {None: const, ("x", i): coeff, ("y", k): coeff}.
    level: list[dict] = []
    for j in range(1, width + 1):
        if j <= params.c1:
            level.append({x1: 1.0})
        elif j <= params.c2:
            level.append({None: 1.0})
        else:
            level.append({x2: 1.0})
    m_lift = sum(width >> i for i in range(1, depth)) if depth > 1 else 0

    blocks = []
    next_y = 0
    for i in range(1, depth + 1):
        above: list[dict] = []
        for j in range(width >> i):
            lo, hi = level[2 * j], level[2 * j + 1]
            keys = set(lo) | set(hi)
            mean = {k: 0.5 * (lo.get(k, 0.0) + hi.get(k, 0.0)) for k in keys}
            diff = {k: 0.5 * (lo.get(k, 0.0) - hi.get(k, 0.0)) for k in keys}
            if i == depth:
                top = {x2: 1.0}
            else:
                next_y += 1
                top = {("y", next_y): 1.0}
            lam_entries: list = []
            var_entries: dict = {}
            for r, c in ((1, 1), (2, 2), (3, 3)):
                _affine_entry(mean, r, c, lam_entries, var_entries)
            _affine_entry(top, 1, 3, lam_entries, var_entries)
            _affine_entry(diff, 2, 3, lam_entries, var_entries)
            lam = SymSparse(3, tuple(lam_entries))
            placed = {key: SymSparse(3, tuple(ents)) for key, ents in var_entries.items()}
            blocks.append(_block(3, lam, 2, m_lift, placed))
            above.append(top)
        level = above
    blocks.append(_block(1, SymSparse.zero(1), 2, m_lift, {x2: SymSparse(1, ((1, 1, 1.0),))}))
    return Shadow(2, m_lift, tuple(blocks))


# ---------------------------------------------------------------------------
# Minkowski-Firey Lp sum
# ---------------------------------------------------------------------------


def _as_p(p) -> Fraction | float:
    if p == math.inf:
        return math.inf
    if isinstance(p, tuple):
        p = Fraction(*p)
    elif isinstance(p, (int, Fraction)):
        p = Fraction(p)
    else:
        raise ContractViolation(
            f"p must be a rational (Fraction, int, or numerator/denominator pair) or inf, got {p!r}"
        )
    if p < 1:
        raise ContractViolation(f"p must satisfy p >= 1, got {p}")
    return p


def _psd_shift(shadow: Shadow) -> list[SymSparse]:
    """Per-block ``Lam^+ = Lam(0, y*) >= 0``; needs ``0 in S``."""
    if shadow.m == 0:
        return [blk.lam for blk in shadow.blocks]
    report = backend.solve_feasibility_margin(shadow, fixed_x=np.zeros(shadow.n))
    if report.status == backend.UNBOUNDED:
        # Margin grows without bound: any feasible y* with a comfortable margin
        # would do, but Clarabel gives no point for unbounded problems.
        raise SolverFailure("origin margin solve unbounded; cannot extract a shift")
    if report.status != backend.OPTIMAL:
        raise SolverFailure(f"origin margin solve failed: {report.status}",
                            status=report.status)
    y_star = report.primal_point
    out = []
    for blk in shadow.blocks:
        dense = blk.lam.to_dense()
        for yj, mat in zip(y_star, blk.b_mats):
            if yj != 0.0 and not mat.is_zero:
                dense += float(yj) * mat.to_dense()
        out.append(SymSparse.from_dense(dense))
    return out


def lp_sum(first: Shadow, second: Shadow, p) -> Shadow:
    """Minkowski-Firey sum ``S1 +_p S2`` for origin-containing shadows.

    ``p = 1`` reproduces the Minkowski sum and ``p = inf`` the convex hull of
    the union; in between, interpolation weights ``(t1, t2)`` with
    ``t1 + t2 = 1`` scale PSD-shifted copies of the two constant terms, and
    the weights are tied to their exponents through two ``S(1 - 1/p)``
    memberships.
    """
    if first.n != second.n:
        raise DimensionMismatch(f"ambient dimensions differ: {first.n} vs {second.n}")
    p = _as_p(p)
    for label, shadow in (("first", first), ("second", second)):
        inside, _ = validate.contains_point(shadow, np.zeros(shadow.n))
        if not inside:
            raise ContractViolation(f"lp_sum requires 0 in the {label} operand")
    if p == math.inf:
        return convex_hull(first, second).shadow

    n, m1, m2 = first.n, first.m, second.m
    lam_plus = _psd_shift(first)
    gam_plus = _psd_shift(second)
    sq = build_sq_set(SqSetParams.from_q(Fraction(1) - 1 / p))
    mq = sq.m
    m_out = 4 + n + m1 + m2 + 2 * mq

    corner = SymSparse(2, ((1, 1, -1.0), (2, 2, 1.0)))
    blocks = [
        _block(2, SymSparse(2, ((1, 1, 1.0), (2, 2, -1.0))), n, m_out,
               {("y", 1): corner, ("y", 2): corner})
    ]
    for blk, shifted in zip(first.blocks, lam_plus):
        placed: dict[Target, SymSparse] = {("y", 3): shifted}
        for i, mat in enumerate(blk.a_mats, start=1):
            placed[("x", i)] = mat
            placed[("y", 4 + i)] = -mat
        for j, mat in enumerate(blk.b_mats, start=1):
            placed[("y", 4 + n + j)] = mat
        blocks.append(_block(blk.block_size, SymSparse.zero(blk.block_size), n, m_out, placed))
    for blk, shifted in zip(second.blocks, gam_plus):
        placed = {("y", 4): shifted}
        for i, mat in enumerate(blk.a_mats, start=1):
            placed[("y", 4 + i)] = mat
        for j, mat in enumerate(blk.b_mats, start=1):
            placed[("y", 4 + n + m1 + j)] = mat
        blocks.append(_block(blk.block_size, SymSparse.zero(blk.block_size), n, m_out, placed))

    # Two S(q) memberships: (t1, t3) and (t2, t4), with fresh tower variables.
    for copy, (t_slot, w_slot) in enumerate(((1, 3), (2, 4))):
        w_off = 4 + n + m1 + m2 + copy * mq
        remap = {("x", 1): ("y", t_slot), ("x", 2): ("y", w_slot)}
        remap.update({("y", k): ("y", w_off + k) for k in range(1, mq + 1)})
        for blk in sq.blocks:
            placed = {}
            for src, mat in zip((("x", 1), ("x", 2)), blk.a_mats):
                if not mat.is_zero:
                    placed[remap[src]] = mat
            for k, mat in enumerate(blk.b_mats, start=1):
                if not mat.is_zero:
                    placed[remap[("y", k)]] = mat
            blocks.append(_block(blk.block_size, blk.lam, n, m_out, placed))
    return Shadow(n, m_out, tuple(blocks))


# ---------------------------------------------------------------------------
# Hull operations (exact up to topological boundary, flag reports equality)
# ---------------------------------------------------------------------------


class HullResult(NamedTuple):
    shadow: Shadow
    exact: bool


def _exactness_zero_or_bounded(shadow: Shadow) -> bool:
    inside, _ = validate.contains_point(shadow, np.zeros(shadow.n))
    if inside:
        return True
    return validate.is_bounded(shadow).bounded


def conic_hull(shadow: Shadow) -> HullResult:
    """Homogenization ``{x : exists t >= 0, y, t*Lam + sum x_i A_i + sum y_j B_j >= 0}``.

    Always contains ``cone(S)`` with equal closure; equality holds (flag)
    when ``0 in S`` or ``S`` is bounded.
    """
    empty, _ = validate.is_empty(shadow)
    if empty:
        raise ContractViolation("conic hull requires a nonempty set")
    m_out = shadow.m + 1
    blocks = []
    for blk in shadow.blocks:
        placed: dict[Target, SymSparse] = {("y", m_out): blk.lam}
        for i, mat in enumerate(blk.a_mats, start=1):
            placed[("x", i)] = mat
        for j, mat in enumerate(blk.b_mats, start=1):
            placed[("y", j)] = mat
        blocks.append(_block(blk.block_size, SymSparse.zero(blk.block_size),
                             shadow.n, m_out, placed))
    blocks.append(_block(1, SymSparse.zero(1), shadow.n, m_out,
                         {("y", m_out): SymSparse(1, ((1, 1, 1.0),))}))
    result = Shadow(shadow.n, m_out, tuple(blocks))
    return HullResult(result, _exactness_zero_or_bounded(shadow))


def convex_hull(first: Shadow, second: Shadow) -> HullResult:
    """Perspective construction for ``conv(S1 u S2)``; exact when both bounded."""
    if first.n != second.n:
        raise DimensionMismatch(f"ambient dimensions differ: {first.n} vs {second.n}")
    for label, shadow in (("first", first), ("second", second)):
        empty, _ = validate.is_empty(shadow)
        if empty:
            raise ContractViolation(f"convex hull requires nonempty sets; {label} is empty")
    n, m1, m2 = first.n, first.m, second.m
    m_out = n + m1 + m2 + 1
    blocks = [
        _block(2, SymSparse(2, ((1, 1, 1.0),)), n, m_out,
               {("y", 1): SymSparse(2, ((1, 1, -1.0), (2, 2, 1.0)))})
    ]
    for blk in first.blocks:
        placed: dict[Target, SymSparse] = {("y", 1): blk.lam}
        for i, mat in enumerate(blk.a_mats, start=1):
            placed[("y", 1 + i)] = mat
        for j, mat in enumerate(blk.b_mats, start=1):
            placed[("y", 1 + n + j)] = mat
        blocks.append(_block(blk.block_size, SymSparse.zero(blk.block_size), n, m_out, placed))
    for blk in second.blocks:
        placed = {("y", 1): -blk.lam}
        for i, mat in enumerate(blk.a_mats, start=1):
            placed[("x", i)] = mat
            placed[("y", 1 + i)] = -mat
        for j, mat in enumerate(blk.b_mats, start=1):
            placed[("y", 1 + n + m1 + j)] = mat
        blocks.append(_block(blk.block_size, blk.lam, n, m_out, placed))
    result = Shadow(n, m_out, tuple(blocks))
    exact = validate.is_bounded(first).bounded and validate.is_bounded(second).bounded
    return HullResult(result, exact)


@dataclass(frozen=True, eq=False)
class PolytopicMap:
    """Matrix polytope ``conv{T_1, ..., T_h}`` acting as a set-valued map."""

    vertices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.atleast_2d(np.asarray(v, dtype=float)) for v in self.vertices)
        if not mats:
            raise ValueError("a polytopic map needs at least one vertex matrix")
        shape = mats[0].shape
        for mat in mats:
            if mat.shape != shape:
                raise ValueError(f"vertex shapes differ: {mat.shape} vs {shape}")
        object.__setattr__(self, "vertices", mats)

    @property
    def h(self) -> int:
        return len(self.vertices)

    @property
    def out_dim(self) -> int:
        return self.vertices[0].shape[0]

    @property
    def in_dim(self) -> int:
        return self.vertices[0].shape[1]


def polytopic_map(shadow: Shadow, poly_map: PolytopicMap) -> HullResult:
    """Image under the set-valued map: ``conv( U_i  T_i o S )``.

    Maps the set through every vertex matrix, then couples the copies with
    interpolation weights ``t_i >= 0, sum t_i = 1`` scaling each copy's
    constant term; exact when ``0 in S`` or ``S`` is bounded.
    """
    if poly_map.in_dim != shadow.n:
        raise DimensionMismatch(
            f"map vertices have {poly_map.in_dim} columns, shadow has n = {shadow.n}")
    empty, _ = validate.is_empty(shadow)
    if empty:
        raise ContractViolation("polytopic map requires a nonempty set")
    h = poly_map.h
    l_out = poly_map.out_dim
    mapped = [linear_map(shadow, t_mat) for t_mat in poly_map.vertices]
    m_list = [s.m for s in mapped]
    u_off = h
    v_off = h + l_out * (h - 1)
    m_out = v_off + sum(m_list)

    def u_slot(vertex: int, j: int) -> int:  # vertex >= 2, 1-based j
        return u_off + (vertex - 2) * l_out + j

    blocks = []
    v_base = v_off
    for vertex, part in enumerate(mapped, start=1):
        for blk in part.blocks:
            placed: dict[Target, SymSparse] = {("y", vertex): blk.lam}
            for j, mat in enumerate(blk.a_mats, start=1):
                if vertex == 1:
                    placed[("x", j)] = mat
                    for other in range(2, h + 1):
                        placed[("y", u_slot(other, j))] = -mat
                else:
                    placed[("y", u_slot(vertex, j))] = mat
            for j, mat in enumerate(blk.b_mats, start=1):
                placed[("y", v_base + j)] = mat
            blocks.append(_block(blk.block_size, SymSparse.zero(blk.block_size),
                                 l_out, m_out, placed))
        v_base += part.m
    for vertex in range(1, h + 1):
        blocks.append(_block(1, SymSparse.zero(1), l_out, m_out,
                             {("y", vertex): SymSparse(1, ((1, 1, 1.0),))}))
    corner = SymSparse(2, ((1, 1, -1.0), (2, 2, 1.0)))
    blocks.append(_block(2, SymSparse(2, ((1, 1, 1.0), (2, 2, -1.0))), l_out, m_out,
                         {("y", vertex): corner for vertex in range(1, h + 1)}))
    result = Shadow(l_out, m_out, tuple(blocks))
    return HullResult(result, _exactness_zero_or_bounded(shadow))
