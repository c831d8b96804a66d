"""Conic solve layer over the Clarabel interior-point solver.

Every optimization in the package is phrased as a :class:`ConicProblem`:
a linear objective over scalar decision variables subject to affine-pencil
PSD constraints, affine equalities, and (for the log-det program)
exponential-cone members. Problems built from a :class:`~spectra.pencil.Shadow`
keep its block structure, one PSD cone per pencil block.
"""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

import clarabel

from .errors import ContractViolation, DimensionMismatch, SolverFailure
from .pencil import BlockGroup, Shadow, SymSparse, combine

logger = logging.getLogger(__name__)

SOLVER_TOL_ENV = "SPECTRA_SOLVER_TOL"
SOLVER_TIMEOUT_ENV = "SPECTRA_SOLVER_TIMEOUT_MS"
DEFAULT_SOLVER_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class SolveReport:
    """Normalized solver outcome; ``optimum`` is finite iff status is optimal."""

    status: str
    optimum: float
    primal_point: np.ndarray | None = None
    solve_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


@dataclass(frozen=True)
class PsdPencil:
    """Affine PSD constraint ``f0 + sum_j z_j * terms[j] >= 0``."""

    size: int
    f0: SymSparse
    terms: dict[int, SymSparse]  # 0-based variable index -> coefficient matrix


@dataclass(frozen=True)
class AffineExpr:
    """``const + sum_j coeffs[j] * z_j`` over the decision vector."""

    const: float = 0.0
    coeffs: dict[int, float] = field(default_factory=dict)


@dataclass
class ConicProblem:
    """Linear objective over ``num_vars`` scalar variables with conic constraints."""

    num_vars: int
    objective: np.ndarray
    sense: str = "max"
    psd_constraints: list[PsdPencil] = field(default_factory=list)
    equality_constraints: list[tuple[dict[int, float], float]] = field(default_factory=list)
    exp_cones: list[tuple[AffineExpr, AffineExpr, AffineExpr]] = field(default_factory=list)


# -- svec helpers (Clarabel PSD triangle: upper triangle by column, off-diag * sqrt2)

_SQRT2 = math.sqrt(2.0)
_TRI_CACHE: dict[int, dict[tuple[int, int], int]] = {}


def tri_dim(s: int) -> int:
    return s * (s + 1) // 2


def _tri_index(size: int) -> dict[tuple[int, int], int]:
    idx = _TRI_CACHE.get(size)
    if idx is None:
        idx = {}
        k = 0
        for c in range(1, size + 1):
            for r in range(1, c + 1):
                idx[(r, c)] = k
                k += 1
        _TRI_CACHE[size] = idx
    return idx


def svec_entries(mat: SymSparse) -> list[tuple[int, float]]:
    """Scaled-triangle coordinates of a sparse symmetric matrix."""
    idx = _tri_index(mat.size)
    return [(idx[(r, c)], v if r == c else v * _SQRT2) for r, c, v in mat.entries]


def svec_to_dense(size: int, vec: np.ndarray) -> np.ndarray:
    out = np.zeros((size, size))
    k = 0
    for c in range(size):
        for r in range(c + 1):
            v = vec[k]
            if r != c:
                v /= _SQRT2
            out[r, c] = v
            out[c, r] = v
            k += 1
    return out


def _solver_settings() -> "clarabel.DefaultSettings":
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    tol = float(os.environ.get(SOLVER_TOL_ENV, DEFAULT_SOLVER_TOL))
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    timeout_ms = os.environ.get(SOLVER_TIMEOUT_ENV)
    if timeout_ms:
        settings.time_limit = float(timeout_ms) / 1000.0
    return settings


_STATUS_MAP = {
    "Solved": OPTIMAL,
    "AlmostSolved": OPTIMAL,
    "PrimalInfeasible": INFEASIBLE,
    "AlmostPrimalInfeasible": INFEASIBLE,
    "DualInfeasible": UNBOUNDED,
    "AlmostDualInfeasible": UNBOUNDED,
}


@dataclass
class RawSolution:
    status: str
    objective: float  # value of the problem in its stated sense, finite iff optimal
    x: np.ndarray | None
    eq_duals: np.ndarray | None
    solve_time: float


def solve_conic(problem: ConicProblem) -> RawSolution:
    """Assemble and run the interior-point solve for one conic problem."""
    nv = problem.num_vars
    sign = -1.0 if problem.sense == "max" else 1.0
    q = sign * np.asarray(problem.objective, dtype=float)
    if q.shape != (nv,):
        raise DimensionMismatch(f"objective has shape {q.shape}, expected ({nv},)")

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    rhs: list[float] = []
    cones = []
    nrows = 0

    neq = len(problem.equality_constraints)
    if neq:
        for coeffs, b in problem.equality_constraints:
            for j, v in coeffs.items():
                if v != 0.0:
                    rows.append(nrows)
                    cols.append(j)
                    vals.append(v)
            rhs.append(b)
            nrows += 1
        cones.append(clarabel.ZeroConeT(neq))

    for pencil in problem.psd_constraints:
        base = nrows
        f0 = np.zeros(tri_dim(pencil.size))
        for k, v in svec_entries(pencil.f0):
            f0[k] = v
        rhs.extend(f0.tolist())
        for j, mat in pencil.terms.items():
            for k, v in svec_entries(mat):
                rows.append(base + k)
                cols.append(j)
                vals.append(-v)
        nrows += tri_dim(pencil.size)
        cones.append(clarabel.PSDTriangleConeT(pencil.size))

    for triple in problem.exp_cones:
        for expr in triple:
            for j, v in expr.coeffs.items():
                if v != 0.0:
                    rows.append(nrows)
                    cols.append(j)
                    vals.append(-v)
            rhs.append(expr.const)
            nrows += 1
        cones.append(clarabel.ExponentialConeT())

    a = sp.csc_matrix((vals, (rows, cols)), shape=(nrows, nv))
    t0 = time.perf_counter()
    try:
        solver = clarabel.DefaultSolver(
            sp.csc_matrix((nv, nv)), q, a, np.asarray(rhs), cones, _solver_settings()
        )
        solution = solver.solve()
    except BaseException as err:  # clarabel raises pyo3 panics on malformed input
        raise SolverFailure(f"solver raised: {err}") from err
    elapsed = time.perf_counter() - t0

    raw_status = str(solution.status)
    status = _STATUS_MAP.get(raw_status, NUMERICAL_FAILURE)
    if raw_status.startswith("Almost"):
        logger.warning("solver returned %s; treating as %s", raw_status, status)
    if status == OPTIMAL:
        value = float(sign * solution.obj_val)
        x = np.asarray(solution.x, dtype=float)
        duals = np.asarray(solution.z[:neq], dtype=float) if neq else np.zeros(0)
        return RawSolution(status, value, x, duals, elapsed)
    if status == UNBOUNDED:
        value = math.inf if problem.sense == "max" else -math.inf
    else:
        value = math.nan
    return RawSolution(status, value, None, None, elapsed)


# ---------------------------------------------------------------------------
# Pencil-backed problems
# ---------------------------------------------------------------------------


def _pencil_constraints(
    shadow: Shadow,
    x_vars: Sequence[int] | None,
    y_vars: Sequence[int],
    eps_var: int | None = None,
    fixed_x: np.ndarray | None = None,
    include_lam: bool = True,
) -> list[PsdPencil]:
    """One PSD pencil per block over the given variable slots.

    ``x_vars`` gives the problem-variable index carrying each ambient
    coordinate (or None with ``fixed_x`` substituted into the constant term);
    ``eps_var`` adds ``-eps * I`` per block for margin problems.
    """
    out = []
    for blk in shadow.blocks:
        if include_lam:
            f0_terms = [(1.0, blk.lam)]
        else:
            f0_terms = []
        if fixed_x is not None:
            f0_terms.extend((float(v), mat) for v, mat in zip(fixed_x, blk.a_mats))
        f0 = combine(blk.block_size, f0_terms)
        terms: dict[int, SymSparse] = {}
        if x_vars is not None:
            for j, mat in zip(x_vars, blk.a_mats):
                if not mat.is_zero:
                    terms[j] = mat
        for j, mat in zip(y_vars, blk.b_mats):
            if not mat.is_zero:
                terms[j] = mat
        if eps_var is not None:
            terms[eps_var] = SymSparse.identity(blk.block_size).scaled(-1.0)
        out.append(PsdPencil(blk.block_size, f0, terms))
    return out


def solve_feasibility_margin(shadow: Shadow, fixed_x: Sequence[float] | None = None) -> SolveReport:
    """``max eps s.t. Lam(x, y) >= eps*I`` blockwise, optionally with ``x`` fixed.

    The returned ``primal_point`` holds the maximizing free coordinates:
    ``(x, y)`` concatenated, or just ``y`` when ``fixed_x`` is given.
    """
    if fixed_x is not None:
        fixed_x = np.asarray(fixed_x, dtype=float).reshape(-1)
        if fixed_x.shape[0] != shadow.n:
            raise DimensionMismatch(f"fixed_x has length {fixed_x.shape[0]}, expected {shadow.n}")
        if shadow.m == 0:
            # No free variables: the margin is just the smallest eigenvalue.
            t0 = time.perf_counter()
            eps = min(
                float(np.linalg.eigvalsh(mat)[0]) if mat.shape[0] > 1 else float(mat[0, 0])
                for mat in _assemble_fixed(shadow, fixed_x)
            )
            return SolveReport(OPTIMAL, eps, np.zeros(0), time.perf_counter() - t0)
        nfree = shadow.m
        x_vars = None
    else:
        nfree = shadow.n + shadow.m
        x_vars = list(range(1, 1 + shadow.n))
    y_vars = list(range(1 + (0 if x_vars is None else shadow.n), 1 + nfree))
    problem = ConicProblem(
        num_vars=1 + nfree,
        objective=np.eye(1 + nfree)[0],
        sense="max",
        psd_constraints=_pencil_constraints(shadow, x_vars, y_vars, eps_var=0, fixed_x=fixed_x),
    )
    raw = solve_conic(problem)
    point = raw.x[1:] if raw.x is not None else None
    return SolveReport(raw.status, raw.objective, point, raw.solve_time)


def _assemble_fixed(shadow: Shadow, fixed_x: np.ndarray) -> list[np.ndarray]:
    mats = []
    for blk in shadow.blocks:
        dense = blk.lam.to_dense()
        for v, mat in zip(fixed_x, blk.a_mats):
            if v != 0.0 and not mat.is_zero:
                dense += v * mat.to_dense()
        mats.append(dense)
    return mats


def _dense_merge(shadow: Shadow) -> Shadow:
    """Collapse all blocks into one dense block (comparison baseline only)."""
    size = shadow.size
    offsets = []
    off = 0
    for blk in shadow.blocks:
        offsets.append(off)
        off += blk.block_size

    def merged(pick) -> SymSparse:
        entries = []
        for blk, o in zip(shadow.blocks, offsets):
            entries.extend((r + o, c + o, v) for r, c, v in pick(blk).entries)
        return SymSparse(size, tuple(entries))

    lam = merged(lambda b: b.lam)
    a_mats = tuple(merged(lambda b, i=i: b.a_mats[i]) for i in range(shadow.n))
    b_mats = tuple(merged(lambda b, j=j: b.b_mats[j]) for j in range(shadow.m))
    return Shadow(shadow.n, shadow.m, (BlockGroup(size, lam, a_mats, b_mats),))


def _support_primal(shadow: Shadow, direction: np.ndarray) -> SolveReport:
    nv = shadow.n + shadow.m
    objective = np.concatenate([direction, np.zeros(shadow.m)])
    problem = ConicProblem(
        num_vars=nv,
        objective=objective,
        sense="max",
        psd_constraints=_pencil_constraints(
            shadow, list(range(shadow.n)), list(range(shadow.n, nv))
        ),
    )
    raw = solve_conic(problem)
    point = raw.x[: shadow.n] if raw.x is not None else None
    return SolveReport(raw.status, raw.objective, point, raw.solve_time)


def _support_primal_lifted(shadow: Shadow, direction: np.ndarray) -> SolveReport:
    """Single dense PSD variable ``X = Lam(x, y)`` with triangle-many equalities.

    This mirrors how generic SDP solvers scalarize an affine PSD constraint
    when the block structure is not exposed; it exists as the timing baseline
    for the sparsity-exploiting dual and should not be used otherwise.
    """
    dense = _dense_merge(shadow)
    blk = dense.blocks[0]
    s = blk.block_size
    tri = tri_dim(s)
    nv = shadow.n + shadow.m + tri
    objective = np.concatenate([direction, np.zeros(shadow.m + tri)])
    equalities = []
    rows: dict[int, dict[int, float]] = {k: {shadow.n + shadow.m + k: 1.0} for k in range(tri)}
    consts = dict.fromkeys(range(tri), 0.0)
    for k, v in svec_entries(blk.lam):
        consts[k] = v
    for j, mat in enumerate(blk.a_mats + blk.b_mats):
        for k, v in svec_entries(mat):
            rows[k][j] = -v
    for k in range(tri):
        equalities.append((rows[k], consts[k]))
    problem = ConicProblem(
        num_vars=nv,
        objective=objective,
        sense="max",
        equality_constraints=equalities,
        psd_constraints=[
            PsdPencil(
                s,
                SymSparse.zero(s),
                {
                    shadow.n + shadow.m + k: SymSparse(
                        s, ((r, c, 1.0 if r == c else 1.0 / _SQRT2),)
                    )
                    for (r, c), k in _tri_index(s).items()
                },
            )
        ],
    )
    raw = solve_conic(problem)
    point = raw.x[: shadow.n] if raw.x is not None else None
    return SolveReport(raw.status, raw.objective, point, raw.solve_time)


def _support_dual(shadow: Shadow, direction: np.ndarray) -> SolveReport:
    """Sparsity-exploiting dual: one PSD multiplier per block, trace equalities.

    Requires a bounded, full-dimensional shadow (strong duality); the support
    value is ``sum_j tr(Lam_j Z_j)`` and the maximizer is recovered from the
    equality multipliers.
    """
    offsets = []
    off = 0
    for blk in shadow.blocks:
        offsets.append(off)
        off += tri_dim(blk.block_size)
    nv = off
    objective = np.zeros(nv)
    for blk, o in zip(shadow.blocks, offsets):
        for k, v in svec_entries(blk.lam):
            objective[o + k] = v

    equalities = []
    for i in range(shadow.n):
        coeffs: dict[int, float] = {}
        for blk, o in zip(shadow.blocks, offsets):
            for k, v in svec_entries(blk.a_mats[i]):
                coeffs[o + k] = coeffs.get(o + k, 0.0) + v
        equalities.append((coeffs, -float(direction[i])))
    for t in range(shadow.m):
        coeffs = {}
        for blk, o in zip(shadow.blocks, offsets):
            for k, v in svec_entries(blk.b_mats[t]):
                coeffs[o + k] = coeffs.get(o + k, 0.0) + v
        equalities.append((coeffs, 0.0))

    psd = [
        PsdPencil(
            blk.block_size,
            SymSparse.zero(blk.block_size),
            {
                o + k: SymSparse(blk.block_size, ((r, c, 1.0 if r == c else 1.0 / _SQRT2),))
                for (r, c), k in _tri_index(blk.block_size).items()
            },
        )
        for blk, o in zip(shadow.blocks, offsets)
    ]
    problem = ConicProblem(
        num_vars=nv,
        objective=objective,
        sense="min",
        psd_constraints=psd,
        equality_constraints=equalities,
    )
    raw = solve_conic(problem)
    if raw.status == OPTIMAL:
        maximizer = raw.eq_duals[: shadow.n].copy()
        return SolveReport(OPTIMAL, raw.objective, maximizer, raw.solve_time)
    if raw.status == INFEASIBLE:
        # Dual infeasibility certifies an unbounded support direction.
        return SolveReport(UNBOUNDED, math.inf, None, raw.solve_time)
    if raw.status == UNBOUNDED:
        return SolveReport(INFEASIBLE, math.nan, None, raw.solve_time)
    return SolveReport(raw.status, math.nan, None, raw.solve_time)


def _prefer_dual(shadow: Shadow) -> bool:
    return len(shadow.blocks) >= 2 or shadow.size**2 > 8 * (shadow.n + shadow.m)


def solve_support(shadow: Shadow, direction: Sequence[float], method: str = "auto") -> SolveReport:
    """Support value ``h_S(a) = max a^T x over S`` with a maximizer.

    ``method`` is ``auto`` (block dual for multi-block or large pencils,
    primal otherwise), ``primal``, ``dual``, or ``dense`` (the single-block
    lifted baseline used for timing comparisons).
    """
    direction = np.asarray(direction, dtype=float).reshape(-1)
    if direction.shape[0] != shadow.n:
        raise DimensionMismatch(
            f"direction has length {direction.shape[0]}, shadow has n = {shadow.n}"
        )
    if method == "auto":
        method = "dual" if _prefer_dual(shadow) else "primal"
    if method == "primal":
        return _support_primal(shadow, direction)
    if method == "dual":
        return _support_dual(shadow, direction)
    if method == "dense":
        return _support_primal_lifted(shadow, direction)
    raise ValueError(f"unknown support method {method!r}")


def solve_support_batch_dual(
    shadow: Shadow, directions: Sequence[Sequence[float]]
) -> list[SolveReport]:
    """Per-direction block-dual support solves; failures are isolated per direction."""
    reports = []
    for direction in directions:
        try:
            reports.append(_support_dual(shadow, np.asarray(direction, dtype=float)))
        except SolverFailure as err:
            logger.warning("batch dual direction failed: %s", err)
            reports.append(SolveReport(NUMERICAL_FAILURE, math.nan, None, 0.0))
    return reports


# ---------------------------------------------------------------------------
# Minimum-volume enclosing parallelotope (log-det program)
# ---------------------------------------------------------------------------


@dataclass
class ParallelotopeSolution:
    """Optimizer of the enclosing-parallelotope program: ``{x: |T x + c'|_inf <= 1}``."""

    t_matrix: np.ndarray
    c_prime: np.ndarray
    report: SolveReport


def solve_min_parallelotope(shadow: Shadow) -> ParallelotopeSolution:
    """Minimize ``log det T^{-1}`` over parallelotopes certified to contain the set.

    The input must be a spectrahedron (``m = 0``), bounded and full-dimensional.
    Containment is enforced by one PSD multiplier per face and per block, with
    trace equalities tying the multipliers to ``T`` and ``c'``; the log-det
    objective uses the solver's native exponential cone through the standard
    lower-triangular determinant certificate.
    """
    if shadow.m != 0:
        raise ContractViolation("minimum parallelotope needs a spectrahedron (m = 0)")
    n = shadow.n

    # Variable layout: T upper-triangle entries, c', per-face-per-block
    # multipliers O, lower-triangular factor L, log-slacks v.
    t_index = {}
    k = 0
    for c in range(1, n + 1):
        for r in range(1, c + 1):
            t_index[(r, c)] = k
            k += 1
    nt = k
    c_off = nt
    o_off = c_off + n
    o_index = []
    off = o_off
    for _face in range(2 * n):
        per_block = []
        for blk in shadow.blocks:
            per_block.append(off)
            off += tri_dim(blk.block_size)
        o_index.append(per_block)
    l_off = off
    l_index = {}
    for c in range(1, n + 1):
        for r in range(c, n + 1):
            l_index[(r, c)] = off
            off += 1
    v_off = off
    nv = v_off + n

    objective = np.zeros(nv)
    objective[v_off:] = 1.0

    def t_var(i: int, j: int) -> int:
        return t_index[(i, j)] if i <= j else t_index[(j, i)]

    equalities = []
    for face in range(2 * n):
        i = face % n
        sign = 1.0 if face < n else -1.0
        # sign * T[i, j] = sum_b tr(A_j O^face_b)
        for j in range(n):
            coeffs: dict[int, float] = {t_var(i + 1, j + 1): -sign}
            for blk, o in zip(shadow.blocks, o_index[face]):
                for kk, v in svec_entries(blk.a_mats[j]):
                    coeffs[o + kk] = coeffs.get(o + kk, 0.0) + v
            equalities.append((coeffs, 0.0))
        # 1 +/- c'_i = sum_b tr(Lam O^face_b)
        coeffs = {c_off + i: -sign}
        for blk, o in zip(shadow.blocks, o_index[face]):
            for kk, v in svec_entries(blk.lam):
                coeffs[o + kk] = coeffs.get(o + kk, 0.0) + v
        equalities.append((coeffs, 1.0))

    psd = []
    for face in range(2 * n):
        for blk, o in zip(shadow.blocks, o_index[face]):
            psd.append(
                PsdPencil(
                    blk.block_size,
                    SymSparse.zero(blk.block_size),
                    {
                        o + kk: SymSparse(
                            blk.block_size, ((r, c, 1.0 if r == c else 1.0 / _SQRT2),)
                        )
                        for (r, c), kk in _tri_index(blk.block_size).items()
                    },
                )
            )

    # det certificate: [[T, W], [W^T, diag(W)]] >= 0 with W triangular implies
    # det(T) >= prod_i W[i, i]; then v_i <= log W[i, i] via exponential cones.
    cert_terms: dict[int, SymSparse] = {}
    for (r, c), var in t_index.items():
        cert_terms[var] = SymSparse(2 * n, ((r, c, 1.0),))
    for (r, c), var in l_index.items():
        entries = [(c, n + r, 1.0)]
        if r == c:
            entries.append((n + r, n + r, 1.0))
        cert_terms[var] = SymSparse(2 * n, tuple(entries))
    psd.append(PsdPencil(2 * n, SymSparse.zero(2 * n), cert_terms))

    exp_cones = [
        (
            AffineExpr(0.0, {v_off + i: 1.0}),
            AffineExpr(1.0, {}),
            AffineExpr(0.0, {l_index[(i + 1, i + 1)]: 1.0}),
        )
        for i in range(n)
    ]

    problem = ConicProblem(
        num_vars=nv,
        objective=objective,
        sense="max",
        psd_constraints=psd,
        equality_constraints=equalities,
        exp_cones=exp_cones,
    )
    raw = solve_conic(problem)
    report = SolveReport(raw.status, raw.objective, None, raw.solve_time)
    if raw.status != OPTIMAL:
        raise SolverFailure(
            f"parallelotope solve ended with status {raw.status}", status=raw.status
        )
    t_mat = np.zeros((n, n))
    for (r, c), var in t_index.items():
        t_mat[r - 1, c - 1] = raw.x[var]
        t_mat[c - 1, r - 1] = raw.x[var]
    c_prime = np.asarray(raw.x[c_off : c_off + n], dtype=float)
    if float(np.linalg.eigvalsh(t_mat)[0]) <= 0.0:
        raise SolverFailure("parallelotope solve returned a non-PD shape matrix")
    return ParallelotopeSolution(t_mat, c_prime, report)
