"""Set validations: emptiness, point containment, boundedness.

All three reduce to feasibility-margin style SDPs over the pencil blocks.
Boundary points are classified as members: strict comparisons against zero
are replaced by scale-aware tolerances since the solves are numerical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import backend
from .backend import ConicProblem, _pencil_constraints, solve_conic
from .errors import ContractViolation, DimensionMismatch, SolverFailure
from .pencil import Shadow

#: Base tolerance; scaled by (1 + ||Lam||_F) of the shadow under test.
BASE_TOL = 1e-7

#: Relative singular-value threshold for the rank decisions.
RANK_RTOL = 1e-9

#: Traces within this (scaled) tolerance of zero count as zero.
TRACE_TOL = 1e-10


def _scaled_tol(shadow: Shadow) -> float:
    return BASE_TOL * (1.0 + shadow.lambda_frob())


class EmptinessResult(NamedTuple):
    empty: bool
    margin: float


class ContainmentResult(NamedTuple):
    contains: bool
    margin: float


def is_empty(shadow: Shadow) -> EmptinessResult:
    """Feasibility margin test: empty iff ``max eps s.t. Lam(x,y) >= eps*I`` is negative."""
    report = backend.solve_feasibility_margin(shadow)
    if report.status == backend.UNBOUNDED:
        return EmptinessResult(False, math.inf)
    if report.status != backend.OPTIMAL:
        raise SolverFailure(f"emptiness margin solve failed: {report.status}",
                            status=report.status)
    return EmptinessResult(report.optimum < -_scaled_tol(shadow), report.optimum)


def contains_point(shadow: Shadow, v: Sequence[float]) -> ContainmentResult:
    """Membership of ``v``: margin of ``Lam(v, .) >= eps*I`` over the lifted variables."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != shadow.n:
        raise DimensionMismatch(f"point has length {v.shape[0]}, shadow has n = {shadow.n}")
    report = backend.solve_feasibility_margin(shadow, fixed_x=v)
    if report.status == backend.UNBOUNDED:
        return ContainmentResult(True, math.inf)
    if report.status != backend.OPTIMAL:
        raise SolverFailure(f"membership margin solve failed: {report.status}",
                            status=report.status)
    return ContainmentResult(report.optimum >= -_scaled_tol(shadow), report.optimum)


@dataclass
class BoundednessReport:
    """Outcome of the boundedness decision tree with the branch that fired."""

    bounded: bool
    rank_p: int
    rank_q: int
    rank_pq: int
    eps_b: float | None
    branch: str  # rankP_deficient | rank_sum_mismatch | trace_zero | sdp_test


def _tvec_rows(shadow: Shadow, pick) -> np.ndarray:
    """Stack per-block column-major upper-triangle vectorizations (no scaling)."""
    cols = []
    for blk in shadow.blocks:
        s = blk.block_size
        vec = np.zeros(s * (s + 1) // 2)
        for r, c, v in pick(blk).entries:
            vec[c * (c - 1) // 2 + r - 1] = v
        cols.append(vec)
    return np.concatenate(cols)


def _rank(mat: np.ndarray) -> int:
    if mat.size == 0:
        return 0
    svals = np.linalg.svd(mat, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return 0
    return int(np.sum(svals > RANK_RTOL * svals[0] * max(mat.shape)))


def is_bounded(shadow: Shadow) -> BoundednessReport:
    """Boundedness decision tree over the homogeneous part of the pencil.

    Branches, in order: (a) rank-deficient ``P`` means a trivial recession
    direction; (b) overlapping ranges of ``P`` and ``Q`` mean a cancelling
    combination; (c) all-traceless coefficients make the spectraplex search
    infeasible, hence bounded; (d) otherwise the trace-normalized margin SDP
    decides, bounded iff its optimum is negative.

    The input must be nonempty; emptiness raises :class:`ContractViolation`.
    """
    empty, _ = is_empty(shadow)
    if empty:
        raise ContractViolation("boundedness check requires a nonempty set")

    p_mat = (
        np.column_stack([_tvec_rows(shadow, lambda b, i=i: b.a_mats[i]) for i in range(shadow.n)])
        if shadow.n
        else np.zeros((0, 0))
    )
    q_mat = (
        np.column_stack([_tvec_rows(shadow, lambda b, j=j: b.b_mats[j]) for j in range(shadow.m)])
        if shadow.m
        else np.zeros((p_mat.shape[0], 0))
    )
    rank_p = _rank(p_mat)
    rank_q = _rank(q_mat)
    rank_pq = _rank(np.hstack([p_mat, q_mat])) if shadow.m else rank_p

    if rank_p < shadow.n:
        return BoundednessReport(False, rank_p, rank_q, rank_pq, None, "rankP_deficient")
    if rank_p + rank_q != rank_pq:
        return BoundednessReport(False, rank_p, rank_q, rank_pq, None, "rank_sum_mismatch")

    scale = 1.0 + shadow.lambda_frob()
    trace_a = [sum(blk.a_mats[i].trace() for blk in shadow.blocks) for i in range(shadow.n)]
    trace_b = [sum(blk.b_mats[j].trace() for blk in shadow.blocks) for j in range(shadow.m)]
    if all(abs(t) <= TRACE_TOL * scale for t in (*trace_a, *trace_b)):
        return BoundednessReport(True, rank_p, rank_q, rank_pq, None, "trace_zero")

    # Branch (d): max eps s.t. sum x_i A_i + sum y_j B_j >= eps I with the
    # trace combination normalized to one.
    nfree = shadow.n + shadow.m
    coeffs = {1 + k: t for k, t in enumerate((*trace_a, *trace_b)) if t != 0.0}
    problem = ConicProblem(
        num_vars=1 + nfree,
        objective=np.eye(1 + nfree)[0],
        sense="max",
        psd_constraints=_pencil_constraints(
            shadow,
            list(range(1, 1 + shadow.n)),
            list(range(1 + shadow.n, 1 + nfree)),
            eps_var=0,
            include_lam=False,
        ),
        equality_constraints=[(coeffs, 1.0)],
    )
    raw = solve_conic(problem)
    if raw.status == backend.INFEASIBLE:
        # Normalization unreachable: no PSD homogeneous combination exists.
        return BoundednessReport(True, rank_p, rank_q, rank_pq, None, "sdp_test")
    if raw.status == backend.UNBOUNDED:
        return BoundednessReport(False, rank_p, rank_q, rank_pq, math.inf, "sdp_test")
    if raw.status != backend.OPTIMAL:
        raise SolverFailure(f"boundedness SDP failed: {raw.status}", status=raw.status)
    bounded = raw.objective < -_scaled_tol(shadow)
    return BoundednessReport(bounded, rank_p, rank_q, rank_pq, raw.objective, "sdp_test")
