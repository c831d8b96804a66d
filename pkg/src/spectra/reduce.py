"""Complexity reduction: local low-rank approximation, polyhedral approximation,
and the isotropic pre-transform.

Both strategies produce outer approximations: the low-rank route projects
the pencil through trailing eigenvectors at boundary touchpoints (tangent
there by construction), the polyhedral route collects support hyperplanes
in near-uniform directions. The isotropic transform reshapes elongated sets
so the coordinate-axis touchpoints spread usefully.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend, convert, ops
from .errors import ContractViolation, SolverFailure
from .pencil import BlockGroup, Shadow, SymSparse

@dataclass(frozen=True)
class ReductionConfig:
    """Target size and strategy for one reduction pass."""

    target_size: int
    strategy: str = "lowrank"  # lowrank | polyhedral
    per_point_sizes: tuple[int, ...] | None = None
    isotropic: bool = False

    def __post_init__(self):
        if self.target_size < 1:
            raise ValueError(f"target size must be positive, got {self.target_size}")
        if self.strategy not in ("lowrank", "polyhedral"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.per_point_sizes is not None:
            sizes = tuple(int(s) for s in self.per_point_sizes)
            if any(s < 1 for s in sizes):
                raise ValueError("per-point sizes must be positive")
            if sum(sizes) != self.target_size:
                raise ValueError(
                    f"per-point sizes sum to {sum(sizes)}, target is {self.target_size}")
            object.__setattr__(self, "per_point_sizes", sizes)


@dataclass(frozen=True)
class DirectionSet:
    """Unit directions used for supports, approximations, and volume estimates."""

    dim: int
    vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        vecs = tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.vectors)
        for v in vecs:
            if v.shape[0] != self.dim:
                raise ValueError(f"direction of length {v.shape[0]} in dimension {self.dim}")
            if abs(np.linalg.norm(v) - 1.0) > 1e-12:
                raise ValueError(f"direction {v} is not unit length")
        object.__setattr__(self, "vectors", vecs)

    def __iter__(self):
        return iter(self.vectors)

    def __len__(self):
        return len(self.vectors)


def uniform_directions(dim: int, count: int, seed: int = 0) -> DirectionSet:
    """``count`` near-uniform unit vectors; exactly equiangular in the plane.

    In dimension three a generalized-spiral layout is used; above that a
    seeded greedy best-candidate sweep keeps the minimum pairwise angle
    healthy. Deterministic for a given seed.
    """
    if dim < 1 or count < 2:
        raise ContractViolation(f"need dim >= 1 and count >= 2, got ({dim}, {count})")
    if dim == 1:
        vecs = [np.array([1.0 if k % 2 == 0 else -1.0]) for k in range(count)]
        return DirectionSet(1, tuple(vecs))
    if dim == 2:
        angles = 2.0 * math.pi * np.arange(count) / count
        vecs = [np.array([math.cos(t), math.sin(t)]) for t in angles]
    elif dim == 3:
        vecs = []
        phi = 2.0 * math.pi * ((seed * 0.6180339887498949) % 1.0)
        for k in range(1, count + 1):
            z = (2.0 * k - count - 1.0) / count
            radius = math.sqrt(max(0.0, 1.0 - z * z))
            if 0 < k <= count and radius > 1e-12:
                phi += 3.6 / (math.sqrt(count) * radius)
            vecs.append(np.array([radius * math.cos(phi), radius * math.sin(phi), z]))
    else:
        rng = np.random.default_rng(seed)
        vecs = []
        first = rng.standard_normal(dim)
        vecs.append(first / np.linalg.norm(first))
        while len(vecs) < count:
            candidates = rng.standard_normal((128, dim))
            candidates /= np.linalg.norm(candidates, axis=1, keepdims=True)
            chosen = np.array(vecs)
            scores = np.max(candidates @ chosen.T, axis=1)  # cos of nearest chosen
            vecs.append(candidates[int(np.argmin(scores))])
    vecs = [v / np.linalg.norm(v) for v in vecs]
    return DirectionSet(dim, tuple(vecs))


def boundary_points(shadow: Shadow) -> list[np.ndarray]:
    """Per-coordinate maximizers then minimizers on the boundary (2n points)."""
    if shadow.m != 0:
        raise ContractViolation("boundary points are defined for spectrahedrons (m = 0)")
    points = []
    for sign in (1.0, -1.0):
        for i in range(shadow.n):
            direction = np.zeros(shadow.n)
            direction[i] = sign
            report = backend.solve_support(shadow, direction)
            if report.status == backend.UNBOUNDED:
                raise ContractViolation(
                    f"set is unbounded in direction {sign:+g}*e_{i + 1}")
            if not report.ok:
                raise SolverFailure(f"support solve failed: {report.status}",
                                    status=report.status)
            points.append(np.asarray(report.primal_point, dtype=float))
    return points


def _split_sizes(target: int, points: int) -> tuple[int, ...]:
    base, rem = divmod(target, points)
    if base < 1:
        raise ContractViolation(
            f"target size {target} cannot cover {points} touchpoints with one slot each")
    return tuple(base + 1 if i < rem else base for i in range(points))


def lowrank_reduce(shadow: Shadow, cfg: ReductionConfig) -> Shadow:
    """Outer spectrahedron of size ``cfg.target_size`` tangent at 2n touchpoints.

    At each touchpoint the pencil is congruence-projected through the
    trailing eigenvectors of its evaluation there; the zero eigenvalue
    carried by a boundary point survives the projection, which makes the
    reduced piece tangent. Only spectrahedrons are accepted; shadows with
    lifted variables should go through :func:`polyhedral_approx` instead.
    """
    if shadow.m != 0:
        raise ContractViolation(
            "low-rank reduction applies to spectrahedrons (m = 0); "
            "use polyhedral_approx for general shadows")
    s_g = shadow.size
    if cfg.isotropic:
        t_star, _ = isotropic_transform(shadow)
        working = ops.linear_map(shadow, t_star)
    else:
        t_star = None
        working = shadow

    points = boundary_points(working)
    sizes = cfg.per_point_sizes or _split_sizes(cfg.target_size, len(points))
    if len(sizes) != len(points):
        raise ContractViolation(f"{len(sizes)} per-point sizes for {len(points)} touchpoints")
    if any(s > s_g for s in sizes):
        raise ContractViolation(f"a per-point size exceeds the source size {s_g}")

    pieces = []
    for point, s_r in zip(points, sizes):
        piece = _local_projection(working, point, s_r)
        pieces.append(piece)
    reduced = pieces[0]
    for piece in pieces[1:]:
        reduced = ops.intersect(reduced, piece)
    if t_star is not None:
        reduced = ops.linear_inverse_map(reduced, t_star)
    return reduced


def _local_projection(shadow: Shadow, point: np.ndarray, s_r: int) -> Shadow:
    """Project the pencil through the trailing eigenvectors of ``Lam(point)``."""
    eigenpairs = []  # (value, block index, local vector)
    for b_idx, blk in enumerate(shadow.blocks):
        dense = blk.lam.to_dense()
        for v, mat in zip(point, blk.a_mats):
            if v != 0.0 and not mat.is_zero:
                dense += v * mat.to_dense()
        vals, vecs = np.linalg.eigh(dense)
        for k in range(blk.block_size):
            eigenpairs.append((float(vals[k]), b_idx, vecs[:, k]))
    eigenpairs.sort(key=lambda t: t[0])
    chosen = eigenpairs[:s_r]  # trailing = smallest eigenvalues

    projectors = {}
    for _val, b_idx, vec in chosen:
        projectors.setdefault(b_idx, []).append(vec)
    slot_of_block = {}
    slot = 0
    for b_idx in sorted(projectors):
        projectors[b_idx] = np.column_stack(projectors[b_idx])
        slot_of_block[b_idx] = slot
        slot += projectors[b_idx].shape[1]

    lam_red = np.zeros((s_r, s_r))
    a_red = [np.zeros((s_r, s_r)) for _ in range(shadow.n)]
    for b_idx, proj in projectors.items():
        blk = shadow.blocks[b_idx]
        lo = slot_of_block[b_idx]
        hi = lo + proj.shape[1]
        lam_red[lo:hi, lo:hi] += blk.lam.congruence(proj)
        for i, mat in enumerate(blk.a_mats):
            if not mat.is_zero:
                a_red[i][lo:hi, lo:hi] += mat.congruence(proj)
    return Shadow(shadow.n, 0, (BlockGroup(
        s_r,
        SymSparse.from_dense(lam_red),
        tuple(SymSparse.from_dense(mat) for mat in a_red),
        (),
    ),))


def polyhedral_approx(shadow: Shadow, num_faces: int, seed: int = 0) -> Shadow:
    """Externally tangent H-polyhedron with ``num_faces`` support hyperplanes."""
    directions = uniform_directions(shadow.n, num_faces, seed)
    if backend._prefer_dual(shadow):
        reports = backend.solve_support_batch_dual(shadow, list(directions))
    else:
        reports = [backend.solve_support(shadow, a, method="primal") for a in directions]
    offsets = []
    for a, report in zip(directions, reports):
        if report.status == backend.UNBOUNDED:
            raise ContractViolation(f"set is unbounded in direction {np.round(a, 6)}")
        if not report.ok:
            raise SolverFailure(f"support solve failed: {report.status}", status=report.status)
        offsets.append(report.optimum)
    a_matrix = np.vstack(list(directions))
    return convert.from_hpolyhedron(convert.HPolyhedron(a_matrix, np.array(offsets)))


def isotropic_transform(shadow: Shadow) -> tuple[np.ndarray, np.ndarray]:
    """Nonsingular ``T*`` whose image's minimum-volume parallelotope is a hypercube.

    Returns ``(T*, c*)`` where the optimal parallelotope is
    ``{x : |T*(x - c*)|_inf <= 1}``; applying ``T*`` as a linear map makes
    the set approximately isotropic.
    """
    solution = backend.solve_min_parallelotope(shadow)
    t_star = solution.t_matrix
    c_star = -np.linalg.solve(t_star, solution.c_prime)
    return t_star, c_star
