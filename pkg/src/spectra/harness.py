"""Set-membership estimation and Lp-sum reachability pipelines, with volume
estimation, random system generation, and plot-data emission.

The estimation update is composed exactly from the exact set operations:
predict with the dynamics and disturbance set, then intersect with the
measurement-consistent state set (which is typically unbounded when there
are fewer sensors than states). Reachability propagates
``X_{k+1} = A o X_k (+) B o U_k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import backend, convert, ops, reduce, validate
from .errors import ContractViolation, DimensionMismatch, SolverFailure
from .pencil import Shadow, serialize


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``x+ = A x + B u + L w``, ``y = C x + F v``."""

    a: np.ndarray
    b: np.ndarray
    l: np.ndarray
    c: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n_x = a.shape[0]
        if a.shape[1] != n_x:
            raise ValueError(f"A must be square, got {a.shape}")
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        l = np.atleast_2d(np.asarray(self.l, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        f = np.atleast_2d(np.asarray(self.f, dtype=float))
        for name, mat, rows in (("B", b, n_x), ("L", l, n_x)):
            if mat.shape[0] != rows:
                raise ValueError(f"{name} has {mat.shape[0]} rows, expected {rows}")
        if c.shape[1] != n_x:
            raise ValueError(f"C has {c.shape[1]} columns, expected {n_x}")
        if f.shape[0] != c.shape[0]:
            raise ValueError(f"F has {f.shape[0]} rows, C outputs {c.shape[0]}")
        for key, mat in (("a", a), ("b", b), ("l", l), ("c", c), ("f", f)):
            object.__setattr__(self, key, mat)

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_y(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True, eq=False)
class EstimationRun:
    """Configuration for one set-membership estimation run."""

    system: LinearSystem
    x0: Shadow
    w_set: Shadow
    v_set: Shadow
    horizon: int
    reduce_every: int | None = None
    reduce_target: int = 24
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        if self.reduce_every is not None and self.reduce_every < 1:
            raise ValueError("reduce_every must be positive when given")


@dataclass(frozen=True, eq=False)
class ReachRun:
    """Configuration for one Lp-sum reachability run."""

    a: np.ndarray
    b: np.ndarray
    x_bar0: np.ndarray
    u_bar: np.ndarray
    q_list: tuple[np.ndarray, ...]
    u_list: tuple[np.ndarray, ...]
    p1: Fraction | float
    p2: Fraction | float
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "a", np.atleast_2d(np.asarray(self.a, dtype=float)))
        object.__setattr__(self, "b", np.atleast_2d(np.asarray(self.b, dtype=float)))
        object.__setattr__(self, "x_bar0", np.asarray(self.x_bar0, dtype=float).reshape(-1))
        object.__setattr__(self, "u_bar", np.asarray(self.u_bar, dtype=float).reshape(-1))
        object.__setattr__(self, "q_list", tuple(np.asarray(q, dtype=float) for q in self.q_list))
        object.__setattr__(self, "u_list", tuple(np.asarray(u, dtype=float) for u in self.u_list))
        for p in (self.p1, self.p2):
            if p != math.inf and Fraction(p) < 1:
                raise ValueError(f"p parameters must be >= 1, got {p}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")


@dataclass
class StepLog:
    """Per-step metrics backing the experiment logs."""

    k: int
    set_bytes: int
    wall_ms: float
    volume_estimate: float | None = None
    containment_checks: int = 0

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "set_bytes": self.set_bytes,
            "wall_ms": self.wall_ms,
            "volume_estimate": self.volume_estimate,
            "containment_checks": self.containment_checks,
        }


# ---------------------------------------------------------------------------
# Set-membership estimation
# ---------------------------------------------------------------------------


def consistent_state_set(system: LinearSystem, v_set: Shadow, y: np.ndarray) -> Shadow:
    """Measurement-consistent states ``(y + (-F) o V) o C``; unbounded if C is wide."""
    noise_image = ops.linear_map(v_set, -system.f)
    shifted = ops.translate(noise_image, y)
    return ops.linear_inverse_map(shifted, system.c)


def sme_step(
    x_set: Shadow,
    y_next: Sequence[float],
    u: Sequence[float],
    run: EstimationRun,
    check_nonempty: bool = True,
) -> Shadow:
    """One estimation update: predict through the dynamics, then correct.

    ``y_next`` is the measurement taken at the new time step. An empty
    intersection signals inconsistent model/measurement data and raises.
    """
    system = run.system
    y_next = np.asarray(y_next, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if y_next.shape[0] != system.n_y:
        raise DimensionMismatch(f"measurement has length {y_next.shape[0]}, "
                                f"system outputs {system.n_y}")
    predicted = ops.translate(ops.linear_map(x_set, system.a), system.b @ u)
    # Small operand first: the sum coupling duplicates the first operand's
    # A-entries, so this order keeps the per-step byte growth constant.
    predicted = ops.minkowski_sum(ops.linear_map(run.w_set, system.l), predicted)
    corrected = ops.intersect(predicted, consistent_state_set(system, run.v_set, y_next))
    if check_nonempty and validate.is_empty(corrected).empty:
        raise ContractViolation(
            "estimation update is empty: measurement inconsistent with the model")
    return corrected


def run_estimation(
    run: EstimationRun,
    measurements: Sequence[np.ndarray],
    inputs: Sequence[np.ndarray],
    truth: Sequence[np.ndarray] | None = None,
    check_nonempty: bool = True,
    log_volume: bool = False,
) -> tuple[list[Shadow], list[StepLog]]:
    """Drive ``horizon`` estimation steps, logging size/time/containment.

    ``log_volume`` additionally records a planar volume estimate per step
    (2-D runs only; noticeably slower).
    """
    import time as _time

    if len(measurements) < run.horizon or len(inputs) < run.horizon:
        raise DimensionMismatch("need one measurement and one input per step")

    def volume_of(shadow):
        if not log_volume or shadow.n != 2:
            return None
        return estimate_volume(shadow, k_dirs=64, seed=run.seed).value

    sets = [run.x0]
    logs = [StepLog(0, len(serialize(run.x0).encode()), 0.0,
                    volume_estimate=volume_of(run.x0))]
    current = run.x0
    for k in range(1, run.horizon + 1):
        t0 = _time.perf_counter()
        current = sme_step(current, measurements[k - 1], inputs[k - 1], run,
                           check_nonempty=check_nonempty)
        if run.reduce_every and k % run.reduce_every == 0:
            current = reduce.polyhedral_approx(current, run.reduce_target, seed=run.seed + k)
        wall_ms = (_time.perf_counter() - t0) * 1e3
        checks = 0
        if truth is not None:
            checks = int(validate.contains_point(current, truth[k]).contains)
        sets.append(current)
        logs.append(StepLog(k, len(serialize(current).encode()), wall_ms,
                            volume_estimate=volume_of(current),
                            containment_checks=checks))
    return sets, logs


def simulate_linear_system(
    system: LinearSystem,
    x0: np.ndarray,
    inputs: Sequence[np.ndarray],
    disturbances: Sequence[np.ndarray],
    noises: Sequence[np.ndarray],
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Ground-truth trajectory and the measurements seen along it.

    Returns states ``x_0..x_K`` and measurements ``y_1..y_K`` (the output at
    each post-update step, matching what :func:`sme_step` consumes).
    """
    states = [np.asarray(x0, dtype=float)]
    measurements = []
    for u, w, v in zip(inputs, disturbances, noises):
        nxt = system.a @ states[-1] + system.b @ u + system.l @ w
        states.append(nxt)
        measurements.append(system.c @ nxt + system.f @ v)
    return states, measurements


# ---------------------------------------------------------------------------
# Lp-sum reachability
# ---------------------------------------------------------------------------


def reach_step(x_set: Shadow, u_set: Shadow, a: np.ndarray, b: np.ndarray) -> Shadow:
    """Exact one-step reachable set ``A o X (+) B o U``.

    The input image goes first: the sum coupling duplicates the first
    operand's A-entries, and ``B o U`` stays constant-size across steps.
    """
    return ops.minkowski_sum(ops.linear_map(u_set, b), ops.linear_map(x_set, a))


def _lp_sum_of_ellipsoids(center: np.ndarray, shapes: Sequence[np.ndarray], p) -> Shadow:
    """Fold ``E(c,Q_1) +_p ... +_p E(c,Q_k)`` by centering at zero first."""
    centered = [convert.from_ellipsoid(convert.Ellipsoid(np.zeros_like(center), q))
                for q in shapes]
    total = centered[0]
    for nxt in centered[1:]:
        total = ops.lp_sum(total, nxt, p)
    return ops.translate(total, center)


def build_lp_initial_sets(run: ReachRun) -> tuple[Shadow, Shadow]:
    """Initial state set and input set as Lp sums of co-centered ellipsoids."""
    if not run.q_list or not run.u_list:
        raise ContractViolation("need at least one shape matrix on each side")
    x0 = _lp_sum_of_ellipsoids(run.x_bar0, run.q_list, run.p1)
    u_set = _lp_sum_of_ellipsoids(run.u_bar, run.u_list, run.p2)
    return x0, u_set


def run_reach(run: ReachRun) -> tuple[list[Shadow], list[StepLog]]:
    """Propagate the reachable set over the horizon, logging per-step metrics."""
    import time as _time

    x_set, u_set = build_lp_initial_sets(run)
    sets = [x_set]
    logs = [StepLog(0, len(serialize(x_set).encode()), 0.0)]
    for k in range(1, run.horizon + 1):
        t0 = _time.perf_counter()
        x_set = reach_step(x_set, u_set, run.a, run.b)
        wall_ms = (_time.perf_counter() - t0) * 1e3
        sets.append(x_set)
        logs.append(StepLog(k, len(serialize(x_set).encode()), wall_ms))
    return sets, logs


def sample_lp_sum_point(
    rng: np.random.Generator,
    center: np.ndarray,
    shapes: Sequence[np.ndarray],
    p,
    direction: np.ndarray | None = None,
) -> np.ndarray:
    """Admissible point of the Lp sum; with ``direction`` the support maximizer.

    Random points interpolate random ellipsoid points with random simplex
    weights per the defining parameterization; directed points use the
    closed-form Firey maximizer (weights proportional to the p-th powers of
    the per-ellipsoid supports).
    """
    p = float(Fraction(p)) if p != math.inf else math.inf
    roots = [np.linalg.cholesky(q) for q in shapes]
    if direction is None:
        points = []
        for root in roots:
            raw = rng.standard_normal(center.shape[0])
            raw /= np.linalg.norm(raw)
            points.append(root @ raw * rng.uniform() ** (1.0 / center.shape[0]))
        weights = rng.dirichlet(np.ones(len(shapes)))
    else:
        supports = [math.sqrt(max(direction @ q @ direction, 0.0)) for q in shapes]
        points = [q @ direction / s if s > 0 else np.zeros_like(center)
                  for q, s in zip(shapes, supports)]
        total = sum(s ** p for s in supports) if p != math.inf else None
        if p == math.inf:
            weights = np.zeros(len(shapes))
            weights[int(np.argmax(supports))] = 1.0
        else:
            weights = np.array([s ** p / total for s in supports])
    if p == math.inf:
        scales = weights  # Hoelder conjugate 1: plain convex combination
    else:
        conj = 1.0 - 1.0 / p  # 1/p' as an exponent
        scales = weights ** conj if p > 1 else np.ones(len(shapes))
    out = center.copy()
    for scale, point in zip(scales, points):
        out = out + scale * point
    return out


# ---------------------------------------------------------------------------
# Volume estimation and plotting support
# ---------------------------------------------------------------------------


@dataclass
class VolumeEstimate:
    value: float
    half_width: float
    degenerate: bool = False


def _polygon_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def estimate_volume(shadow: Shadow, k_dirs: int = 128, seed: int = 0,
                    mc_samples: int = 4000) -> VolumeEstimate:
    """Volume of a bounded 2-D or 3-D shadow by boundary sampling.

    In the plane the estimate is the mean of the inscribed polygon through
    the support maximizers and the circumscribed polygon of the support
    hyperplanes, with half their gap as the error bound. In three dimensions
    it falls back to membership Monte Carlo over the support bounding box.
    """
    if shadow.n == 2:
        if k_dirs < 8:
            raise ContractViolation("need at least 8 directions for the polygon estimate")
        directions = reduce.uniform_directions(2, k_dirs, seed)
        maximizers = []
        offsets = []
        for a in directions:
            report = backend.solve_support(shadow, a)
            if report.status == backend.UNBOUNDED:
                raise ContractViolation(f"set is unbounded in direction {np.round(a, 6)}")
            if not report.ok:
                raise SolverFailure(f"support solve failed: {report.status}",
                                    status=report.status)
            maximizers.append(report.primal_point)
            offsets.append(report.optimum)
        inscribed = _polygon_area(np.vstack(maximizers))
        vertices = []
        dirs = list(directions)
        for i in range(k_dirs):
            a1, a2 = dirs[i], dirs[(i + 1) % k_dirs]
            rhs = np.array([offsets[i], offsets[(i + 1) % k_dirs]])
            vertices.append(np.linalg.solve(np.vstack([a1, a2]), rhs))
        circumscribed = _polygon_area(np.vstack(vertices))
        value = 0.5 * (inscribed + circumscribed)
        return VolumeEstimate(value, 0.5 * (circumscribed - inscribed),
                              degenerate=value <= 1e-3)
    if shadow.n == 3:
        los, his = [], []
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1.0
            hi = backend.solve_support(shadow, e)
            lo = backend.solve_support(shadow, -e)
            if not (hi.ok and lo.ok):
                raise ContractViolation("set must be bounded for volume estimation")
            his.append(hi.optimum)
            los.append(-lo.optimum)
        los, his = np.array(los), np.array(his)
        box_vol = float(np.prod(his - los))
        if box_vol <= 0.0:
            return VolumeEstimate(0.0, 0.0, degenerate=True)
        rng = np.random.default_rng(seed)
        hits = 0
        for _ in range(mc_samples):
            point = rng.uniform(los, his)
            if validate.contains_point(shadow, point).contains:
                hits += 1
        frac = hits / mc_samples
        half = 1.96 * math.sqrt(max(frac * (1 - frac), 1e-12) / mc_samples) * box_vol
        return VolumeEstimate(frac * box_vol, half, degenerate=frac * box_vol <= 1e-3)
    raise ContractViolation(f"volume estimation supports n in {{2, 3}}, got n = {shadow.n}")


def emit_plot_data(shadow: Shadow, k_dirs: int = 64, seed: int = 0) -> np.ndarray:
    """Boundary points (support maximizers) of a bounded planar shadow, in
    angular order; rows are ``(x, y)``."""
    if shadow.n != 2:
        raise ContractViolation(f"plot data is planar only, got n = {shadow.n}")
    points = []
    for a in reduce.uniform_directions(2, k_dirs, seed):
        report = backend.solve_support(shadow, a)
        if report.status == backend.UNBOUNDED:
            raise ContractViolation(f"set is unbounded in direction {np.round(a, 6)}")
        if not report.ok:
            raise SolverFailure(f"support solve failed: {report.status}", status=report.status)
        points.append(report.primal_point)
    return np.vstack(points)


def plot_csv(points: np.ndarray) -> str:
    lines = ["x,y"]
    lines.extend(f"{x!r},{y!r}" for x, y in points)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Random systems
# ---------------------------------------------------------------------------


def random_system(dim: int, seed: int) -> LinearSystem:
    """Seeded random system: entries uniform in [-1, 1], spectral radius of A
    rescaled into [0.7, 1.05], full-rank C."""
    if dim < 1:
        raise ContractViolation(f"dimension must be positive, got {dim}")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, (dim, dim))
    radius = max(abs(np.linalg.eigvals(a)))
    target = rng.uniform(0.7, 1.05)
    if radius > 0:
        a *= target / radius
    b = rng.uniform(-1.0, 1.0, (dim, dim))
    l = rng.uniform(-1.0, 1.0, (dim, dim))
    c = rng.uniform(-1.0, 1.0, (dim, dim))
    while np.linalg.matrix_rank(c) < dim:
        c = rng.uniform(-1.0, 1.0, (dim, dim))
    f = rng.uniform(-1.0, 1.0, (dim, dim))
    return LinearSystem(a, b, l, c, f)


def default_uncertainty_sets(dim: int) -> tuple[Shadow, Shadow, Shadow]:
    """Recipe sets: unit hypercubes for the initial state and disturbance,
    a half-radius ball for the measurement noise."""
    box = convert.from_pnorm_ball(dim, math.inf)
    ball = convert.from_ellipsoid(convert.Ellipsoid(np.zeros(dim), 0.25 * np.eye(dim)))
    return box, box, ball
