"""Shared fixtures: canonical small sets and seeded random set generators."""
import numpy as np
import pytest

from spectra import (
    Ellipsoid,
    HPolyhedron,
    Shadow,
    SymSparse,
    Zonotope,
    BlockGroup,
    from_ellipsoid,
    from_hpolyhedron,
    from_zonotope,
)
from spectra import convex_hull, linear_map, minkowski_sum, translate


def unit_interval() -> Shadow:
    """[-1, 1] as the pencil diag(1 - x, 1 + x)."""
    return Shadow(1, 0, (BlockGroup(
        2,
        SymSparse.diag([1.0, 1.0]),
        (SymSparse.diag([-1.0, 1.0]),),
        (),
    ),))


def parabola_shadow() -> Shadow:
    """Region above the parabola 1 + x2 - 1.44 x1^2 >= 0 (unbounded)."""
    lam = SymSparse.identity(2)
    a1 = SymSparse(2, ((1, 2, 1.2),))
    a2 = SymSparse(2, ((1, 1, 1.0),))
    return Shadow(2, 0, (BlockGroup(2, lam, (a1, a2), ()),))


def unit_disk() -> Shadow:
    return from_ellipsoid(Ellipsoid(np.zeros(2), np.eye(2)))


def unit_square() -> Shadow:
    return from_zonotope(Zonotope(np.zeros(2), np.eye(2)))


def interval_shadow(lo: float, hi: float) -> Shadow:
    return from_hpolyhedron(HPolyhedron(np.array([[1.0], [-1.0]]), np.array([hi, -lo])))


def box_shadow(lo, hi) -> Shadow:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    return from_hpolyhedron(
        HPolyhedron(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([hi, -lo]))
    )


def singleton_shadow(point) -> Shadow:
    point = np.asarray(point, dtype=float)
    return box_shadow(point, point)


def random_psd(rng, n, scale=1.0):
    root = rng.standard_normal((n, n))
    return scale * (root @ root.T / n + 0.3 * np.eye(n))


def random_bounded_shadow(rng, symmetric=False, max_ops=2) -> Shadow:
    """Random bounded nonempty 2-D shadow built from conversions plus a few ops.

    With ``symmetric=True`` every primitive contains the origin, so the
    result does too (sums, hulls, and linear images preserve that).
    """
    def primitive():
        kind = rng.integers(0, 3)
        center = np.zeros(2) if symmetric else rng.uniform(-1, 1, size=2)
        if kind == 0:
            return from_ellipsoid(Ellipsoid(center, random_psd(rng, 2)))
        if kind == 1:
            gens = rng.uniform(-1, 1, size=(2, int(rng.integers(1, 4))))
            return from_zonotope(Zonotope(center, gens))
        half = rng.uniform(0.3, 1.5, size=2)
        return translate(box_shadow(-half, half), center)

    shadow = primitive()
    for _ in range(int(rng.integers(0, max_ops + 1))):
        op = rng.integers(0, 3)
        if op == 0:
            shadow = minkowski_sum(shadow, primitive())
        elif op == 1:
            shadow = convex_hull(shadow, primitive()).shadow
        else:
            mat = rng.uniform(-1, 1, size=(2, 2))
            mat += np.sign(np.linalg.det(mat) or 1.0) * 0.8 * np.eye(2)
            shadow = linear_map(shadow, mat)
    return shadow


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
