"""Conversions against the source representations' native membership tests."""
import math
from fractions import Fraction

import numpy as np
import pytest

from spectra import (
    Ellipsoid,
    Ellipsotope,
    HPolyhedron,
    Zonotope,
    constrained_zonotope,
    contains_point,
    from_ellipsoid,
    from_ellipsotope,
    from_hpolyhedron,
    from_pnorm_ball,
    from_zonotope,
    is_bounded,
    is_empty,
    solve_support,
)
from spectra.errors import ContractViolation

DIRS_16 = [np.array([math.cos(t), math.sin(t)])
           for t in np.linspace(0, 2 * math.pi, 16, endpoint=False)]


def grid_agree(shadow, oracle, lo=-1.6, hi=1.6, steps=13, band=1e-4):
    for x1 in np.linspace(lo, hi, steps):
        for x2 in np.linspace(lo, hi, steps):
            point = np.array([x1, x2])
            verdict, margin = contains_point(shadow, point)
            if abs(margin) <= band:
                continue
            assert verdict == oracle(point), f"disagreement at {point}"


class TestHPolyhedron:
    def test_interval_structure(self):
        shadow = from_hpolyhedron(HPolyhedron(np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])))
        assert shadow.size == 2 and shadow.m == 0
        # block-diagonal pencil evaluates to diag(b) - diag(A x)
        lam = [blk.lam.to_dense()[0, 0] for blk in shadow.blocks]
        coeff = [blk.a_mats[0].to_dense()[0, 0] for blk in shadow.blocks]
        assert lam == pytest.approx([1.0, 1.0])
        assert coeff == pytest.approx([-1.0, 1.0])

    def test_triangle_grid(self):
        poly = HPolyhedron(np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]]),
                           np.array([0.0, 0.0, 1.0]))
        grid_agree(from_hpolyhedron(poly), poly.contains)

    def test_contradictory_bounds_empty(self):
        poly = HPolyhedron(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
        assert is_empty(from_hpolyhedron(poly)).empty


class TestEllipsoid:
    def test_unit_disk_is_identity_pencil(self):
        shadow = from_ellipsoid(Ellipsoid(np.zeros(2), np.eye(2)))
        assert shadow.blocks[0].lam.to_dense() == pytest.approx(np.eye(3))

    def test_boundary_point(self):
        ell = Ellipsoid(np.array([1.0, 0.0]), np.diag([4.0, 1.0]))
        shadow = from_ellipsoid(ell)
        assert contains_point(shadow, [3.0, 0.0]).contains
        assert not contains_point(shadow, [3.05, 0.0]).contains

    def test_support_formula(self, rng):
        center = rng.uniform(-1, 1, 2)
        root = rng.standard_normal((2, 2))
        q_mat = root @ root.T + 0.5 * np.eye(2)
        shadow = from_ellipsoid(Ellipsoid(center, q_mat))
        for a in DIRS_16:
            expected = float(a @ center + math.sqrt(a @ q_mat @ a))
            got = solve_support(shadow, a).optimum
            assert got == pytest.approx(expected, abs=1e-6 * (1 + abs(expected)))

    def test_rejects_indefinite_shape(self):
        with pytest.raises(ContractViolation):
            Ellipsoid(np.zeros(2), np.diag([1.0, -1.0]))


class TestZonotope:
    def test_unit_square(self):
        shadow = from_zonotope(Zonotope(np.zeros(2), np.eye(2)))
        assert contains_point(shadow, [1.0, 1.0]).contains
        assert not contains_point(shadow, [1.02, 1.0]).contains

    def test_rank_deficient_segment(self):
        shadow = from_zonotope(Zonotope(np.zeros(2), np.array([[1.0], [1.0]])))
        assert contains_point(shadow, [1.0, 1.0]).contains
        assert contains_point(shadow, [-1.0, -1.0]).contains
        assert not contains_point(shadow, [0.5, 0.6]).contains

    def test_support_formula(self, rng):
        zono = Zonotope(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, (2, 4)))
        shadow = from_zonotope(zono)
        for a in DIRS_16:
            expected = zono.support(a)
            got = solve_support(shadow, a).optimum
            assert got == pytest.approx(expected, abs=1e-6 * (1 + abs(expected)))

    def test_zero_generators_is_singleton(self):
        shadow = from_zonotope(Zonotope(np.array([2.0, -1.0]), np.zeros((2, 0))))
        assert contains_point(shadow, [2.0, -1.0]).contains
        assert not contains_point(shadow, [2.0, -0.9]).contains


class TestPnormBall:
    def test_inf_ball_is_box(self):
        shadow = from_pnorm_ball(3, math.inf)
        assert shadow.m == 0 and shadow.size == 6
        assert contains_point(shadow, [1.0, -1.0, 1.0]).contains
        assert not contains_point(shadow, [1.1, 0.0, 0.0]).contains

    def test_p2_matches_disk(self):
        ball = from_pnorm_ball(2, 2)
        disk = from_ellipsoid(Ellipsoid(np.zeros(2), np.eye(2)))
        for x1 in np.linspace(-1.2, 1.2, 11):
            for x2 in np.linspace(-1.2, 1.2, 11):
                lhs, margin = contains_point(ball, [x1, x2])
                if abs(margin) > 1e-4 and abs(contains_point(disk, [x1, x2]).margin) > 1e-4:
                    assert lhs == contains_point(disk, [x1, x2]).contains

    def test_p_three_halves_probes(self):
        ball = from_pnorm_ball(2, Fraction(3, 2))
        assert contains_point(ball, [1.0, 0.0]).contains
        assert not contains_point(ball, [0.9, 0.9]).contains
        assert contains_point(ball, [0.62, 0.62]).contains       # 2 * 0.62^1.5 = 0.976
        assert not contains_point(ball, [0.64, 0.64]).contains   # 2 * 0.64^1.5 = 1.024

    @pytest.mark.parametrize("p", [1, Fraction(3, 2), 2, 3])
    def test_against_norm_oracle(self, p, rng):
        ball = from_pnorm_ball(2, p)
        pf = float(Fraction(p))
        for _ in range(60):
            x = rng.uniform(-1.3, 1.3, size=2)
            norm = (abs(x[0]) ** pf + abs(x[1]) ** pf) ** (1 / pf)
            if abs(norm - 1.0) < 1e-3:
                continue
            assert contains_point(ball, x).contains == (norm <= 1.0), (p, x, norm)

    def test_monotone_in_p(self, rng):
        balls = [from_pnorm_ball(2, p) for p in (1, 2, 4)]
        for _ in range(25):
            x = rng.uniform(-1.1, 1.1, size=2)
            norms = [sum(abs(v) ** p for v in x) ** (1 / p) for p in (1, 2, 4)]
            if min(abs(nrm - 1.0) for nrm in norms) < 1e-3:
                continue
            flags = [contains_point(b, x).contains for b in balls]
            # smaller p gives the smaller ball: membership is monotone upward
            assert flags == sorted(flags)


class TestEllipsotope:
    def test_p2_single_index_set_is_ellipsoid(self, rng):
        root = rng.standard_normal((2, 2)) + 1.5 * np.eye(2)
        center = rng.uniform(-0.5, 0.5, 2)
        etope = Ellipsotope(Fraction(2), center, root, index_sets=((1, 2),))
        ellipsoid = from_ellipsoid(Ellipsoid(center, root @ root.T))
        shadow = from_ellipsotope(etope)
        for x1 in np.linspace(-2, 2, 9):
            for x2 in np.linspace(-2, 2, 9):
                lhs, margin = contains_point(shadow, [x1, x2])
                rhs, margin2 = contains_point(ellipsoid, [x1, x2])
                if min(abs(margin), abs(margin2)) > 1e-4:
                    assert lhs == rhs

    def test_pinf_singletons_is_zonotope(self, rng):
        gens = rng.uniform(-1, 1, (2, 3))
        center = rng.uniform(-0.5, 0.5, 2)
        etope = constrained_zonotope(center, gens)
        zono_shadow = from_zonotope(Zonotope(center, gens))
        shadow = from_ellipsotope(etope)
        for a in DIRS_16:
            lhs = solve_support(shadow, a).optimum
            rhs = solve_support(zono_shadow, a).optimum
            assert lhs == pytest.approx(rhs, abs=1e-5 * (1 + abs(rhs)))

    def test_constrained_zonotope_equality_cut(self):
        # Square [-1,1]^2 with xi_1 = xi_2: the diagonal segment.
        etope = constrained_zonotope(np.zeros(2), np.eye(2),
                                     np.array([[1.0, -1.0]]), np.array([0.0]))
        shadow = from_ellipsotope(etope)
        assert contains_point(shadow, [0.7, 0.7]).contains
        assert not contains_point(shadow, [0.7, 0.2]).contains
        assert not contains_point(shadow, [1.2, 1.2]).contains

    def test_permuted_index_sets(self):
        # J1 = {2}, J2 = {1}: permutation must route generators correctly.
        etope = Ellipsotope(Fraction(2), np.zeros(2), np.diag([2.0, 1.0]),
                            index_sets=((2,), (1,)))
        shadow = from_ellipsotope(etope)
        assert contains_point(shadow, [2.0, 0.0]).contains
        assert not contains_point(shadow, [2.1, 0.0]).contains
        assert contains_point(shadow, [0.0, 1.0]).contains

    def test_bad_partition_rejected(self):
        with pytest.raises(ContractViolation, match="partition"):
            Ellipsotope(Fraction(2), np.zeros(2), np.eye(2), index_sets=((1,),))


class TestBoundedSourcesStayBounded:
    def test_all_conversions_bounded(self, rng):
        shadows = [
            from_hpolyhedron(HPolyhedron(np.vstack([np.eye(2), -np.eye(2)]),
                                         np.array([1.0, 2.0, 3.0, 4.0]))),
            from_ellipsoid(Ellipsoid(rng.uniform(-1, 1, 2), np.diag([2.0, 0.5]))),
            from_zonotope(Zonotope(np.zeros(2), rng.uniform(-1, 1, (2, 3)))),
            from_pnorm_ball(2, Fraction(3, 2)),
            from_ellipsotope(constrained_zonotope(np.zeros(2), np.eye(2))),
        ]
        for shadow in shadows:
            assert is_bounded(shadow).bounded

    def test_halfspace_unbounded(self):
        halfspace = from_hpolyhedron(HPolyhedron(np.array([[1.0, 1.0]]), np.array([1.0])))
        assert not is_bounded(halfspace).bounded
