import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gram_schmidt, max_cosine_by_ascent, row_reduction_rank
from proxlab.subspace import (
    Basis,
    complement,
    direct_sum,
    dr_rate,
    intersection,
    null_space_basis,
    orthonormal_basis,
    principal_angles,
    projector_of,
)

E3 = np.eye(3)


def span(*vectors, n=None):
    return orthonormal_basis(list(vectors), ambient_dim=n)


def random_subspace(rng, n, d):
    return Basis(gram_schmidt(rng.standard_normal((n, d))))


class TestOrthonormalBasis:
    def test_collinear_vectors(self):
        b = orthonormal_basis([(1.0, 0.0), (2.0, 0.0)])
        assert b.dim == 1
        assert np.allclose(np.abs(b.columns[:, 0]), [1.0, 0.0])

    def test_empty_span(self):
        b = orthonormal_basis([], ambient_dim=4)
        assert b.dim == 0 and b.ambient_dim == 4

    def test_empty_span_needs_dimension(self):
        with pytest.raises(ValueError):
            orthonormal_basis([])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            orthonormal_basis([(1.0, 0.0), (1.0, 0.0, 0.0)])

    @pytest.mark.parametrize("seed", range(20))
    def test_rank_matches_row_reduction(self, seed):
        rng = np.random.default_rng(seed)
        # force some dependence: 5 vectors drawn from a random-dimensional span
        k = int(rng.integers(1, 6))
        vecs = rng.standard_normal((5, k)) @ rng.standard_normal((k, 8))
        b = orthonormal_basis(list(vecs))
        assert b.dim == row_reduction_rank(vecs)
        assert b.gram_error() < 1e-12
        # same span: every input vector is reproduced by the projector
        assert np.allclose(vecs @ projector_of(b), vecs, atol=1e-10)


class TestPrincipalAngles:
    def test_identical_planes(self):
        b = span(E3[0], E3[1])
        rep = principal_angles(b, b)
        assert np.allclose(rep.angles, [0.0, 0.0])
        assert rep.intersection_dim == 2
        assert rep.friedrichs is None

    def test_orthogonal_lines(self):
        rep = principal_angles(span((1.0, 0.0)), span((0.0, 1.0)))
        assert np.allclose(rep.angles, [np.pi / 2])
        assert rep.intersection_dim == 0
        assert rep.friedrichs == pytest.approx(np.pi / 2)

    def test_one_shared_direction(self):
        rep = principal_angles(span(E3[0], E3[1]), span(E3[0], (E3[1] + E3[2]) / np.sqrt(2)))
        assert np.allclose(rep.angles, [0.0, np.pi / 4], atol=1e-12)
        assert rep.intersection_dim == 1
        assert rep.friedrichs == pytest.approx(np.pi / 4)
        assert rep.cos_friedrichs == pytest.approx(1 / np.sqrt(2))

    def test_trivial_subspace(self):
        rep = principal_angles(Basis.empty(3), span(E3[0]))
        assert rep.angles.size == 0 and rep.friedrichs is None

    def test_swaps_larger_first(self):
        a, b = span(E3[0], E3[1]), span((E3[0] + E3[2]) / np.sqrt(2), n=3)
        assert np.allclose(principal_angles(a, b).angles, principal_angles(b, a).angles)

    def test_ambient_mismatch(self):
        with pytest.raises(ValueError):
            principal_angles(span((1.0, 0.0)), span(E3[0]))

    def test_first_angle_matches_ascent_oracle_2d_in_r5(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            b1, b2 = random_subspace(rng, 5, 2), random_subspace(rng, 5, 2)
            rep = principal_angles(b1, b2)
            brute = np.arccos(min(1.0, max_cosine_by_ascent(b1.columns, b2.columns)))
            assert abs(rep.angles[0] - brute) < 1e-6

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 7), st.data())
    def test_angle_invariants(self, seed, n, data):
        rng = np.random.default_rng(seed)
        d1 = data.draw(st.integers(1, n))
        d2 = data.draw(st.integers(1, n))
        b1, b2 = random_subspace(rng, n, d1), random_subspace(rng, n, d2)
        rep = principal_angles(b1, b2)
        assert rep.angles.size == min(d1, d2)
        assert np.all(rep.angles >= 0) and np.all(rep.angles <= np.pi / 2 + 1e-15)
        assert np.all(np.diff(rep.angles) >= -1e-15)
        # cosine of the first angle is the norm of P1 P2
        p12 = projector_of(b1) @ projector_of(b2)
        assert np.cos(rep.angles[0]) == pytest.approx(np.linalg.norm(p12, 2), abs=1e-8)
        if rep.friedrichs is not None:
            assert rep.friedrichs > 0
            assert rep.friedrichs == rep.angles[rep.intersection_dim]


class TestDRRate:
    def test_examples(self):
        assert dr_rate(0.0, 1.0) == 0.0
        assert dr_rate(1.0, 0.5) == pytest.approx(1.0)
        assert dr_rate(0.5, 1.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("lam", [0.0, 2.0, -1.0, 2.5])
    def test_lambda_out_of_range(self, lam):
        with pytest.raises(ValueError):
            dr_rate(0.5, lam)

    @given(st.floats(0.0, 1.0))
    def test_unrelaxed_is_cosine(self, c):
        assert dr_rate(c, 1.0) == pytest.approx(c, abs=1e-15)

    @given(st.floats(0.0, 0.999), st.floats(0.01, 1.99))
    def test_best_at_unit_relaxation(self, c, lam):
        r = dr_rate(c, lam)
        assert 0.0 <= r <= 1.0
        assert dr_rate(c, 1.0) <= r + 1e-15


class TestSubspaceAlgebra:
    def test_projector_of_line(self):
        assert np.array_equal(projector_of(span((1.0, 0.0))), [[1.0, 0.0], [0.0, 0.0]])

    def test_complement_of_line(self):
        c = complement(span((1.0, 0.0)))
        assert c.dim == 1 and np.allclose(np.abs(c.columns[:, 0]), [0.0, 1.0])

    def test_intersection_of_planes(self):
        i = intersection(span(E3[0], E3[1]), span(E3[1], E3[2]))
        assert i.dim == 1 and np.allclose(np.abs(i.columns[:, 0]), [0.0, 1.0, 0.0])

    def test_intersection_mismatch(self):
        with pytest.raises(ValueError):
            intersection(span((1.0, 0.0)), span(E3[0]))

    def test_null_space(self):
        nb = null_space_basis(np.array([[1.0, 1.0, 0.0]]))
        assert nb.dim == 2
        assert np.allclose(np.array([[1.0, 1.0, 0.0]]) @ nb.columns, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.data())
    def test_projector_identities(self, seed, n, data):
        rng = np.random.default_rng(seed)
        b = random_subspace(rng, n, data.draw(st.integers(1, n)))
        p = projector_of(b)
        assert np.allclose(p @ b.columns, b.columns, atol=1e-12)
        assert np.allclose(p, p.T, atol=1e-12)
        assert np.allclose(p @ p, p, atol=1e-10)
        assert np.allclose(projector_of(complement(b)), np.eye(n) - p, atol=1e-10)

    def test_direct_sum_dimension(self):
        s = direct_sum(span(E3[0], E3[1]), span(E3[1], E3[2]))
        assert s.dim == 3
