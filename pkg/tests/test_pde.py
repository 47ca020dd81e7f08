import numpy as np
import pytest
import scipy.sparse as sp
import sympy

from certrom.exceptions import DomainError, FactorizationError
from certrom.numerics import spectral_norm
from certrom.pde import (ContinuousSystem, NeumannSegment, TimeScheme,
                         assemble_convdiff_2d, assemble_heat_1d,
                         default_segments, discretize, q1_element_matrices)


def sympy_element(h, velocity):
    """Exact bilinear element integrals on [0, h]^2."""
    x, y = sympy.symbols("x y")
    X, Y = x / h, y / h
    phi = [(1 - X) * (1 - Y), X * (1 - Y), X * Y, (1 - X) * Y]
    vx, vy = (sympy.nsimplify(v) for v in velocity)
    out = [np.zeros((4, 4)) for _ in range(3)]
    for i in range(4):
        for j in range(4):
            terms = (phi[j] * phi[i],
                     sympy.diff(phi[j], x) * sympy.diff(phi[i], x)
                     + sympy.diff(phi[j], y) * sympy.diff(phi[i], y),
                     (vx * sympy.diff(phi[j], x) + vy * sympy.diff(phi[j], y)) * phi[i])
            for m, term in enumerate(terms):
                out[m][i, j] = float(sympy.integrate(term, (x, 0, h), (y, 0, h)))
    return out


@pytest.mark.parametrize("h,velocity", [(sympy.Rational(3, 10), (1, 1)),
                                        (sympy.Rational(1, 8), (0.7, -0.2))])
def test_element_matrices_match_exact_integrals(h, velocity):
    ref = sympy_element(h, velocity)
    got = q1_element_matrices(float(h), velocity)
    for a, b in zip(got, ref):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


class TestHeat:
    def test_stencils(self):
        sys_ = assemble_heat_1d(4, 0.5)
        dx = 0.25
        M = sys_.mass.toarray()
        np.testing.assert_allclose(np.diag(M), [4 * dx / 6] * 3 + [2 * dx / 6])
        np.testing.assert_allclose(np.diag(M, 1), [dx / 6] * 3)
        K = sys_.stiffness.toarray()
        np.testing.assert_allclose(np.diag(K), [-0.5 * 2 / dx] * 3 + [-0.5 / dx])
        np.testing.assert_allclose(np.diag(K, -1), [0.5 / dx] * 3)
        np.testing.assert_array_equal(sys_.input_map.toarray().ravel(), [0, 0, 0, 0.5])

    def test_mass_integrates_partition(self):
        # sum_ij M_ij = int (sum_i phi_i)^2; without the hat at x=0 the sum
        # is x/dx on [0, dx] and 1 elsewhere, giving 1 - 2 dx / 3
        sys_ = assemble_heat_1d(10, 1.0)
        assert sys_.mass.sum() == pytest.approx(1 - 0.2 / 3, rel=1e-14)

    def test_stiffness_annihilates_only_through_boundary(self):
        K = assemble_heat_1d(6, 1.0).stiffness.toarray()
        row_sums = K.sum(axis=1)
        np.testing.assert_allclose(row_sums[1:], 0.0, atol=1e-12)
        assert row_sums[0] < 0

    def test_source_column(self):
        sys_ = assemble_heat_1d(5, 0.1, source=2.0)
        F = sys_.input_map.toarray()
        assert F.shape == (5, 2)
        assert F[:, 0].sum() == pytest.approx(2.0 * (1 - 0.1), rel=1e-14)

    def test_backward_euler_is_contractive(self):
        S = discretize(assemble_heat_1d(133, 0.1), TimeScheme(1.0, 0.01))
        o = S.oracle()
        nrm = spectral_norm(o.apply_A, o.apply_AT, S.n_dof, tol=1e-12)
        assert nrm <= 1.0
        assert nrm == pytest.approx(np.linalg.norm(o.dense_A(), 2), rel=1e-8)

    @pytest.mark.parametrize("bad", [dict(n_intervals=1, mu=1.0),
                                     dict(n_intervals=5, mu=0.0)])
    def test_invalid(self, bad):
        with pytest.raises(DomainError):
            assemble_heat_1d(**bad)


class TestConvDiff:
    def test_dof_count(self):
        sys_ = assemble_convdiff_2d(32, 8, 1.0)
        segs = default_segments(32, 8)
        internal = sum(s.stop - s.start - 1 for s in segs)
        assert sys_.n_dof == 31 * 7 + internal
        assert sys_.n_inputs == 5

    def test_input_map_integrates_segments(self):
        # interior segment nodes carry (m - 1) h of the segment length m h
        mu = 0.7
        sys_ = assemble_convdiff_2d(16, 4, mu)
        h = 1 / 16
        F = sys_.input_map.toarray()
        for j, seg in enumerate(default_segments(16, 4)):
            m = seg.stop - seg.start
            assert F[:, j].sum() == pytest.approx(mu * (m - 1) * h, rel=1e-13)

    def test_pure_diffusion_is_symmetric_negative_definite(self):
        K = assemble_convdiff_2d(16, 4, 0.5, velocity=(0, 0)).stiffness.toarray()
        np.testing.assert_allclose(K, K.T, atol=1e-14)
        assert np.linalg.eigvalsh(K).max() < 0

    def test_mass_symmetric_positive_definite(self):
        M = assemble_convdiff_2d(16, 4, 0.5).mass.toarray()
        np.testing.assert_allclose(M, M.T, atol=1e-16)
        assert np.linalg.eigvalsh(M).min() > 0

    def test_convection_part_is_skew_on_interior(self):
        # int (v . grad phi_j) phi_i is skew-symmetric for functions vanishing
        # on the boundary, i.e. among interior nodes away from the segments
        K0 = assemble_convdiff_2d(16, 4, 1.0, velocity=(0, 0))
        K1 = assemble_convdiff_2d(16, 4, 1.0, velocity=(1, 1))
        C = (K0.stiffness - K1.stiffness).toarray()
        xy = K0.meta["coords"]
        inner = np.flatnonzero((xy[:, 0] > 1e-12) & (xy[:, 0] < 1 - 1e-12)
                               & (xy[:, 1] > 1e-12) & (xy[:, 1] < 0.25 - 1e-12))
        Ci = C[np.ix_(inner, inner)]
        np.testing.assert_allclose(Ci, -Ci.T, atol=1e-15)
        assert np.abs(Ci).max() > 0

    def test_non_square_elements_rejected(self):
        with pytest.raises(DomainError):
            assemble_convdiff_2d(10, 5, 1.0)

    def test_reference_mesh_width_is_not_square_on_this_domain(self):
        # width 1/75 gives 18.75 elements across the height 0.25
        with pytest.raises(DomainError):
            assemble_convdiff_2d(75, 19, 1.0)

    def test_overlapping_segments_rejected(self):
        segs = [NeumannSegment("top", 2, 6), NeumannSegment("top", 4, 8)]
        with pytest.raises(DomainError):
            assemble_convdiff_2d(16, 4, 1.0, segments=segs)

    def test_segment_outside_side(self):
        with pytest.raises(DomainError):
            assemble_convdiff_2d(16, 4, 1.0, segments=[NeumannSegment("left", 1, 9)])

    def test_bad_segment(self):
        with pytest.raises(DomainError):
            NeumannSegment("front", 0, 2)
        with pytest.raises(DomainError):
            NeumannSegment("top", 3, 3)

    def test_coarse_mesh_has_no_room_for_segments(self):
        with pytest.raises(DomainError):
            default_segments(8, 2)


class TestDiscretization:
    @pytest.fixture
    def system(self):
        return discretize(assemble_convdiff_2d(16, 4, 0.5), TimeScheme(0.5, 1e-3))

    def test_step_matches_dense_operators(self, system):
        rng = np.random.default_rng(0)
        o = system.oracle()
        A, B = o.dense_A(), o.dense_B()
        w, g = rng.standard_normal(system.n_dof), rng.standard_normal(5)
        np.testing.assert_allclose(system.step(w, g), A @ w + B @ g, atol=1e-12)

    def test_dense_a_matches_definition(self, system):
        c, s = system.continuous, system.scheme
        M, K = c.mass.toarray(), c.stiffness.toarray()
        ref = np.linalg.solve(M - 0.5 * s.dt * K, M + 0.5 * s.dt * K)
        np.testing.assert_allclose(system.oracle().dense_A(), ref, atol=1e-12)

    def test_batch_step_rowwise(self, system):
        rng = np.random.default_rng(1)
        W, G = rng.standard_normal((3, system.n_dof)), rng.standard_normal((3, 5))
        batch = system.step(W, G)
        for i in range(3):
            np.testing.assert_allclose(batch[i], system.step(W[i], G[i]), atol=1e-13)

    def test_transpose_apply(self, system):
        o = system.oracle()
        x = np.random.default_rng(2).standard_normal(system.n_dof)
        np.testing.assert_allclose(o.apply_AT(x), o.dense_A().T @ x, atol=1e-12)

    def test_singular_left_hand_side(self):
        M = sp.identity(3, format="csr")
        c = ContinuousSystem(M, M / 0.1, sp.csr_matrix(np.ones((3, 1))))
        with pytest.raises(FactorizationError):
            discretize(c, TimeScheme(1.0, 0.1))

    def test_asymmetric_mass(self):
        M = sp.csr_matrix(np.array([[1.0, 0.5], [0.0, 1.0]]))
        with pytest.raises(DomainError):
            ContinuousSystem(M, M, sp.csr_matrix(np.ones((2, 1))))

    def test_indefinite_mass(self):
        M = sp.csr_matrix(np.diag([1.0, -1.0]))
        with pytest.raises(DomainError):
            ContinuousSystem(M, M, sp.csr_matrix(np.ones((2, 1))))

    @pytest.mark.parametrize("beta,dt", [(-0.1, 0.1), (1.1, 0.1), (0.5, 0.0)])
    def test_scheme_domain(self, beta, dt):
        with pytest.raises(DomainError):
            TimeScheme(beta, dt)

    def test_blend(self):
        assert TimeScheme(0.25, 1.0).blend(4.0, 8.0) == pytest.approx(5.0)


def test_two_interval_heat_stencil():
    mu, dx = 0.3, 0.5
    S = assemble_heat_1d(2, mu)
    np.testing.assert_allclose(S.mass.toarray(), [[4 * dx / 6, dx / 6], [dx / 6, dx / 3]])
    np.testing.assert_allclose(-S.stiffness.toarray() * dx / mu, [[2, -1], [-1, 1]])
    np.testing.assert_array_equal(S.input_map.toarray(), [[0.0], [mu]])


def scalar_system(lam):
    one = sp.csr_matrix([[1.0]])
    return ContinuousSystem(one, -lam * one, one)


@pytest.mark.parametrize("beta,dt,lam", [(1.0, 0.1, 2.0), (0.5, 0.05, 3.0), (0.0, 0.2, 1.5)])
def test_scalar_system_amplification(beta, dt, lam):
    # w' = -lam w + u gives A = (1 - (1 - beta) dt lam) / (1 + beta dt lam)
    S = discretize(scalar_system(lam), TimeScheme(beta, dt))
    expected = (1 - (1 - beta) * dt * lam) / (1 + beta * dt * lam)
    assert S.oracle().dense_A()[0, 0] == pytest.approx(expected, rel=1e-14)
    assert S.oracle().dense_B()[0, 0] == pytest.approx(dt / (1 + beta * dt * lam), rel=1e-14)


def test_explicit_blend_uses_previous_input():
    assert TimeScheme(0.0, 0.1).blend(3.0, 7.0) == 3.0
