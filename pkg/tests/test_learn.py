import warnings

import numpy as np
import pytest
from sklearn.base import clone

from certrom.exceptions import (InsufficientData, ModelMismatch,
                                ModelMismatchWarning, NotFittedError,
                                RankDeficient)
from certrom.learn import (OperatorInference, ResidualNormInference,
                           build_residual_data, design_excitation,
                           infer_operators, infer_residual_operators,
                           reproject_sample, residual_unknowns)
from certrom.queryable import QueryableSystem
from certrom.reduction import intrusive_project

from conftest import random_basis, random_stable_system


def training_data(system, basis, seed, K=40):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((K, system.n_inputs))
    return reproject_sample(system, basis, rng.standard_normal(system.n_dof), G)


class TestReprojection:
    def test_matches_intrusive_recursion(self):
        S = random_stable_system(0, 10, 2)
        basis = random_basis(0, 10, 3)
        data = training_data(S, basis, 1, K=20)
        A, B, V = S.oracle().dense_A(), S.oracle().dense_B(), basis.V
        w = data.reduced_states[0]
        for k in range(20):
            full = A @ V @ w + B @ data.inputs[k]
            w = V.T @ full
            np.testing.assert_allclose(data.reduced_states[k + 1], w, atol=1e-12)
            np.testing.assert_allclose(data.residuals[k], full - V @ w, atol=1e-12)
        np.testing.assert_allclose(data.residual_norms_sq,
                                   (data.residuals ** 2).sum(axis=1))

    def test_residual_orthogonal_to_basis(self):
        S = random_stable_system(1, 9, 1)
        basis = random_basis(1, 9, 4)
        data = training_data(S, basis, 2, K=10)
        np.testing.assert_allclose(data.residuals @ basis.V, 0.0, atol=1e-13)

    def test_residuals_can_be_dropped(self):
        S = random_stable_system(1, 9, 1)
        data = reproject_sample(S, random_basis(1, 9, 2), np.ones(9),
                                np.ones((3, 1)), keep_residuals=False)
        assert data.residuals is None and data.residual_norms_sq.shape == (3,)


class TestOperatorInference:
    def test_recovers_galerkin_operators(self):
        S = random_stable_system(3, 12, 2)
        basis = random_basis(3, 12, 4)
        rom = infer_operators(training_data(S, basis, 4))
        ref = intrusive_project(S.oracle(), basis)
        np.testing.assert_allclose(rom.A_r, ref.A_r, atol=1e-11)
        np.testing.assert_allclose(rom.B_r, ref.B_r, atol=1e-11)

    def test_zero_input_data_is_rank_deficient(self):
        S = random_stable_system(5, 8, 2)
        basis = random_basis(5, 8, 3)
        data = reproject_sample(S, basis, np.ones(8), np.zeros((30, 2)))
        with pytest.raises(RankDeficient) as info:
            infer_operators(data)
        assert info.value.expected == 5
        assert info.value.directions.shape[1] == 5
        assert "design_excitation" in str(info.value)

    def test_excitation_restores_rank(self):
        S = random_stable_system(5, 8, 2)
        basis = random_basis(5, 8, 3)
        base = reproject_sample(S, basis, np.ones(8), np.zeros((30, 2)))
        extra = [reproject_sample(S, basis, w0, g)
                 for w0, g in design_excitation(basis, 2)]
        rom = infer_operators([base] + extra)
        ref = intrusive_project(S.oracle(), basis)
        np.testing.assert_allclose(rom.A_r, ref.A_r, atol=1e-12)
        np.testing.assert_allclose(rom.B_r, ref.B_r, atol=1e-12)

    def test_excitation_rows_are_identity(self):
        basis = random_basis(0, 6, 2)
        pairs = design_excitation(basis, 3)
        rows = [np.concatenate([basis.V.T @ w0, g[0]]) for w0, g in pairs]
        np.testing.assert_allclose(rows, np.eye(5), atol=1e-14)

    def test_estimator(self):
        S = random_stable_system(6, 10, 1)
        basis = random_basis(6, 10, 2)
        data = training_data(S, basis, 6)
        est = clone(OperatorInference()).fit(data)
        ref = intrusive_project(S.oracle(), basis)
        np.testing.assert_allclose(est.A_, ref.A_r, atol=1e-11)
        pred = est.predict(data.reduced_states[0], data.inputs)
        assert pred.shape == (41, 2)

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            OperatorInference().predict(np.zeros(2), np.zeros((1, 1)))


def test_residual_unknowns():
    assert residual_unknowns(8, 1) == 45
    assert residual_unknowns(2, 3) == 15


class TestResidualOperators:
    def setup_method(self):
        self.S = random_stable_system(7, 14, 2)
        self.basis = random_basis(7, 14, 3)
        self.data = [training_data(self.S, self.basis, s, K=30) for s in range(2)]
        self.rom = infer_operators(self.data)

    def test_recovers_intrusive_quadratic_forms(self):
        ops = ResidualNormInference().fit(self.data, self.rom).ops_
        A, B, V = self.S.oracle().dense_A(), self.S.oracle().dense_B(), self.basis.V
        AV = A @ V
        np.testing.assert_allclose(ops.M1, AV.T @ AV, atol=1e-9)
        np.testing.assert_allclose(ops.M2, B.T @ B, atol=1e-9)
        np.testing.assert_allclose(ops.M3, B.T @ AV, atol=1e-9)
        assert ops.objective <= 1e-10

    def test_compact_operators_are_projected_forms(self):
        ops = ResidualNormInference().fit(self.data, self.rom).ops_
        A, B, V = self.S.oracle().dense_A(), self.S.oracle().dense_B(), self.basis.V
        Z = np.hstack([A @ V, B])
        P = Z.T @ (Z - V @ (V.T @ Z))
        n = 3
        assert ops.has_compact
        np.testing.assert_allclose(ops.P1, P[:n, :n], atol=1e-9)
        np.testing.assert_allclose(ops.P2, P[n:, n:], atol=1e-9)
        np.testing.assert_allclose(ops.P3, P[n:, :n], atol=1e-9)

    def test_insufficient_rows(self):
        short = training_data(self.S, self.basis, 9, K=5)
        with pytest.raises(InsufficientData):
            build_residual_data(short, self.rom, np.eye(3))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            from certrom._validation import check_is_fitted
            check_is_fitted(ResidualNormInference(), "ops_")

    def test_rhs_includes_input_cross_term(self):
        # D o = f with the true operators, which fails if any term of f is dropped
        A, B, V = self.S.oracle().dense_A(), self.S.oracle().dense_B(), self.basis.V
        AV = A @ V
        D, f = build_residual_data(self.data, self.rom, np.eye(3))
        from certrom.numerics import vech
        o = np.concatenate([vech(AV.T @ AV), vech(B.T @ B),
                            (B.T @ AV).ravel(order="F")])
        np.testing.assert_allclose(D @ o, f, atol=1e-9 * max(1, np.abs(f).max()))


class Quadratic(QueryableSystem):
    """A nonlinear map that LTI models cannot reproduce."""

    def __init__(self, N, p):
        self.n_dof, self.n_inputs = N, p

    def step(self, state, g):
        return 0.5 * state + 0.3 * state ** 2 + np.sum(g) * 0.1


def test_nonlinear_data_flagged():
    S = Quadratic(6, 1)
    basis = random_basis(2, 6, 2)
    data = [training_data(S, basis, s, K=20) for s in range(3)]
    rom = infer_operators(data)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            ResidualNormInference().fit(data, rom)
        except ModelMismatch:
            return
    assert any(issubclass(w.category, ModelMismatchWarning) for w in caught)


def test_indefinite_m1_rejected():
    # D = I with f chosen so that the first unknown (M1[0, 0]) is negative
    n, p = 1, 1
    D = np.eye(3)
    with pytest.raises(ModelMismatch):
        infer_residual_operators(D, np.array([-1.0, 1.0, 0.0]), n, p)


def identity_basis(N):
    from certrom.reduction import PodBasis
    return PodBasis(np.eye(N), np.ones(N))


def test_identity_basis_reprojection_is_simulation():
    from certrom.queryable import simulate
    S = random_stable_system(8, 5, 2)
    G = np.random.default_rng(8).standard_normal((7, 2))
    data = reproject_sample(S, identity_basis(5), np.ones(5), G)
    np.testing.assert_allclose(data.reduced_states, simulate(S, np.ones(5), G).states,
                               atol=1e-14)
    np.testing.assert_allclose(data.residual_norms_sq, 0.0, atol=1e-28)


def test_identity_basis_recovers_full_operators():
    S = random_stable_system(9, 4, 1)
    data = training_data(S, identity_basis(4), 9, K=20)
    rom = infer_operators(data)
    o = S.oracle()
    assert np.linalg.norm(rom.A_r - o.dense_A()) <= 1e-10 * np.linalg.norm(o.dense_A())
    assert np.linalg.norm(rom.B_r - o.dense_B()) <= 1e-10 * np.linalg.norm(o.dense_B())


def test_six_by_six_recovery():
    S = random_stable_system(10, 6, 1)
    basis = random_basis(10, 6, 2)
    rom = infer_operators(training_data(S, basis, 10, K=20))
    ref = intrusive_project(S.oracle(), basis)
    assert np.linalg.norm(rom.A_r - ref.A_r) <= 1e-9 * np.linalg.norm(ref.A_r)
    assert np.linalg.norm(rom.B_r - ref.B_r) <= 1e-9 * np.linalg.norm(ref.B_r)


def test_too_few_rows_rank_deficient():
    S = random_stable_system(11, 6, 1)
    with pytest.raises(RankDeficient):
        infer_operators(training_data(S, random_basis(11, 6, 2), 11, K=2))


def test_excitation_without_basis_vectors():
    from certrom.reduction import PodBasis
    pairs = design_excitation(PodBasis(np.zeros((4, 0)), np.zeros(0)), 2)
    assert len(pairs) == 2
    np.testing.assert_array_equal([g[0] for _, g in pairs], np.eye(2))


def test_zero_trajectory_gives_zero_rows():
    S = random_stable_system(12, 5, 1)
    basis = random_basis(12, 5, 2)
    data = reproject_sample(S, basis, np.zeros(5), np.zeros((8, 1)))
    rom = intrusive_project(S.oracle(), basis)
    D, f = build_residual_data(data, rom, np.eye(2))
    assert not D.any() and not f.any()


def test_residual_operators_small_system():
    S = random_stable_system(13, 4, 1)
    basis = random_basis(13, 4, 2)
    data = training_data(S, basis, 13, K=10)
    ops = ResidualNormInference().fit(data, infer_operators(data)).ops_
    o = S.oracle()
    AV, B = o.dense_A() @ basis.V, o.dense_B()
    for got, ref in ((ops.M1, AV.T @ AV), (ops.M2, B.T @ B), (ops.M3, B.T @ AV)):
        assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)


def test_zero_input_map_gives_zero_input_operators():
    from certrom.queryable import DenseLTI
    A = random_stable_system(14, 3, 1).oracle().dense_A()
    S = DenseLTI(A, np.zeros((3, 1)))
    basis = identity_basis(3)
    rng = np.random.default_rng(14)
    data = [reproject_sample(S, basis, rng.standard_normal(3),
                             rng.standard_normal((12, 1))) for _ in range(2)]
    rom = intrusive_project(S.oracle(), basis)
    ops = ResidualNormInference().fit(data, rom).ops_
    np.testing.assert_allclose(ops.M1, A.T @ A, atol=1e-10)
    np.testing.assert_allclose(ops.M2, 0.0, atol=1e-10)
    np.testing.assert_allclose(ops.M3, 0.0, atol=1e-10)
