import numpy as np
import pytest

from fairshard import fairness, oracle, postprocess
from fairshard.errors import MissingEntryError
from fairshard.postprocess import DerivedPredictorTable, LossMatrix

from helpers import random_joint, random_table
from test_postprocess import fair_perfect_joint, independent_joint

ZERO_ONE = LossMatrix.zero_one()


class TestEnumeration:
    def test_vertex_count_bound_single_constituent(self):
        vertex_set = oracle.enumerate_vertices(fair_perfect_joint(), ZERO_ONE)
        bound = 6 * 4 + 4 * 8 + 16  # C(4,2)*2^2 + C(4,1)*2^3 + 2^4
        assert vertex_set.bases_examined == bound

    def test_all_vertices_satisfy_parity_rows(self):
        joint = random_joint(np.random.default_rng(0), 1)
        problem = postprocess.build_hps_lp(joint, ZERO_ONE)
        vertex_set = oracle.enumerate_vertices(joint, ZERO_ONE)
        residuals = vertex_set.vertices @ problem.eq_rows.T
        assert np.abs(residuals).max() <= 1e-9 + 1e-12

    def test_scale_cap(self):
        with pytest.raises(ValueError):
            oracle.enumerate_vertices(random_joint(np.random.default_rng(1), 4), ZERO_ONE)


class TestOracleOptimal:
    def test_fair_perfect_joint(self):
        table, objective = oracle.oracle_optimal(fair_perfect_joint(), ZERO_ONE)
        assert objective == pytest.approx(0.0, abs=1e-12)
        vertex_set = oracle.enumerate_vertices(fair_perfect_joint(), ZERO_ONE)
        identity = np.array([0.0, 0.0, 1.0, 1.0])
        hits = np.abs(vertex_set.vertices - identity).max(axis=1) <= 1e-9
        assert (vertex_set.objectives[hits] <= 1e-12).any()

    def test_independent_attribute_leaves_constraints_inactive(self):
        # groups statistically identical -> oracle optimum equals the
        # unconstrained optimum of the box problem
        joint = independent_joint(pi=0.3, q=0.6)
        problem = postprocess.build_hps_lp(joint, ZERO_ONE)
        unconstrained = problem.objective_constant + np.minimum(problem.objective, 0.0).sum()
        _, objective = oracle.oracle_optimal(joint, ZERO_ONE)
        assert objective == pytest.approx(unconstrained, abs=1e-12)

    def test_agrees_with_simplex_on_random_joints(self):
        rng = np.random.default_rng(2)
        for trial in range(12):
            s = 1 + trial % 3
            joint = random_joint(rng, s)
            _, lp_objective = postprocess.solve_lp(postprocess.build_ensemble_lp(joint, ZERO_ONE))
            _, oracle_objective = oracle.oracle_optimal(joint, ZERO_ONE)
            assert abs(lp_objective - oracle_objective) <= 1e-9

    def test_bounds_any_feasible_table(self):
        rng = np.random.default_rng(3)
        joint = random_joint(rng, 2)
        _, best = oracle.oracle_optimal(joint, ZERO_ONE)
        result = postprocess.strategy_ensemble_pp(joint, ZERO_ONE)
        assert best <= result.metrics.expected_loss + 1e-9

    def test_respects_general_loss(self):
        rng = np.random.default_rng(4)
        loss = LossMatrix(((0.0, 2.0), (0.5, 0.0)))
        joint = random_joint(rng, 2)
        _, lp_objective = postprocess.solve_lp(postprocess.build_ensemble_lp(joint, loss))
        _, oracle_objective = oracle.oracle_optimal(joint, loss)
        assert abs(lp_objective - oracle_objective) <= 1e-9


class TestOracleExpectedLoss:
    def test_identity_on_perfect_predictor(self):
        table = DerivedPredictorTable(1, np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert oracle.oracle_expected_loss(table, fair_perfect_joint(), ZERO_ONE) == 0.0

    def test_coin_on_balanced_labels(self):
        joint = independent_joint(pi=0.5, q=0.5)
        table = DerivedPredictorTable(1, np.full((2, 2), 0.5))
        assert oracle.oracle_expected_loss(table, joint, ZERO_ONE) == pytest.approx(0.5, abs=1e-15)

    def test_matches_expected_metrics(self):
        rng = np.random.default_rng(5)
        for s in (1, 2, 3):
            joint = random_joint(rng, s)
            table = random_table(rng, s)
            via_oracle = oracle.oracle_expected_loss(table, joint, ZERO_ONE)
            via_metrics = fairness.expected_metrics(table, joint, ZERO_ONE).expected_loss
            assert abs(via_oracle - via_metrics) <= 1e-12

    def test_incomplete_table_rejected(self):
        table = DerivedPredictorTable(1, np.array([[0.5, np.nan], [0.5, 0.5]]))
        with pytest.raises(MissingEntryError):
            oracle.oracle_expected_loss(table, fair_perfect_joint(), ZERO_ONE)
