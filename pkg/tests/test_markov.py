import numpy as np
import pytest

from chainbound.errors import InvalidQuery
from chainbound.markov import (
    Box,
    FeatureSet,
    MarkovProcessSpec,
    ParameterInequality,
    ParameterLink,
    ProblemClass,
    PropertyQuery,
    QueryKind,
    QuerySense,
    classify_problem,
    restrict_to_transient,
    validate,
)
from chainbound.models import ModelArtifact


def constant_spec(n=2, lam=0.5):
    links = {
        "pi": ParameterLink("pi", np.zeros((n, 0)), np.eye(n)[0]),
        "P": ParameterLink("P", np.zeros((n * n, 0)), np.eye(n).flatten()),
        "r": ParameterLink("r", np.zeros((n, 0)), np.ones(n)),
    }
    return MarkovProcessSpec(
        n_states=n,
        m_features=1,
        query=PropertyQuery(QueryKind.TOTAL_REWARD, QuerySense.MAX),
        feature_set=FeatureSet.single_box([0.0], [1.0]),
        links=links,
        discount=lam,
    )


def modeled_spec(pi_fixed=False, p_fixed=False, r_fixed=False, n=2):
    """One shared scalar model; non-fixed targets read theta, fixed ones
    are constants."""
    model = ModelArtifact("LinearRegression", 1, W=[[0.1]], b=[0.4])
    A_pi = np.zeros((n, 1))
    b_pi = np.eye(n)[0]
    if not pi_fixed:
        A_pi[0, 0] = 1.0
        A_pi[1, 0] = -1.0
        b_pi = np.array([0.0, 1.0] + [0.0] * (n - 2))
    A_P = np.zeros((n * n, 1))
    b_P = np.eye(n).flatten()
    if not p_fixed:
        A_P[0, 0] = 1.0
        A_P[1, 0] = -1.0
        b_P[0] = 0.0
        b_P[1] = 1.0
    A_r = np.zeros((n, 1))
    b_r = np.ones(n)
    if not r_fixed:
        A_r[0, 0] = 1.0
        b_r[0] = 0.0
    return MarkovProcessSpec(
        n_states=n,
        m_features=1,
        query=PropertyQuery(QueryKind.TOTAL_REWARD, QuerySense.MAX),
        feature_set=FeatureSet.single_box([0.0], [1.0]),
        links={
            "pi": ParameterLink("pi", A_pi, b_pi),
            "P": ParameterLink("P", A_P, b_P),
            "r": ParameterLink("r", A_r, b_r),
        },
        models=[model],
        discount=0.5,
    )


class TestValidate:
    def test_constant_spec_clean(self):
        rep = validate(constant_spec())
        assert rep.is_valid
        assert len(rep) == 0

    def test_wrong_pi_arity_flagged(self):
        spec = constant_spec()
        spec.links["pi"] = ParameterLink("pi", np.zeros((3, 0)), np.array([1.0, 0, 0]))
        rep = validate(spec)
        assert not rep.is_valid
        assert any("pi" in i.where and "arity" in i.message for i in rep.errors)

    def test_overlapping_sets_flagged(self):
        spec = constant_spec(n=3)
        spec.discount = None
        spec.query = PropertyQuery(
            QueryKind.REACHABILITY, QuerySense.MAX, target_set=(1, 2), transient_set=(0, 1)
        )
        rep = validate(spec)
        assert any("overlap" in i.message for i in rep.errors)

    def test_bad_discount(self):
        spec = constant_spec(lam=1.5)
        assert any("discount" in i.where for i in validate(spec).errors)

    def test_empty_box_flagged(self):
        spec = constant_spec()
        spec.feature_set = FeatureSet((Box(np.array([1.0]), np.array([0.0])),))
        assert any("empty box" in i.message for i in validate(spec).errors)

    def test_feasibility_window_checked(self):
        spec = constant_spec()
        spec.query = PropertyQuery(
            QueryKind.TOTAL_REWARD, QuerySense.FEASIBILITY, w_min=2.0, w_max=1.0
        )
        assert any("w_min" in i.message for i in validate(spec).errors)

    def test_constant_link_violating_inequality_warns(self):
        spec = constant_spec()
        spec.ineqs = [
            ParameterInequality("r", np.ones((1, 2)), np.array([1.0]))  # sum r <= 1, but r = (1,1)
        ]
        rep = validate(spec)
        assert rep.is_valid  # warning, not error
        assert any("violates" in i.message for i in rep.issues)

    def test_absorbing_declaration_checked(self):
        spec = constant_spec()
        spec.absorbing_states = (0,)  # P row 0 is the unit row in eye(2): fine
        assert validate(spec).is_valid
        spec2 = constant_spec()
        spec2.links["P"] = ParameterLink(
            "P", np.zeros((4, 0)), np.array([0.5, 0.5, 0.0, 1.0])
        )
        spec2.absorbing_states = (0,)
        assert any("absorbing" in i.where for i in validate(spec2).errors)

    def test_restricted_ineq_needs_matching_query(self):
        spec = constant_spec()
        spec.ineqs = [ParameterInequality("Q", np.zeros((1, 4)), np.array([1.0]))]
        assert any("reachability" in i.message for i in validate(spec).errors)

    def test_model_feature_mismatch(self):
        spec = modeled_spec()
        spec.m_features = 3
        spec.feature_set = FeatureSet.single_box([0, 0, 0], [1, 1, 1])
        assert any("features" in i.message for i in validate(spec).errors)


class TestClassify:
    @pytest.mark.parametrize(
        "fixed,expected",
        [
            ((False, False, False), ProblemClass.FULL_BILINEAR),
            ((True, False, False), ProblemClass.LINEAR_OBJ_BILINEAR_CON),
            ((False, True, False), ProblemClass.BILINEAR_OBJ_LINEAR_CON),
            ((False, False, True), ProblemClass.BILINEAR_OBJ_BILINEAR_CON),
            ((True, True, False), ProblemClass.LINEAR_LINEAR),
            ((True, False, True), ProblemClass.LINEAR_OBJ_BILINEAR_CON2),
            ((False, True, True), ProblemClass.VALUE_CLOSED_FORM),
            ((True, True, True), ProblemClass.VALUE_CLOSED_FORM),
        ],
    )
    def test_table(self, fixed, expected):
        spec = modeled_spec(*fixed)
        assert classify_problem(spec) == expected

    def test_hitting_time_rhs_always_fixed(self):
        spec = modeled_spec(pi_fixed=True, p_fixed=True)
        spec.discount = None
        spec.query = PropertyQuery(
            QueryKind.HITTING_TIME, QuerySense.MAX, target_set=(1,), transient_set=(0,)
        )
        assert classify_problem(spec) == ProblemClass.VALUE_CLOSED_FORM


class TestRestriction:
    def test_block_views(self):
        n = 3
        rng = np.random.default_rng(0)
        A_P = rng.normal(size=(9, 2))
        b_P = rng.normal(size=9)
        A_pi = rng.normal(size=(3, 2))
        b_pi = rng.normal(size=3)
        spec = MarkovProcessSpec(
            n_states=n,
            m_features=2,
            query=PropertyQuery(
                QueryKind.REACHABILITY, QuerySense.MAX, target_set=(2,), transient_set=(0, 1)
            ),
            feature_set=FeatureSet.single_box([0, 0], [1, 1]),
            links={
                "pi": ParameterLink("pi", A_pi, b_pi),
                "P": ParameterLink("P", A_P, b_P),
            },
            models=[ModelArtifact("LinearRegression", 2, W=np.eye(2), b=np.zeros(2))],
        )
        views = restrict_to_transient(spec)
        theta = rng.normal(size=2)
        P_full = (A_P @ theta + b_P).reshape(3, 3)
        Q = (views.Q.A @ theta + views.Q.b).reshape(2, 2)
        R = (views.R.A @ theta + views.R.b).reshape(2, 1)
        assert Q == pytest.approx(P_full[:2, :2])
        assert R == pytest.approx(P_full[:2, 2:])
        pi_t = views.pi_tilde.A @ theta + views.pi_tilde.b
        assert pi_t == pytest.approx((A_pi @ theta + b_pi)[:2])

    def test_requires_reach_or_hit(self):
        with pytest.raises(InvalidQuery):
            restrict_to_transient(constant_spec())

    def test_empty_transient_rejected(self):
        spec = constant_spec(n=2)
        spec.discount = None
        spec.query = PropertyQuery(
            QueryKind.REACHABILITY, QuerySense.MAX, target_set=(0, 1), transient_set=()
        )
        with pytest.raises(InvalidQuery):
            restrict_to_transient(spec)
