"""Static risk-measure catalog: values, penalties, duality, limits, axioms."""

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar
from scipy.special import rel_entr

from convexrisk.errors import CapabilityError, NormalizationError, ValidationError
from convexrisk.gridfn import from_callable, uniform_grid
from convexrisk.market import InstrumentSet, Measure, Position, ProbSpace
from convexrisk.measures import (
    AVaR,
    CVaR,
    Dilated,
    Entropic,
    InfConv,
    MarketModified,
    SetGenerated,
    Shortfall,
    VaR,
    WorstCase,
    axiom_check,
    conservative_limit,
    dual_gap,
    evaluate,
    marginal_limit,
    penalty,
    penalty_boxed,
    subdifferential_measure,
    var_convexity_counterexample,
)

TWO = ProbSpace.uniform(2)
FOUR = ProbSpace.uniform(4)
X2 = Position(TWO, np.array([1.0, -1.0]))
X4 = Position(FOUR, np.array([-2.0, -1.0, 0.0, 1.0]))

STOCK = InstrumentSet(TWO, ("S",), np.array([[2.0, 0.0]]), np.array([1.0]))

EXP_LOSS = from_callable(lambda z: np.exp(z) - 1.0, uniform_grid(8.0, 1601))


def rand_position(rng, space, scale=2.0):
    return Position(space, rng.uniform(-scale, scale, space.n))


class TestEvaluation:
    def test_entropic_log_cosh(self):
        # gamma = 1, X = (1, -1) uniform: rho = ln cosh(1)
        assert evaluate(Entropic(1.0), X2) == pytest.approx(np.log(np.cosh(1.0)), abs=1e-12)

    def test_entropic_between_mean_and_max(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            X = rand_position(rng, FOUR)
            v = evaluate(Entropic(0.7), X)
            assert -X.mean() - 1e-12 <= v <= np.max(-X.payoff) + 1e-12

    def test_worst_case(self):
        assert evaluate(WorstCase(), X4) == pytest.approx(2.0)

    def test_var_quantile(self):
        # losses (2,1,0,-1) each with mass 1/4; eps = 0.3 picks the second
        assert evaluate(VaR(0.3), X4) == pytest.approx(1.0)
        assert evaluate(VaR(0.2), X4) == pytest.approx(2.0)

    def test_avar_exact_average(self):
        # mean of the worst half of the losses: (2 + 1)/2
        assert evaluate(AVaR(0.5), X4) == pytest.approx(1.5, abs=1e-12)

    def test_avar_fractional_segment(self):
        # lam = 0.375: (2 * 0.25 + 1 * 0.125) / 0.375
        assert evaluate(AVaR(0.375), X4) == pytest.approx(5.0 / 3.0, abs=1e-12)

    def test_cvar_matches_avar_at_atom_boundary(self):
        assert evaluate(CVaR(0.5), X4) == pytest.approx(evaluate(AVaR(0.5), X4), abs=1e-12)

    def test_avar_between_mean_and_max(self):
        rng = np.random.default_rng(3)
        for lam in (0.1, 0.5, 0.9):
            for _ in range(10):
                X = rand_position(rng, FOUR)
                v = evaluate(AVaR(lam), X)
                assert -X.mean() - 1e-9 <= v <= np.max(-X.payoff) + 1e-9

    def test_shortfall_exponential_equals_entropic(self):
        # L(z) = e^z - 1, anchor 0: the acceptance set of the entropic measure
        spec = Shortfall(EXP_LOSS, 0.0)
        X = Position(FOUR, np.array([0.5, -0.5, 1.0, -1.0]))
        assert evaluate(spec, X) == pytest.approx(evaluate(Entropic(1.0), X), abs=1e-3)

    def test_shortfall_quadratic_vs_root_finding(self):
        loss = from_callable(lambda z: np.clip(z, 0.0, None) ** 2, uniform_grid(8.0, 1601))
        spec = Shortfall(loss, 0.25)
        X = Position(FOUR, np.array([0.5, -0.5, 1.0, -1.0]))
        p, x = FOUR.probs, X.payoff

        def excess(m):
            return float(p @ np.clip(-x - m, 0.0, None) ** 2) - 0.25

        oracle = brentq(excess, -5.0, 5.0)
        assert evaluate(spec, X) == pytest.approx(oracle, abs=1e-3)

    def test_set_generated_is_superhedge(self):
        spec = SetGenerated(STOCK)
        assert evaluate(spec, X2) == pytest.approx(0.0, abs=1e-9)  # E_Q[X] under Q=(1/2,1/2)
        Y = Position(TWO, np.array([-1.0, 0.0]))
        assert evaluate(spec, Y) == pytest.approx(0.5, abs=1e-9)

    def test_dilated_entropic_identity(self):
        # gamma-dilation of Entropic(1) is Entropic(gamma), exactly
        rng = np.random.default_rng(4)
        for g in (0.25, 2.0, 7.5):
            X = rand_position(rng, FOUR)
            assert evaluate(Dilated(Entropic(1.0), g), X) == pytest.approx(
                evaluate(Entropic(g), X), abs=1e-12
            )

    def test_infconv_entropic_gammas_add(self):
        spec = InfConv(Entropic(1.0), Entropic(2.0))
        assert evaluate(spec, X2) == pytest.approx(evaluate(Entropic(3.0), X2), abs=1e-12)

    def test_infconv_worst_case_neutral(self):
        spec = InfConv(WorstCase(), Entropic(1.5))
        assert evaluate(spec, X2) == pytest.approx(evaluate(Entropic(1.5), X2), abs=1e-12)

    def test_market_modified_below_base(self):
        rng = np.random.default_rng(5)
        spec = MarketModified(Entropic(1.0), STOCK)
        for _ in range(5):
            X = rand_position(rng, TWO)
            assert evaluate(spec, X) <= evaluate(Entropic(1.0), X) + 1e-9

    def test_market_modified_vs_line_search(self):
        spec = MarketModified(Entropic(1.0), STOCK)
        X = Position(TWO, np.array([0.3, -1.2]))
        G, _ = STOCK.gains()

        def obj(t):
            return evaluate(Entropic(1.0), Position(TWO, X.payoff + G.T @ np.array([t])))

        oracle = minimize_scalar(obj, bounds=(-10.0, 10.0), method="bounded").fun
        assert evaluate(spec, X) == pytest.approx(oracle, abs=1e-6)


class TestValidationRules:
    def test_bad_parameters(self):
        with pytest.raises(ValidationError):
            Entropic(0.0)
        with pytest.raises(ValidationError):
            VaR(1.0)
        with pytest.raises(ValidationError):
            AVaR(0.0)
        with pytest.raises(ValidationError):
            Dilated(Entropic(1.0), -1.0)

    def test_nesting_cap(self):
        spec = Entropic(1.0)
        with pytest.raises(ValidationError):
            for _ in range(9):
                spec = Dilated(spec, 2.0)

    def test_decreasing_loss_rejected(self):
        bad = from_callable(lambda z: z * z, uniform_grid(2.0, 101))  # not monotone
        with pytest.raises(ValidationError):
            Shortfall(bad, 0.0)


class TestPenalty:
    def test_entropic_relative_entropy(self):
        Q = Measure(FOUR, np.array([0.4, 0.3, 0.2, 0.1]))
        for g in (0.5, 1.0, 3.0):
            oracle = g * float(np.sum(rel_entr(Q.weights, FOUR.probs)))
            assert penalty(Entropic(g), Q).value == pytest.approx(oracle, abs=1e-12)

    def test_entropic_penalty_vs_boxed_search(self):
        Q = Measure(TWO, np.array([0.7, 0.3]))
        closed = penalty(Entropic(1.0), Q).value
        boxed = penalty_boxed(Entropic(1.0), Q)
        assert boxed.value == pytest.approx(closed, abs=1e-5)

    def test_worst_case_zero(self):
        Q = Measure(FOUR, np.array([0.1, 0.2, 0.3, 0.4]))
        assert penalty(WorstCase(), Q).value == 0.0
        assert penalty_boxed(WorstCase(), Q).value == pytest.approx(0.0, abs=1e-4)

    def test_avar_indicator_form(self):
        lam = 0.5
        inside = Measure(FOUR, np.array([0.3, 0.3, 0.2, 0.2]))  # q <= p/lam = 0.5
        outside = Measure(FOUR, np.array([0.7, 0.1, 0.1, 0.1]))
        assert penalty(AVaR(lam), inside).value == pytest.approx(0.0, abs=1e-9)
        assert penalty(AVaR(lam), outside).value == np.inf

    def test_shortfall_exponential_penalty_is_entropy(self):
        spec = Shortfall(EXP_LOSS, 0.0)
        Q = Measure(FOUR, np.array([0.4, 0.3, 0.2, 0.1]))
        oracle = float(np.sum(rel_entr(Q.weights, FOUR.probs)))
        assert penalty(spec, Q).value == pytest.approx(oracle, abs=1e-3)

    def test_set_generated_penalty(self):
        spec = SetGenerated(STOCK)
        assert penalty(spec, Measure(TWO, np.array([0.5, 0.5]))).value == 0.0
        assert penalty(spec, Measure(TWO, np.array([0.9, 0.1]))).value == np.inf

    def test_dilation_scales_penalty(self):
        Q = Measure(TWO, np.array([0.7, 0.3]))
        base = penalty(Entropic(1.0), Q).value
        assert penalty(Dilated(Entropic(1.0), 4.0), Q).value == pytest.approx(4.0 * base)

    def test_market_modification_adds_hedge_penalty(self):
        spec = MarketModified(Entropic(1.0), STOCK)
        Qstar = Measure(TWO, np.array([0.5, 0.5]))
        assert penalty(spec, Qstar).value == pytest.approx(
            penalty(Entropic(1.0), Qstar).value, abs=1e-12
        )
        assert penalty(spec, Measure(TWO, np.array([0.8, 0.2]))).value == np.inf

    def test_infconv_penalties_add(self):
        Q = Measure(TWO, np.array([0.6, 0.4]))
        spec = InfConv(Entropic(1.0), Entropic(2.0))
        total = penalty(Entropic(1.0), Q).value + penalty(Entropic(2.0), Q).value
        assert penalty(spec, Q).value == pytest.approx(total, abs=1e-12)

    def test_var_penalty_unsupported(self):
        with pytest.raises(CapabilityError):
            penalty(VaR(0.1), Measure(TWO, np.array([0.5, 0.5])))


class TestDuality:
    def test_entropic_fenchel_at_gibbs(self):
        rng = np.random.default_rng(8)
        spec = Entropic(1.3)
        for _ in range(20):
            X = rand_position(rng, FOUR)
            Q = subdifferential_measure(spec, X)
            lower, gap = dual_gap(spec, X, [Q])
            assert abs(gap) <= 1e-9
            assert lower == pytest.approx(evaluate(spec, X), abs=1e-9)

    def test_gibbs_weights_two_state(self):
        Q = subdifferential_measure(Entropic(1.0), X2)
        e = np.exp([-1.0, 1.0])
        assert Q.weights == pytest.approx(e / e.sum(), abs=1e-12)  # (0.1192, 0.8808)

    def test_worst_case_dirac(self):
        Q = subdifferential_measure(WorstCase(), X4)
        assert Q.weights == pytest.approx([1.0, 0.0, 0.0, 0.0])
        assert dual_gap(WorstCase(), X4, [Q])[1] == pytest.approx(0.0, abs=1e-12)

    def test_avar_greedy_packing(self):
        Q = subdifferential_measure(AVaR(0.5), X4)
        assert Q.weights == pytest.approx([0.5, 0.5, 0.0, 0.0], abs=1e-12)
        lower, gap = dual_gap(AVaR(0.5), X4, [Q])
        assert abs(gap) <= 1e-9

    def test_set_generated_duality(self):
        spec = SetGenerated(STOCK)
        rng = np.random.default_rng(9)
        for _ in range(10):
            X = rand_position(rng, TWO)
            Q = subdifferential_measure(spec, X)
            _, gap = dual_gap(spec, X, [Q])
            assert abs(gap) <= 1e-8

    def test_weak_duality_random_measures(self):
        rng = np.random.default_rng(10)
        spec = Entropic(0.8)
        X = rand_position(rng, FOUR)
        Qs = [Measure(FOUR, rng.dirichlet(np.ones(4))) for _ in range(10)]
        lower, gap = dual_gap(spec, X, Qs)
        assert gap >= -1e-9


class TestLimits:
    def test_entropic_marginal_is_mean(self):
        assert marginal_limit(Entropic(1.0), X4) == pytest.approx(-X4.mean(), abs=1e-12)

    def test_entropic_conservative_is_worst_case(self):
        assert conservative_limit(Entropic(1.0), X4) == pytest.approx(2.0, abs=1e-12)

    def test_entropic_ladder_monotone(self):
        vals = [evaluate(Dilated(Entropic(1.0), g), X4) for g in (0.1, 0.5, 1.0, 5.0, 10.0)]
        assert np.all(np.diff(vals) <= 1e-12)

    def test_coherent_measures_fixed_by_dilation(self):
        for spec in (WorstCase(), AVaR(0.3)):
            assert marginal_limit(spec, X4) == pytest.approx(evaluate(spec, X4))
            assert conservative_limit(spec, X4) == pytest.approx(evaluate(spec, X4))

    def test_shortfall_ladder_limits(self):
        spec = Shortfall(EXP_LOSS, 0.0)  # entropic-type, rho(0) = 0
        assert marginal_limit(spec, X2) == pytest.approx(-X2.mean(), abs=1e-2)
        assert conservative_limit(spec, X2) == pytest.approx(1.0, abs=2e-2)

    def test_marginal_limit_requires_normalization(self):
        spec = Shortfall(EXP_LOSS, 1.0)  # rho(0) = ln 2 != 0
        with pytest.raises(NormalizationError):
            marginal_limit(spec, X2)

    def test_dilation_composition(self):
        spec = Dilated(Dilated(AVaR(0.4), 2.0), 3.0)
        assert evaluate(spec, X4) == pytest.approx(
            evaluate(Dilated(AVaR(0.4), 6.0), X4), abs=1e-10
        )


class TestAxioms:
    def test_entropic_report(self):
        rep = axiom_check(Entropic(1.0), FOUR, trials=200, seed=1)
        assert rep["convexity"]["passed"]
        assert rep["monotonicity"]["passed"]
        assert rep["cash_invariance"]["passed"]
        assert not rep["homogeneity"]["passed"]  # entropic is not coherent

    def test_coherent_reports(self):
        for spec in (WorstCase(), AVaR(0.5)):
            rep = axiom_check(spec, FOUR, trials=200, seed=2)
            for name in ("convexity", "monotonicity", "cash_invariance", "homogeneity"):
                assert rep[name]["passed"], (spec, name)

    def test_var_counterexample(self):
        rep = axiom_check(VaR(0.25), FOUR, trials=100, seed=3)
        assert rep["convexity_counterexample"]["violates"]

    def test_counterexample_values(self):
        space, spec, X1, Xb = var_convexity_counterexample()
        mid = 0.5 * X1 + 0.5 * Xb
        assert evaluate(spec, X1) == pytest.approx(0.0)
        assert evaluate(spec, Xb) == pytest.approx(0.0)
        assert evaluate(spec, mid) == pytest.approx(1.0)
