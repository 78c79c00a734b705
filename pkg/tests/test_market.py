"""Finite markets: validation, martingale measures, superhedging duality."""

import numpy as np
import pytest

from convexrisk.errors import ArbitrageError, ValidationError
from convexrisk.market import (
    BOX,
    CONE,
    NONNEG,
    InstrumentSet,
    Measure,
    Position,
    ProbSpace,
    hedge_penalty,
    martingale_measures,
    superhedge_dual_measure,
    superhedge_price,
)

TWO = ProbSpace(("u", "d"), np.array([0.6, 0.4]))


def one_stock(space=TWO, bid=1.0, ask=None, constraint=CONE, **kw):
    return InstrumentSet(
        space=space,
        names=("S",),
        payoffs=np.array([[2.0, 0.0]]),
        bid=np.array([bid]),
        ask=None if ask is None else np.array([ask]),
        constraint=constraint,
        **kw,
    )


class TestValidation:
    def test_probs_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            ProbSpace(("a", "b"), np.array([0.6, 0.6]))

    def test_probs_must_be_positive(self):
        with pytest.raises(ValidationError):
            ProbSpace(("a", "b"), np.array([1.0, 0.0]))

    def test_position_length(self):
        with pytest.raises(ValidationError):
            Position(TWO, np.array([1.0]))

    def test_positions_on_different_spaces(self):
        other = ProbSpace.uniform(2)
        with pytest.raises(ValidationError):
            Position(TWO, np.zeros(2)) + Position(other, np.zeros(2))

    def test_ask_above_bid_rejected(self):
        with pytest.raises(ValidationError):
            one_stock(bid=1.0, ask=1.2, constraint=NONNEG)

    def test_two_sided_needs_nonneg_quantities(self):
        with pytest.raises(ValidationError):
            one_stock(bid=1.0, ask=0.8, constraint=CONE)

    def test_negative_cash_flow_rejected(self):
        with pytest.raises(ValidationError):
            InstrumentSet(TWO, ("B",), np.array([[-1.0, 1.0]]), np.array([0.0]))

    def test_box_must_contain_zero(self):
        with pytest.raises(ValidationError):
            one_stock(constraint=BOX, lower=np.array([1.0]), upper=np.array([2.0]))


class TestMartingale:
    def test_no_instruments_returns_reference(self):
        Q = martingale_measures(TWO, None)
        assert Q.weights == pytest.approx(TWO.probs)

    def test_two_state_unique_measure(self):
        # price 1 for payoff (2, 0) pins q = (1/2, 1/2) regardless of P
        Q = martingale_measures(TWO, one_stock())
        assert Q.weights == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_bid_ask_interval_interior_point(self):
        ins = one_stock(bid=1.2, ask=0.8, constraint=NONNEG)
        Q = martingale_measures(TWO, ins)
        # feasible set is q_u in [0.4, 0.6]; max-min-weight picks the middle
        assert Q.weights == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_arbitrage_detected_with_certificate(self):
        # payoff always 2, price 1: buying is free money
        ins = InstrumentSet(TWO, ("A",), np.array([[2.0, 2.0]]), np.array([1.0]))
        with pytest.raises(ArbitrageError) as ei:
            martingale_measures(TWO, ins)
        theta = ei.value.strategy
        G, _ = ins.gains()
        gains = G.T @ theta
        assert np.all(gains >= -1e-9) and np.max(gains) > 1e-9

    def test_one_sided_overpriced_is_fine(self):
        # can only buy at an ask above any fair value: no arbitrage either way
        ins = InstrumentSet(
            TWO, ("A",), np.array([[2.0, 0.0]]), np.array([3.0]), ask=np.array([3.0]),
            constraint=NONNEG,
        )
        with pytest.raises(ArbitrageError):
            # bid = ask = 3 > sup payoff price bound: selling at 3 is free money
            martingale_measures(TWO, ins)


class TestSuperhedge:
    def test_no_instruments_worst_case(self):
        X = Position(TWO, np.array([-1.0, 3.0]))
        m, theta = superhedge_price(X, None)
        assert m == pytest.approx(1.0)
        assert theta.size == 0

    def test_cash_position(self):
        X = Position(TWO, np.array([2.0, 2.0]))
        m, _ = superhedge_price(X, None)
        assert m == pytest.approx(-2.0)

    def test_complete_market_replication(self):
        X = Position(TWO, np.array([-1.0, 1.0]))
        m, theta = superhedge_price(X, one_stock())
        # E_Q[X] = 0 under the unique Q = (1/2, 1/2)
        assert m == pytest.approx(0.0, abs=1e-9)
        G, _ = one_stock().gains()
        assert np.all(m + X.payoff + G.T @ theta >= -1e-9)

    def test_bid_ask_superhedge_price(self):
        ins = one_stock(bid=1.2, ask=0.8, constraint=NONNEG)
        X = Position(TWO, np.array([-1.0, 0.0]))
        m, _ = superhedge_price(X, ins)
        # sup of E_Q[-X] = q_u over the feasible interval [0.4, 0.6]
        assert m == pytest.approx(0.6, abs=1e-9)
        Qd = superhedge_dual_measure(X, ins)
        assert Qd.weights == pytest.approx([0.6, 0.4], abs=1e-9)

    def test_dual_measure_attains_price(self):
        rng = np.random.default_rng(0)
        ins = one_stock()
        for _ in range(10):
            X = Position(TWO, rng.normal(size=2))
            m, _ = superhedge_price(X, ins)
            Qd = superhedge_dual_measure(X, ins)
            assert Qd.expect(-X) == pytest.approx(m, abs=1e-8)

    def test_weak_duality_on_random_markets(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            n = 4
            space = ProbSpace.uniform(n)
            payoffs = rng.uniform(0.0, 2.0, size=(2, n))
            Q0 = rng.dirichlet(np.ones(n))
            bid = payoffs @ Q0  # priced by some measure: arbitrage-free
            ins = InstrumentSet(space, ("a", "b"), payoffs, bid)
            X = Position(space, rng.normal(size=n))
            m, theta = superhedge_price(X, ins)
            Q = martingale_measures(space, ins)
            assert m >= Q.expect(-X) - 1e-8
            G, _ = ins.gains()
            assert np.all(m + X.payoff + G.T @ theta >= -1e-8)


class TestPriceProperties:
    def test_cash_invariance_exact(self):
        rng = np.random.default_rng(1)
        ins = one_stock()
        for _ in range(5):
            X = Position(TWO, rng.normal(size=2))
            c = float(rng.normal())
            m0, _ = superhedge_price(X, ins)
            m1, _ = superhedge_price(X + c, ins)
            assert m1 == pytest.approx(m0 - c, abs=1e-9)

    def test_monotone_and_convex(self):
        rng = np.random.default_rng(2)
        ins = one_stock()
        for _ in range(20):
            x = rng.normal(size=2)
            y = x + rng.uniform(0.0, 1.0, size=2)  # y >= x pointwise
            mx, _ = superhedge_price(Position(TWO, x), ins)
            my, _ = superhedge_price(Position(TWO, y), ins)
            assert mx >= my - 1e-9
            lam = rng.uniform()
            z = lam * x + (1 - lam) * rng.normal(size=2)
        for _ in range(20):
            x, y = rng.normal(size=2), rng.normal(size=2)
            lam = rng.uniform()
            mx, _ = superhedge_price(Position(TWO, x), ins)
            my, _ = superhedge_price(Position(TWO, y), ins)
            mz, _ = superhedge_price(Position(TWO, lam * x + (1 - lam) * y), ins)
            assert mz <= lam * mx + (1 - lam) * my + 1e-9

    def test_cone_homogeneity(self):
        ins = one_stock()
        X = Position(TWO, np.array([0.5, -1.5]))
        m, _ = superhedge_price(X, ins)
        m3, _ = superhedge_price(3.0 * X, ins)
        assert m3 == pytest.approx(3.0 * m, abs=1e-9)


class TestHedgePenalty:
    def test_zero_on_martingale_measure(self):
        ins = one_stock()
        assert hedge_penalty(ins, Measure(TWO, np.array([0.5, 0.5]))) == pytest.approx(0.0, abs=1e-12)

    def test_infinite_off_the_cone_dual(self):
        ins = one_stock()
        assert hedge_penalty(ins, Measure(TWO, np.array([0.8, 0.2]))) == np.inf

    def test_finite_for_box_constraints(self):
        ins = one_stock(constraint=BOX, lower=np.array([0.0]), upper=np.array([2.0]))
        # E_Q[G] = 2 q_u - 1 = 0.6; best strategy is the cap theta = 2
        assert hedge_penalty(ins, Measure(TWO, np.array([0.8, 0.2]))) == pytest.approx(1.2, abs=1e-9)

    def test_no_instruments_zero(self):
        assert hedge_penalty(None, Measure(TWO, np.array([0.3, 0.7]))) == 0.0
