"""Finite scenario spaces, hedging instruments, and superhedging prices.

The superhedging price of a payoff X is the least cash m such that
m + X + G(theta) >= 0 in every outcome for some admissible strategy theta,
where G collects instrument gains (payoff minus price).  It is computed as
a linear program; its dual runs over (super-)martingale measures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArbitrageError, SolverError, ValidationError
from .simplexlp import lp_solve

PROB_TOL = 1e-12

CONE = "unconstrained-cone"
NONNEG = "nonneg-quantities"
BOX = "box"


@dataclass(frozen=True)
class ProbSpace:
    """Finite outcome set with a full-support reference probability."""

    labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != probs.size:
            raise ValidationError("labels/probs length mismatch")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("duplicate outcome labels")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValidationError(f"probabilities sum to {probs.sum()}, not 1")
        if np.any(probs <= 0):
            raise ValidationError("reference probabilities must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.labels)

    @classmethod
    def uniform(cls, n: int) -> "ProbSpace":
        return cls(tuple(f"w{i}" for i in range(n)), np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Position:
    """A bounded payoff vector over the outcomes of a ProbSpace."""

    space: ProbSpace
    payoff: np.ndarray

    def __post_init__(self):
        payoff = np.asarray(self.payoff, dtype=float)
        object.__setattr__(self, "payoff", payoff)
        if payoff.shape != (self.space.n,):
            raise ValidationError("payoff length does not match the outcome count")
        if not np.all(np.isfinite(payoff)):
            raise ValidationError("payoffs must be finite")

    def __add__(self, other):
        if isinstance(other, Position):
            _same_space(self, other)
            return Position(self.space, self.payoff + other.payoff)
        return Position(self.space, self.payoff + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Position):
            _same_space(self, other)
            return Position(self.space, self.payoff - other.payoff)
        return Position(self.space, self.payoff - float(other))

    def __mul__(self, a):
        return Position(self.space, self.payoff * float(a))

    __rmul__ = __mul__

    def __neg__(self):
        return Position(self.space, -self.payoff)

    def mean(self) -> float:
        return float(self.space.probs @ self.payoff)


def _same_space(a: Position, b: Position):
    if a.space is not b.space and a.space != b.space:
        raise ValidationError("positions live on different probability spaces")


@dataclass(frozen=True)
class Measure:
    """A probability vector on the same outcomes (automatically << P)."""

    space: ProbSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.shape != (self.space.n,):
            raise ValidationError("weights length does not match the outcome count")
        if np.any(w < -1e-12):
            raise ValidationError("measure weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValidationError(f"measure weights sum to {w.sum()}, not 1")

    def expect(self, X: Position) -> float:
        return float(self.weights @ X.payoff)


@dataclass(frozen=True)
class InstrumentSet:
    """Liquid cash flows with known prices, defining hedging gains.

    Prices follow the convention ask <= E_Q[C] <= bid, so ask <= bid is
    enforced.  With a two-sided price the gains are doubled (buy leg and
    sell leg, both in nonnegative quantity).
    """

    space: ProbSpace
    names: tuple[str, ...]
    payoffs: np.ndarray  # (d, n)
    bid: np.ndarray
    ask: np.ndarray | None = None
    constraint: str = CONE
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.payoffs, dtype=float))
        object.__setattr__(self, "payoffs", P)
        bid = np.atleast_1d(np.asarray(self.bid, dtype=float))
        object.__setattr__(self, "bid", bid)
        object.__setattr__(self, "names", tuple(self.names))
        if len(set(self.names)) != len(self.names):
            raise ValidationError("duplicate instrument names")
        d = len(self.names)
        if P.shape != (d, self.space.n) or bid.shape != (d,):
            raise ValidationError("instrument payoff/price shapes do not match")
        if np.any(P < 0):
            raise ValidationError("instrument cash flows must be nonnegative")
        if self.ask is not None:
            ask = np.atleast_1d(np.asarray(self.ask, dtype=float))
            object.__setattr__(self, "ask", ask)
            if ask.shape != (d,):
                raise ValidationError("ask length mismatch")
            if np.any(ask > bid + 1e-12):
                raise ValidationError("price coherence requires ask <= bid")
            if self.constraint == CONE:
                raise ValidationError("two-sided prices require nonnegative quantities")
        if self.constraint not in (CONE, NONNEG, BOX):
            raise ValidationError(f"unknown constraint {self.constraint!r}")
        if self.constraint == BOX:
            lo = np.atleast_1d(np.asarray(self.lower, dtype=float)) if self.lower is not None else np.zeros(d)
            hi = np.atleast_1d(np.asarray(self.upper, dtype=float)) if self.upper is not None else np.full(d, np.inf)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
            if np.any(lo > 0) or np.any(hi < 0):
                raise ValidationError("box constraint must contain the zero strategy")

    @property
    def d(self) -> int:
        return len(self.names)

    def gains(self) -> tuple[np.ndarray, list[tuple[float | None, float | None]]]:
        """Gain matrix (k, n) and per-quantity bounds after bid/ask doubling."""
        if self.ask is None:
            G = self.payoffs - self.bid[:, None]
            if self.constraint == CONE:
                bounds = [(None, None)] * self.d
            elif self.constraint == NONNEG:
                bounds = [(0.0, None)] * self.d
            else:
                bounds = [
                    (float(l) if np.isfinite(l) else None, float(u) if np.isfinite(u) else None)
                    for l, u in zip(self.lower, self.upper)
                ]
            return G, bounds
        G_sell = self.payoffs - self.bid[:, None]  # sell at bid
        G_buy = self.ask[:, None] - self.payoffs  # buy at ask
        G = np.vstack([G_sell, G_buy])
        if self.constraint == BOX:
            caps = [float(u) if np.isfinite(u) else None for u in self.upper]
            bounds = [(0.0, u) for u in caps] * 2
        else:
            bounds = [(0.0, None)] * (2 * self.d)
        return G, bounds


def martingale_measures(space: ProbSpace, instruments: InstrumentSet | None) -> Measure:
    """An equivalent (super-)martingale measure, or ArbitrageError.

    Maximizes the smallest weight, so the returned measure is interior
    whenever an equivalent one exists; the arbitrage certificate is a
    strategy theta with G(theta) >= 0 and > 0 somewhere.
    """
    n = space.n
    if instruments is None or instruments.d == 0:
        return Measure(space, space.probs.copy())
    G, qbounds = instruments.gains()
    k = G.shape[0]
    # variables: q_0..q_{n-1}, t ; maximize t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq, b_eq, A_ub, b_ub = [], [], [], []
    row = np.zeros(n + 1)
    row[:n] = 1.0
    A_eq.append(row)
    b_eq.append(1.0)
    for i in range(k):
        lo, hi = qbounds[i]
        allow_pos = hi is None or hi > 0
        allow_neg = lo is None or lo < 0
        row = np.zeros(n + 1)
        row[:n] = G[i]
        if allow_pos and allow_neg:
            A_eq.append(row)
            b_eq.append(0.0)
        elif allow_pos:
            A_ub.append(row)
            b_ub.append(0.0)
        elif allow_neg:
            A_ub.append(-row)
            b_ub.append(0.0)
    for j in range(n):
        row = np.zeros(n + 1)
        row[j] = -1.0
        row[-1] = 1.0
        A_ub.append(row)
        b_ub.append(0.0)
    bounds = [(0.0, 1.0)] * n + [(None, 1.0)]
    res = lp_solve(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds)
    if res.optimal and res.x[-1] > 1e-9:
        q = np.clip(res.x[:n], 0.0, None)
        return Measure(space, q / q.sum())
    theta = _arbitrage_strategy(space, instruments)
    raise ArbitrageError("no equivalent martingale measure: prices admit arbitrage", strategy=theta)


def _arbitrage_strategy(space: ProbSpace, instruments: InstrumentSet) -> np.ndarray:
    """A strategy with nonnegative, somewhere-positive gains (Farkas side)."""
    G, qbounds = instruments.gains()
    k, n = G.shape
    BIG = 1e3
    # variables: theta (k), s (n); maximize sum s, s in [0,1], G^T theta >= s
    c = np.concatenate([np.zeros(k), -np.ones(n)])
    A_ub = np.hstack([-G.T, np.eye(n)])
    b_ub = np.zeros(n)
    tb = []
    for lo, hi in qbounds:
        lo = -BIG if lo is None else max(lo, -BIG)
        hi = BIG if hi is None else min(hi, BIG)
        tb.append((lo, hi))
    bounds = tb + [(0.0, 1.0)] * n
    res = lp_solve(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds)
    if not res.optimal or -res.fun < 1e-9:
        raise SolverError("arbitrage suspected but no separating strategy found")
    return res.x[:k]


def superhedge_price(
    X: Position, instruments: InstrumentSet | None
) -> tuple[float, np.ndarray]:
    """Minimal m with m + X + G(theta) >= 0 componentwise; returns (m, theta)."""
    n = X.space.n
    if instruments is None or instruments.d == 0:
        return float(np.max(-X.payoff)), np.zeros(0)
    martingale_measures(X.space, instruments)  # raises on arbitrage
    G, qbounds = instruments.gains()
    k = G.shape[0]
    # variables: m, theta; min m s.t. -m - G^T theta <= X
    c = np.zeros(1 + k)
    c[0] = 1.0
    A_ub = np.hstack([-np.ones((n, 1)), -G.T])
    b_ub = X.payoff.copy()
    bounds = [(None, None)] + list(qbounds)
    res = lp_solve(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds)
    if res.status == "unbounded":
        raise SolverError("superhedge LP unbounded despite arbitrage-free prices")
    if not res.optimal:
        raise SolverError(f"superhedge LP failed: {res.status}")
    return float(res.fun), res.x[1:]


def superhedge_dual_measure(X: Position, instruments: InstrumentSet | None) -> Measure:
    """The optimal dual (super-)martingale measure of the superhedge LP."""
    if instruments is None or instruments.d == 0:
        j = int(np.argmin(X.payoff))
        w = np.zeros(X.space.n)
        w[j] = 1.0
        return Measure(X.space, w)
    n = X.space.n
    G, qbounds = instruments.gains()
    k = G.shape[0]
    c = np.zeros(1 + k)
    c[0] = 1.0
    A_ub = np.hstack([-np.ones((n, 1)), -G.T])
    b_ub = X.payoff.copy()
    bounds = [(None, None)] + list(qbounds)
    res = lp_solve(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds)
    if not res.optimal:
        raise SolverError(f"superhedge LP failed: {res.status}")
    q = -res.dual_ub  # <= rows carry nonpositive duals; flip to a measure
    q = np.clip(q, 0.0, None)
    s = q.sum()
    if s <= 0:
        raise SolverError("degenerate dual in superhedge LP")
    return Measure(X.space, q / s)


def hedge_penalty(instruments: InstrumentSet | None, Q: Measure, cap: float = 1e6) -> float:
    """sup_theta E_Q[G(theta)] over admissible strategies; may be +inf.

    For cones the value is 0 on (super-)martingale measures and +inf
    otherwise; unboundedness is detected exactly via the LP status.
    """
    if instruments is None or instruments.d == 0:
        return 0.0
    G, qbounds = instruments.gains()
    g_exp = G @ Q.weights  # E_Q[G_i]
    res = lp_solve(-g_exp, bounds=qbounds)
    if res.status == "unbounded":
        return float(np.inf)
    if not res.optimal:
        raise SolverError(f"penalty LP failed: {res.status}")
    return float(-res.fun)
