"""Static convex risk measures on finite probability spaces.

Each measure is described by an immutable spec (a small tagged union) and
evaluated by free functions: value, minimal penalty, duality gap,
subdifferential measure, dilation limits, and a randomized axiom checker.
Sign convention: positions are gains, rho(X + m) = rho(X) - m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.special import logsumexp, rel_entr

from .errors import (
    CapabilityError,
    FeasibilityError,
    NormalizationError,
    ValidationError,
)
from .gridfn import GridConvexFunction
from .market import (
    InstrumentSet,
    Measure,
    Position,
    ProbSpace,
    hedge_penalty,
    martingale_measures,
    superhedge_dual_measure,
    superhedge_price,
)
from .simplexlp import lp_solve

MAX_NESTING = 8


class RiskMeasureSpec:
    """Base tag for the risk-measure union; concrete kinds below."""

    def depth(self) -> int:
        return 1


@dataclass(frozen=True)
class Entropic(RiskMeasureSpec):
    """e_gamma(X) = gamma ln E_P[exp(-X/gamma)]."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("entropic risk tolerance must be positive")


@dataclass(frozen=True)
class WorstCase(RiskMeasureSpec):
    """rho_worst(X) = max over outcomes of -X."""


@dataclass(frozen=True)
class VaR(RiskMeasureSpec):
    """Value at risk at level eps; monetary but not convex."""

    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValidationError("VaR level must lie in (0,1)")


@dataclass(frozen=True)
class AVaR(RiskMeasureSpec):
    """Average value at risk (expected shortfall) at level lam."""

    lam: float

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValidationError("AVaR level must lie in (0,1)")


@dataclass(frozen=True)
class CVaR(RiskMeasureSpec):
    """Conditional value at risk via the inf-over-threshold program."""

    lam: float

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValidationError("CVaR level must lie in (0,1)")


@dataclass(frozen=True)
class Shortfall(RiskMeasureSpec):
    """rho(X) = inf{m : E[L(-X - m)] <= anchor} for increasing convex L."""

    loss: GridConvexFunction
    anchor: float

    def __post_init__(self):
        fv = self.loss.finite_values
        if fv.size >= 2 and np.any(np.diff(fv) < -1e-12):
            raise ValidationError("shortfall loss function must be nondecreasing")


@dataclass(frozen=True)
class SetGenerated(RiskMeasureSpec):
    """Superhedging price against a set of priced instruments."""

    instruments: InstrumentSet


@dataclass(frozen=True)
class Dilated(RiskMeasureSpec):
    """rho_gamma(X) = gamma * rho(X / gamma)."""

    base: RiskMeasureSpec
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValidationError("dilation parameter must be positive")
        _check_depth(self)

    def depth(self) -> int:
        return 1 + self.base.depth()


@dataclass(frozen=True)
class MarketModified(RiskMeasureSpec):
    """rho^m(X) = inf over strategies theta of rho(X + G(theta))."""

    base: RiskMeasureSpec
    instruments: InstrumentSet

    def __post_init__(self):
        _check_depth(self)

    def depth(self) -> int:
        return 1 + self.base.depth()


@dataclass(frozen=True)
class InfConv(RiskMeasureSpec):
    """(rho_A box rho_B)(X) = inf_F rho_A(X - F) + rho_B(F)."""

    A: RiskMeasureSpec
    B: RiskMeasureSpec

    def __post_init__(self):
        _check_depth(self)

    def depth(self) -> int:
        return 1 + max(self.A.depth(), self.B.depth())


def _check_depth(spec: RiskMeasureSpec):
    if spec.depth() > MAX_NESTING:
        raise ValidationError(f"risk-measure nesting exceeds {MAX_NESTING}")


@dataclass(frozen=True)
class PenaltyEvaluation:
    """alpha(Q) together with an optional maximizing position."""

    measure: Measure
    value: float
    attained_by: Position | None = None
    bounded: bool = True  # False when a numerical box sup hit its boundary


# ---------------------------------------------------------------------------
# evaluation


def evaluate(spec: RiskMeasureSpec, X: Position) -> float:
    """rho(X) for any spec in the catalog."""
    p, x = X.space.probs, X.payoff
    if isinstance(spec, Entropic):
        g = spec.gamma
        return g * float(logsumexp(-x / g, b=p))
    if isinstance(spec, WorstCase):
        return float(np.max(-x))
    if isinstance(spec, VaR):
        return _var(p, x, spec.eps)
    if isinstance(spec, AVaR):
        return _avar(p, x, spec.lam)
    if isinstance(spec, CVaR):
        return _cvar(p, x, spec.lam)
    if isinstance(spec, Shortfall):
        return _shortfall(spec, X)
    if isinstance(spec, SetGenerated):
        return superhedge_price(X, spec.instruments)[0]
    if isinstance(spec, Dilated):
        return spec.gamma * evaluate(spec.base, X * (1.0 / spec.gamma))
    if isinstance(spec, MarketModified):
        return market_modified_value(spec.base, spec.instruments, X)[0]
    if isinstance(spec, InfConv):
        reduced = _reduce_infconv(spec)
        if reduced is not None:
            return evaluate(reduced, X)
        from .transfer import inf_convolve_measures

        return inf_convolve_measures(spec.A, spec.B, X)[0]
    raise CapabilityError(f"unknown risk-measure kind {type(spec).__name__}")


def _reduce_infconv(spec: InfConv) -> RiskMeasureSpec | None:
    """Closed-form collapses of an inf-convolution, where recognized."""
    A, B = spec.A, spec.B
    if isinstance(A, WorstCase):
        return B  # worst case is neutral for the convolution
    if isinstance(B, WorstCase):
        return A
    ga, gb = _entropic_gamma(A), _entropic_gamma(B)
    if ga is not None and gb is not None:
        return Entropic(ga + gb)
    return None


def _entropic_gamma(spec: RiskMeasureSpec) -> float | None:
    if isinstance(spec, Entropic):
        return spec.gamma
    if isinstance(spec, Dilated):
        g = _entropic_gamma(spec.base)
        return None if g is None else spec.gamma * g
    return None


def _loss_order(p, x):
    """Losses -x sorted descending with cumulative probabilities."""
    losses = -np.asarray(x, dtype=float)
    order = np.argsort(-losses, kind="stable")
    return losses[order], np.cumsum(p[order]), order


def _var(p, x, eps):
    losses, cum, _ = _loss_order(p, x)
    j = int(np.searchsorted(cum, eps, side="right"))
    j = min(j, losses.size - 1)
    return float(losses[j])


def _avar(p, x, lam):
    # (1/lam) * integral of the piecewise-constant quantile of the loss
    losses, cum, _ = _loss_order(p, x)
    lo = np.concatenate([[0.0], cum[:-1]])
    seg = np.clip(np.minimum(cum, lam) - lo, 0.0, None)
    return float(losses @ seg) / lam


def _cvar(p, x, lam):
    # inf over K of E[(X - K)^- / lam] - K, attained at a quantile of X
    K = np.unique(x)
    vals = (np.clip(K[None, :] - x[:, None], 0.0, None).T @ p) / lam - K
    return float(vals.min())


def _shortfall(spec: Shortfall, X: Position, tol=1e-10):
    p, x = X.space.probs, X.payoff
    L, l0 = spec.loss, spec.anchor

    def excess(m):
        vals = np.array([L(v) for v in -x - m])
        if np.any(np.isinf(vals)):
            return np.inf
        return float(p @ vals) - l0

    span = float(np.max(x) - np.min(x)) + 1.0
    lo = float(-np.max(x) - span)
    hi = float(-np.min(x) + span)
    if excess(hi) > 0:
        raise FeasibilityError("shortfall anchor unattainable on the bracket")
    if excess(lo) <= 0:
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return hi


def market_modified_value(
    base: RiskMeasureSpec, instruments: InstrumentSet | None, X: Position
) -> tuple[float, np.ndarray]:
    """inf over admissible theta of rho_base(X + G(theta)), with argmin."""
    if instruments is None or instruments.d == 0:
        return evaluate(base, X), np.zeros(0)
    if isinstance(base, WorstCase):
        return superhedge_price(X, instruments)
    martingale_measures(X.space, instruments)  # arbitrage guard
    G, qbounds = instruments.gains()
    k = G.shape[0]
    big = 100.0 * (1.0 + float(np.max(np.abs(X.payoff))))
    bounds = [
        (lo if lo is not None else -big, hi if hi is not None else big)
        for lo, hi in qbounds
    ]

    def obj(theta):
        return evaluate(base, Position(X.space, X.payoff + G.T @ theta))

    best_val, best_th = obj(np.zeros(k)), np.zeros(k)
    if _entropic_gamma(base) is not None:
        # smooth base: d/dtheta rho(X + G^T theta) = -G q at the Gibbs measure
        def jac(theta):
            q = subdifferential_measure(base, Position(X.space, X.payoff + G.T @ theta))
            return -G @ q.weights

        res = optimize.minimize(
            obj, np.zeros(k), jac=jac, method="L-BFGS-B", bounds=bounds,
            options={"ftol": 1e-14, "gtol": 1e-12},
        )
        if res.fun < best_val:
            best_val, best_th = float(res.fun), res.x
        return best_val, best_th
    rng = np.random.default_rng(0)
    starts = [np.zeros(k)] + [rng.uniform(-1, 1, k) for _ in range(2)]
    for s in starts:
        s = np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds])
        res = optimize.minimize(obj, s, method="Powell", bounds=bounds)
        if res.fun < best_val:
            best_val, best_th = float(res.fun), res.x
    return best_val, best_th


# ---------------------------------------------------------------------------
# penalties and duality


def penalty(spec: RiskMeasureSpec, Q: Measure) -> PenaltyEvaluation:
    """Minimal penalty alpha(Q) = sup_X { E_Q[-X] - rho(X) }."""
    p, q = Q.space.probs, Q.weights
    if isinstance(spec, Entropic):
        val = spec.gamma * float(np.sum(rel_entr(q, p)))
        # attained in the limit by X = -gamma ln(q/p) where q > 0
        return PenaltyEvaluation(Q, val)
    if isinstance(spec, WorstCase):
        return PenaltyEvaluation(Q, 0.0)
    if isinstance(spec, (AVaR, CVaR)):
        lam = spec.lam
        return _avar_penalty_lp(Q, lam)
    if isinstance(spec, Shortfall):
        return PenaltyEvaluation(Q, _shortfall_penalty(spec, Q))
    if isinstance(spec, SetGenerated):
        return PenaltyEvaluation(Q, hedge_penalty(spec.instruments, Q))
    if isinstance(spec, Dilated):
        base = penalty(spec.base, Q)
        return PenaltyEvaluation(Q, spec.gamma * base.value, bounded=base.bounded)
    if isinstance(spec, MarketModified):
        base = penalty(spec.base, Q)
        extra = hedge_penalty(spec.instruments, Q)
        return PenaltyEvaluation(Q, base.value + extra, bounded=base.bounded)
    if isinstance(spec, InfConv):
        a, b = penalty(spec.A, Q), penalty(spec.B, Q)
        return PenaltyEvaluation(Q, a.value + b.value, bounded=a.bounded and b.bounded)
    if isinstance(spec, VaR):
        raise CapabilityError("VaR is not convex; its minimal penalty is not defined")
    raise CapabilityError(f"no penalty rule for {type(spec).__name__}")


def _avar_penalty_lp(Q: Measure, lam: float, box: float = 16.0) -> PenaltyEvaluation:
    """sup_X { E_Q[-X] - AVaR(X) } as an LP on a box; +inf when the box binds.

    Uses AVaR(X) = min_K { -K + E_P[(K - X)^+] / lam }: maximize over
    (X, K, u) with u >= K - X, u >= 0.
    """
    p, q = Q.space.probs, Q.weights
    n = Q.space.n
    # variables: X (n), K, u (n); max -q.X + K - p.u / lam
    c = np.concatenate([q, [-1.0], p / lam])
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1)), -np.eye(n)])
    b_ub = np.zeros(n)
    bounds = [(-box, box)] * n + [(-box, box)] + [(0.0, None)] * n
    res = lp_solve(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds)
    val = -res.fun
    x = res.x[:n]
    hit = np.any(np.abs(np.abs(x) - box) < 1e-7) or abs(abs(res.x[n]) - box) < 1e-7
    if hit and val > 1e-9:
        return PenaltyEvaluation(Q, np.inf, bounded=False)
    return PenaltyEvaluation(Q, max(val, 0.0), attained_by=Position(Q.space, x))


def _shortfall_penalty(spec: Shortfall, Q: Measure) -> float:
    """inf over lam > 0 of (anchor + E_P[L*(lam dQ/dP)]) / lam."""
    p, q = Q.space.probs, Q.weights
    ratios = q / p
    L = spec.loss
    slo, shi = L.boundary_slopes()
    zg, vg = L.finite_grid, L.finite_values

    def conj(y):
        # classical conjugate L*(y) = sup_z (y z - L(z)), exact on the
        # piecewise-linear interpolant; +inf beyond the boundary slopes
        if y > shi + 1e-12 or y < slo - 1e-12:
            return np.inf
        return float(np.max(y * zg - vg))

    def obj(loglam):
        lam = np.exp(loglam)
        vals = np.array([conj(v) for v in lam * ratios])
        if np.any(np.isinf(vals)):
            return np.inf
        return (spec.anchor + float(p @ vals)) / lam

    grid = np.linspace(-8, 8, 161)
    vals = np.array([obj(t) for t in grid])
    j = int(np.argmin(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = optimize.minimize_scalar(obj, bounds=(lo, hi), method="bounded")
    return float(min(res.fun, vals[j]))


def penalty_boxed(
    spec: RiskMeasureSpec, Q: Measure, box: float = 16.0, restarts: int = 4
) -> PenaltyEvaluation:
    """Numerical sup of E_Q[-X] - rho(X) over the box [-box, box]^n.

    A diagnostic cross-check for the closed forms; an active box bound
    demotes the value to the +inf sentinel rather than a silent number.
    """
    n = Q.space.n

    def neg_obj(xv):
        X = Position(Q.space, xv)
        return -(float(Q.weights @ -xv) - evaluate(spec, X))

    rng = np.random.default_rng(0)
    best, best_x = -np.inf, np.zeros(n)
    for i in range(restarts):
        x0 = np.zeros(n) if i == 0 else rng.uniform(-box / 2, box / 2, n)
        res = optimize.minimize(
            neg_obj, x0, method="Powell", bounds=[(-box, box)] * n
        )
        if -res.fun > best:
            best, best_x = -float(res.fun), res.x
    if np.any(np.abs(np.abs(best_x) - box) < 1e-6 * box) and best > 1e-9:
        return PenaltyEvaluation(Q, np.inf, bounded=False)
    return PenaltyEvaluation(Q, best, attained_by=Position(Q.space, best_x))


def dual_gap(
    spec: RiskMeasureSpec, X: Position, measures: list[Measure]
) -> tuple[float, float]:
    """(sup_Q E_Q[-X] - alpha(Q) over the given Q's, rho(X) minus that)."""
    if not measures:
        raise ValidationError("dual_gap needs at least one candidate measure")
    lower = -np.inf
    for Q in measures:
        a = penalty(spec, Q).value
        if np.isfinite(a):
            lower = max(lower, Q.expect(-1 * X) - a)
    return lower, evaluate(spec, X) - lower


def subdifferential_measure(spec: RiskMeasureSpec, X: Position) -> Measure:
    """A measure attaining rho(X) = E_Q[-X] - alpha(Q)."""
    p, x = X.space.probs, X.payoff
    if isinstance(spec, Entropic):
        logw = np.log(p) - x / spec.gamma
        logw -= logsumexp(logw)
        return Measure(X.space, np.exp(logw))
    if isinstance(spec, WorstCase):
        w = np.zeros(x.size)
        w[int(np.argmin(x))] = 1.0
        return Measure(X.space, w)
    if isinstance(spec, (AVaR, CVaR)):
        lam = spec.lam
        order = np.argsort(x, kind="stable")  # increasing X = decreasing loss
        w = np.zeros(x.size)
        remaining = 1.0
        for i in order:
            w[i] = min(p[i] / lam, remaining)
            remaining -= w[i]
            if remaining <= 0:
                break
        return Measure(X.space, w)
    if isinstance(spec, SetGenerated):
        return superhedge_dual_measure(X, spec.instruments)
    if isinstance(spec, Dilated):
        return subdifferential_measure(spec.base, X * (1.0 / spec.gamma))
    if isinstance(spec, MarketModified):
        # at the optimal hedge, the subdifferential of the modified measure
        # is that of the base measure at the hedged position
        _, theta = market_modified_value(spec.base, spec.instruments, X)
        G, _ = spec.instruments.gains()
        hedged = Position(X.space, X.payoff + G.T @ theta)
        return subdifferential_measure(spec.base, hedged)
    raise CapabilityError(
        f"subdifferential not implemented for {type(spec).__name__}"
    )


# ---------------------------------------------------------------------------
# dilation limits


_HOMOGENEOUS = (WorstCase, VaR, AVaR, CVaR)


def _is_coherent(spec: RiskMeasureSpec) -> bool:
    if isinstance(spec, _HOMOGENEOUS):
        return True
    if isinstance(spec, SetGenerated):
        return spec.instruments.constraint != "box"
    if isinstance(spec, Dilated):
        return _is_coherent(spec.base)
    return False


def marginal_limit(spec: RiskMeasureSpec, X: Position) -> float:
    """lim gamma -> inf of the gamma-dilated value (the marginal measure)."""
    zero = Position(X.space, np.zeros(X.space.n))
    if abs(evaluate(spec, zero)) > 1e-9:
        raise NormalizationError("marginal limit requires rho(0) = 0")
    if isinstance(spec, Entropic):
        return float(X.space.probs @ -X.payoff)
    if _is_coherent(spec):
        return evaluate(spec, X)
    ladder = [evaluate(Dilated(spec, g), X) for g in (1.0, 10.0, 100.0, 1000.0)]
    if np.any(np.diff(ladder) > 1e-7):
        raise ValidationError("dilation ladder failed to decrease monotonically")
    return ladder[-1]


def conservative_limit(spec: RiskMeasureSpec, X: Position) -> float:
    """lim gamma -> 0+ of (rho_gamma(X) - gamma rho(0)): the super price."""
    zero = Position(X.space, np.zeros(X.space.n))
    rho0 = evaluate(spec, zero)
    if isinstance(spec, Entropic):
        return float(np.max(-X.payoff))
    if _is_coherent(spec):
        return evaluate(spec, X)
    ladder = [
        evaluate(Dilated(spec, g), X) - g * rho0 for g in (1.0, 0.1, 0.01, 0.001)
    ]
    if np.any(np.diff(ladder) < -1e-7):
        raise ValidationError("dilation ladder failed to increase monotonically")
    return ladder[-1]


# ---------------------------------------------------------------------------
# axiom checking


def var_convexity_counterexample() -> tuple[ProbSpace, VaR, Position, Position]:
    """Two positions whose midpoint mix strictly violates VaR convexity."""
    space = ProbSpace.uniform(4)
    spec = VaR(0.25)
    X1 = Position(space, np.array([-2.0, 0.0, 0.0, 0.0]))
    X2 = Position(space, np.array([0.0, -2.0, 0.0, 0.0]))
    return space, spec, X1, X2


def axiom_check(
    spec: RiskMeasureSpec, space: ProbSpace, trials: int = 100, seed: int = 42
) -> dict:
    """Randomized test of convexity, monotonicity, cash invariance, homogeneity.

    Reports the maximal observed violation per axiom; a negative or tiny
    number means the axiom held on every sampled triple.
    """
    rng = np.random.default_rng(seed)
    viol = {"convexity": 0.0, "monotonicity": 0.0, "cash_invariance": 0.0, "homogeneity": 0.0}
    example = {}
    for _ in range(trials):
        x = rng.uniform(-3, 3, space.n)
        y = rng.uniform(-3, 3, space.n)
        X, Y = Position(space, x), Position(space, y)
        t = float(rng.uniform(0.05, 0.95))
        rx, ry = evaluate(spec, X), evaluate(spec, Y)
        v = evaluate(spec, t * X + (1 - t) * Y) - (t * rx + (1 - t) * ry)
        if v > viol["convexity"]:
            viol["convexity"] = v
            example["convexity"] = (x, y, t)
        Z = Position(space, x + rng.uniform(0, 2, space.n))  # Z >= X
        v = evaluate(spec, Z) - rx  # monotone: rho(Z) <= rho(X)
        viol["monotonicity"] = max(viol["monotonicity"], v)
        m = float(rng.uniform(-2, 2))
        v = abs(evaluate(spec, X + m) - (rx - m))
        viol["cash_invariance"] = max(viol["cash_invariance"], v)
        lam = float(rng.uniform(0.2, 4.0))
        v = abs(evaluate(spec, lam * X) - lam * rx)
        viol["homogeneity"] = max(viol["homogeneity"], v)
    report = {
        name: {"max_violation": val, "passed": val <= 1e-7}
        for name, val in viol.items()
    }
    if isinstance(spec, VaR):
        _, vspec, X1, X2 = var_convexity_counterexample()
        mid = 0.5 * X1 + 0.5 * X2
        gap = evaluate(vspec, mid) - 0.5 * (evaluate(vspec, X1) + evaluate(vspec, X2))
        report["convexity_counterexample"] = {"violation": gap, "violates": gap > 1e-9}
    report["counterexamples"] = {k: v for k, v in example.items()}
    return report
