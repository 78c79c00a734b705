"""Inf-convolution of risk measures and optimal risk transfer.

Solves inf_F rho_A(X - F) + rho_B(F) numerically (with closed-form fast
paths), recovers the optimal structure F*, the buyer's indifference price,
and an optimality certificate: a measure lying in both subdifferentials.
F* is only defined up to a constant, so it is reported centered
(E_P[F*] = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import CapabilityError, SolverError
from .market import InstrumentSet, Measure, Position
from .measures import (
    Dilated,
    Entropic,
    InfConv,
    MarketModified,
    RiskMeasureSpec,
    WorstCase,
    _entropic_gamma,
    conservative_limit,
    evaluate,
    market_modified_value,
    penalty,
    subdifferential_measure,
)

GAP_TOL_SMOOTH = 1e-8
GAP_TOL_NONSMOOTH = 1e-5
MAX_ITER = 10_000


@dataclass(frozen=True)
class TransferProblem:
    rhoA: RiskMeasureSpec
    rhoB: RiskMeasureSpec
    XA: Position
    XB: Position
    instrumentsA: InstrumentSet | None = None
    instrumentsB: InstrumentSet | None = None


@dataclass(frozen=True)
class TransferSolution:
    F_star: Position  # centered: E_P[F*] = 0
    price: float  # buyer's indifference price pi*
    residual: float  # R_AB, the inf-convolution value
    certificate: Measure | None
    fenchel_residual_A: float | None
    fenchel_residual_B: float | None
    price_spread: float  # buyer's bid minus seller's ask for F*, >= 0


def _center(F: Position) -> Position:
    return F - F.mean()


def sandwich_check(
    rhoA: RiskMeasureSpec,
    rhoB: RiskMeasureSpec,
    space,
    trials: int = 40,
    seed: int = 7,
) -> dict:
    """Feasibility of the convolution: rho_A box rho_B(0) > -inf.

    Tests the recession condition rho_A0+(xi) + rho_B0+(-xi) >= 0 on a
    randomized corpus and hunts for a measure with both penalties finite.
    Returns a verdict dict, never raises.
    """
    ga, gb = _entropic_gamma(rhoA), _entropic_gamma(rhoB)
    if ga is not None and gb is not None:
        return {"feasible": True, "witness_measure": Measure(space, space.probs.copy()),
                "violating_position": None}
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        xi = Position(space, rng.uniform(-3, 3, space.n))
        try:
            s = conservative_limit(rhoA, xi) + conservative_limit(rhoB, -1 * xi)
        except Exception as exc:  # infeasible sub-solve also witnesses failure
            return {"feasible": False, "witness_measure": None,
                    "violating_position": xi, "detail": str(exc)}
        if s < -1e-9:
            return {"feasible": False, "witness_measure": None,
                    "violating_position": xi}
    witness = None
    candidates = [Measure(space, space.probs.copy())]
    for Q in candidates:
        try:
            if np.isfinite(penalty(rhoA, Q).value) and np.isfinite(penalty(rhoB, Q).value):
                witness = Q
                break
        except CapabilityError:
            break
    return {"feasible": True, "witness_measure": witness, "violating_position": None}


def inf_convolve_measures(
    rhoA: RiskMeasureSpec, rhoB: RiskMeasureSpec, X: Position
) -> tuple[float, Position]:
    """(rho_A box rho_B)(X) and a centered minimizer F*."""
    ga, gb = _entropic_gamma(rhoA), _entropic_gamma(rhoB)
    if ga is not None and gb is not None:
        value = evaluate(Entropic(ga + gb), X)
        F = _center(X * (gb / (ga + gb)))
        return value, F
    if isinstance(rhoB, WorstCase):
        return evaluate(rhoA, X), _center(Position(X.space, np.zeros(X.space.n)))
    if isinstance(rhoA, WorstCase):
        return evaluate(rhoB, X), _center(X)
    return _numeric_infconv(rhoA, rhoB, X)


def _subdiff_or_none(spec, X):
    try:
        return subdifferential_measure(spec, X)
    except CapabilityError:
        return None


def _numeric_infconv(rhoA, rhoB, X) -> tuple[float, Position]:
    space = X.space
    n = space.n

    def obj(fv):
        F = Position(space, fv)
        return evaluate(rhoA, X - F) + evaluate(rhoB, F)

    def grad(fv):
        F = Position(space, fv)
        qA = subdifferential_measure(rhoA, X - F)
        qB = subdifferential_measure(rhoB, F)
        return qA.weights - qB.weights

    def _smooth(spec):
        if _entropic_gamma(spec) is not None:
            return True
        return isinstance(spec, MarketModified) and _entropic_gamma(spec.base) is not None

    smooth = _smooth(rhoA) and _smooth(rhoB)
    have_grad = (
        _subdiff_or_none(rhoA, X) is not None and _subdiff_or_none(rhoB, X) is not None
    )
    starts = [np.zeros(n), 0.5 * X.payoff, X.payoff.copy()]
    best_val, best_f = np.inf, np.zeros(n)
    for s in starts:
        if smooth and have_grad:
            res = optimize.minimize(obj, s, jac=grad, method="L-BFGS-B",
                                    options={"maxiter": MAX_ITER, "ftol": 1e-14, "gtol": 1e-12})
        else:
            res = optimize.minimize(obj, s, method="Powell",
                                    options={"maxiter": MAX_ITER, "xtol": 1e-10, "ftol": 1e-12})
        if res.fun < best_val:
            best_val, best_f = float(res.fun), res.x
    if have_grad and not smooth:
        # diminishing-step subgradient polish for nonsmooth kinds
        f = best_f.copy()
        radius = 1.0 + float(np.max(np.abs(X.payoff)))
        for k in range(300):
            g = grad(f)
            gn = float(np.linalg.norm(g))
            if gn < 1e-12:
                break
            f = f - (radius / np.sqrt(k + 1.0)) * g / gn
            v = obj(f)
            if v < best_val:
                best_val, best_f = v, f.copy()
    if not np.isfinite(best_val):
        raise SolverError("inf-convolution minimization failed to find a finite value")
    return best_val, _center(Position(space, best_f))


def optimality_certificate(
    rhoA: RiskMeasureSpec, rhoB: RiskMeasureSpec, X: Position, F: Position, value: float
):
    """A measure in both subdifferentials, with Fenchel residuals.

    Residual_i = rho_i(arg) - (E_Q[-arg] - alpha_i(Q)); both vanish at an
    optimal (Q, F*) pair.  Returns (Q, resA, resB) or (None, None, None)
    when subdifferentials are unavailable for these kinds.
    """
    qA = _subdiff_or_none(rhoA, X - F)
    qB = _subdiff_or_none(rhoB, F)
    Q = qA if qA is not None else qB
    if Q is None:
        return None, None, None
    aA = penalty(rhoA, Q).value
    aB = penalty(rhoB, Q).value
    resA = evaluate(rhoA, X - F) - (Q.expect(-1 * (X - F)) - aA)
    resB = evaluate(rhoB, F) - (Q.expect(-1 * F) - aB)
    return Q, float(resA), float(resB)


def solve_transfer(problem: TransferProblem) -> TransferSolution:
    """Optimal risk transfer between two agents, possibly with market access.

    Minimizes rho_A(X_A - F) + rho_B(X_B + F) over structures F via the
    shifted variable Ftilde = F + X_B, which turns the program into the
    inf-convolution of the (market-modified) measures at X = X_A + X_B.
    """
    rhoA = (
        MarketModified(problem.rhoA, problem.instrumentsA)
        if problem.instrumentsA is not None and problem.instrumentsA.d > 0
        else problem.rhoA
    )
    rhoB = (
        MarketModified(problem.rhoB, problem.instrumentsB)
        if problem.instrumentsB is not None and problem.instrumentsB.d > 0
        else problem.rhoB
    )
    X = problem.XA + problem.XB
    value, Ft = inf_convolve_measures(rhoA, rhoB, X)
    F_star = _center(Ft - problem.XB)
    # buyer's indifference price and the seller's counterpart
    price_buy = evaluate(rhoB, problem.XB) - evaluate(rhoB, problem.XB + F_star)
    price_sell = evaluate(rhoA, problem.XA - F_star) - evaluate(rhoA, problem.XA)
    Q, resA, resB = optimality_certificate(rhoA, rhoB, X, F_star + problem.XB, value)
    return TransferSolution(
        F_star=F_star,
        price=price_buy,
        residual=value,
        certificate=Q,
        fenchel_residual_A=resA,
        fenchel_residual_B=resB,
        price_spread=float(price_buy - price_sell),
    )


def borch_closed_form(
    gammaA: float,
    gammaB: float,
    XA: Position,
    XB: Position,
    root: RiskMeasureSpec | None = None,
) -> tuple[Position, RiskMeasureSpec]:
    """Quota-share optimal structure and the dilated residual measure.

    F* = gB/(gA+gB) XA - gA/(gA+gB) XB (centered); the residual risk is
    the (gA+gB)-dilation of the root measure evaluated at XA + XB.
    """
    gC = gammaA + gammaB
    F = _center(XA * (gammaB / gC) - XB * (gammaA / gC))
    base = root if root is not None else Entropic(1.0)
    return F, Dilated(base, gC)


def acceptability_measure(
    rho_accept: RiskMeasureSpec, instruments: InstrumentSet | None, X: Position
) -> float:
    """inf over strategies theta of rho_accept(X + G(theta))."""
    return market_modified_value(rho_accept, instruments, X)[0]
