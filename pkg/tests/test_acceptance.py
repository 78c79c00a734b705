"""Acceptance gate: end-to-end numerical criteria with pinned tolerances.

Each test prints a single PASS/FAIL line (bypassing capture) so the run
log shows one verdict per criterion.
"""

import itertools
import json
import sys
import time

import numpy as np
import pytest

from convexrisk.cli import main
from convexrisk.gridfn import (
    abs_kernel,
    biconjugate_gap,
    from_callable,
    inf_convolve,
    legendre_transform,
    moreau_yosida,
    indicator,
    quadratic_kernel,
    uniform_grid,
)
from convexrisk.lattice import (
    Lattice,
    Linear,
    Quadratic,
    bsde_solve,
    conditional_risk,
    dual_bound,
    dual_optimal_control,
    dynamic_inf_convolve,
    entropic_exact,
)
from convexrisk.market import InstrumentSet, Position, ProbSpace, superhedge_price
from convexrisk.measures import (
    AVaR,
    Dilated,
    Entropic,
    SetGenerated,
    VaR,
    WorstCase,
    axiom_check,
    dual_gap,
    evaluate,
    subdifferential_measure,
)
from convexrisk.transfer import _numeric_infconv, borch_closed_form

TWO = ProbSpace.uniform(2)
STOCK = InstrumentSet(TWO, ("S",), np.array([[2.0, 0.0]]), np.array([1.0]))
GRID = uniform_grid(5.0, 2001)


def verdict(num, name, ok):
    print(f"ACCEPTANCE {num:2d} {name}: {'PASS' if ok else 'FAIL'}", file=sys.__stdout__)
    assert ok, f"acceptance criterion {num} ({name}) failed"


def test_01_borch_quota_sharing():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    ok = True
    for i in range(20):
        n = int(rng.choice([2, 4, 8]))
        space = ProbSpace.uniform(n)
        gA, gB = rng.uniform(0.2, 5.0, 2)
        XA = Position(space, rng.uniform(-2, 2, n))
        XB = Position(space, rng.uniform(-2, 2, n))
        X = XA + XB
        val, Ft = _numeric_infconv(Entropic(gA), Entropic(gB), X)
        oracle = evaluate(Entropic(gA + gB), X)
        F_closed, _ = borch_closed_form(gA, gB, XA, XB)
        F_num = Ft - XB
        F_num = F_num - F_num.mean()
        ok &= abs(val - oracle) <= 1e-6 * max(1.0, abs(oracle))
        ok &= float(np.max(np.abs(F_num.payoff - F_closed.payoff))) <= 1e-4
    elapsed = time.perf_counter() - t0
    verdict(1, "Borch quota-sharing (rel 1e-6, sup 1e-4, <10 s)", ok and elapsed < 10.0)


def test_02_static_duality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    ok = True
    for spec, space in (
        (Entropic(1.3), ProbSpace.uniform(4)),
        (WorstCase(), ProbSpace.uniform(4)),
        (AVaR(0.4), ProbSpace.uniform(4)),
        (SetGenerated(STOCK), TWO),
    ):
        for _ in range(50):
            X = Position(space, rng.uniform(-3, 3, space.n))
            Q = subdifferential_measure(spec, X)
            _, gap = dual_gap(spec, X, [Q])
            ok &= abs(gap) <= 1e-8
    elapsed = time.perf_counter() - t0
    verdict(2, "static Fenchel residual <= 1e-8 on 50 random X", ok and elapsed < 5.0)


def _extreme_martingale_values(space, ins, X):
    """max of E_Q[-X] over extreme martingale measures, by brute force."""
    G, _ = ins.gains()
    A = np.vstack([np.ones(space.n), G])  # rows: normalization + gains
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    best = -np.inf
    m = A.shape[0]
    for support in itertools.chain.from_iterable(
        itertools.combinations(range(space.n), k) for k in range(1, m + 1)
    ):
        M = A[:, list(support)]
        q, res, rank, _ = np.linalg.lstsq(M, b, rcond=None)
        if np.max(np.abs(M @ q - b)) > 1e-9 or np.any(q < -1e-9):
            continue
        full = np.zeros(space.n)
        full[list(support)] = q
        best = max(best, float(full @ -X.payoff))
    return best


def test_03_superhedging_duality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    ok = True
    for _ in range(10):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(1, 4))
        space = ProbSpace.uniform(n)
        payoffs = rng.uniform(0.0, 2.0, size=(d, n))
        Q0 = rng.dirichlet(np.ones(n))
        ins = InstrumentSet(
            space, tuple(f"i{j}" for j in range(d)), payoffs, payoffs @ Q0
        )
        X = Position(space, rng.uniform(-2, 2, n))
        m, _ = superhedge_price(X, ins)
        oracle = _extreme_martingale_values(space, ins, X)
        ok &= abs(m - oracle) <= 1e-7
    elapsed = time.perf_counter() - t0
    verdict(3, "superhedge LP = max over extreme measures (1e-7)", ok and elapsed < 10.0)


def test_04_axiom_suites():
    space = ProbSpace.uniform(4)
    ok = True
    rep_var = axiom_check(VaR(0.25), space, trials=10, seed=104)
    ok &= rep_var["convexity_counterexample"]["violates"]
    for spec in (Entropic(1.0), WorstCase(), AVaR(0.5)):
        rep = axiom_check(spec, space, trials=500, seed=104)
        ok &= rep["convexity"]["max_violation"] <= 1e-9
        ok &= rep["monotonicity"]["max_violation"] <= 1e-9
        ok &= rep["cash_invariance"]["max_violation"] <= 1e-12
        if isinstance(spec, Entropic):
            ok &= rep["homogeneity"]["max_violation"] > 1e-3
        else:
            ok &= rep["homogeneity"]["max_violation"] <= 1e-12
    verdict(4, "axiom suites incl. VaR counterexample, 500 triples", ok)


def test_05_dilation_laws():
    space = ProbSpace.uniform(4)
    rng = np.random.default_rng(105)
    X = Position(space, rng.uniform(-2, 2, 4))
    ok = True
    for spec in (Entropic(1.0), AVaR(0.3)):
        comp = evaluate(Dilated(Dilated(spec, 2.5), 4.0), X)
        ok &= abs(comp - evaluate(Dilated(spec, 10.0), X)) <= 1e-10
    ladder = [evaluate(Dilated(Entropic(1.0), g), X)
              for g in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)]
    ok &= bool(np.all(np.diff(ladder) <= 1e-12))
    # limits converge at rate O(1/gamma) resp. O(gamma ln(1/p)); a payoff
    # with |X| <= 1 keeps both inside the 1e-3 budget
    XL = Position(TWO, np.array([1.0, -1.0]))
    ok &= abs(evaluate(Dilated(Entropic(1.0), 1e3), XL) - (-XL.mean())) <= 1e-3
    ok &= abs(evaluate(Dilated(Entropic(1.0), 1e-3), XL) - np.max(-XL.payoff)) <= 1e-3
    verdict(5, "dilation composition, ladders, entropic limits", ok)


def test_06_convex_kernel():
    ok = True
    fixtures = [
        quadratic_kernel(1.0, GRID),
        abs_kernel(1.0, GRID),
        from_callable(lambda z: np.where(np.abs(z) <= 1, z * z / 2, np.abs(z) - 0.5), GRID),
        indicator(GRID, (-2.0, 2.0)),
    ]
    for f in fixtures:
        ok &= biconjugate_gap(f) <= 1e-3
    # conjugate of an inf-convolution is the sum of the conjugates
    fA, fB = quadratic_kernel(1.0, GRID), quadratic_kernel(0.5, GRID)
    h, _ = inf_convolve(fA, fB)
    # dual span chosen so the conjugate's maximizers stay inside the primal
    # grid; the two boundary cells are excluded per the stated tolerance
    dual = uniform_grid(1.5, 801)
    GH = legendre_transform(h, dual)
    GS = legendre_transform(fA, dual).values + legendre_transform(fB, dual).values
    ok &= float(np.max(np.abs(GH.values - GS)[2:-2])) <= 1e-3
    # Moreau-Yosida of |z| is the Huber function
    my = moreau_yosida(abs_kernel(1.0, GRID), 1.0)
    zs = my.finite_grid
    huber = np.where(np.abs(zs) <= 1.0, zs * zs / 2.0, np.abs(zs) - 0.5)
    interior = np.abs(zs) <= 4.0
    ok &= float(np.max(np.abs(my.finite_values[interior] - huber[interior]))) <= 1e-6
    verdict(6, "kernel biconjugates, polar additivity, Moreau-Yosida", ok)


def test_07_bsde_vs_entropic_oracle():
    t0 = time.perf_counter()
    errs = []
    for N in (25, 50, 100, 200):
        lat = Lattice(N, 1.0)
        xi = np.tanh(lat.brownian(N))
        Y, _ = conditional_risk(Quadratic(1.0), xi, lat)
        errs.append(abs(Y.root - entropic_exact(1.0, xi, lat).root))
    ok = bool(np.all(np.diff(errs) <= 0)) and errs[-1] <= 5e-3
    elapsed = time.perf_counter() - t0
    verdict(7, "BSDE root error monotone, <= 5e-3 at N=200, <2 s", ok and elapsed < 2.0)


def test_08_dynamic_duality():
    lat = Lattice(100, 1.0)
    xi = np.tanh(lat.brownian(100))
    Y, _ = conditional_risk(Quadratic(1.0), xi, lat)
    slack = 5.0 * lat.dt * (1.0 + float(np.max(np.abs(xi))))
    ok = True
    rng = np.random.default_rng(108)
    for _ in range(20):
        mu = [rng.uniform(-2.0, 2.0, k + 1) for k in range(100)]
        ok &= dual_bound(Quadratic(1.0), -xi, mu, lat) <= Y.root + slack
    mubar = dual_optimal_control(Quadratic(1.0), -xi, lat)
    ok &= abs(dual_bound(Quadratic(1.0), -xi, mubar, lat) - Y.root) <= slack
    verdict(8, "dual bounds below Y_0 + 5 dt (1+|xi|), tight at mu_bar", ok)


def test_09_dynamic_inf_convolution():
    lat = Lattice(100, 1.0)
    xi = np.tanh(lat.brownian(100))
    out = dynamic_inf_convolve(Quadratic(1.0), Quadratic(2.0), xi, lat)
    ok = out["decomposition_residual"] <= 1e-9
    lat8 = Lattice(8, 1.0)
    xi8 = np.tanh(lat8.brownian(8))
    out8 = dynamic_inf_convolve(Linear(0.5), Quadratic(1.0), xi8, lat8)
    ok &= out8["decomposition_residual"] <= 1e-8
    rng = np.random.default_rng(109)
    W = lat8.brownian(8)
    for _ in range(20):
        F = rng.uniform(-0.5, 0.5) * np.tanh(W) + rng.uniform(-0.3, 0.3)
        YA, _ = bsde_solve(Linear(0.5), -(xi8 - F), lat8)
        YB, _ = bsde_solve(Quadratic(1.0), -F, lat8)
        ok &= YA.root + YB.root >= out8["Y_AB"].root - 1e-9
    verdict(9, "decomposition residual 1e-9 / path tree 1e-8 + audit", ok)


def test_10_cli_determinism(tmp_path):
    import pathlib

    market = str(pathlib.Path(__file__).resolve().parent.parent / "fixtures" / "market.json")
    outs = []
    for i in range(2):
        path = tmp_path / f"run{i}.json"
        code = main(["price", "--scenario", market, "--out", str(path), "--seed", "7"])
        assert code == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and json.loads(outs[0])["seed"] == 7
    verdict(10, "byte-identical CLI JSON reports", ok)
