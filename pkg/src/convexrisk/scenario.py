"""Scenario-file ingestion: JSON to validated domain objects.

A scenario file bundles a finite probability space, named positions, an
optional instrument set, a catalog of risk-measure specs, optional test
measures, an optional transfer-problem block, and an optional lattice
block.  Terminal payoffs for the lattice are expressions over W_T drawn
from a fixed whitelist (polynomials, call/put clamps, tanh wrappers and
sums thereof).
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ValidationError
from .gridfn import GridConvexFunction, from_callable, uniform_grid
from .lattice import (
    CoefficientSpec,
    Grid as GridCoef,
    Lattice,
    Linear,
    Quadratic,
    RestrictedToCone,
)
from .market import BOX, CONE, NONNEG, InstrumentSet, Measure, Position, ProbSpace
from .measures import (
    AVaR,
    CVaR,
    Dilated,
    Entropic,
    InfConv,
    MarketModified,
    RiskMeasureSpec,
    SetGenerated,
    Shortfall,
    VaR,
    WorstCase,
)


class Scenario:
    """Validated contents of a scenario file."""

    def __init__(self, space, positions, instruments, risk_measures,
                 test_measures, transfer, lattice, raw):
        self.space: ProbSpace = space
        self.positions: dict[str, Position] = positions
        self.instruments: InstrumentSet | None = instruments
        self.risk_measures: dict[str, RiskMeasureSpec] = risk_measures
        self.test_measures: dict[str, Measure] = test_measures
        self.transfer: dict | None = transfer
        self.lattice: dict | None = lattice  # {"lattice", "coefficient", "terminal", "cone"?}
        self.raw: dict = raw


def load_scenario(path: str) -> Scenario:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scenario is not valid JSON: {exc}") from exc
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ValidationError("scenario root must be a JSON object")
    space = None
    if "outcomes" in raw:
        outs = raw["outcomes"]
        if not isinstance(outs, list) or not outs:
            raise ValidationError("field 'outcomes' must be a nonempty list")
        labels, probs = [], []
        for i, o in enumerate(outs):
            try:
                labels.append(str(o["label"]))
                probs.append(float(o["prob"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"outcomes[{i}] needs 'label' and 'prob': {exc}")
        space = ProbSpace(tuple(labels), np.array(probs))
    positions = {}
    for name, vals in (raw.get("positions") or {}).items():
        if space is None:
            raise ValidationError("positions given without outcomes")
        positions[name] = Position(space, np.asarray(vals, dtype=float))
    instruments = _parse_instruments(raw, space)
    risk_measures = {
        name: parse_risk_measure(spec, instruments)
        for name, spec in (raw.get("risk_measures") or {}).items()
    }
    test_measures = {}
    for name, w in (raw.get("test_measures") or {}).items():
        test_measures[name] = Measure(space, np.asarray(w, dtype=float))
    transfer = raw.get("transfer")
    if transfer is not None:
        for key in ("rhoA", "rhoB", "XA", "XB"):
            if key not in transfer:
                raise ValidationError(f"transfer block missing field '{key}'")
            pool = risk_measures if key.startswith("rho") else positions
            if transfer[key] not in pool:
                raise ValidationError(f"transfer field '{key}' names unknown '{transfer[key]}'")
    lattice = _parse_lattice(raw.get("lattice"))
    return Scenario(space, positions, instruments, risk_measures,
                    test_measures, transfer, lattice, raw)


def _parse_instruments(raw, space) -> InstrumentSet | None:
    items = raw.get("instruments")
    if not items:
        return None
    if space is None:
        raise ValidationError("instruments given without outcomes")
    constraint = raw.get("constraint", CONE)
    if constraint not in (CONE, NONNEG, BOX):
        raise ValidationError(f"unknown constraint {constraint!r}")
    names, payoffs, bids, asks, lowers, uppers = [], [], [], [], [], []
    any_ask = False
    for i, it in enumerate(items):
        try:
            names.append(str(it["name"]))
            payoffs.append(np.asarray(it["payoff"], dtype=float))
            bids.append(float(it["bid"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"instruments[{i}] needs 'name', 'payoff', 'bid': {exc}")
        if "ask" in it:
            any_ask = True
            asks.append(float(it["ask"]))
        else:
            asks.append(None)
        lowers.append(float(it.get("lower", 0.0)))
        uppers.append(float(it["upper"]) if "upper" in it else np.inf)
    if any_ask and any(a is None for a in asks):
        raise ValidationError("either all instruments carry an ask price or none")
    return InstrumentSet(
        space,
        tuple(names),
        np.vstack(payoffs),
        np.array(bids),
        ask=np.array(asks, dtype=float) if any_ask else None,
        constraint=constraint,
        lower=np.array(lowers) if constraint == BOX else None,
        upper=np.array(uppers) if constraint == BOX else None,
    )


def parse_risk_measure(node: dict, instruments: InstrumentSet | None) -> RiskMeasureSpec:
    if not isinstance(node, dict) or "kind" not in node:
        raise ValidationError("risk-measure spec must be an object with a 'kind'")
    kind = node["kind"]
    try:
        if kind == "Entropic":
            return Entropic(float(node["gamma"]))
        if kind == "WorstCase":
            return WorstCase()
        if kind == "VaR":
            return VaR(float(node["eps"]))
        if kind == "AVaR":
            return AVaR(float(node["lam"]))
        if kind == "CVaR":
            return CVaR(float(node["lam"]))
        if kind == "Shortfall":
            return Shortfall(_parse_loss(node["loss"]), float(node["anchor"]))
        if kind == "SetGenerated":
            if instruments is None:
                raise ValidationError("SetGenerated needs an instrument set in the scenario")
            return SetGenerated(instruments)
        if kind == "Dilated":
            return Dilated(parse_risk_measure(node["base"], instruments), float(node["gamma"]))
        if kind == "MarketModified":
            if instruments is None:
                raise ValidationError("MarketModified needs an instrument set in the scenario")
            return MarketModified(parse_risk_measure(node["base"], instruments), instruments)
        if kind == "InfConv":
            return InfConv(
                parse_risk_measure(node["A"], instruments),
                parse_risk_measure(node["B"], instruments),
            )
    except KeyError as exc:
        raise ValidationError(f"risk-measure kind {kind!r} missing field {exc}")
    raise ValidationError(f"unknown risk-measure kind {kind!r}")


def _parse_loss(node) -> GridConvexFunction:
    if isinstance(node, dict) and "grid" in node:
        return GridConvexFunction(
            np.asarray(node["grid"], dtype=float), np.asarray(node["values"], dtype=float)
        )
    if isinstance(node, dict) and "power" in node:
        p = float(node["power"])
        scale = float(node.get("scale", 1.0))
        span = float(node.get("span", 20.0))
        if p < 1 or scale <= 0:
            raise ValidationError("loss power must be >= 1 with positive scale")
        return from_callable(lambda z: scale * max(z, 0.0) ** p, uniform_grid(span, 2001))
    raise ValidationError("loss must give either {grid, values} or {power, scale}")


def _parse_lattice(node) -> dict | None:
    if node is None:
        return None
    try:
        lat = Lattice(int(node["steps"]), float(node.get("horizon", 1.0)))
        coef = parse_coefficient(node["coefficient"])
        term = node["terminal"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"lattice block invalid: {exc}")
    _check_terminal_expr(term)
    cone = node.get("cone")
    if cone is not None:
        cone = (float(cone[0]), float(cone[1]))
    return {"lattice": lat, "coefficient": coef, "terminal": term, "cone": cone}


def parse_coefficient(node: dict) -> CoefficientSpec:
    if not isinstance(node, dict) or "kind" not in node:
        raise ValidationError("coefficient must be an object with a 'kind'")
    kind = node["kind"]
    try:
        if kind == "Quadratic":
            return Quadratic(float(node["gamma"]))
        if kind == "Linear":
            return Linear(float(node["k"]))
        if kind == "Grid":
            return GridCoef(
                GridConvexFunction(
                    np.asarray(node["grid"], dtype=float),
                    np.asarray(node["values"], dtype=float),
                )
            )
        if kind == "RestrictedToCone":
            return RestrictedToCone(
                parse_coefficient(node["base"]),
                (float(node["cone"][0]), float(node["cone"][1])),
            )
    except KeyError as exc:
        raise ValidationError(f"coefficient kind {kind!r} missing field {exc}")
    raise ValidationError(f"unknown coefficient kind {kind!r}")


_TERMINAL_KINDS = ("poly", "call", "put", "tanh", "sum")


def _check_terminal_expr(node):
    if not isinstance(node, dict) or "kind" not in node or node["kind"] not in _TERMINAL_KINDS:
        raise ValidationError(
            f"terminal expression must be one of {_TERMINAL_KINDS}"
        )
    kind = node["kind"]
    if kind == "poly":
        if "coeffs" not in node or not len(node["coeffs"]):
            raise ValidationError("poly terminal needs 'coeffs'")
    elif kind in ("call", "put"):
        if "strike" not in node:
            raise ValidationError(f"{kind} terminal needs 'strike'")
    elif kind == "tanh":
        if "inner" not in node:
            raise ValidationError("tanh terminal needs 'inner'")
        _check_terminal_expr(node["inner"])
    elif kind == "sum":
        terms = node.get("terms")
        if not terms:
            raise ValidationError("sum terminal needs nonempty 'terms'")
        for t in terms:
            _check_terminal_expr(t)


def terminal_payoff(node: dict, W: np.ndarray) -> np.ndarray:
    """Evaluate a whitelisted terminal expression at the W_T node values."""
    kind = node["kind"]
    if kind == "poly":
        return np.polyval(list(reversed([float(c) for c in node["coeffs"]])), W)
    if kind == "call":
        return np.clip(W - float(node["strike"]), 0.0, None)
    if kind == "put":
        return np.clip(float(node["strike"]) - W, 0.0, None)
    if kind == "tanh":
        return np.tanh(terminal_payoff(node["inner"], W))
    if kind == "sum":
        return np.sum([terminal_payoff(t, W) for t in node["terms"]], axis=0)
    raise ValidationError(f"unknown terminal kind {kind!r}")
