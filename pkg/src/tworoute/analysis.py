"""Network efficiency at equilibrium and parameter sweeps.

The efficiency measure is the flow-weighted congestion index::

    J(x) = phi R1(x) x1 / B1 + phi R2(x) x2 / B2    [veh/h]

a proxy for total travel time, meaningful only while the equilibrium is in
the SF-SF mode. For affine routing, ``J`` along the equilibrium branch
``alpha -> x(alpha)`` has a closed-form derivative whose sign is fixed by

    beta1 = alpha d + 2 (1 - alpha) c
    beta2 = a (1 - 2 r10) - c phi

with ``a = E1 E2``, ``b = E1 + E2``, ``c = r10 E2 - r20 E1``, ``d = E2 - E1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    EquilibriumReport,
    active_equilibrium,
    affine_candidates,
    alpha_threshold,
    effective_capacity,
)
from .model import (
    AFFINE,
    AssumptionError,
    RouteParams,
    RoutingRule,
    Scenario,
    _ratio_1,
    as_state,
    validate_scenario,
)


class RegimeError(ValueError):
    """The operation needs the SF-SF regime, which does not hold."""


# ---------------------------------------------------------------------------
# bundled scenarios


def grenoble_scenario(phi: float, alpha: float = 0.5) -> Scenario:
    """South ring (route 1) vs city-centre crossing (route 2) of Grenoble."""
    return Scenario(
        RouteParams(3500.0, 41.2, 250.0),
        RouteParams(1100.0, 22.0, 120.0),
        float(phi),
        RoutingRule(float(alpha), 0.8261),
    )


def symmetric_scenario() -> Scenario:
    """Two identical routes with an even split; equilibrium at (10, 10)."""
    route = RouteParams(1000.0, 20.0, 100.0)
    return Scenario(route, route, 1000.0, RoutingRule(1.0, 0.5))


# ---------------------------------------------------------------------------
# efficiency


def performance_J(scn: Scenario, x):
    """``phi R1 x1/B1 + phi R2 x2/B2`` for a state or a stack of states [veh/h]."""
    x = as_state(scn, x)
    r1 = _ratio_1(scn, x[..., 0], x[..., 1])
    out = scn.demand * (r1 * x[..., 0] / scn.B[0] + (1.0 - r1) * x[..., 1] / scn.B[1])
    return float(out) if np.ndim(out) == 0 else out


def _shorthand(scn: Scenario):
    E1, E2 = (float(e) for e in scn.E)
    r1, r2 = scn.rule.fixed_split
    return E1 * E2, E1 + E2, r1 * E2 - r2 * E1, E2 - E1


def sf_sf_alpha_interval(scn: Scenario) -> tuple[float, float] | None:
    """Closed sub-interval of [0, 1] of penetration rates keeping SF-SF active.

    ``phi R_i(alpha) <= F_i`` is linear in alpha after clearing the positive
    denominator, so each route contributes a half-line. ``None`` when empty.
    """
    if scn.rule.kind != AFFINE:
        raise ValueError("needs affine routing")
    phi = scn.demand
    lo, hi = 0.0, 1.0
    for i in range(2):
        j = 1 - i
        Fi, Ei, Ej = (float(v) for v in (scn.F[i], scn.E[i], scn.E[j]))
        ri = scn.rule.fixed_split[i]
        slope = phi * (Ei * Ej * (1.0 - 2.0 * ri) + phi * Ei - Fi * (Ei + Ej))
        rhs = 2.0 * Ei * Ej * (Fi - phi * ri)
        # need alpha * slope <= rhs
        if slope > 0:
            hi = min(hi, rhs / slope)
        elif slope < 0:
            lo = max(lo, rhs / slope)
        elif rhs < 0:
            return None
    return (lo, hi) if lo <= hi else None


def J_at_alpha(scn: Scenario, alpha: float) -> float:
    """J at the closed-form SF-SF equilibrium for penetration rate ``alpha``."""
    s = scn.replace(penetration_rate=alpha)
    x = affine_candidates(s)[0]
    return performance_J(s, x)


def dJ_dalpha(scn: Scenario, alpha: float | None = None) -> float:
    """Derivative of ``J(x(alpha))`` along the SF-SF equilibrium branch.

    Evaluates ``beta1 * 4 a phi^2 (a (1 - 2 r10) - c phi) / (2a + alpha phi b)^3``.
    Raises :class:`RegimeError` when SF-SF is not active at ``alpha``.
    """
    if scn.rule.kind != AFFINE:
        raise ValueError("needs affine routing")
    a_ = scn.alpha if alpha is None else float(alpha)
    report = validate_scenario(scn.replace(penetration_rate=a_))
    if not report.ok:
        raise AssumptionError(report)
    window = sf_sf_alpha_interval(scn)
    if window is None or not (window[0] <= a_ <= window[1]):
        raise RegimeError(f"SF-SF is not active at alpha = {a_} (SF-SF window {window})")
    phi = scn.demand
    r1 = scn.rule.fixed_split_1
    a, b, c, d = _shorthand(scn)
    beta1 = a_ * d + 2.0 * (1.0 - a_) * c
    beta2 = a * (1.0 - 2.0 * r1) - c * phi
    return beta1 * 4.0 * a * phi * phi * beta2 / (2.0 * a + a_ * phi * b) ** 3


# ---------------------------------------------------------------------------
# regime classification

_CASES = {
    "E1>=E2, r1<1/2": "decreasing",
    "E1>=E2, 1/2<=r1<=xi2, phi<phi_bar": "increasing",
    "E1>=E2, 1/2<=r1<=xi2, phi>=phi_bar": "decreasing",
    "E1>=E2, xi2<=r1<=xi1": "increasing",
    "E1>=E2, r1>=xi1": "minimum_at_alpha_bar",
    "E1<E2, r1<=xi1": "minimum_at_alpha_bar",
    "E1<E2, xi1<r1<=xi2": "increasing",
    "E1<E2, xi2<r1<=1/2, phi<phi_bar": "increasing",
    "E1<E2, xi2<r1<=1/2, phi>=phi_bar": "decreasing",
    "E1<E2, r1>1/2": "decreasing",
}


@dataclass(frozen=True)
class RegimeClassification:
    """How J at equilibrium responds to the penetration rate.

    ``case`` is one of the ten parameter branches; ``monotonicity`` the
    behaviour that branch predicts over ``alpha_window``. ``sign_pattern`` is
    the same prediction obtained directly from the signs of beta1 (linear in
    alpha, zero at ``alpha_bar``) and beta2 (independent of alpha), and is
    used to detect degenerate boundary cases.
    """

    xi1: float
    xi2: float
    alpha_bar: float
    phi_bar: float
    a: float
    b: float
    c: float
    d: float
    case: str
    monotonicity: str
    sign_pattern: str
    alpha_window: tuple[float, float]
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "xi1": self.xi1, "xi2": self.xi2, "alpha_bar": _num(self.alpha_bar),
            "phi_bar": _num(self.phi_bar), "a": self.a, "b": self.b, "c": self.c, "d": self.d,
            "case": self.case, "monotonicity": self.monotonicity,
            "sign_pattern": self.sign_pattern, "alpha_window": list(self.alpha_window),
            "notes": list(self.notes),
        }


def _num(v):
    return None if v is None or not math.isfinite(v) else float(v)


def _ratio(num, den):
    return num / den if den != 0 else math.nan


def _sign_pattern(c, d, beta2, lo, hi, alpha_bar) -> str:
    """Monotonicity on [lo, hi] from the signs of beta1(alpha) and beta2."""
    if beta2 == 0 or (c == 0 and d == 0):
        return "constant"
    b_lo = lo * d + 2.0 * (1.0 - lo) * c
    b_hi = hi * d + 2.0 * (1.0 - hi) * c
    s2 = 1 if beta2 > 0 else -1
    if b_lo * b_hi >= 0 or not (lo < alpha_bar < hi):
        ref = b_lo if b_lo != 0 else b_hi
        if ref == 0:
            return "constant"
        return "decreasing" if ref * s2 < 0 else "increasing"
    first = b_lo * s2
    return "minimum_at_alpha_bar" if first < 0 else "maximum_at_alpha_bar"


def regime_classify(scn: Scenario) -> RegimeClassification:
    """Classify the response of equilibrium efficiency to the penetration rate.

    The classification holds on the alpha window where SF-SF stays active;
    when unsatisfied demand occurs for some alpha in [0, 1] the window is
    truncated and a note says so. Raises :class:`RegimeError` if the window
    is empty.
    """
    if scn.rule.kind != AFFINE:
        raise ValueError("needs affine routing")
    window = sf_sf_alpha_interval(scn)
    if window is None:
        raise RegimeError("no penetration rate in [0, 1] keeps the equilibrium in SF-SF")
    notes = []
    if window != (0.0, 1.0):
        notes.append(
            f"unsatisfied demand for some alpha in [0, 1]; classification restricted to "
            f"[{window[0]:.6g}, {window[1]:.6g}]"
        )
    E1, E2 = (float(e) for e in scn.E)
    F1, F2 = (float(f) for f in scn.F)
    G = F1 + F2
    r1 = scn.rule.fixed_split_1
    phi = scn.demand
    a, b, c, d = _shorthand(scn)
    xi1 = E1 / b
    xi2 = (E1 * E2 + E1 * G) / (2.0 * E1 * E2 + b * G)
    alpha_bar = _ratio(2.0 * (r1 * b - E1), (2.0 * r1 - 1.0) * b)
    phi_bar = _ratio(a * (1.0 - 2.0 * r1), r1 * b - E1)
    below = math.isfinite(phi_bar) and phi < phi_bar

    if E1 >= E2:
        if r1 < 0.5:
            case = "E1>=E2, r1<1/2"
        elif r1 <= xi2:
            case = f"E1>=E2, 1/2<=r1<=xi2, phi{'<' if below else '>='}phi_bar"
        elif r1 <= xi1:
            case = "E1>=E2, xi2<=r1<=xi1"
        else:
            case = "E1>=E2, r1>=xi1"
    else:
        if r1 <= xi1:
            case = "E1<E2, r1<=xi1"
        elif r1 <= xi2:
            case = "E1<E2, xi1<r1<=xi2"
        elif r1 <= 0.5:
            case = f"E1<E2, xi2<r1<=1/2, phi{'<' if below else '>='}phi_bar"
        else:
            case = "E1<E2, r1>1/2"
    monotonicity = _CASES[case]

    beta2 = a * (1.0 - 2.0 * r1) - c * phi
    pattern = _sign_pattern(c, d, beta2, window[0], window[1], alpha_bar)
    if pattern == "constant":
        notes.append("beta1 or beta2 vanishes identically: J is constant in alpha")
        monotonicity = "constant"
    elif monotonicity == "minimum_at_alpha_bar" and pattern != monotonicity:
        notes.append(
            f"alpha_bar = {alpha_bar:.6g} lies outside the window: J is {pattern} on it"
        )
        monotonicity = pattern
    elif pattern != monotonicity:
        notes.append(f"boundary case: branch predicts {monotonicity}, sign analysis {pattern}")
        monotonicity = pattern
    return RegimeClassification(
        xi1, xi2, alpha_bar, phi_bar, a, b, c, d, case, monotonicity, pattern, window,
        tuple(notes),
    )


# ---------------------------------------------------------------------------
# sweeps


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid ``start, start + step, ..., stop`` robust to roundoff."""
    if not step > 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("stop must not be below start")
    n = int(math.floor((stop - start) / step + 1e-9))
    return np.array([round(start + k * step, 12) for k in range(n + 1)])


@dataclass(frozen=True)
class SweepRow:
    param: float
    valid: bool
    state: np.ndarray
    ratios: np.ndarray
    mode: str
    J: float
    J_defined: bool
    unsatisfied: np.ndarray
    crossed: tuple[str, ...] = ()
    cross_check_error: float | None = None


SWEEP_COLUMNS = ("param", "x1_eq", "x2_eq", "R1_eq", "R2_eq", "mode1", "mode2",
                 "J", "J_defined", "unsat1", "unsat2")


@dataclass(frozen=True)
class SweepResult:
    """Equilibrium quantities along a one-parameter grid."""

    vary: str
    rows: tuple[SweepRow, ...]
    thresholds: dict

    @property
    def params(self) -> np.ndarray:
        return np.array([r.param for r in self.rows])

    def column(self, name: str) -> np.ndarray:
        """Numeric column: ``x1``, ``x2``, ``R1``, ``R2``, ``J``, ``unsat1``, ``unsat2``."""
        pick = {
            "x1": lambda r: r.state[0], "x2": lambda r: r.state[1],
            "R1": lambda r: r.ratios[0], "R2": lambda r: r.ratios[1],
            "J": lambda r: r.J if r.J_defined else math.nan,
            "unsat1": lambda r: r.unsatisfied[0], "unsat2": lambda r: r.unsatisfied[1],
        }[name]
        return np.array([pick(r) for r in self.rows], dtype=float)

    @property
    def cross_check_ok(self) -> bool:
        errs = [r.cross_check_error for r in self.rows if r.cross_check_error is not None]
        return all(e < 1e-6 for e in errs)

    def to_csv(self, dest=None) -> str | None:
        """Write the sweep table; returns the text when ``dest`` is None."""
        if dest is not None and not hasattr(dest, "write"):
            with open(dest, "w", newline="") as fh:
                self._write(fh)
            return None
        buf = dest if dest is not None else io.StringIO()
        self._write(buf)
        return buf.getvalue() if dest is None else None

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            modes = r.mode.split("-") if r.valid else ("invalid", "invalid")
            w.writerow([
                repr(float(r.param)), repr(float(r.state[0])), repr(float(r.state[1])),
                repr(float(r.ratios[0])), repr(float(r.ratios[1])), modes[0], modes[1],
                repr(float(r.J)) if r.J_defined else "nan", "true" if r.J_defined else "false",
                repr(float(r.unsatisfied[0])), repr(float(r.unsatisfied[1])),
            ])

    def sidecar_json(self, **kw) -> str:
        return json.dumps(self.thresholds, **kw)


def threshold_annotations(scn: Scenario) -> dict:
    """Threshold values for the sweep sidecar; ``None`` where undefined."""
    out = dict.fromkeys(
        ("alpha_bar", "alpha_lower_1", "alpha_lower_2", "F_eff_1", "F_eff_2",
         "xi1", "xi2", "phi_bar", "regime_case")
    )
    if scn.rule.kind != AFFINE:
        return out
    if validate_scenario(scn).ok:
        for i in (1, 2):
            out[f"alpha_lower_{i}"] = _num(alpha_threshold(scn, i).value)
    if scn.alpha > 0:
        ec = effective_capacity(scn).values
        out["F_eff_1"], out["F_eff_2"] = float(ec[0]), float(ec[1])
    try:
        rc = regime_classify(scn)
    except RegimeError:
        rc = None
    if rc is not None:
        out.update(alpha_bar=_num(rc.alpha_bar), xi1=rc.xi1, xi2=rc.xi2,
                   phi_bar=_num(rc.phi_bar), regime_case=rc.case)
    return out


def _instantiate(scn: Scenario, vary: str, value: float) -> Scenario:
    if vary == "alpha":
        return scn.replace(penetration_rate=float(value))
    return scn.replace(demand=float(value))


def _row(scn: Scenario, param: float, cross_check: bool) -> SweepRow:
    nan2 = np.full(2, math.nan)
    if not validate_scenario(scn).ok:
        return SweepRow(param, False, nan2, nan2, "invalid", math.nan, False, nan2)
    eq: EquilibriumReport = active_equilibrium(scn)
    defined = eq.mode == "SF-SF"
    J = performance_J(scn, eq.state)
    err = None
    if cross_check:
        from .integrate import steady_states

        starts = np.array([[0.0, 0.0], [float(scn.B[0]), float(scn.B[1])]])
        results = steady_states(scn, starts)
        err = max(
            float(np.max(np.abs(r.state - eq.state) / np.maximum(np.abs(eq.state), 1e-12)))
            if r.converged else math.inf
            for r in results
        )
    return SweepRow(param, True, eq.state, eq.ratios, eq.mode, J, defined, eq.unsatisfied,
                    cross_check_error=err)


def sweep(
    scn: Scenario,
    vary: str,
    grid,
    *,
    cross_check: bool = False,
    cross_check_every: int = 10,
) -> SweepResult:
    """Equilibrium along a grid of penetration rates (``vary="alpha"``) or demands.

    Rows whose scenario fails validation are kept and marked invalid. With
    ``cross_check`` every ``cross_check_every``-th row is re-derived by ODE
    integration from two extreme starts and the relative deviation stored.
    """
    if vary not in ("alpha", "phi"):
        raise ValueError(f"vary must be 'alpha' or 'phi', got {vary!r}")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    rows = [
        _row(_instantiate(scn, vary, p), float(p), cross_check and k % cross_check_every == 0)
        for k, p in enumerate(grid)
    ]
    notes = threshold_annotations(scn)
    marks = {}
    if vary == "alpha":
        for key in ("alpha_lower_1", "alpha_lower_2", "alpha_bar"):
            if notes.get(key) is not None:
                marks[key] = notes[key]
    elif notes.get("F_eff_1") is not None:
        marks["F_eff_min"] = min(notes["F_eff_1"], notes["F_eff_2"])
    out = []
    prev = -math.inf
    for r in rows:
        crossed = tuple(k for k, v in marks.items() if prev < v <= r.param)
        out.append(SweepRow(**{**r.__dict__, "crossed": crossed}))
        prev = r.param
    return SweepResult(vary, tuple(out), notes)
