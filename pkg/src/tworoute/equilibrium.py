"""Equilibrium of the two-route model and its unsatisfied-demand thresholds.

Only the free-flow box ``P = [0, C1] x [0, C2]`` can hold the equilibrium, and
inside it three sub-systems are possible: SF-SF, UF-SF and SF-UF. Each has one
equilibrium candidate; exactly one candidate lies in the region where its
sub-system is active.

For affine routing the candidates have closed forms. For any strictly
monotone rule :func:`general_equilibrium` finds them with nested bisection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    AFFINE,
    RouteMode,
    Scenario,
    _ratio_1,
    require_valid,
    vector_field,
)

#: relative slack for region-membership tests of candidates
ACTIVITY_RTOL = 1e-9

MODES = ("SF-SF", "UF-SF", "SF-UF")


class InconsistencyError(RuntimeError):
    """No candidate (or more than one) passed the activity test."""

    def __init__(self, msg, candidates):
        super().__init__(msg)
        self.candidates = candidates


class ConvergenceError(RuntimeError):
    """A one-dimensional root solve failed; the rule is likely not monotone."""


def _bisect(f, lo: float, hi: float, xtol: float, max_iter: int = 200) -> float:
    """Root of a function with ``f(lo) >= 0 >= f(hi)``."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if not (f_lo > 0.0 > f_hi):
        raise ConvergenceError(f"no sign change on [{lo}, {hi}]: f = {f_lo}, {f_hi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= xtol or mid in (lo, hi):
            return mid
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if f_mid > 0.0:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not reach {xtol:g} in {max_iter} iterations")


@dataclass(frozen=True)
class Candidate:
    """Equilibrium of one sub-system and whether it is the active one."""

    mode: str
    state: np.ndarray
    active: bool

    def to_dict(self):
        return {"mode": self.mode, "state": [float(v) for v in self.state], "active": self.active}


@dataclass(frozen=True)
class EquilibriumReport:
    """The unique equilibrium and how it was selected.

    Attributes:
        state: equilibrium densities [veh/km].
        mode: active sub-system, one of ``SF-SF``, ``UF-SF``, ``SF-UF``.
        ratios: routing ratios at ``state``.
        unsatisfied: ``max(0, phi R_i - S_i)`` per route [veh/h].
        candidates: all three sub-system equilibria.
        coincidence: ``"UF-SF"``/``"SF-UF"`` when the SF-SF point sits on the
            saturation curve of route 1/2 and both candidates coincide.
        method: ``"closed_form"`` or ``"bisection"``.
    """

    state: np.ndarray
    mode: str
    ratios: np.ndarray
    unsatisfied: np.ndarray
    candidates: tuple[Candidate, ...]
    coincidence: str | None = None
    method: str = "closed_form"

    @property
    def mode_pair(self) -> tuple[RouteMode, RouteMode]:
        a, b = self.mode.split("-")
        return (RouteMode[a], RouteMode[b])

    def to_dict(self) -> dict:
        return {
            "state": [float(v) for v in self.state],
            "mode": self.mode,
            "ratios": [float(v) for v in self.ratios],
            "unsatisfied": [float(v) for v in self.unsatisfied],
            "candidates": [c.to_dict() for c in self.candidates],
            "coincidence": self.coincidence,
            "method": self.method,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _require_affine(scn: Scenario):
    if scn.rule.kind != AFFINE:
        raise ValueError(f"closed forms need affine routing, got {scn.rule.kind!r}")


def affine_candidates(scn: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form equilibria of the SF-SF, UF-SF and SF-UF sub-systems."""
    _require_affine(scn)
    require_valid(scn)
    phi, a = scn.demand, scn.alpha
    B1, B2 = scn.B
    C1, C2 = scn.C
    E1, E2 = scn.E
    r1, r2 = scn.rule.fixed_split
    den = 2.0 * E1 * E2 + a * phi * (E1 + E2)
    sf_sf = np.array([
        (a * phi * B1 * (phi + E2) + 2.0 * (1.0 - a) * phi * r1 * E2 * B1) / den,
        (a * phi * B2 * (phi + E1) + 2.0 * (1.0 - a) * phi * r2 * E1 * B2) / den,
    ])
    uf_sf = np.array([
        C1,
        B2 * (a * phi * (B1 + C1) + 2.0 * (1.0 - a) * phi * r2 * B1) / (B1 * (a * phi + 2.0 * E2)),
    ])
    sf_uf = np.array([
        B1 * (a * phi * (B2 + C2) + 2.0 * (1.0 - a) * phi * r1 * B2) / (B2 * (a * phi + 2.0 * E1)),
        C2,
    ])
    return sf_sf, uf_sf, sf_uf


def _numeric_candidates(scn: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    phi = scn.demand
    B1, B2 = (float(b) for b in scn.B)
    C1, C2 = (float(c) for c in scn.C)
    v1, v2 = (float(v) for v in scn.v)
    xtol1, xtol2 = 1e-12 * B1, 1e-12 * B2

    def on_gamma2(x1):
        # x2 with phi R2(x1, x2) = v2 x2; the residual falls strictly in x2
        return _bisect(lambda x2: phi * (1.0 - _ratio_1(scn, x1, x2)) - v2 * x2, 0.0, B2, xtol2)

    def on_gamma1(x2):
        return _bisect(lambda x1: phi * _ratio_1(scn, x1, x2) - v1 * x1, 0.0, B1, xtol1)

    # along gamma2, phi R1 - v1 x1 is strictly decreasing in x1
    x1 = _bisect(lambda s: phi * _ratio_1(scn, s, on_gamma2(s)) - v1 * s, 0.0, B1, xtol1)
    sf_sf = np.array([x1, on_gamma2(x1)])
    uf_sf = np.array([C1, on_gamma2(C1)])
    sf_uf = np.array([on_gamma1(C2), C2])
    return sf_sf, uf_sf, sf_uf


def _select(scn: Scenario, points, method: str) -> EquilibriumReport:
    phi = scn.demand
    F, C = scn.F, scn.C
    slack_F = ACTIVITY_RTOL * F
    slack_C = ACTIVITY_RTOL * C

    def inflow(x):
        r1 = float(_ratio_1(scn, x[0], x[1]))
        return np.array([phi * r1, phi * (1.0 - r1)])

    sf_sf, uf_sf, sf_uf = points
    q = inflow(sf_sf)
    flags = [bool(np.all(sf_sf <= C + slack_C) and np.all(q <= F + slack_F)), False, False]
    coincidence = None
    if flags[0]:
        on_eps = np.abs(q - F) <= slack_F
        if on_eps[0]:
            coincidence = "UF-SF"
        elif on_eps[1]:
            coincidence = "SF-UF"
    else:
        q = inflow(uf_sf)
        flags[1] = bool(q[0] > F[0] - slack_F[0] and uf_sf[1] <= C[1] + slack_C[1]
                        and q[1] <= F[1] + slack_F[1])
        q = inflow(sf_uf)
        flags[2] = bool(q[1] > F[1] - slack_F[1] and sf_uf[0] <= C[0] + slack_C[0]
                        and q[0] <= F[0] + slack_F[0])
    candidates = tuple(Candidate(m, np.asarray(p, float), f) for m, p, f in zip(MODES, points, flags))
    if sum(flags) != 1:
        raise InconsistencyError(
            f"expected exactly one active equilibrium, got {sum(flags)}: "
            + ", ".join(f"{c.mode}={c.state}" for c in candidates),
            candidates,
        )
    k = flags.index(True)
    x = np.minimum(np.maximum(candidates[k].state, 0.0), scn.B)
    ratios = inflow(x) / phi
    sup = np.where(x < C, F, scn.w * (scn.B - x))
    unsat = np.maximum(phi * ratios - sup, 0.0)
    if k == 0:
        unsat = np.zeros(2)
    return EquilibriumReport(x, MODES[k], ratios, unsat, candidates, coincidence, method)


def active_equilibrium(scn: Scenario) -> EquilibriumReport:
    """Unique equilibrium: closed forms for affine rules, bisection otherwise."""
    if scn.rule.kind == AFFINE:
        return _select(scn, affine_candidates(scn), "closed_form")
    return general_equilibrium(scn)


def general_equilibrium(scn: Scenario) -> EquilibriumReport:
    """Unique equilibrium for any strictly monotone routing rule.

    The SF-SF candidate is the crossing of the curves ``phi R_i(x) = v_i x_i``;
    each curve is traced pointwise by bisection and the crossing is bracketed
    on ``[0, B1]``. The UF-SF / SF-UF candidates fix ``x1 = C1`` / ``x2 = C2``.
    """
    require_valid(scn)
    return _select(scn, _numeric_candidates(scn), "bisection")


# ---------------------------------------------------------------------------
# thresholds (affine rules)


def ratio_at_equilibrium(scn: Scenario, alpha: float | None = None) -> np.ndarray:
    """Routing ratios at the SF-SF equilibrium as a function of alpha."""
    _require_affine(scn)
    a = scn.alpha if alpha is None else alpha
    phi = scn.demand
    E1, E2 = scn.E
    r1, _ = scn.rule.fixed_split
    R1 = (2.0 * r1 * E1 * E2 + a * (E1 * E2 * (1.0 - 2.0 * r1) + phi * E1)) / (
        2.0 * E1 * E2 + a * phi * (E1 + E2)
    )
    return np.array([R1, 1.0 - R1])


@dataclass(frozen=True)
class EffectiveCapacity:
    """Demand levels above which each route saturates at equilibrium [veh/h]."""

    values: np.ndarray
    q: np.ndarray
    k: np.ndarray

    @property
    def argmin(self) -> int:
        """0-based index of the route with the smaller effective capacity."""
        return int(np.argmin(self.values))


def effective_capacity(scn: Scenario) -> EffectiveCapacity:
    """Effective capacities ``(q_i + sqrt(q_i^2 + k_i)) / (2 alpha)``.

    Undefined at alpha = 0, where the condition reduces to ``phi r_i0 <= F_i``.
    """
    _require_affine(scn)
    a = scn.alpha
    if a <= 0:
        raise ValueError("effective capacity is undefined for alpha = 0")
    F1, F2 = scn.F
    E1, E2 = scn.E
    r1, r2 = scn.rule.fixed_split
    q = np.array([
        a * (F1 * (1.0 + E2 / E1) - E2) - 2.0 * (1.0 - a) * r1 * E2,
        a * (F2 * (1.0 + E1 / E2) - E1) - 2.0 * (1.0 - a) * r2 * E1,
    ])
    k = np.array([8.0 * a * F1 * E2, 8.0 * a * F2 * E1])
    return EffectiveCapacity((q + np.sqrt(q * q + k)) / (2.0 * a), q, k)


@dataclass(frozen=True)
class AlphaThreshold:
    """Penetration rate above which route ``route`` gets unsatisfied demand.

    ``status`` is ``"ok"`` (``value`` finite, possibly above 1),
    ``"no_threshold"`` (the demand condition fails, the route is satisfied for
    every alpha and ``value`` is ``inf``) or ``"hypothesis_violated"``
    (``phi r_i0 > F_i``: saturated even without app, ``value`` is None).
    ``formula_value`` is the threshold expression evaluated regardless of the
    demand condition.
    """

    route: int
    value: float | None
    demand_condition: bool
    demand_condition_margin: float
    status: str
    formula_value: float | None = None

    @property
    def reachable(self) -> bool:
        """True when some alpha in (0, 1] crosses the threshold."""
        return self.value is not None and self.value < 1.0

    def to_dict(self):
        finite = self.value is not None and math.isfinite(self.value)
        return {
            "route": self.route,
            "value": self.value if finite else None,
            "formula_value": self.formula_value,
            "demand_condition": self.demand_condition,
            "demand_condition_margin": self.demand_condition_margin,
            "status": self.status,
        }


def alpha_threshold(scn: Scenario, route: int) -> AlphaThreshold:
    """Threshold on alpha for unsatisfied demand on ``route`` (1 or 2).

    Route ``i`` saturates at equilibrium iff
    ``phi > F_i (1 + E_j/E_i) - E_j (1 - 2 r_i0)`` and ``alpha > value``,
    with ``j = 3 - i``.
    """
    _require_affine(scn)
    require_valid(scn)
    if route not in (1, 2):
        raise ValueError(f"route must be 1 or 2, got {route!r}")
    i, j = route - 1, 2 - route
    phi = scn.demand
    Fi, Ei, Ej = scn.F[i], scn.E[i], scn.E[j]
    ri = scn.rule.fixed_split[i]
    margin = float(phi - (Fi * (1.0 + Ej / Ei) - Ej * (1.0 - 2.0 * ri)))
    cond = margin > 0
    den = phi * (Ei * Ej * (1.0 - 2.0 * ri) + phi * Ei - Fi * (Ei + Ej))
    raw = float(2.0 * Ei * Ej * (Fi - phi * ri) / den) if den != 0 else None
    if phi * ri > Fi:
        return AlphaThreshold(route, None, cond, margin, "hypothesis_violated", raw)
    if not cond:
        return AlphaThreshold(route, math.inf, cond, margin, "no_threshold", raw)
    return AlphaThreshold(route, raw, cond, margin, "ok", raw)


@dataclass(frozen=True)
class ThresholdReport:
    """Effective capacities and penetration thresholds of an affine scenario."""

    effective_capacity: EffectiveCapacity | None
    alpha_lower: tuple[AlphaThreshold, AlphaThreshold]
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        ec = self.effective_capacity
        return {
            "effective_capacity": None if ec is None else [float(v) for v in ec.values],
            "q": None if ec is None else [float(v) for v in ec.q],
            "k": None if ec is None else [float(v) for v in ec.k],
            "alpha_lower": [t.to_dict() for t in self.alpha_lower],
            "notes": list(self.notes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def thresholds(scn: Scenario) -> ThresholdReport:
    notes = []
    ec = None
    if scn.alpha > 0:
        ec = effective_capacity(scn)
    else:
        notes.append("alpha = 0: effective capacity undefined")
    at = (alpha_threshold(scn, 1), alpha_threshold(scn, 2))
    for t in at:
        if t.status == "ok" and t.value >= 1.0:
            notes.append(f"route {t.route}: threshold above 1, demand satisfied for any alpha")
        if t.status == "no_threshold":
            notes.append(f"route {t.route}: demand condition fails, no finite threshold")
    return ThresholdReport(ec, at, tuple(notes))


def equilibrium_residual(scn: Scenario, x) -> float:
    """max-norm of the vector field at ``x``."""
    return float(np.max(np.abs(vector_field(scn, x))))

