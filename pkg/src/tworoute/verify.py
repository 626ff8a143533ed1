"""Numerical checks of the qualitative properties of the model.

Each check samples states, pairs or trajectories from a seeded generator and
returns a :class:`PropertyReport` with the worst margin found. Reports are
deterministic given the scenario and the seed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .equilibrium import InconsistencyError, active_equilibrium, general_equilibrium
from .integrate import default_horizon, flow, steady_states
from .model import (
    AFFINE,
    LOGIT,
    RouteParams,
    RoutingRule,
    Scenario,
    _field,
    _flows,
    _ratio_1,
    validate_scenario,
)
from .scenario_io import scenario_to_dict


def fingerprint(scn: Scenario) -> str:
    """Short stable hash of the scenario parameters."""
    blob = json.dumps(scenario_to_dict(scn), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one property check.

    ``worst_margin`` is the smallest slack observed, in the units named by
    ``margin_units``; the check passes when it is at least ``-tolerance``.
    ``status`` is ``"pass"``, ``"fail"`` or ``"inconclusive"`` (the horizon was
    too short to decide).
    """

    name: str
    scenario: str
    seed: int | None
    samples: int
    worst_margin: float
    tolerance: float
    margin_units: str
    status: str
    counterexample: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {
            "name": self.name, "scenario": self.scenario, "seed": self.seed,
            "samples": self.samples, "worst_margin": self.worst_margin,
            "tolerance": self.tolerance, "margin_units": self.margin_units,
            "status": self.status, "passed": self.passed,
            "counterexample": self.counterexample, "details": self.details,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), default=_jsonable, **kw)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _report(name, scn, seed, samples, worst, tol, units, counter=None, status=None, **details):
    if status is None:
        status = "pass" if worst >= -tol else "fail"
    return PropertyReport(name, fingerprint(scn), seed, samples, float(worst), tol, units,
                          status, counter if status == "fail" else None, details)


def _uniform_states(rng, scn: Scenario, n: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=(n, 2)) * scn.B


# ---------------------------------------------------------------------------
# K-condition


def _saturation_crossing(scn: Scenario, i: int, xi: np.ndarray) -> np.ndarray:
    """Other-route density where route ``i`` flips between satisfied/unsatisfied.

    For each own-route density ``xi`` solves ``phi R_i(x) = S_i(x_i)`` in the
    other coordinate by vectorized bisection; NaN where no crossing exists.
    """
    j = 1 - i
    sup = np.where(xi < scn.C[i], scn.F[i], scn.w[i] * (scn.B[i] - xi))

    def gap(xj):
        x = np.empty((len(xi), 2))
        x[:, i], x[:, j] = xi, xj
        r1 = _ratio_1(scn, x[:, 0], x[:, 1])
        return scn.demand * (r1 if i == 0 else 1.0 - r1) - sup  # increasing in xj

    lo = np.zeros_like(xi)
    hi = np.full_like(xi, scn.B[j])
    g_lo, g_hi = gap(lo), gap(hi)
    ok = (g_lo < 0) & (g_hi > 0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        up = gap(mid) > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return np.where(ok, 0.5 * (lo + hi), np.nan)


def check_k_condition(scn: Scenario, samples: int = 10_000, seed: int = 0) -> PropertyReport:
    """Off-diagonal monotonicity: ``a <= b``, ``a_i = b_i`` implies ``S_i(b) >= S_i(a)``.

    Half the pairs are drawn uniformly; the other half straddle the curve where
    route ``i`` switches between satisfied and unsatisfied demand, so that the
    SF/UF and SC/UC pairings are exercised.
    """
    rng = np.random.default_rng(seed)
    tol = 1e-9 * scn.demand
    worst, counter, straddling = math.inf, None, 0
    for i in (0, 1):
        j = 1 - i
        n = samples // 2
        a = _uniform_states(rng, scn, n)
        b = a.copy()
        b[:, j] = a[:, j] + rng.uniform(0, 1, n) * (scn.B[j] - a[:, j])
        half = n // 2
        cross = _saturation_crossing(scn, i, a[:half, i])
        has = ~np.isnan(cross)
        span = rng.uniform(0, 0.05, (half, 2)) * scn.B[j]
        lo = np.clip(cross - span[:, 0], 0, scn.B[j])
        hi = np.clip(cross + span[:, 1], 0, scn.B[j])
        a[:half, j] = np.where(has, lo, a[:half, j])
        b[:half, j] = np.where(has, hi, b[:half, j])
        diff = _field(scn, b)[:, i] - _field(scn, a)[:, i]
        req_a, sup_a, _ = _flows(scn, a)
        req_b, sup_b, _ = _flows(scn, b)
        straddling += int(np.sum((req_a[:, i] > sup_a[:, i]) != (req_b[:, i] > sup_b[:, i])))
        k = int(np.argmin(diff))
        if diff[k] < worst:
            worst = float(diff[k])
            counter = {"route": i + 1, "a": a[k].tolist(), "b": b[k].tolist(),
                       "difference": float(diff[k])}
    return _report("k_condition", scn, seed, 2 * (samples // 2), worst, tol, "veh/km/h",
                   counter, straddling_pairs=straddling)


# ---------------------------------------------------------------------------
# order preservation


def random_ordered_pairs(rng, scn: Scenario, n: int) -> tuple[np.ndarray, np.ndarray]:
    p, q = _uniform_states(rng, scn, n), _uniform_states(rng, scn, n)
    return np.minimum(p, q), np.maximum(p, q)


def check_order_preservation(
    scn: Scenario,
    pairs: tuple[np.ndarray, np.ndarray] | None = None,
    horizon: float | None = None,
    *,
    n_pairs: int = 100,
    seed: int = 0,
    dt: float | None = None,
) -> PropertyReport:
    """Trajectories from ordered starts stay ordered at every sample time.

    Margin is ``min (y_i - x_i) / B_i`` over pairs, routes and times.
    """
    tol = 1e-9
    if pairs is None:
        rng = np.random.default_rng(seed)
        lo, hi = random_ordered_pairs(rng, scn, max(n_pairs - 1, 0))
        lo = np.vstack([np.zeros((1, 2)), lo])
        hi = np.vstack([np.asarray(scn.B)[None], hi])
    else:
        lo, hi = (np.atleast_2d(np.asarray(p, dtype=float)) for p in pairs)
        if np.any(lo > hi):
            raise ValueError("pairs must be ordered componentwise")
        seed = None
    horizon = default_horizon(scn, 1e-6) if horizon is None else horizon
    n = len(lo)
    worst, counter = math.inf, None
    for t, x in flow(scn, np.vstack([lo, hi]), horizon, dt):
        gap = (x[n:] - x[:n]) / scn.B
        k = np.unravel_index(np.argmin(gap), gap.shape)
        if gap[k] < worst:
            worst = float(gap[k])
            counter = {"time": t, "pair": int(k[0]), "start_low": lo[k[0]].tolist(),
                       "start_high": hi[k[0]].tolist(), "x_low": x[k[0]].tolist(),
                       "x_high": x[n + k[0]].tolist()}
    return _report("order_preservation", scn, seed, n, worst, tol, "fraction of jam density",
                   counter, horizon=horizon)


# ---------------------------------------------------------------------------
# free-flow box


def check_P_invariance_attraction(
    scn: Scenario,
    starts: np.ndarray | None = None,
    horizon: float | None = None,
    *,
    n_starts: int = 200,
    seed: int = 0,
    dt: float | None = None,
) -> PropertyReport:
    """Starts in ``P`` never leave it; starts elsewhere reach and stay near it.

    A start outside ``P`` must enter the ``1e-3 C_i`` neighbourhood of ``P``
    within the horizon and remain in it; once inside ``P`` proper it must not
    leave. Margin is ``min (C_i - x_i) / C_i`` over samples that are required
    to lie in ``P``.
    """
    tol = 1e-9
    nbhd = 1e-3
    C = scn.C
    if starts is None:
        rng = np.random.default_rng(seed)
        m = n_starts // 2
        inside = rng.uniform(0, 1, (m, 2)) * C
        outside = _uniform_states(rng, scn, 4 * n_starts)
        outside = outside[np.any(outside > C, axis=1)][: n_starts - m - 2]
        starts = np.vstack([inside, outside, C[None], np.asarray(scn.B)[None]])
    else:
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        seed = None
    horizon = default_horizon(scn, nbhd) if horizon is None else horizon
    n = len(starts)
    in_p = np.all(starts <= C * (1 + tol), axis=1)
    entered_p = in_p.copy()
    entered_n = in_p.copy()
    worst, counter = math.inf, None
    left_nbhd = np.zeros(n, dtype=bool)
    for t, x in flow(scn, starts, horizon, dt):
        slack = np.min((C - x) / C, axis=1)
        now_n = slack >= -nbhd
        left_nbhd |= entered_n & ~now_n
        entered_n |= now_n
        if entered_p.any():
            k = int(np.argmin(np.where(entered_p, slack, np.inf)))
            if slack[k] < worst:
                worst = float(slack[k])
                counter = {"time": t, "start": starts[k].tolist(), "x": x[k].tolist()}
        entered_p |= slack >= -tol
    status = None
    if left_nbhd.any():
        worst = min(worst, -nbhd)
        k = int(np.argmax(left_nbhd))
        counter = {"start": starts[k].tolist(), "reason": "left the neighbourhood of P"}
        status = "fail"
    elif not entered_n.all() and worst >= -tol:
        status = "inconclusive"
    return _report(
        "P_invariance_attraction", scn, seed, n, worst if math.isfinite(worst) else 0.0, tol,
        "fraction of critical density", counter, status, horizon=horizon,
        starts_in_P=int(in_p.sum()), reached_neighbourhood=int(entered_n.sum()),
        entered_P=int(entered_p.sum()),
    )


# ---------------------------------------------------------------------------
# global asymptotic stability


def check_gas(
    scn: Scenario, n_starts: int = 100, tol: float = 1e-7, *, seed: int = 0,
    max_time: float | None = None,
) -> PropertyReport:
    """Latin-hypercube starts over the state box all converge to the equilibrium.

    Distances are relative, ``|x - x_eq| / max(|x_eq|, 1e-3 C)``; the limits must
    agree with each other and with :func:`active_equilibrium` within ``10 tol``.
    """
    sampler = qmc.LatinHypercube(d=2, seed=np.random.default_rng(seed))
    starts = sampler.random(n_starts) * scn.B
    eq = active_equilibrium(scn)
    results = steady_states(scn, starts, max_time=max_time)
    scale = np.maximum(np.abs(eq.state), 1e-3 * scn.C)
    limits = np.array([r.state for r in results])
    dist = np.max(np.abs(limits - eq.state) / scale, axis=1)
    spread = float(np.max(np.ptp(limits, axis=0) / scale))
    converged = np.array([r.converged for r in results])
    bound = 10 * tol
    worst = bound - max(float(dist.max()), spread)
    counter = None
    status = "pass" if worst >= 0 and converged.all() else "fail"
    if status == "fail":
        k = int(np.argmax(np.where(converged, dist, np.inf)))
        counter = {"start": starts[k].tolist(), "limit": limits[k].tolist(),
                   "converged": bool(converged[k]), "equilibrium": eq.state.tolist()}
    return _report("gas", scn, seed, n_starts, worst, 0.0, "relative distance below 10*tol",
                   counter, status, equilibrium=eq.state.tolist(), mode=eq.mode,
                   max_distance=float(dist.max()), spread=spread)


# ---------------------------------------------------------------------------
# equilibrium uniqueness


def check_equilibrium_uniqueness(scn: Scenario) -> PropertyReport:
    """Exactly one active candidate, zero residual, solver agreement (affine)."""
    tol = 1e-9 * scn.demand
    try:
        eq = active_equilibrium(scn)
    except InconsistencyError as exc:
        return _report("equilibrium_uniqueness", scn, None, 1, -math.inf, tol, "veh/km/h",
                       {"error": str(exc)}, "fail")
    residual = float(np.max(np.abs(_field(scn, eq.state))))
    worst = tol - residual
    details = {"mode": eq.mode, "state": eq.state.tolist(), "residual": residual,
               "coincidence": eq.coincidence}
    status = "pass" if residual < tol else "fail"
    if scn.rule.kind == AFFINE:
        gen = general_equilibrium(scn)
        rel = float(np.max(np.abs(gen.state - eq.state) / np.maximum(np.abs(eq.state), 1e-300)))
        details["general_solver_rel_error"] = rel
        if rel > 1e-8 or gen.mode != eq.mode:
            status = "fail"
    counter = None if status == "pass" else {"state": eq.state.tolist()}
    return _report("equilibrium_uniqueness", scn, None, 1, worst, 0.0, "veh/km/h",
                   counter, status, **details)


CHECKS = {
    "k_condition": check_k_condition,
    "order_preservation": check_order_preservation,
    "P_invariance_attraction": check_P_invariance_attraction,
    "gas": check_gas,
    "equilibrium_uniqueness": check_equilibrium_uniqueness,
}


def run_checks(scn: Scenario, names=None, seed: int = 0) -> list[PropertyReport]:
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks {unknown}; known: {list(CHECKS)}")
    out = []
    for name in names:
        fn = CHECKS[name]
        out.append(fn(scn) if name == "equilibrium_uniqueness" else fn(scn, seed=seed))
    return out


# ---------------------------------------------------------------------------
# random scenarios


def random_scenario(rng, kind: str = AFFINE, compliance=(0.1, 50.0), max_tries: int = 1000,
                    alpha=None) -> Scenario:
    """Draw a scenario satisfying the standing assumptions."""
    for _ in range(max_tries):
        routes = []
        for _ in range(2):
            F = rng.uniform(800, 5000)
            C = rng.uniform(10, 60)
            B = C + rng.uniform(40, 250)
            routes.append(RouteParams(F, C, B))
        a = rng.uniform(0.05, 1.0) if alpha is None else alpha
        r1 = rng.uniform(0.05, 0.95)
        lim = min(routes[0].capacity + routes[1].capacity,
                  routes[0].virtual_capacity, routes[1].virtual_capacity)
        phi = rng.uniform(0.2, 0.99) * lim
        comp = rng.uniform(*compliance) if kind == LOGIT else None
        scn = Scenario(routes[0], routes[1], phi, RoutingRule(a, r1, kind, comp))
        if validate_scenario(scn).ok:
            return scn
    raise RuntimeError("could not draw a valid scenario")
