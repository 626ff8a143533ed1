"""Two-route supply/demand traffic model with app-informed routing.

State is the density pair ``x = (x1, x2)`` [veh/km] on two parallel routes
linking one origin to one destination. Each route follows a triangular
supply/demand law::

    S_i(x_i) = F_i                          if x_i < C_i
             = F_i (B_i - x_i) / (B_i - C_i) otherwise
    D_i(x_i) = v_i x_i                       if x_i < C_i
             = F_i                           otherwise

and the constant demand ``phi`` [veh/h] is split by routing ratios
``R_i(x) = (1 - alpha) r_i0 + alpha r_i(tau(x))``. The density dynamics are::

    dx_i/dt = min(phi R_i(x), S_i(x_i)) - D_i(x_i)

Units are hours and kilometres throughout. All functions accept a single
state (length-2 sequence) or a stack of states with trailing axis of size 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

#: Relative slack (times the jam density) allowed outside the state box before
#: a state is rejected; states inside the slack are clamped onto the box.
DOMAIN_RTOL = 1e-9

AFFINE = "affine"
LOGIT = "logit"


class DomainError(ValueError):
    """A density lies outside ``[0, B_i]`` beyond the clamp tolerance."""


# name -> (tau(x, B), dtau/dx(x, B)); tau must be C^1 and strictly increasing.
TRAVEL_TIMES: dict[str, tuple[Callable, Callable]] = {
    "congestion_index": (lambda x, jam: x / jam, lambda x, jam: 1.0 / jam + 0.0 * x),
}


def _route_problems(name: str, capacity, critical, jam) -> list[str]:
    out = []
    for key, val in (("capacity", capacity), ("critical_density", critical), ("jam_density", jam)):
        if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
            out.append(f"{name}.{key} must be a finite positive number, got {val!r}")
    if not out and critical >= jam:
        out.append(f"{name}: critical density {critical} must be below jam density {jam}")
    return out


def _rule_problems(alpha, split1, kind, compliance, travel_time) -> list[str]:
    out = []
    if not (isinstance(alpha, (int, float)) and 0.0 <= alpha <= 1.0):
        out.append(f"penetration rate must lie in [0, 1], got {alpha!r}")
    if not (isinstance(split1, (int, float)) and 0.0 <= split1 <= 1.0):
        out.append(f"fixed split of route 1 must lie in [0, 1], got {split1!r}")
    if kind not in (AFFINE, LOGIT):
        out.append(f"routing kind must be 'affine' or 'logit', got {kind!r}")
    if kind == LOGIT and not (
        isinstance(compliance, (int, float)) and math.isfinite(compliance) and compliance > 0
    ):
        out.append(f"logit routing needs a finite positive compliance, got {compliance!r}")
    if travel_time not in TRAVEL_TIMES:
        out.append(f"unknown travel time {travel_time!r}; known: {sorted(TRAVEL_TIMES)}")
    return out


@dataclass(frozen=True)
class RouteParams:
    """Physical constants of one route.

    Attributes:
        capacity: Maximum flow F [veh/h].
        critical_density: Density C at which outflow saturates [veh/km].
        jam_density: Density B at which the route is full [veh/km].
    """

    capacity: float
    critical_density: float
    jam_density: float

    def __post_init__(self):
        problems = _route_problems("route", self.capacity, self.critical_density, self.jam_density)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def free_flow_speed(self) -> float:
        """v = F / C [km/h]."""
        return self.capacity / self.critical_density

    @property
    def virtual_capacity(self) -> float:
        """E = v B [veh/h]."""
        return self.free_flow_speed * self.jam_density

    @property
    def congested_slope(self) -> float:
        """Slope F / (B - C) of the congested supply branch [km/h]."""
        return self.capacity / (self.jam_density - self.critical_density)


@dataclass(frozen=True)
class RoutingRule:
    """How demand is split between the two routes.

    A fraction ``penetration_rate`` of drivers follows the navigation app; the
    rest splits by the fixed ratios ``(fixed_split_1, 1 - fixed_split_1)``.

    ``compliance`` is 1/eta of the logit rule. ``penetration_rate = 0`` is
    accepted so that sweeps can include the endpoint; see :attr:`degenerate`.
    """

    penetration_rate: float
    fixed_split_1: float
    kind: str = AFFINE
    compliance: float | None = None
    travel_time: str = "congestion_index"

    def __post_init__(self):
        problems = _rule_problems(
            self.penetration_rate, self.fixed_split_1, self.kind, self.compliance, self.travel_time
        )
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def fixed_split(self) -> tuple[float, float]:
        return (self.fixed_split_1, 1.0 - self.fixed_split_1)

    @property
    def degenerate(self) -> bool:
        """True when nobody uses the app (alpha = 0)."""
        return self.penetration_rate == 0.0


@dataclass(frozen=True)
class Scenario:
    """Full parameterization of the two-route model."""

    route1: RouteParams
    route2: RouteParams
    demand: float
    rule: RoutingRule

    def __post_init__(self):
        d = self.demand
        if not (isinstance(d, (int, float)) and math.isfinite(d) and d > 0):
            raise ValueError(f"demand must be a finite positive number, got {d!r}")

    @property
    def routes(self) -> tuple[RouteParams, RouteParams]:
        return (self.route1, self.route2)

    @property
    def alpha(self) -> float:
        return self.rule.penetration_rate

    def _vec(self, attr: str) -> np.ndarray:
        a = np.array([getattr(r, attr) for r in self.routes], dtype=float)
        a.setflags(write=False)
        return a

    # Per-route constants as read-only length-2 arrays, for vectorized use.
    @cached_property
    def F(self) -> np.ndarray:
        return self._vec("capacity")

    @cached_property
    def C(self) -> np.ndarray:
        return self._vec("critical_density")

    @cached_property
    def B(self) -> np.ndarray:
        return self._vec("jam_density")

    @cached_property
    def v(self) -> np.ndarray:
        return self._vec("free_flow_speed")

    @cached_property
    def E(self) -> np.ndarray:
        return self._vec("virtual_capacity")

    @cached_property
    def w(self) -> np.ndarray:
        return self._vec("congested_slope")

    def replace(self, *, demand: float | None = None, **rule_changes) -> "Scenario":
        """Copy with a new demand and/or routing-rule fields."""
        from dataclasses import replace

        rule = replace(self.rule, **rule_changes) if rule_changes else self.rule
        return Scenario(self.route1, self.route2, self.demand if demand is None else demand, rule)


class TrafficState(NamedTuple):
    """Density pair [veh/km]."""

    x1: float
    x2: float


class RouteMode(Enum):
    """Route mode: Satisfied/Unsatisfied demand x Free-flow/Congested."""

    SF = 0
    UF = 1
    SC = 2
    UC = 3

    @property
    def congested(self) -> bool:
        return self.value >= 2

    @property
    def unsatisfied(self) -> bool:
        return self.value % 2 == 1


ModePair = tuple[RouteMode, RouteMode]


def mode_label(pair: Sequence[RouteMode]) -> str:
    """``(SF, UF)`` -> ``'SF-UF'``."""
    return f"{pair[0].name}-{pair[1].name}"


# ---------------------------------------------------------------------------
# state domain


def _clamp(x, low, high, scale):
    x = np.asarray(x, dtype=float)
    tol = DOMAIN_RTOL * np.asarray(scale, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < low - tol) or np.any(x > high + tol):
        raise DomainError(
            f"density {x.tolist()} outside [{np.asarray(low).tolist()}, "
            f"{np.asarray(high).tolist()}] beyond relative tolerance {DOMAIN_RTOL:g}"
        )
    return np.clip(x, low, high)


def as_state(scn: Scenario, x) -> np.ndarray:
    """Validate ``x`` against the box [0, B1] x [0, B2] and clamp roundoff.

    Returns a float array with trailing axis of size 2.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (2,):
        raise ValueError(f"state must have trailing dimension 2, got shape {x.shape}")
    return _clamp(x, 0.0, scn.B, scn.B)


def _scalar_out(val):
    return float(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# fundamental diagram


def supply(route: RouteParams, x):
    """Maximum inflow the route accepts at density ``x`` [veh/h]."""
    x = _clamp(x, 0.0, route.jam_density, route.jam_density)
    out = np.where(
        x < route.critical_density, route.capacity, route.congested_slope * (route.jam_density - x)
    )
    return _scalar_out(out)


def demand_fn(route: RouteParams, x):
    """Outflow of the route at density ``x`` [veh/h]."""
    x = _clamp(x, 0.0, route.jam_density, route.jam_density)
    out = np.where(x < route.critical_density, route.free_flow_speed * x, route.capacity)
    return _scalar_out(out)


# ---------------------------------------------------------------------------
# routing ratios


def _app_share_1(scn: Scenario, x1, x2):
    """State-dependent share r_1(tau(x)) of app users sent to route 1."""
    rule = scn.rule
    B1, B2 = scn.B
    if rule.kind == AFFINE:
        return 0.5 + 0.5 * (x2 / B2 - x1 / B1)
    tau = TRAVEL_TIMES[rule.travel_time][0]
    d = tau(x2, B2) - tau(x1, B1)
    r1, r2 = rule.fixed_split
    # r1 / (r1 + r2 exp(-d/eta)) is the logit term written without r2/r1
    return r1 / (r1 + r2 * np.exp(np.minimum(-rule.compliance * d, 700.0)))


def _app_share_1_grad(scn: Scenario, x1, x2):
    """(d r_1/d x1, d r_1/d x2)."""
    rule = scn.rule
    B1, B2 = scn.B
    if rule.kind == AFFINE:
        return -0.5 / B1 + 0.0 * x1, 0.5 / B2 + 0.0 * x2
    _, dtau = TRAVEL_TIMES[rule.travel_time]
    s = _app_share_1(scn, x1, x2)
    k = rule.compliance * s * (1.0 - s)
    return -k * dtau(x1, B1), k * dtau(x2, B2)


def _ratio_1(scn: Scenario, x1, x2):
    a = scn.rule.penetration_rate
    return (1.0 - a) * scn.rule.fixed_split_1 + a * _app_share_1(scn, x1, x2)


def routing_ratios(scn: Scenario, x) -> np.ndarray:
    """Routing ratios ``(R1, R2)``; ``R2`` is computed as ``1 - R1``."""
    x = as_state(scn, x)
    r1 = _ratio_1(scn, x[..., 0], x[..., 1])
    return np.stack([r1, 1.0 - r1], axis=-1)


def ratio_partials(scn: Scenario, x) -> np.ndarray:
    """Jacobian ``M[i, j] = dR_i/dx_j`` at a single state."""
    x = as_state(scn, x)
    if x.shape != (2,):
        raise ValueError("ratio_partials expects a single state")
    a = scn.rule.penetration_rate
    g1, g2 = _app_share_1_grad(scn, x[0], x[1])
    row = a * np.array([g1, g2], dtype=float)
    return np.stack([row, -row])


# ---------------------------------------------------------------------------
# vector field and modes


def _flows(scn: Scenario, x: np.ndarray):
    """Requested inflow phi R, supply S and outflow D for states in the box."""
    r1 = _ratio_1(scn, x[..., 0], x[..., 1])
    requested = scn.demand * np.stack([r1, 1.0 - r1], axis=-1)
    free = x < scn.C
    sup = np.where(free, scn.F, scn.w * (scn.B - x))
    out = np.where(free, scn.v * x, scn.F)
    return requested, sup, out


def _field(scn: Scenario, x: np.ndarray) -> np.ndarray:
    requested, sup, out = _flows(scn, x)
    return np.minimum(requested, sup) - out


def vector_field(scn: Scenario, x) -> np.ndarray:
    """Right-hand side ``dx/dt`` [veh/km/h]."""
    return _field(scn, as_state(scn, x))


def rejected_inflow(scn: Scenario, x) -> np.ndarray:
    """Unsatisfied demand ``max(0, phi R_i - S_i)`` per route [veh/h]."""
    requested, sup, _ = _flows(scn, as_state(scn, x))
    return np.maximum(requested - sup, 0.0)


def _mode_codes(scn: Scenario, x: np.ndarray) -> np.ndarray:
    requested, sup, _ = _flows(scn, x)
    congested = x > scn.C
    unsatisfied = requested > sup  # ties count as satisfied
    return 2 * congested.astype(int) + unsatisfied.astype(int)


def mode_codes(scn: Scenario, x) -> np.ndarray:
    """Integer :class:`RouteMode` values, same leading shape as ``x``."""
    return _mode_codes(scn, as_state(scn, x))


def classify_mode(scn: Scenario, x) -> ModePair:
    """Mode pair of a single state.

    Free-flow iff ``x_i <= C_i``; satisfied iff ``phi R_i(x) <= S_i(x_i)``.
    """
    codes = mode_codes(scn, x)
    if codes.shape != (2,):
        raise ValueError("classify_mode expects a single state")
    return (RouteMode(int(codes[0])), RouteMode(int(codes[1])))


# ---------------------------------------------------------------------------
# standing assumptions


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    inequality: str
    margin: float  # positive when satisfied

    @property
    def passed(self) -> bool:
        return self.margin > 0


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[AssumptionCheck, ...]
    notes: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def describe(self) -> str:
        lines = []
        for c in self.checks:
            status = "ok  " if c.passed else "FAIL"
            lines.append(f"{status} {c.name}: {c.inequality} (margin {c.margin:.6g})")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


class AssumptionError(ValueError):
    """Scenario violates the standing assumptions required by an operation."""

    def __init__(self, report: ValidationReport):
        self.report = report
        names = ", ".join(c.name for c in report.failures)
        super().__init__(f"scenario violates {names}\n{report.describe()}")


def validate_scenario(scn: Scenario) -> ValidationReport:
    """Check network dimensioning, fixed-split capacity and virtual capacity.

    Every check is always evaluated, so all failures are reported together.
    """
    phi, a = scn.demand, scn.alpha
    F, E = scn.F, scn.E
    r = scn.rule.fixed_split
    checks = [
        AssumptionCheck(
            "well-dimensioned network", "phi < F1 + F2", float(F[0] + F[1] - phi)
        )
    ]
    for i in range(2):
        checks.append(
            AssumptionCheck(
                f"fixed split within capacity (route {i + 1})",
                f"F{i + 1} > (1 - alpha) phi r{i + 1}0",
                float(F[i] - (1.0 - a) * phi * r[i]),
            )
        )
    for i in range(2):
        checks.append(
            AssumptionCheck(
                f"demand below virtual capacity (route {i + 1})",
                f"phi < E{i + 1}",
                float(E[i] - phi),
            )
        )
    notes = ()
    if scn.rule.degenerate:
        notes = ("penetration rate is 0: no app users; accepted for analysis sweeps only",)
    return ValidationReport(tuple(checks), notes)


def require_valid(scn: Scenario) -> ValidationReport:
    report = validate_scenario(scn)
    if not report.ok:
        raise AssumptionError(report)
    return report
