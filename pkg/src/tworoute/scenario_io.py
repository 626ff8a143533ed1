"""Scenario files: strict YAML documents with unit-carrying keys.

Example::

    route1:
      capacity_veh_per_h: 3500
      critical_density_veh_per_km: 41.2
      jam_density_veh_per_km: 250
    route2:
      capacity_veh_per_h: 1100
      critical_density_veh_per_km: 22
      jam_density_veh_per_km: 120
    demand_veh_per_h: 2000
    penetration_rate: 0.5
    fixed_split_route1: 0.8261
    routing:
      kind: affine          # or logit, which also needs `compliance`
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path

import yaml

from .model import (
    AFFINE,
    LOGIT,
    RouteParams,
    RoutingRule,
    Scenario,
    _route_problems,
    _rule_problems,
    validate_scenario,
)

ROUTE_KEYS = ("capacity_veh_per_h", "critical_density_veh_per_km", "jam_density_veh_per_km")
TOP_KEYS = ("route1", "route2", "demand_veh_per_h", "penetration_rate", "fixed_split_route1",
            "routing")
ROUTING_KEYS = ("kind", "compliance", "travel_time")


class ScenarioFileError(ValueError):
    """Scenario file could not be turned into a scenario.

    ``problems`` lists every issue found, not just the first.
    """

    def __init__(self, source: str, problems: list[str]):
        self.source = source
        self.problems = list(problems)
        super().__init__(f"{source}:\n  " + "\n  ".join(self.problems))


class ScenarioParseError(ScenarioFileError):
    """Malformed document, missing or unknown keys, non-numeric values."""


class ScenarioValidationError(ScenarioFileError):
    """Well-formed file whose values violate model constraints or assumptions."""


def _line_map(node, prefix="") -> dict[str, int]:
    """Dotted key path -> 1-based line number, from a composed YAML node."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = f"{prefix}{k.value}"
            out[path] = k.start_mark.line + 1
            out.update(_line_map(v, path + "."))
    return out


def _number(doc, key, path, lines, problems):
    if key not in doc:
        problems.append(f"missing key '{path}'")
        return None
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        problems.append(f"line {lines.get(path, '?')}: '{path}' must be a finite number, got {val!r}")
        return None
    return float(val)


def _unknown(doc, allowed, prefix, lines, problems):
    for key in doc:
        if key not in allowed:
            path = f"{prefix}{key}"
            problems.append(f"line {lines.get(path, '?')}: unknown key '{path}'")


def scenario_from_text(text: str, source: str = "<string>", *, validate: bool = True) -> Scenario:
    """Parse scenario YAML text; see :func:`parse_scenario`."""
    try:
        node = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(source, [f"malformed YAML: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ScenarioParseError(source, ["document must be a mapping"])
    lines = _line_map(node)
    problems: list[str] = []
    _unknown(doc, TOP_KEYS, "", lines, problems)

    routes = []
    for name in ("route1", "route2"):
        sub = doc.get(name)
        if not isinstance(sub, dict):
            problems.append(f"missing section '{name}'" if sub is None
                            else f"line {lines.get(name, '?')}: '{name}' must be a mapping")
            routes.append(None)
            continue
        _unknown(sub, ROUTE_KEYS, name + ".", lines, problems)
        routes.append([_number(sub, k, f"{name}.{k}", lines, problems) for k in ROUTE_KEYS])

    phi = _number(doc, "demand_veh_per_h", "demand_veh_per_h", lines, problems)
    alpha = _number(doc, "penetration_rate", "penetration_rate", lines, problems)
    split = _number(doc, "fixed_split_route1", "fixed_split_route1", lines, problems)

    routing = doc.get("routing")
    kind, compliance, travel = None, None, "congestion_index"
    if not isinstance(routing, dict):
        problems.append("missing section 'routing'" if routing is None
                        else f"line {lines.get('routing', '?')}: 'routing' must be a mapping")
    else:
        _unknown(routing, ROUTING_KEYS, "routing.", lines, problems)
        kind = routing.get("kind")
        if kind is None:
            problems.append("missing key 'routing.kind'")
        elif kind not in (AFFINE, LOGIT):
            problems.append(f"line {lines.get('routing.kind', '?')}: 'routing.kind' must be "
                            f"affine or logit, got {kind!r}")
        if kind == LOGIT:
            compliance = _number(routing, "compliance", "routing.compliance", lines, problems)
        elif "compliance" in routing:
            problems.append(f"line {lines.get('routing.compliance', '?')}: "
                            "'routing.compliance' only applies to logit routing")
        travel = routing.get("travel_time", travel)
    if problems:
        raise ScenarioParseError(source, problems)

    # structural constraints, all collected
    for name, vals in zip(("route1", "route2"), routes):
        problems += _route_problems(name, *vals)
    problems += _rule_problems(alpha, split, kind, compliance, travel)
    if phi <= 0:
        problems.append(f"demand_veh_per_h must be positive, got {phi}")
    if problems:
        raise ScenarioValidationError(source, problems)

    scn = Scenario(
        RouteParams(*routes[0]),
        RouteParams(*routes[1]),
        phi,
        RoutingRule(alpha, split, kind, compliance, travel),
    )
    if validate:
        report = validate_scenario(scn)
        if not report.ok:
            raise ScenarioValidationError(
                source,
                [f"assumption '{c.name}' violated: {c.inequality} (margin {c.margin:.6g})"
                 for c in report.failures],
            )
    return scn


def parse_scenario(path, *, validate: bool = True) -> Scenario:
    """Read a scenario file.

    Raises :class:`ScenarioParseError` (with line/key context) or
    :class:`ScenarioValidationError` listing every violated constraint. With
    ``validate=False`` the standing assumptions are not enforced, which is only
    meant for exploratory simulation.
    """
    path = Path(path)
    return scenario_from_text(path.read_text(), str(path), validate=validate)


def scenario_to_dict(scn: Scenario) -> dict:
    def route(r: RouteParams):
        return {
            "capacity_veh_per_h": r.capacity,
            "critical_density_veh_per_km": r.critical_density,
            "jam_density_veh_per_km": r.jam_density,
        }

    routing = {"kind": scn.rule.kind}
    if scn.rule.kind == LOGIT:
        routing["compliance"] = scn.rule.compliance
    if scn.rule.travel_time != "congestion_index":
        routing["travel_time"] = scn.rule.travel_time
    return {
        "route1": route(scn.route1),
        "route2": route(scn.route2),
        "demand_veh_per_h": scn.demand,
        "penetration_rate": scn.rule.penetration_rate,
        "fixed_split_route1": scn.rule.fixed_split_1,
        "routing": routing,
    }


def scenario_to_text(scn: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(scn), sort_keys=False)


def write_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(scenario_to_text(scn))


BUNDLED = ("grenoble_phi2000", "grenoble_phi3000", "symmetric")


def bundled_path(name: str):
    """Path-like handle to a bundled scenario file."""
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled scenario {name!r}; known: {BUNDLED}")
    return resources.files("tworoute") / "data" / f"{name}.yaml"


def bundled_scenario(name: str) -> Scenario:
    ref = bundled_path(name)
    return scenario_from_text(ref.read_text(), name)
