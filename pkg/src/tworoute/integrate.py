"""Time integration of the switched density dynamics.

Classical fixed-step RK4 on the Lipschitz (piecewise smooth) right-hand side,
with optional localization of mode switches by step bisection. Batches of
initial conditions are integrated together as ``(n, 2)`` arrays.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .model import (
    DOMAIN_RTOL,
    LOGIT,
    TRAVEL_TIMES,
    DomainError,
    ModePair,
    RouteMode,
    Scenario,
    _field,
    _flows,
    _mode_codes,
    as_state,
    require_valid,
)

#: default step is 1 / (STEPS_PER_LIPSCHITZ * L), L a Lipschitz bound of the field
STEPS_PER_LIPSCHITZ = 20.0


def lipschitz_bound(scn: Scenario) -> float:
    """Upper bound on the Lipschitz constant of the vector field [1/h]."""
    rule = scn.rule
    if rule.kind == LOGIT:
        dtau = TRAVEL_TIMES[rule.travel_time][1]
        # logistic slope s(1-s) <= 1/4; dtau evaluated on a coarse grid
        grads = [
            np.max(np.abs(dtau(np.linspace(0.0, b, 33), b))) * rule.compliance / 4.0 for b in scn.B
        ]
    else:
        grads = [0.5 / b for b in scn.B]
    ratio_term = scn.demand * rule.penetration_rate * sum(grads)
    return float(np.max(np.maximum(scn.v, scn.w)) + ratio_term)


def slowest_rate(scn: Scenario) -> float:
    """Smallest relaxation rate min_i min(v_i, F_i/(B_i - C_i)) [1/h]."""
    return float(np.min(np.minimum(scn.v, scn.w)))


def default_dt(scn: Scenario) -> float:
    return 1.0 / (STEPS_PER_LIPSCHITZ * lipschitz_bound(scn))


def default_horizon(scn: Scenario, accuracy: float = 1e-9) -> float:
    """Model time long enough to relax from any start to ``accuracy`` relative."""
    span = math.log(float(np.max(scn.B) / np.min(scn.C)) / accuracy)
    return (span + 5.0) / slowest_rate(scn)


def _rk4(scn: Scenario, x: np.ndarray, dt: float) -> np.ndarray:
    lo, hi = 0.0, scn.B
    k1 = _field(scn, x)
    k2 = _field(scn, np.clip(x + 0.5 * dt * k1, lo, hi))
    k3 = _field(scn, np.clip(x + 0.5 * dt * k2, lo, hi))
    k4 = _field(scn, np.clip(x + dt * k3, lo, hi))
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _settle(scn: Scenario, x: np.ndarray) -> np.ndarray:
    tol = DOMAIN_RTOL * scn.B
    if np.any(x < -tol) or np.any(x > scn.B + tol):
        raise DomainError(f"integration left the state box: {x}; step size too large")
    return np.clip(x, 0.0, scn.B)


def _check_dt(dt):
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"time step must be positive, got {dt!r}")


def _check_scenario(scn: Scenario, allow_invalid: bool):
    if not allow_invalid:
        require_valid(scn)


def step(scn: Scenario, x, dt: float) -> np.ndarray:
    """One RK4 step of length ``dt`` [h]; works on a state or a stack of states."""
    _check_dt(dt)
    return _settle(scn, _rk4(scn, as_state(scn, x), dt))


def flow(
    scn: Scenario,
    x0,
    horizon: float,
    dt: float | None = None,
    *,
    allow_invalid: bool = False,
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, x)`` on a uniform grid from ``t = 0`` up to ``horizon``.

    ``x0`` may be a single state or an ``(n, 2)`` batch. The last step is
    shortened so that the final sample lands exactly on ``horizon``.
    """
    _check_scenario(scn, allow_invalid)
    if not (horizon >= 0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be a finite non-negative time, got {horizon!r}")
    dt = default_dt(scn) if dt is None else dt
    _check_dt(dt)
    x = as_state(scn, x0)
    n = int(math.ceil(horizon / dt - 1e-9))
    yield 0.0, x
    t = 0.0
    for k in range(1, n + 1):
        t_next = min(k * dt, horizon)
        x = _settle(scn, _rk4(scn, x, t_next - t))
        t = t_next
        yield t, x


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution of one initial-value problem.

    Arrays share their leading axis with ``times``. ``modes`` holds integer
    :class:`RouteMode` codes; ``rejected`` is the unsatisfied inflow
    ``max(0, phi R_i - S_i)`` [veh/h] at each sample.
    """

    times: np.ndarray
    states: np.ndarray
    modes: np.ndarray
    ratios: np.ndarray
    rejected: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def mode_pairs(self) -> list[ModePair]:
        return [(RouteMode(int(a)), RouteMode(int(b))) for a, b in self.modes]

    def rejected_volume(self) -> np.ndarray:
        """Vehicles turned away per route, rectangle rule over the samples [veh]."""
        dts = np.diff(self.times)
        return (self.rejected[:-1] * dts[:, None]).sum(axis=0)

    def to_csv(self, dest=None) -> str | None:
        """Write ``t,x1,x2,mode1,mode2,R1,R2,rejected1,rejected2`` rows.

        ``dest`` is a path or text stream; with ``None`` the CSV text is returned.
        """
        buf = io.StringIO() if dest is None else None
        if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
            with open(dest, "w", newline="") as fh:
                self._write(fh)
            return None
        self._write(buf if buf is not None else dest)
        return buf.getvalue() if buf is not None else None

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x1", "x2", "mode1", "mode2", "R1", "R2", "rejected1", "rejected2"])
        for t, x, m, r, u in zip(self.times, self.states, self.modes, self.ratios, self.rejected):
            w.writerow(
                [repr(float(t)), repr(float(x[0])), repr(float(x[1])),
                 RouteMode(int(m[0])).name, RouteMode(int(m[1])).name,
                 repr(float(r[0])), repr(float(r[1])), repr(float(u[0])), repr(float(u[1]))]
            )


def _sample(scn: Scenario, x: np.ndarray):
    requested, sup, _ = _flows(scn, x)
    return _mode_codes(scn, x), requested / scn.demand, np.maximum(requested - sup, 0.0)


def integrate(
    scn: Scenario,
    x0,
    horizon: float,
    dt: float | None = None,
    *,
    locate_events: bool = False,
    event_tol: float = 1e-6,
    allow_invalid: bool = False,
) -> Trajectory:
    """Integrate from a single state ``x0`` over ``[0, horizon]`` hours.

    With ``locate_events`` the step in which the mode pair changes is cut back
    by bisection, and two samples less than ``event_tol`` hours apart are
    recorded on either side of the switch; sample times are then non-uniform.
    """
    x0 = as_state(scn, x0)
    if x0.shape != (2,):
        raise ValueError("integrate takes a single initial state; use flow() for batches")
    if not locate_events:
        ts, xs = zip(*flow(scn, x0, horizon, dt, allow_invalid=allow_invalid))
        return _build(scn, np.array(ts), np.array(xs))

    _check_scenario(scn, allow_invalid)
    if not (horizon >= 0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be a finite non-negative time, got {horizon!r}")
    if not event_tol > 0:
        raise ValueError("event_tol must be positive")
    dt = default_dt(scn) if dt is None else dt
    _check_dt(dt)
    ts, xs = [0.0], [x0]
    t, x = 0.0, x0
    modes = _mode_codes(scn, x)
    just_split = False
    while t < horizon - 1e-12 * max(horizon, 1.0):
        h = min(dt, horizon - t)
        nxt = _settle(scn, _rk4(scn, x, h))
        nxt_modes = _mode_codes(scn, nxt)
        if not just_split and np.any(nxt_modes != modes) and h > event_tol:
            lo, hi = 0.0, h
            while hi - lo > event_tol:
                mid = 0.5 * (lo + hi)
                if np.any(_mode_codes(scn, _settle(scn, _rk4(scn, x, mid))) != modes):
                    hi = mid
                else:
                    lo = mid
            if lo > 0:
                # sample just before the switch so that the pair brackets it
                x = _settle(scn, _rk4(scn, x, lo))
                t += lo
                ts.append(t)
                xs.append(x)
            h = hi - lo
            nxt = _settle(scn, _rk4(scn, x, h))
            nxt_modes = _mode_codes(scn, nxt)
            just_split = True
        else:
            just_split = False
        t += h
        x, modes = nxt, nxt_modes
        ts.append(t)
        xs.append(x)
    return _build(scn, np.array(ts), np.array(xs))


def _build(scn: Scenario, times: np.ndarray, states: np.ndarray) -> Trajectory:
    modes, ratios, rejected = _sample(scn, states)
    return Trajectory(times, states, modes, ratios, rejected)


@dataclass(frozen=True)
class SteadyStateResult:
    """Outcome of integrating until the state stops moving.

    Attributes:
        state: final state.
        converged: residual and trailing-window drift both below tolerance.
        residual: max-norm of the vector field at ``state`` [veh/km/h].
        elapsed: model time integrated [h].
        modes: mode pair at ``state``.
    """

    state: np.ndarray
    converged: bool
    residual: float
    elapsed: float
    modes: ModePair


def steady_states(
    scn: Scenario,
    x0s,
    tol: float | None = None,
    max_time: float | None = None,
    dt: float | None = None,
    *,
    window: int = 50,
    allow_invalid: bool = False,
) -> list[SteadyStateResult]:
    """Batch version of :func:`steady_state` for an ``(n, 2)`` array of starts."""
    _check_scenario(scn, allow_invalid)
    tol = 1e-9 * scn.demand if tol is None else tol
    max_time = default_horizon(scn) if max_time is None else max_time
    dt = default_dt(scn) if dt is None else dt
    _check_dt(dt)
    x = np.atleast_2d(as_state(scn, x0s)).copy()
    n = len(x)
    done = np.zeros(n, dtype=bool)
    out_state = np.empty_like(x)
    out_res = np.full(n, np.inf)
    out_time = np.full(n, max_time)
    anchor = x.copy()
    t, k = 0.0, 0
    while t < max_time and not done.all():
        live = ~done
        x[live] = _settle(scn, _rk4(scn, x[live], dt))
        t += dt
        k += 1
        if k % window:
            continue
        res = np.max(np.abs(_field(scn, x)), axis=-1)
        drift = np.max(np.abs(x - anchor), axis=-1)
        hit = live & (res < tol) & (drift < tol)
        out_state[hit], out_res[hit], out_time[hit] = x[hit], res[hit], t
        done |= hit
        anchor = x.copy()
    left = ~done
    if left.any():
        out_state[left] = x[left]
        out_res[left] = np.max(np.abs(_field(scn, x[left])), axis=-1)
    codes = _mode_codes(scn, out_state)
    return [
        SteadyStateResult(
            out_state[i].copy(),
            bool(done[i]),
            float(out_res[i]),
            float(out_time[i]),
            (RouteMode(int(codes[i, 0])), RouteMode(int(codes[i, 1]))),
        )
        for i in range(n)
    ]


def steady_state(
    scn: Scenario,
    x0,
    tol: float | None = None,
    max_time: float | None = None,
    dt: float | None = None,
    *,
    window: int = 50,
    allow_invalid: bool = False,
) -> SteadyStateResult:
    """Integrate from ``x0`` until the vector field and the state drift vanish.

    Converged when ``max|dx/dt| < tol`` and the state moved less than ``tol``
    over the last ``window`` steps (checked every ``window`` steps). ``tol``
    defaults to ``1e-9 * demand``. Non-convergence within ``max_time`` is
    reported through ``converged=False``.
    """
    x0 = as_state(scn, x0)
    if x0.shape != (2,):
        raise ValueError("steady_state takes a single initial state; use steady_states()")
    return steady_states(
        scn, x0[None], tol, max_time, dt, window=window, allow_invalid=allow_invalid
    )[0]
