"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a one-line verdict; the lines are printed in the pytest
terminal summary and when this file is run directly with ``python3``.
"""

import time

import numpy as np

from tworoute.analysis import (
    J_at_alpha,
    dJ_dalpha,
    grenoble_scenario,
    make_grid,
    regime_classify,
    sf_sf_alpha_interval,
    sweep,
)
from tworoute.equilibrium import (
    active_equilibrium,
    alpha_threshold,
    effective_capacity,
    general_equilibrium,
)
from tworoute.integrate import steady_state, steady_states
from tworoute.model import LOGIT, rejected_inflow, validate_scenario
from tworoute.verify import (
    check_k_condition,
    check_order_preservation,
    check_P_invariance_attraction,
    random_scenario,
)

RESULTS: dict[int, str] = {}


def record(number, title, ok, detail, started):
    verdict = "PASS" if ok else "FAIL"
    RESULTS[number] = (f"criterion {number:>2} {verdict}  {title}: {detail} "
                       f"[{time.perf_counter() - started:.1f} s]")
    assert ok, RESULTS[number]


def rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.abs(np.asarray(b))))


def test_criterion_01_alpha_threshold():
    t0 = time.perf_counter()
    value = alpha_threshold(grenoble_scenario(3000.0), 2).value
    record(1, "Grenoble threshold alpha_lower_2 in [0.6896, 0.6916]",
           0.6896 <= value <= 0.6916, f"{value:.6f}", t0)


def test_criterion_02_efficiency_minimum():
    t0 = time.perf_counter()
    scn = grenoble_scenario(2000.0)
    alpha_bar = regime_classify(scn).alpha_bar
    res = sweep(scn, "alpha", make_grid(0.0, 1.0, 0.001))
    argmin = float(res.params[int(np.argmin(res.column("J")))])
    ok = 0.139 <= alpha_bar <= 0.145 and abs(argmin - alpha_bar) <= 0.002
    record(2, "alpha_bar in [0.139, 0.145], sweep argmin within 0.002",
           ok, f"alpha_bar={alpha_bar:.6f}, argmin={argmin:.3f}", t0)


def test_criterion_03_moderate_demand():
    t0 = time.perf_counter()
    scn = grenoble_scenario(2000.0)
    lows = [alpha_threshold(scn, i).value for i in (1, 2)]
    res = sweep(scn, "alpha", make_grid(0.0, 1.0, 0.01))
    u_max = float(max(res.column("unsat1").max(), res.column("unsat2").max()))
    ok = all(v > 1 for v in lows) and u_max == 0.0
    record(3, "phi=2000: both thresholds above 1, no unsatisfied demand",
           ok, f"thresholds={lows[0]}, {lows[1]:.4f}; max u={u_max}", t0)


def test_criterion_04_unsatisfied_onset():
    t0 = time.perf_counter()
    scn = grenoble_scenario(3000.0)
    a2 = alpha_threshold(scn, 2).value
    res = sweep(scn, "alpha", make_grid(0.0, 1.0, 0.005))
    alpha, u2 = res.params, res.column("unsat2")
    below, above = alpha < a2, alpha > a2
    ok = (np.all(u2[below] == 0) and np.all(u2[above] > 0)
          and np.all(np.diff(u2[above]) >= 0))
    first = float(alpha[above][0])
    record(4, "phi=3000: u2 zero below threshold, positive and nondecreasing above",
           ok, f"threshold={a2:.5f}, first positive row={first:.3f}, rows={len(alpha)}", t0)


def test_criterion_05_closed_form_vs_ode():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    worst, unconverged = 0.0, 0
    for _ in range(20):
        scn = random_scenario(rng)
        eq = active_equilibrium(scn).state
        for r in steady_states(scn, rng.uniform(0, 1, (100, 2)) * scn.B):
            unconverged += not r.converged
            worst = max(worst, rel(r.state, eq))
    record(5, "20 scenarios x 100 starts, steady state vs closed form < 1e-6",
           worst < 1e-6 and unconverged == 0,
           f"worst rel err={worst:.2e}, unconverged={unconverged}", t0)


def test_criterion_06_derivative():
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    h = 1e-5
    worst, scenarios, points = 0.0, 0, 0
    while scenarios < 50:
        scn = random_scenario(rng)
        win = sf_sf_alpha_interval(scn)
        if win is None or win[1] - win[0] < 0.05:
            continue
        alphas = np.linspace(win[0] + 2 * h, win[1] - 2 * h, 20)
        # the assumption margins are monotone in alpha, so the two ends suffice
        if not all(validate_scenario(scn.replace(penetration_rate=a)).ok
                   for a in (alphas[0] - h, alphas[-1] + h)):
            continue
        scenarios += 1
        for a in alphas:
            fd = (J_at_alpha(scn, a + h) - J_at_alpha(scn, a - h)) / (2 * h)
            worst = max(worst, abs(dJ_dalpha(scn, a) - fd) / abs(fd))
            points += 1
    record(6, "analytic dJ/dalpha vs central differences (h=1e-5) < 1e-5",
           worst < 1e-5, f"{scenarios} scenarios, {points} points, worst rel err={worst:.2e}", t0)


def test_criterion_07_effective_capacity_boundary():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    failures, n = [], 0
    while n < 20:
        scn = random_scenario(rng)
        ec = effective_capacity(scn)
        m, i = float(ec.values.min()), ec.argmin
        below, above = scn.replace(demand=0.99 * m), scn.replace(demand=1.01 * m)
        if not (validate_scenario(below).ok and validate_scenario(above).ok):
            continue
        n += 1
        rb, ra = steady_state(below, [0, 0]), steady_state(above, [0, 0])
        ub, ua = rejected_inflow(below, rb.state), rejected_inflow(above, ra.state)
        if not (rb.converged and ra.converged and np.all(ub == 0) and ua[i] > 0):
            failures.append((ub.tolist(), ua.tolist()))
    record(7, "20 scenarios: no unsatisfied demand at 0.99 min F_eff, some at 1.01",
           not failures, f"failures={len(failures)}", t0)


def test_criterion_08_monotonicity_and_k_condition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_order, pairs = np.inf, 0
    for k in range(10):
        scn = random_scenario(rng, kind=(LOGIT if k % 2 else "affine"))
        rep = check_order_preservation(scn, n_pairs=100, seed=k)
        worst_order = min(worst_order, rep.worst_margin)
        pairs += rep.samples
    worst_k, k_pairs, straddling = np.inf, 0, 0
    scenarios = [grenoble_scenario(3000.0), grenoble_scenario(3000.0, 0.9)]
    scenarios += [random_scenario(rng, kind=kind) for kind in ("affine", LOGIT)]
    for k, scn in enumerate(scenarios):
        rep = check_k_condition(scn, samples=10_000, seed=k)
        worst_k = min(worst_k, rep.worst_margin / scn.demand)
        k_pairs += rep.samples
        straddling += rep.details["straddling_pairs"]
    ok = worst_order >= -1e-9 and worst_k >= -1e-9 and pairs >= 1000 and k_pairs >= 10_000
    record(8, "ordered trajectories and K-condition, slack 1e-9",
           ok and straddling > 0,
           f"{pairs} trajectory pairs (worst {worst_order:.1e}), {k_pairs} K pairs "
           f"({straddling} across a saturation curve, worst {worst_k:.1e})", t0)


def test_criterion_09_free_flow_box():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    starts_total, entered, statuses = 0, 0, []
    for k in range(10):
        scn = random_scenario(rng, kind=(LOGIT if k % 2 else "affine"))
        x = rng.uniform(0, 1, (1000, 2)) * scn.B
        x = x[np.any(x > scn.C, axis=1)][:100]
        rep = check_P_invariance_attraction(scn, starts=x)
        statuses.append(rep.status)
        starts_total += len(x)
        entered += rep.details["reached_neighbourhood"]
    ok = starts_total >= 1000 and all(s == "pass" for s in statuses) and entered == starts_total
    record(9, "starts outside the free-flow box enter it and stay",
           ok, f"{entered}/{starts_total} reached the 1e-3 C neighbourhood, "
               f"statuses={sorted(set(statuses))}", t0)


def test_criterion_10_solver_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(10)
    worst_aff, mode_mismatch = 0.0, 0
    for _ in range(1000):
        scn = random_scenario(rng)
        a, g = active_equilibrium(scn), general_equilibrium(scn)
        worst_aff = max(worst_aff, rel(g.state, a.state))
        mode_mismatch += a.mode != g.mode
    worst_logit, unconverged = 0.0, 0
    for _ in range(100):
        scn = random_scenario(rng, kind=LOGIT)
        g = general_equilibrium(scn)
        r = steady_state(scn, [0.0, 0.0])
        unconverged += not r.converged
        worst_logit = max(worst_logit, rel(r.state, g.state))
    ok = worst_aff < 1e-8 and mode_mismatch == 0 and worst_logit < 1e-6 and unconverged == 0
    record(10, "general solver: affine vs closed form < 1e-8, logit is ODE steady state < 1e-6",
           ok, f"affine worst={worst_aff:.1e} over 1000, logit worst={worst_logit:.1e} over 100",
           t0)


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    for k in sorted(RESULTS):
        print(RESULTS[k])
    sys.exit(1 if failed else 0)
