import csv
import io
import json

import numpy as np
import pytest

from oracles import J_oracle
from tworoute.analysis import (
    SWEEP_COLUMNS,
    J_at_alpha,
    RegimeError,
    dJ_dalpha,
    grenoble_scenario,
    make_grid,
    performance_J,
    regime_classify,
    sf_sf_alpha_interval,
    sweep,
)
from tworoute.equilibrium import active_equilibrium, affine_candidates, effective_capacity
from tworoute.model import LOGIT, RouteParams, RoutingRule, Scenario, validate_scenario
from tworoute.verify import random_scenario


def sf_sf_scenarios(rng, n, margin=0.0):
    """Random affine scenarios whose SF-SF window is a nondegenerate interval."""
    out = []
    while len(out) < n:
        scn = random_scenario(rng)
        win = sf_sf_alpha_interval(scn)
        if win is not None and win[1] - win[0] > 2 * margin + 1e-3:
            out.append((scn, win))
    return out


# --- J ---------------------------------------------------------------------


def test_J_examples(grenoble2000, symmetric):
    assert performance_J(grenoble2000, [0, 0]) == 0.0
    eq = active_equilibrium(symmetric).state
    assert performance_J(symmetric, eq) == pytest.approx(1000**2 / (2 * 5000), rel=1e-14)


def test_J_at_zero_penetration(rng):
    for scn in [grenoble_scenario(2000.0)] + [random_scenario(rng) for _ in range(50)]:
        s = scn.replace(penetration_rate=0.0)
        if not validate_scenario(s).ok:
            continue
        phi, (r1, r2) = s.demand, s.rule.fixed_split
        E1, E2 = s.E
        expected = phi**2 * r1**2 / E1 + phi**2 * r2**2 / E2
        assert performance_J(s, affine_candidates(s)[0]) == pytest.approx(expected, rel=1e-12)


def test_J_at_alpha_matches_oracle(rng):
    for scn, win in sf_sf_scenarios(rng, 30):
        for a in np.linspace(*win, 7):
            if validate_scenario(scn.replace(penetration_rate=a)).ok:
                assert J_at_alpha(scn, a) == pytest.approx(J_oracle(scn, a), rel=1e-11)


# --- derivative ------------------------------------------------------------


def test_derivative_vanishes_for_symmetric(symmetric):
    for a in np.linspace(0, 1, 11):
        assert dJ_dalpha(symmetric, a) == 0.0


def test_derivative_sign_change_at_alpha_bar(grenoble2000):
    rc = regime_classify(grenoble2000)
    assert dJ_dalpha(grenoble2000, rc.alpha_bar - 1e-3) < 0
    assert dJ_dalpha(grenoble2000, rc.alpha_bar + 1e-3) > 0
    assert dJ_dalpha(grenoble2000, rc.alpha_bar) == pytest.approx(0.0, abs=1e-9)


def test_derivative_matches_finite_differences(rng):
    h = 1e-5
    for scn, win in sf_sf_scenarios(rng, 40, margin=h):
        for a in np.linspace(win[0] + h, win[1] - h, 9):
            if not (validate_scenario(scn.replace(penetration_rate=a - h)).ok
                    and validate_scenario(scn.replace(penetration_rate=a + h)).ok):
                continue
            fd = (J_oracle(scn, a + h) - J_oracle(scn, a - h)) / (2 * h)
            an = dJ_dalpha(scn, a)
            assert an == pytest.approx(fd, rel=1e-5, abs=1e-7 * J_oracle(scn, a))


def test_derivative_at_0_3_on_grenoble(grenoble2000):
    h = 1e-5
    fd = (J_oracle(grenoble2000, 0.3 + h) - J_oracle(grenoble2000, 0.3 - h)) / (2 * h)
    assert dJ_dalpha(grenoble2000, 0.3) == pytest.approx(fd, rel=1e-6)


def test_derivative_outside_regime(grenoble3000):
    with pytest.raises(RegimeError):
        dJ_dalpha(grenoble3000, 0.9)
    with pytest.raises(ValueError):
        dJ_dalpha(grenoble3000.replace(kind=LOGIT, compliance=1.0), 0.5)


# --- classification --------------------------------------------------------


def test_grenoble_classification(grenoble2000):
    rc = regime_classify(grenoble2000)
    assert rc.case == "E1>=E2, r1>=xi1"
    assert rc.monotonicity == "minimum_at_alpha_bar"
    assert rc.xi1 == pytest.approx(0.7797, abs=1e-4)
    assert rc.alpha_bar == pytest.approx(0.142, abs=1e-3)
    assert 0.139 <= rc.alpha_bar <= 0.145
    json.dumps(rc.to_dict())


def test_low_fixed_split_decreasing(grenoble2000):
    scn = grenoble2000.replace(fixed_split_1=0.3)
    rc = regime_classify(scn)
    assert rc.case == "E1>=E2, r1<1/2"
    assert rc.monotonicity == "decreasing"


def test_symmetric_is_constant(symmetric):
    rc = regime_classify(symmetric)
    assert rc.monotonicity == "constant"
    assert rc.c == 0 and rc.d == 0


def test_classification_never_contradicted_by_sampled_sign(rng):
    checked = 0
    for scn, win in sf_sf_scenarios(rng, 60):
        rc = regime_classify(scn)
        alphas = np.linspace(win[0], win[1], 120)
        for a in alphas:
            if not validate_scenario(scn.replace(penetration_rate=a)).ok:
                continue
            if np.isfinite(rc.alpha_bar) and abs(a - rc.alpha_bar) < 1e-6:
                continue
            s = dJ_dalpha(scn, a)
            m = rc.monotonicity
            if m == "decreasing":
                assert s <= 0
            elif m == "increasing":
                assert s >= 0
            elif m == "minimum_at_alpha_bar":
                assert (s <= 0) == (a < rc.alpha_bar) or s == 0
            elif m == "maximum_at_alpha_bar":
                assert (s >= 0) == (a < rc.alpha_bar) or s == 0
            else:
                assert s == 0
            checked += 1
    assert checked > 5000


def test_printed_branches_agree_with_sign_analysis(rng):
    """Away from boundaries, the branch table and the sign analysis coincide."""
    agree = 0
    for scn, win in sf_sf_scenarios(rng, 300):
        rc = regime_classify(scn)
        if rc.notes and "window" not in " ".join(rc.notes):
            continue
        if rc.monotonicity == rc.sign_pattern:
            agree += 1
    assert agree > 200


def test_classification_needs_free_flow_window():
    scn = Scenario(RouteParams(2058.79, 31.1344, 77.0815), RouteParams(1321.99, 43.5312, 219.441),
                   3339.52, RoutingRule(0.6346, 0.3953))
    assert validate_scenario(scn).ok
    assert sf_sf_alpha_interval(scn) is None
    with pytest.raises(RegimeError):
        regime_classify(scn)


# --- grids and sweeps ------------------------------------------------------


def test_make_grid_inclusive():
    g = make_grid(0.0, 1.0, 0.01)
    assert len(g) == 101 and g[0] == 0.0 and g[-1] == 1.0
    assert len(make_grid(0.0, 1.0, 0.001)) == 1001
    assert list(make_grid(0.1, 0.3, 0.1)) == [0.1, 0.2, 0.3]
    with pytest.raises(ValueError):
        make_grid(0, 1, 0)
    with pytest.raises(ValueError):
        make_grid(1, 0, 0.1)


def test_sweep_moderate_demand(grenoble2000):
    res = sweep(grenoble2000, "alpha", make_grid(0, 1, 0.01))
    assert len(res.rows) == 101
    assert np.all(res.column("unsat1") == 0) and np.all(res.column("unsat2") == 0)
    assert all(r.J_defined for r in res.rows)
    k = int(np.argmin(res.column("J")))
    assert res.params[k] == pytest.approx(0.14)
    assert np.all(np.diff(res.column("R1")) < 0)
    assert [r.param for r in res.rows if "alpha_bar" in r.crossed] == [0.15]


def test_sweep_high_demand(grenoble3000):
    res = sweep(grenoble3000, "alpha", make_grid(0, 1, 0.01))
    u2 = res.column("unsat2")
    above = res.params > 0.6906
    assert np.all(u2[~above] == 0) and np.all(u2[above] > 0)
    assert np.all(np.diff(u2[above]) >= 0)
    assert np.all(res.column("unsat1") == 0)
    assert not any(r.J_defined for r in res.rows if r.param > 0.6906)
    assert [r.param for r in res.rows if "alpha_lower_2" in r.crossed] == [0.7]


def test_sweep_over_demand_flips_at_effective_capacity(grenoble3000):
    scn = grenoble3000.replace(penetration_rate=1.0)
    m = float(effective_capacity(scn).values.min())
    res = sweep(scn, "phi", np.linspace(0.8 * m, 1.2 * m, 41))
    for r in res.rows:
        assert r.mode == ("SF-SF" if r.param <= m else "SF-UF")
    assert sum("F_eff_min" in r.crossed for r in res.rows) == 1


def test_sweep_keeps_invalid_rows(grenoble2000):
    res = sweep(grenoble2000, "phi", [2000.0, 4600.0, 5000.0])
    assert [r.valid for r in res.rows] == [True, False, False]
    text = res.to_csv()
    assert text.count("invalid") == 4


def test_sweep_rejects_bad_grids(grenoble2000):
    with pytest.raises(ValueError):
        sweep(grenoble2000, "alpha", [])
    with pytest.raises(ValueError):
        sweep(grenoble2000, "alpha", [0.2, 0.1])
    with pytest.raises(ValueError):
        sweep(grenoble2000, "beta", [0.1])


def test_sweep_csv_and_sidecar(grenoble3000):
    res = sweep(grenoble3000, "alpha", make_grid(0, 1, 0.1))
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 12
    assert rows[-1][5:7] == ["SF", "UF"] and rows[-1][8] == "false" and rows[-1][7] == "nan"
    side = json.loads(res.sidecar_json())
    assert set(side) == {"alpha_bar", "alpha_lower_1", "alpha_lower_2", "F_eff_1", "F_eff_2",
                         "xi1", "xi2", "phi_bar", "regime_case"}
    assert side["alpha_lower_2"] == pytest.approx(0.69051, abs=1e-5)
    assert side["alpha_lower_1"] is None
    assert res.to_csv() == sweep(grenoble3000, "alpha", make_grid(0, 1, 0.1)).to_csv()


def test_sweep_cross_check(grenoble3000):
    res = sweep(grenoble3000, "alpha", make_grid(0, 1, 0.05), cross_check=True)
    checked = [r for r in res.rows if r.cross_check_error is not None]
    assert len(checked) == 3
    assert res.cross_check_ok


def test_grenoble_validation():
    assert validate_scenario(grenoble_scenario(2000.0)).ok
    assert validate_scenario(grenoble_scenario(3000.0)).ok
    rep = validate_scenario(grenoble_scenario(4600.0))
    assert [c.name for c in rep.failures] == ["well-dimensioned network"]
