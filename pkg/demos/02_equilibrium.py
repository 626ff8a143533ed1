"""Equilibria and penetration-rate thresholds for the Grenoble case.

At 2000 veh/h both routes stay satisfied for every penetration rate. At
3000 veh/h route 2 starts rejecting vehicles once the share of app users
passes a threshold near 0.69.
"""

from tworoute import active_equilibrium, general_equilibrium, grenoble_scenario, thresholds

for phi in (2000.0, 3000.0):
    for alpha in (0.2, 0.5, 0.9):
        scn = grenoble_scenario(phi, alpha)
        eq = active_equilibrium(scn)
        print(f"phi={phi:.0f} alpha={alpha}: x*={eq.state.round(3)} mode={eq.mode} "
              f"unsatisfied={eq.unsatisfied.round(2)}")
    rep = thresholds(grenoble_scenario(phi))
    print(rep.to_json(indent=2))

# The bisection solver agrees with the closed form on affine routing and also
# handles the logit rule.
scn = grenoble_scenario(3000.0, 0.9)
print("closed form:", active_equilibrium(scn).state, " bisection:", general_equilibrium(scn).state)
logit = scn.replace(kind="logit", compliance=5.0)
print("logit equilibrium:", general_equilibrium(logit).to_dict())
