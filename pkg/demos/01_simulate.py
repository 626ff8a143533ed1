"""Simulate the Grenoble network from a congested start.

Both routes start above their critical densities. The script prints the
densities and operating modes on a coarse time grid, then the mode switches
located by bisection.
"""

import numpy as np

from tworoute import grenoble_scenario, integrate
from tworoute.integrate import default_dt, default_horizon


def label(pair):
    return "-".join(m.name for m in pair)


scn = grenoble_scenario(2000.0)
print("critical densities [veh/km]:", scn.C, " jam densities:", scn.B)
print("step [h]:", default_dt(scn), " horizon to 1e-6 [h]:", round(default_horizon(scn, 1e-6), 3))

traj = integrate(scn, [200.0, 100.0], horizon=1.0)
for k in np.linspace(0, len(traj) - 1, 11).astype(int):
    t, (x1, x2) = traj.times[k], traj.states[k]
    print(f"t={t:6.3f} h  x=({x1:7.2f}, {x2:7.2f})  modes={label(traj.mode_pairs()[k])}")

# Refine the steps where the mode pair changes.
ev = integrate(scn, [200.0, 100.0], horizon=1.0, locate_events=True)
pairs = ev.mode_pairs()
for k in range(1, len(ev)):
    if pairs[k] != pairs[k - 1]:
        print(f"switch near t={ev.times[k]:.6f} h: {label(pairs[k - 1])} -> {label(pairs[k])}")
print("vehicles turned away per route [veh]:", ev.rejected_volume())
