"""Numerical property checks on bundled and random scenarios.

Each check returns a report with a status, the worst margin found and a
counterexample on failure.
"""

import numpy as np

from tworoute import bundled_scenario, run_checks
from tworoute.verify import random_scenario

for name in ("symmetric", "grenoble_phi2000", "grenoble_phi3000"):
    print(name)
    for rep in run_checks(bundled_scenario(name), seed=1):
        print(f"  {rep.name:24s} {rep.status:12s} samples={rep.samples:6d} "
              f"worst margin={rep.worst_margin:.3g}")

rng = np.random.default_rng(2024)
scn = random_scenario(rng, kind="logit")
print("random logit scenario:", scn)
print([r.status for r in run_checks(scn, seed=2)])
