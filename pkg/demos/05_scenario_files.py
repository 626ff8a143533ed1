"""Scenario files and the command-line interface.

A modified scenario is written to YAML, read back, and passed to the
``tworoute`` CLI in a subprocess.
"""

import subprocess
import sys
from pathlib import Path

from tworoute import bundled_scenario, parse_scenario, write_scenario

scn = bundled_scenario("grenoble_phi3000").replace(penetration_rate=0.8)
path = Path("demo_out") / "grenoble_alpha08.yaml"
path.parent.mkdir(exist_ok=True)
write_scenario(scn, path)
print(path.read_text())
assert parse_scenario(path) == scn

for argv in (["equilibrium", "--scenario", str(path)],
             ["verify", "--scenario", str(path), "--checks", "k_condition"]):
    proc = subprocess.run([sys.executable, "-m", "tworoute", *argv],
                          capture_output=True, text=True)
    print("$ tworoute", " ".join(argv), f"(exit {proc.returncode})")
    print(proc.stdout[:600])
