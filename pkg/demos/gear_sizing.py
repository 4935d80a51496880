"""Gear sizing for a knee/ankle pair: differential coupling vs one motor per joint.

Run: python3 demos/gear_sizing.py
"""

import numpy as np

from legkit.polytope import RequirementSet, gear_polytope, min_gear_ratio, velocity_polytope
from legkit.topology import ActuationTopology, reflected_inertia, topology_jacobian

TAU_MAX = 10.0      # Nm per motor
PEAK = 20.0         # Nm demanded at either joint, one at a time

req = RequirementSet((PEAK, PEAK))
nd = min_gear_ratio("differential_pair", req, TAU_MAX)
ns = min_gear_ratio("serial", req, TAU_MAX)
print(f"smallest ratio covering +-{PEAK:g} Nm on each joint: differential {nd:.4f}, serial {ns:.4f}")

for kind, n in (("differential", nd), ("serial", ns)):
    P = gear_polytope(kind, n, TAU_MAX)
    print(f"  {kind:>12} TCP vertices:", np.round(P.vertices, 6).tolist())

# with those ratios the rotors look half as heavy through the differential
Jd = topology_jacobian(ActuationTopology.differential_pair(nd))
Js = topology_jacobian(ActuationTopology.serial([ns, ns]))
rotor = [1e-4, 1e-4]
print("reflected inertia [kg m^2]:")
print("  differential", np.diag(reflected_inertia(Jd, rotor)))
print("  serial      ", np.diag(reflected_inertia(Js, rotor)))

# the price: for the same motor speed the joints reach less velocity on the diagonals
for name, J in (("differential", Jd), ("serial", Js)):
    V = velocity_polytope(J, 40.0)
    print(f"  {name:>12} VCP vertices [rad/s]:", np.round(V.vertices, 3).tolist())
