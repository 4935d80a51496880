"""Where to put the actuators: CII range of the reference leg vs a serial layout.

Run: python3 demos/cii_study.py
"""

from legkit.cii import cii_sweep, log10_rcii, rcii_compare
from legkit.model import standard_grid, relocate_actuators
from legkit.reference import build_tello, serial_placement

leg = build_tello()
serial = relocate_actuators(leg, serial_placement(leg))
grid = standard_grid()
print(f"grid: {grid.joint_a} {grid.range_a} x {grid.joint_b} {grid.range_b}, "
      f"{grid.resolution[0]}x{grid.resolution[1]}, knee keeps the ankle under the hip")

reports = [("actuators at the hip", cii_sweep(leg, grid)),
           ("actuators at their joints", cii_sweep(serial, grid))]
rows, ratios = rcii_compare(reports)
for r in rows:
    print(f"  {r.rank}. {r.label:<26} rCII {r.rcii:.4g}  (log10 {log10_rcii(r.rcii):+.3f})")
a, b = rows[0].label, rows[1].label
print(f"ratio {a} / {b}: {ratios[a][b]:.3f}")
