"""Simulate the default vertical jump and replay its torques through a serial pair.

Run: python3 demos/jump_study.py
"""

from legkit.jump import compare_topologies, run_jump
from legkit.reference import build_tello

leg = build_tello()
tr = run_jump(leg)
m = tr.metrics
print("phases:", " -> ".join(m["phase_sequence"]))
print(f"apex {m['apex'] * 1000:.1f} mm, thrust {m['thrust_duration'] * 1000:.0f} ms, "
      f"aerial {m['aerial_duration'] * 1000:.0f} ms")
print(f"peak knee torque in thrust {m['thrust_peak_knee_torque']:.2f} Nm, "
      f"ankle {m['thrust_peak_ankle_torque']:.2f} Nm, "
      f"busiest pair motor {m['thrust_peak_pair_motor_torque']:.2f} Nm")

comp = compare_topologies(leg, trajectory=tr)
print(f"peak motor torque: differential {comp.peak_motor_differential:.2f} Nm, "
      f"serial {comp.peak_motor_serial:.2f} Nm (ratio {comp.ratio:.3f})")
print(f"peak motor speed:  differential {comp.peak_speed_differential:.2f} rad/s, "
      f"serial {comp.peak_speed_serial:.2f} rad/s")
