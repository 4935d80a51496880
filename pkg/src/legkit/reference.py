"""Reference leg models shipped with the package.

Tello's per-link masses are not public, so ``tello`` is a documented stand-in:
a 5-DoF leg (hip yaw, HAA, HFE, knee, ankle) with 0.22 m thigh and shank,
five 0.4 kg actuators clustered around the hip, and a base body absorbing
the rest of the 6.9 kg rig mass. Only the total mass is a measured value.
"""

import math
from dataclasses import replace
from importlib import resources
from pathlib import Path

from .model import (ActuatorDef, JointDef, RobotModel, SpatialInertia, parse_model,
                    relocate_actuators, serialize_model)
from .topology import ActuationTopology, Tello5Params

THIGH = 0.22
SHANK = 0.22
HIP_Y = 0.09
ACTUATOR_MASS = 0.4
TOTAL_MASS = 6.9

LEG_JOINTS = ("hip_yaw", "haa", "hfe", "knee", "ankle")
ACTUATORS = ("m1", "m2", "m3", "m4", "m5")

# rotor inertia seen at the actuator output (6:1 planetary stage)
ROTOR_INERTIA = 6.0e-5 * 36.0

_PROXIMAL = {
    "m1": ("pelvis", (0.0, HIP_Y, 0.03)),
    "m2": ("hip_yaw_link", (0.05, 0.0, 0.02)),
    "m3": ("hip_yaw_link", (-0.05, 0.0, 0.02)),
    "m4": ("hip_roll_link", (0.0, 0.045, 0.0)),
    "m5": ("hip_roll_link", (0.0, -0.045, 0.0)),
}


def _box(m, dx, dy, dz):
    return [m * (dy * dy + dz * dz) / 12, 0.0, 0.0, m * (dx * dx + dz * dz) / 12, 0.0,
            m * (dx * dx + dy * dy) / 12]


def _leg_bodies():
    leg = [
        ("hip_yaw_link", 0.25, (0.0, 0.0, -0.02), [3e-4, 0, 0, 3e-4, 0, 2e-4]),
        ("hip_roll_link", 0.30, (0.0, 0.0, 0.0), [4e-4, 0, 0, 4e-4, 0, 3e-4]),
        ("thigh", 0.60, (0.0, 0.0, -0.09), [2.6e-3, 0, 0, 2.6e-3, 0, 3e-4]),
        ("shank", 0.35, (0.0, 0.0, -0.08), [1.5e-3, 0, 0, 1.5e-3, 0, 1e-4]),
        ("ankle_link", 0.10, (0.0, 0.0, 0.0), [2e-5, 0, 0, 2e-5, 0, 2e-5]),
    ]
    return [(n, SpatialInertia.from_upper(m, c, I)) for n, m, c, I in leg]


def _leg_joints():
    def j(name, parent, child, axis, xyz, limits):
        return JointDef(name=name, parent=parent, child=child, type="revolute", axis=axis,
                        origin_xyz=xyz, limits=limits)
    return [
        j("hip_yaw", "pelvis", "hip_yaw_link", (0, 0, 1), (0.0, HIP_Y, -0.05), (-0.6, 0.6)),
        j("haa", "hip_yaw_link", "hip_roll_link", (1, 0, 0), (0.0, 0.0, -0.04),
          (-math.pi / 3, math.pi / 3)),
        j("hfe", "hip_roll_link", "thigh", (0, 1, 0), (0.0, 0.0, 0.0), (-1.6, 0.8)),
        j("knee", "thigh", "shank", (0, 1, 0), (0.0, 0.0, -THIGH), (-0.1, 2.6)),
        j("ankle", "shank", "ankle_link", (0, 1, 0), (0.0, 0.0, -SHANK), (-1.2, 1.2)),
    ]


def _actuators(placement, mass=ACTUATOR_MASS):
    return [ActuatorDef(name=n, rotor_inertia=ROTOR_INERTIA, torque_limit=15.0, velocity_limit=40.0,
                        mount_body=placement[n][0], mount_offset=placement[n][1], mass=mass)
            for n in ACTUATORS]


def tello_topology():
    return ActuationTopology.tello5(Tello5Params(), joints=LEG_JOINTS, actuators=ACTUATORS)


def build_tello():
    """Proximally actuated reference leg (all five actuators near the hip)."""
    leg = _leg_bodies()
    leg_mass = sum(si.mass for _, si in leg) + len(ACTUATORS) * ACTUATOR_MASS
    pelvis_mass = TOTAL_MASS - leg_mass
    pelvis = SpatialInertia.from_upper(pelvis_mass, (0.0, 0.0, 0.05), _box(pelvis_mass, 0.15, 0.25, 0.12))
    model = RobotModel(bodies=[("pelvis", pelvis)] + leg, joints=_leg_joints(),
                       actuators=_actuators(_PROXIMAL), topology=tello_topology(),
                       name="tello-reference")
    return replace(model, topology=model.topology.bind(model))


def serial_placement(model):
    """Each actuator moved onto its driven joint (stator on the joint's parent)."""
    topo = model.topology
    out = {}
    for act, jname in zip(topo.actuators, topo.joints):
        j = model.joint(jname)
        out[act] = (j.parent, tuple(j.origin_xyz))
    return out


def build_tello_serial():
    base = build_tello()
    return replace(relocate_actuators(base, serial_placement(base)), name="tello-serial")


def build_massless_leg():
    """Same kinematics with massless limbs; actuators sit on the base body."""
    base = build_tello()
    bodies = [(n, si if n == "pelvis" else SpatialInertia.zero()) for n, si in base.bodies]
    placement = {a: ("pelvis", off) for a, off in
                 zip(ACTUATORS, [(0.0, HIP_Y, 0.03), (0.05, HIP_Y, 0.0), (-0.05, HIP_Y, 0.0),
                                 (0.0, HIP_Y + 0.045, -0.05), (0.0, HIP_Y - 0.045, -0.05)])}
    return replace(relocate_actuators(replace(base, bodies=bodies), placement), name="massless-leg")


def jump_rig(model, base_name="world"):
    """Attach the model's root to a massless ground body through a vertical slider."""
    bodies = [(base_name, SpatialInertia.zero())] + list(model.bodies)
    slider = JointDef(name="slider", parent=base_name, child=model.root, type="floating_vertical",
                      axis=(0.0, 0.0, 1.0), limits=(-10.0, 10.0))
    return replace(model, bodies=bodies, joints=[slider] + list(model.joints),
                   name=model.name + "-rig")


BUILDERS = {"tello": build_tello, "tello_serial": build_tello_serial,
            "massless_leg": build_massless_leg}


def shipped_model(name):
    """Load one of the JSON models shipped in ``legkit/data``."""
    text = resources.files("legkit").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return parse_model(text)


def shipped_names():
    return tuple(BUILDERS)


def write_shipped_models(directory):
    d = Path(directory)
    for name, build in BUILDERS.items():
        (d / f"{name}.json").write_text(serialize_model(build()), encoding="utf-8")
