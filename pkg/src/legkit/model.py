"""Robot data model: bodies, joints, actuators and the JSON description format.

A :class:`RobotModel` is an immutable kinematic tree. Actuators are point
masses attached to a *mount body*; their masses are folded into the mount
body's inertia (``model.composed``) before any dynamics call, while the
structural inertias (``model.bodies``) are kept untouched so that actuators
can be relocated without loss.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .geometry import MIRROR_Y, rpy_matrix
from .topology import ActuationTopology

JOINT_TYPES = ("revolute", "prismatic", "fixed", "floating_vertical")
DEFAULT_LIMITS = (-math.pi, math.pi)


class ModelError(ValueError):
    """Base class for every model construction or parsing failure."""


class ModelSyntaxError(ModelError):
    def __init__(self, msg, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)


class ModelSchemaError(ModelError):
    """Well-formed JSON that does not follow the description schema."""


class ModelStructureError(ModelError):
    """Joint graph is not a tree (unknown body, cycle, several parents...)."""


class ModelValidationError(ModelError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid model:\n  " + "\n  ".join(self.diagnostics))


def _frozen(a, shape=None):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise ModelSchemaError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _parallel_axis(m, d):
    return m * (np.dot(d, d) * np.eye(3) - np.outer(d, d))


@dataclass(frozen=True, eq=False)
class SpatialInertia:
    """Mass, centre of mass (body frame) and rotational inertia about the com."""

    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "com", _frozen(self.com, (3,)))
        object.__setattr__(self, "inertia", _frozen(self.inertia, (3, 3)))

    @classmethod
    def from_upper(cls, mass, com, upper):
        ixx, ixy, ixz, iyy, iyz, izz = upper
        return cls(mass, com, [[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])

    @classmethod
    def zero(cls):
        return cls(0.0, np.zeros(3), np.zeros((3, 3)))

    def upper(self):
        I = self.inertia
        return [float(I[0, 0]), float(I[0, 1]), float(I[0, 2]),
                float(I[1, 1]), float(I[1, 2]), float(I[2, 2])]

    def about_origin(self):
        """Rotational inertia about the body frame origin."""
        return self.inertia + _parallel_axis(self.mass, self.com)

    def add_point_mass(self, m, p):
        if m == 0.0:
            return self
        p = np.asarray(p, dtype=float)
        total = self.mass + m
        c = (self.mass * self.com + m * p) / total
        I = (self.inertia + _parallel_axis(self.mass, self.com - c)
             + _parallel_axis(m, p - c))
        return SpatialInertia(total, c, I)

    def remove_point_mass(self, m, p):
        """Exact inverse of :meth:`add_point_mass`."""
        if m == 0.0:
            return self
        p = np.asarray(p, dtype=float)
        rest = self.mass - m
        if rest <= 1e-15 * max(self.mass, 1.0):
            return SpatialInertia.zero()
        c = (self.mass * self.com - m * p) / rest
        I = self.inertia - _parallel_axis(rest, c - self.com) - _parallel_axis(m, p - self.com)
        return SpatialInertia(rest, c, 0.5 * (I + I.T))

    def scaled(self, k):
        return SpatialInertia(k * self.mass, self.com, k * self.inertia)

    def mirrored(self):
        return SpatialInertia(self.mass, MIRROR_Y @ self.com, MIRROR_Y @ self.inertia @ MIRROR_Y)


@dataclass(frozen=True, eq=False)
class JointDef:
    name: str
    parent: str
    child: str
    type: str = "revolute"
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    origin_xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    origin_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))
    limits: tuple = DEFAULT_LIMITS

    def __post_init__(self):
        if self.type not in JOINT_TYPES:
            raise ModelSchemaError(f"joint {self.name!r}: unknown type {self.type!r}")
        object.__setattr__(self, "axis", _frozen(self.axis, (3,)))
        object.__setattr__(self, "origin_xyz", _frozen(self.origin_xyz, (3,)))
        object.__setattr__(self, "origin_rpy", _frozen(self.origin_rpy, (3,)))
        object.__setattr__(self, "limits", (float(self.limits[0]), float(self.limits[1])))
        object.__setattr__(self, "origin_rotation", _frozen(rpy_matrix(self.origin_rpy)))

    @property
    def dof(self):
        return 0 if self.type == "fixed" else 1


@dataclass(frozen=True, eq=False)
class ActuatorDef:
    name: str
    rotor_inertia: float
    torque_limit: float
    velocity_limit: float
    mount_body: str
    mount_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mass: float = 0.0

    def __post_init__(self):
        for attr in ("rotor_inertia", "torque_limit", "velocity_limit", "mass"):
            object.__setattr__(self, attr, float(getattr(self, attr)))
        object.__setattr__(self, "mount_offset", _frozen(self.mount_offset, (3,)))


@dataclass(frozen=True)
class FrontalPlaneRule:
    """Choose ``target_joint`` so that a point stays in the hip's frontal plane.

    The constrained point is ``offset`` expressed in ``body``; the frontal plane
    passes through the origin of ``plane_body`` with the base x axis as normal.
    """

    target_joint: str = "knee"
    body: str = "ankle_link"
    offset: tuple = (0.0, 0.0, 0.0)
    plane_body: str = "hip_roll_link"


@dataclass(frozen=True)
class GridSpec:
    joint_a: str = "haa"
    range_a: tuple = (-math.pi / 4, math.pi / 4)
    joint_b: str = "hfe"
    range_b: tuple = (-math.pi / 3, 0.0)
    resolution: tuple = (30, 30)
    dependent_rule: FrontalPlaneRule = None

    def axes(self):
        a = np.linspace(self.range_a[0], self.range_a[1], self.resolution[0])
        b = np.linspace(self.range_b[0], self.range_b[1], self.resolution[1])
        return a, b

    def check(self, model):
        na, nb = self.resolution
        if na < 2 or nb < 2:
            raise ValueError("grid resolution must be at least 2x2")
        for name, (lo, hi) in ((self.joint_a, self.range_a), (self.joint_b, self.range_b)):
            jlo, jhi = model.joint(name).limits
            if lo > hi or lo < jlo - 1e-12 or hi > jhi + 1e-12:
                raise ValueError(f"grid range [{lo}, {hi}] of {name!r} outside joint limits [{jlo}, {jhi}]")


def standard_grid():
    """The 30x30 HAA/HFE sweep with the knee resolved to the frontal plane."""
    return GridSpec(dependent_rule=FrontalPlaneRule())


@dataclass(frozen=True, eq=False)
class RobotModel:
    bodies: tuple
    joints: tuple = ()
    actuators: tuple = ()
    topology: ActuationTopology = None
    name: str = "robot"
    mirror_pairs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple((str(n), si) for n, si in self.bodies))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "actuators", tuple(self.actuators))
        object.__setattr__(self, "mirror_pairs", tuple(tuple(p) for p in self.mirror_pairs))
        self._build_tree()
        self._compose()

    # -- construction helpers -------------------------------------------
    def _build_tree(self):
        names = [n for n, _ in self.bodies]
        if len(set(names)) != len(names):
            raise ModelStructureError("duplicate body names")
        index = {n: i for i, n in enumerate(names)}
        jnames = [j.name for j in self.joints]
        if len(set(jnames)) != len(jnames):
            raise ModelStructureError("duplicate joint names")

        parent_joint = {}
        children = {n: [] for n in names}
        for j in self.joints:
            if j.parent not in index:
                raise ModelStructureError(f"joint {j.name!r}: unknown parent body {j.parent!r}")
            if j.child not in index:
                raise ModelStructureError(f"joint {j.name!r}: unknown child body {j.child!r}")
            if j.child in parent_joint:
                raise ModelStructureError(f"body {j.child!r} has more than one parent joint")
            parent_joint[j.child] = j
            children[j.parent].append(j)

        roots = [n for n in names if n not in parent_joint]
        if not roots:
            raise ModelStructureError("cycle in joint graph: no root body")
        if len(roots) > 1:
            # with one parent per body, extra roots mean a detached cycle or forest
            raise ModelStructureError(f"joint graph is not a single tree (roots: {roots})")

        order = []  # (body index, parent body index, JointDef | None), parents first
        stack = [(roots[0], None, None)]
        while stack:
            b, p, j = stack.pop()
            order.append((index[b], None if p is None else index[p], j))
            for cj in reversed(children[b]):
                stack.append((cj.child, b, cj))
        if len(order) != len(names):
            unreached = sorted(set(names) - {names[i] for i, _, _ in order})
            raise ModelStructureError(f"cycle in joint graph involving {unreached}")

        dof_joints = tuple(j for j in self.joints if j.dof)
        object.__setattr__(self, "body_index", index)
        object.__setattr__(self, "root", roots[0])
        object.__setattr__(self, "tree_order", tuple(order))
        object.__setattr__(self, "parent_joint", parent_joint)
        object.__setattr__(self, "dof_joints", dof_joints)
        object.__setattr__(self, "q_index", {j.name: i for i, j in enumerate(dof_joints)})
        object.__setattr__(self, "_joint_by_name", {j.name: j for j in self.joints})

    def _compose(self):
        composed = [si for _, si in self.bodies]
        for a in self.actuators:
            i = self.body_index.get(a.mount_body)
            if i is not None:
                composed[i] = composed[i].add_point_mass(a.mass, a.mount_offset)
        object.__setattr__(self, "composed", tuple(composed))
        total = sum(si.mass for _, si in self.bodies) + sum(a.mass for a in self.actuators)
        object.__setattr__(self, "total_mass", float(total))

    # -- queries ----------------------------------------------------------
    @property
    def dof(self):
        return len(self.dof_joints)

    @property
    def body_names(self):
        return [n for n, _ in self.bodies]

    def joint(self, name):
        try:
            return self._joint_by_name[name]
        except KeyError:
            raise KeyError(f"unknown joint {name!r}") from None

    def body(self, name):
        return self.bodies[self.body_index[name]][1]

    def composed_body(self, name):
        return self.composed[self.body_index[name]]

    def actuator(self, name):
        for a in self.actuators:
            if a.name == name:
                return a
        raise KeyError(f"unknown actuator {name!r}")

    def mirror_of(self, joint_name):
        for a, b in self.mirror_pairs:
            if a == joint_name:
                return b
        return None

    def configuration(self, values=None, *, check=True, **named):
        """Joint vector from a mapping of joint names (missing joints are zero).

        Mirrored joints of a symmetric model follow their primary joint.
        """
        q = np.zeros(self.dof)
        items = dict(values or {})
        items.update(named)
        for name, v in items.items():
            q[self.q_index[name]] = v
            m = self.mirror_of(name)
            if m is not None and m not in items:
                q[self.q_index[m]] = v
        if check:
            self.check_configuration(q)
        return q

    def check_configuration(self, q, *, limits=True):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof,):
            raise ValueError(f"configuration has shape {q.shape}, model has {self.dof} DoF")
        if limits:
            for j, v in zip(self.dof_joints, q):
                if j.type == "floating_vertical":
                    continue
                lo, hi = j.limits
                if v < lo - 1e-12 or v > hi + 1e-12:
                    raise ValueError(f"joint {j.name!r} = {v} outside limits [{lo}, {hi}]")
        return q

    def scaled(self, k):
        """Copy with every mass and inertia multiplied by ``k``."""
        bodies = [(n, si.scaled(k)) for n, si in self.bodies]
        acts = [replace(a, mass=k * a.mass) for a in self.actuators]
        return replace(self, bodies=bodies, actuators=acts)


# -- validation -------------------------------------------------------------

def _inertia_diagnostics(path, si):
    out = []
    if not math.isfinite(si.mass) or si.mass < 0:
        out.append(f"{path}.mass: must be >= 0 (got {si.mass})")
    I = si.inertia
    if not np.all(np.isfinite(I)):
        out.append(f"{path}.inertia: non-finite entries")
        return out
    if np.max(np.abs(I - I.T)) > 1e-12:
        out.append(f"{path}.inertia: not symmetric")
        return out
    ev = np.linalg.eigvalsh(I)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if ev[0] < -1e-12 * scale:
        out.append(f"{path}.inertia: not positive semidefinite (smallest eigenvalue {ev[0]:.3g})")
        return out
    a, b, c = ev
    if a + b < c - 1e-9:
        out.append(f"{path}.inertia: principal moments violate the triangle inequality "
                   f"({a:.6g} + {b:.6g} < {c:.6g})")
    return out


def validate_model(model):
    """Return a list of human-readable diagnostics; empty iff the model is valid."""
    diags = []
    for i, (name, si) in enumerate(model.bodies):
        diags += _inertia_diagnostics(f"bodies[{i}] ({name})", si)
    for i, j in enumerate(model.joints):
        path = f"joints[{i}] ({j.name})"
        n = float(np.linalg.norm(j.axis))
        if abs(n - 1.0) > 1e-9:
            diags.append(f"{path}.axis: not a unit vector (norm {n:.6g})")
        lo, hi = j.limits
        if not lo <= hi:
            diags.append(f"{path}.limits: min {lo} > max {hi}")
        if j.type == "floating_vertical" and j.parent != model.root:
            diags.append(f"{path}.parent: a vertical slider must hang from the root body")
    for i, a in enumerate(model.actuators):
        path = f"actuators[{i}] ({a.name})"
        for attr in ("rotor_inertia", "torque_limit", "velocity_limit"):
            v = getattr(a, attr)
            if not v > 0:
                diags.append(f"{path}.{attr}: must be > 0 (got {v})")
        if a.mass < 0:
            diags.append(f"{path}.mass: must be >= 0 (got {a.mass})")
        if a.mount_body not in model.body_index:
            diags.append(f"{path}.mount_body: unknown body {a.mount_body!r}")
    if model.topology is not None:
        diags += ["topology" + d for d in model.topology.diagnostics(model)]
    return diags


# -- relocation / mirroring -------------------------------------------------

def relocate_actuators(model, placement):
    """Move actuators to new mount bodies.

    ``placement`` maps actuator name to ``(body, offset)``. Structural bodies,
    kinematics and topology are untouched; only the point masses move.
    """
    acts = {a.name: a for a in model.actuators}
    for name, (body, _) in placement.items():
        if name not in acts:
            raise ModelError(f"unknown actuator {name!r}")
        if body not in model.body_index:
            raise ModelError(f"unknown body {body!r}")
    new = [replace(a, mount_body=placement[a.name][0],
                   mount_offset=np.asarray(placement[a.name][1], dtype=float))
           if a.name in placement else a
           for a in model.actuators]
    return replace(model, actuators=new)


def mirrored(model, suffix="_mirror"):
    """Two-sided model: every non-root body is duplicated across the x-z plane.

    Mirrored revolute joints get the pseudo-vector axis ``(-ax, ay, -az)`` so
    that equal joint values produce mirror-image postures.
    """
    if model.mirror_pairs:
        return model

    def mb(name):
        return name if name == model.root else name + suffix

    bodies = list(model.bodies)
    bodies += [(mb(n), si.mirrored()) for n, si in model.bodies if n != model.root]
    joints = list(model.joints)
    pairs = []
    for j in model.joints:
        if j.type == "revolute":
            axis = np.array([-j.axis[0], j.axis[1], -j.axis[2]])
        elif j.type == "prismatic":
            axis = MIRROR_Y @ j.axis
        else:
            axis = j.axis
        rpy = np.array([-j.origin_rpy[0], j.origin_rpy[1], -j.origin_rpy[2]])
        joints.append(replace(j, name=j.name + suffix, parent=mb(j.parent), child=mb(j.child),
                              axis=axis, origin_xyz=MIRROR_Y @ j.origin_xyz, origin_rpy=rpy))
        if j.dof:
            pairs.append((j.name, j.name + suffix))
    acts = list(model.actuators)
    acts += [replace(a, name=a.name + suffix, mount_body=mb(a.mount_body),
                     mount_offset=MIRROR_Y @ a.mount_offset) for a in model.actuators]
    return RobotModel(bodies=bodies, joints=joints, actuators=acts, topology=None,
                      name=model.name + suffix, mirror_pairs=pairs)


# -- JSON description format ------------------------------------------------

_TOP_KEYS = {"name", "bodies", "joints", "actuators", "topology", "mirror_pairs"}
_BODY_KEYS = {"name", "mass", "com", "inertia"}
_JOINT_KEYS = {"name", "type", "parent", "child", "axis", "origin", "limits"}
_ORIGIN_KEYS = {"xyz", "rpy"}
_ACT_KEYS = {"name", "rotor_inertia", "torque_limit", "velocity_limit",
             "mount_body", "mount_offset", "mass"}


def _check_keys(d, allowed, where, strict):
    if not isinstance(d, dict):
        raise ModelSchemaError(f"{where}: expected an object")
    extra = sorted(set(d) - allowed)
    if extra and strict:
        raise ModelSchemaError(f"{where}: unknown keys {extra}")


def _req(d, key, where):
    try:
        return d[key]
    except KeyError:
        raise ModelSchemaError(f"{where}: missing required key {key!r}") from None


def model_from_dict(doc, *, strict=True, check=True):
    _check_keys(doc, _TOP_KEYS, "document", strict)
    bodies = []
    for i, b in enumerate(_req(doc, "bodies", "document")):
        where = f"bodies[{i}]"
        _check_keys(b, _BODY_KEYS, where, strict)
        upper = b.get("inertia", [0.0] * 6)
        if len(upper) != 6:
            raise ModelSchemaError(f"{where}.inertia: expected 6 upper-triangle entries")
        bodies.append((_req(b, "name", where),
                       SpatialInertia.from_upper(_req(b, "mass", where), b.get("com", [0.0] * 3), upper)))
    joints = []
    for i, j in enumerate(doc.get("joints", [])):
        where = f"joints[{i}]"
        _check_keys(j, _JOINT_KEYS, where, strict)
        origin = j.get("origin", {})
        _check_keys(origin, _ORIGIN_KEYS, where + ".origin", strict)
        jtype = j.get("type", "revolute")
        default_axis = [0.0, 0.0, 1.0]
        joints.append(JointDef(
            name=_req(j, "name", where), parent=_req(j, "parent", where),
            child=_req(j, "child", where), type=jtype,
            axis=j.get("axis", default_axis),
            origin_xyz=origin.get("xyz", [0.0] * 3), origin_rpy=origin.get("rpy", [0.0] * 3),
            limits=tuple(j.get("limits", DEFAULT_LIMITS))))
    acts = []
    for i, a in enumerate(doc.get("actuators", [])):
        where = f"actuators[{i}]"
        _check_keys(a, _ACT_KEYS, where, strict)
        acts.append(ActuatorDef(
            name=_req(a, "name", where), rotor_inertia=_req(a, "rotor_inertia", where),
            torque_limit=_req(a, "torque_limit", where),
            velocity_limit=_req(a, "velocity_limit", where),
            mount_body=_req(a, "mount_body", where),
            mount_offset=a.get("mount_offset", [0.0] * 3), mass=a.get("mass", 0.0)))
    topo = doc.get("topology")
    if topo is not None:
        try:
            topo = ActuationTopology.from_dict(topo, strict=strict)
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelSchemaError(f"topology: {exc}") from exc
    model = RobotModel(bodies=bodies, joints=joints, actuators=acts, topology=topo,
                       name=doc.get("name", "robot"), mirror_pairs=doc.get("mirror_pairs", ()))
    if topo is not None:
        model = replace(model, topology=topo.bind(model))
    if check:
        diags = validate_model(model)
        if diags:
            raise ModelValidationError(diags)
    return model


def parse_model(text, *, strict=True, check=True):
    """Parse a robot description document (JSON text) into a RobotModel."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return model_from_dict(doc, strict=strict, check=check)


def _floats(a):
    return [float(x) for x in np.ravel(a)]


def model_to_dict(model):
    doc = {"name": model.name, "bodies": [], "joints": [], "actuators": []}
    for n, si in model.bodies:
        doc["bodies"].append({"name": n, "mass": si.mass, "com": _floats(si.com),
                              "inertia": si.upper()})
    for j in model.joints:
        doc["joints"].append({"name": j.name, "type": j.type, "parent": j.parent, "child": j.child,
                              "axis": _floats(j.axis),
                              "origin": {"xyz": _floats(j.origin_xyz), "rpy": _floats(j.origin_rpy)},
                              "limits": list(j.limits)})
    for a in model.actuators:
        doc["actuators"].append({"name": a.name, "rotor_inertia": a.rotor_inertia,
                                 "torque_limit": a.torque_limit, "velocity_limit": a.velocity_limit,
                                 "mount_body": a.mount_body, "mount_offset": _floats(a.mount_offset),
                                 "mass": a.mass})
    if model.topology is not None:
        doc["topology"] = model.topology.to_dict()
    if model.mirror_pairs:
        doc["mirror_pairs"] = [list(p) for p in model.mirror_pairs]
    return doc


def serialize_model(model):
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def load_model(path, *, strict=True, check=True):
    return parse_model(Path(path).read_text(encoding="utf-8"), strict=strict, check=check)


def save_model(model, path):
    Path(path).write_text(serialize_model(model), encoding="utf-8")
