"""Forward kinematics and centroidal quantities of a RobotModel.

All results are expressed in world-aligned axes. The centroidal composite
rigid-body inertia (CCRBI) is assembled leaf-to-root: each subtree's mass,
first moment and rotational inertia about its frame origin are carried into
the parent frame, and the root total is finally shifted to the centre of
mass. Its 6x6 form is ordered (linear, angular).
"""

from dataclasses import dataclass

import numpy as np

from .geometry import axis_angle, skew

EZ = np.array([0.0, 0.0, 1.0])


def _joint_motion(j, qv):
    """Rotation and translation of a joint's child frame in its parent frame."""
    Ro = j.origin_rotation
    if j.type == "revolute":
        return Ro @ axis_angle(j.axis, qv), j.origin_xyz
    if j.type == "prismatic":
        return Ro, j.origin_xyz + Ro @ (j.axis * qv)
    return Ro, j.origin_xyz  # fixed; floating_vertical translation is added in world z


def _fk(model, q, base=None):
    n = len(model.bodies)
    Rs = [None] * n
    ps = [None] * n
    qi = model.q_index
    for bi, pi, j in model.tree_order:
        if pi is None:
            if base is None:
                Rs[bi], ps[bi] = np.eye(3), np.zeros(3)
            else:
                Rs[bi], ps[bi] = np.asarray(base[0], dtype=float), np.asarray(base[1], dtype=float)
            continue
        qv = q[qi[j.name]] if j.dof else 0.0
        Rr, pr = _joint_motion(j, qv)
        Rp = Rs[pi]
        Rs[bi] = Rp @ Rr
        p = ps[pi] + Rp @ pr
        if j.type == "floating_vertical":
            p = p + EZ * qv
        ps[bi] = p
    return Rs, ps


def _check_q(model, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise ValueError(f"configuration has shape {q.shape}, model has {model.dof} DoF")
    return q


def forward_kinematics(model, q, base_pose=None):
    """World transform (4x4) of every body frame, keyed by body name.

    ``base_pose`` is an optional ``(R, p)`` placing the root body; the root is
    at the identity otherwise.
    """
    q = _check_q(model, q)
    Rs, ps = _fk(model, q, base_pose)
    out = {}
    for name, i in model.body_index.items():
        T = np.eye(4)
        T[:3, :3] = Rs[i]
        T[:3, 3] = ps[i]
        out[name] = T
    return out


def point_position(model, q, body, offset=(0.0, 0.0, 0.0), base_pose=None):
    """World position of a point fixed in ``body`` (walks only the body's chain)."""
    q = np.asarray(q, dtype=float)
    chain = []
    name = body
    while name in model.parent_joint:
        j = model.parent_joint[name]
        chain.append(j)
        name = j.parent
    if base_pose is None:
        R, p = np.eye(3), np.zeros(3)
    else:
        R, p = np.asarray(base_pose[0], dtype=float), np.asarray(base_pose[1], dtype=float)
    qi = model.q_index
    for j in reversed(chain):
        qv = q[qi[j.name]] if j.dof else 0.0
        Rr, pr = _joint_motion(j, qv)
        p = p + R @ pr
        if j.type == "floating_vertical":
            p = p + EZ * qv
        R = R @ Rr
    return p + R @ np.asarray(offset, dtype=float)


def _joint_world_axis(j, Rparent):
    if j.type == "floating_vertical":
        return EZ
    return Rparent @ (j.origin_rotation @ j.axis)


def point_jacobian(model, q, body, offset=(0.0, 0.0, 0.0)):
    """Linear velocity Jacobian (3 x dof, world frame) of a point fixed in ``body``."""
    q = _check_q(model, q)
    Rs, ps = _fk(model, q)
    bi = model.body_index[body]
    x = ps[bi] + Rs[bi] @ np.asarray(offset, dtype=float)
    J = np.zeros((3, model.dof))
    name = body
    while name in model.parent_joint:
        j = model.parent_joint[name]
        if j.dof:
            ci = model.body_index[j.child]
            a = _joint_world_axis(j, Rs[model.body_index[j.parent]])
            col = model.q_index[j.name]
            if j.type == "revolute":
                J[:, col] = np.cross(a, x - ps[ci])
            else:
                J[:, col] = a
        name = j.parent
    return J


@dataclass(frozen=True, eq=False)
class CentroidalInertia:
    full: np.ndarray   # 6x6, (linear, angular) ordering, about the com
    rot: np.ndarray    # 3x3 rotational block I_G
    com: np.ndarray
    mass: float


def ccrbi(model, q, base_pose=None):
    """Centroidal composite rigid-body inertia at configuration ``q``."""
    q = _check_q(model, q)
    n = len(model.bodies)
    m = [si.mass for si in model.composed]
    h = [si.mass * si.com for si in model.composed]
    IO = [si.about_origin() for si in model.composed]
    qi = model.q_index
    # leaf-to-root: carry each subtree into its parent's frame
    for bi, pi, j in reversed(model.tree_order):
        if pi is None:
            continue
        qv = q[qi[j.name]] if j.dof else 0.0
        R, p = _joint_motion(j, qv)
        if j.type == "floating_vertical":
            p = p + EZ * qv  # parent of a vertical slider is the (world-aligned) root
        mi = m[bi]
        Rh = R @ h[bi]
        P = skew(p)
        RH = skew(Rh)
        I = R @ IO[bi] @ R.T - RH @ P - P @ RH - mi * (P @ P)
        m[pi] += mi
        h[pi] = h[pi] + mi * p + Rh
        IO[pi] = IO[pi] + I
    ri = model.body_index[model.root]
    M, H, I0 = m[ri], h[ri], IO[ri]
    if base_pose is not None:
        Rb, pb = np.asarray(base_pose[0], dtype=float), np.asarray(base_pose[1], dtype=float)
        Rh = Rb @ H
        P = skew(pb)
        RH = skew(Rh)
        I0 = Rb @ I0 @ Rb.T - RH @ P - P @ RH - M * (P @ P)
        H = M * pb + Rh
    c = H / M if M > 0 else np.zeros(3)
    C = skew(c)
    IG = I0 + M * (C @ C)
    IG = 0.5 * (IG + IG.T)
    full = np.zeros((6, 6))
    full[:3, :3] = M * np.eye(3)
    off = skew(H - M * c)
    full[:3, 3:] = -off
    full[3:, :3] = off
    full[3:, 3:] = IG
    return CentroidalInertia(full=full, rot=IG, com=c, mass=M)


def body_velocities(model, q, qdot, base_pose=None, base_twist=None):
    """Forward velocity propagation.

    Returns ``(Rs, ps, ws, vs)``: per-body world rotation, origin position,
    angular velocity and origin linear velocity. ``base_twist`` is
    ``(omega, v_origin)`` of the root body.
    """
    q = _check_q(model, q)
    qdot = np.asarray(qdot, dtype=float)
    if qdot.shape != q.shape:
        raise ValueError(f"joint rates have shape {qdot.shape}, expected {q.shape}")
    Rs, ps = _fk(model, q, base_pose)
    n = len(model.bodies)
    ws = [None] * n
    vs = [None] * n
    qi = model.q_index
    for bi, pi, j in model.tree_order:
        if pi is None:
            if base_twist is None:
                ws[bi], vs[bi] = np.zeros(3), np.zeros(3)
            else:
                ws[bi], vs[bi] = np.asarray(base_twist[0], float), np.asarray(base_twist[1], float)
            continue
        w = ws[pi]
        v = vs[pi] + np.cross(w, ps[bi] - ps[pi])
        if j.dof:
            a = _joint_world_axis(j, Rs[pi])
            rate = qdot[qi[j.name]]
            if j.type == "revolute":
                w = w + a * rate
            else:
                v = v + a * rate
        ws[bi], vs[bi] = w, v
    return Rs, ps, ws, vs


def system_momentum(model, q, qdot, base_pose=None, base_twist=None):
    """Total linear momentum and angular momentum about the instantaneous com."""
    Rs, ps, ws, vs = body_velocities(model, q, qdot, base_pose, base_twist)
    masses = np.array([si.mass for si in model.composed])
    cs = [ps[i] + Rs[i] @ si.com for i, si in enumerate(model.composed)]
    M = masses.sum()
    c = sum(mi * ci for mi, ci in zip(masses, cs)) / M
    L = np.zeros(3)
    hG = np.zeros(3)
    for i, si in enumerate(model.composed):
        if si.mass == 0.0 and not si.inertia.any():
            continue
        vc = vs[i] + np.cross(ws[i], cs[i] - ps[i])
        L += si.mass * vc
        hG += Rs[i] @ si.inertia @ Rs[i].T @ ws[i] + si.mass * np.cross(cs[i] - c, vc)
    return L, hG


def centroidal_momentum(model, q, qdot, base_pose=None, base_twist=None):
    """Centroidal angular momentum ``h_G`` (3-vector)."""
    return system_momentum(model, q, qdot, base_pose, base_twist)[1]
