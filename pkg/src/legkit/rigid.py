"""Joint-space rigid-body dynamics used by the simulator.

Spatial vectors are Plücker coordinates in world axes about the world
origin, ordered (angular, linear). Two entry points:

* fixed-root trees (the jump rig): mass matrix by the composite rigid-body
  algorithm, bias forces by recursive Newton-Euler, optional locked joints
  and an extra joint-space inertia (reflected rotors);
* free-floating trees: the root gets a 6-DoF twist and the step keeps the
  system momentum exactly, which is what the centroidal checks rely on.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import cross3, rotvec_matrix, skew
from .spatial import EZ, _fk

GRAVITY = 9.81


def crm(v):
    """Motion cross-product operator ``v x``."""
    wx, wy, wz, ux, uy, uz = v
    return np.array([[0.0, -wz, wy, 0.0, 0.0, 0.0],
                     [wz, 0.0, -wx, 0.0, 0.0, 0.0],
                     [-wy, wx, 0.0, 0.0, 0.0, 0.0],
                     [0.0, -uz, uy, 0.0, -wz, wy],
                     [uz, 0.0, -ux, wz, 0.0, -wx],
                     [-uy, ux, 0.0, -wy, wx, 0.0]])


def crf(v):
    """Force cross-product operator ``v x*``."""
    return -crm(v).T


def body_inertia_world(si, R, p):
    """6x6 spatial inertia of a body about the world origin."""
    m = si.mass
    c = p + R @ si.com
    C = skew(c)
    out = np.empty((6, 6))
    out[:3, :3] = R @ si.inertia @ R.T + m * C @ C.T
    out[:3, 3:] = m * C
    out[3:, :3] = m * C.T
    out[3:, 3:] = 0.0
    out[3, 3] = out[4, 4] = out[5, 5] = m
    return out


def point_wrench(point, force):
    """Spatial force of a pure force applied at ``point``."""
    point = np.asarray(point, dtype=float)
    force = np.asarray(force, dtype=float)
    return np.concatenate([cross3(point, force), force])


class TreeState:
    """World kinematics of every body at one configuration."""

    def __init__(self, model, q, base_pose=None):
        self.model = model
        self.q = np.asarray(q, dtype=float)
        self.Rs, self.ps = _fk(model, self.q, base_pose)
        self.inertia = [body_inertia_world(si, self.Rs[i], self.ps[i])
                        for i, si in enumerate(model.composed)]
        n = model.dof
        self.S = np.zeros((n, 6))
        self.joint_body = np.zeros(n, dtype=int)
        for bi, pi, j in model.tree_order:
            if pi is None or not j.dof:
                continue
            k = model.q_index[j.name]
            self.joint_body[k] = bi
            if j.type == "floating_vertical":
                self.S[k, 3:] = EZ
                continue
            a = self.Rs[pi] @ (j.origin_rotation @ j.axis)
            if j.type == "revolute":
                self.S[k, :3] = a
                self.S[k, 3:] = cross3(self.ps[bi], a)
            else:
                self.S[k, 3:] = a
        self._composite = None

    @property
    def root(self):
        return self.model.body_index[self.model.root]

    def composite(self):
        """Composite inertia of the subtree rooted at every body."""
        if self._composite is None:
            Ic = [I.copy() for I in self.inertia]
            for bi, pi, _ in reversed(self.model.tree_order):
                if pi is not None:
                    Ic[pi] += Ic[bi]
            self._composite = Ic
        return self._composite

    def mass_matrix(self):
        """Joint-space mass matrix (composite rigid-body algorithm)."""
        model = self.model
        Ic = self.composite()
        n = model.dof
        H = np.zeros((n, n))
        qi = model.q_index
        for bi, pi, j in model.tree_order:
            if pi is None or not j.dof:
                continue
            i = qi[j.name]
            F = Ic[bi] @ self.S[i]
            H[i, i] = self.S[i] @ F
            name = j.parent
            while name in model.parent_joint:
                jj = model.parent_joint[name]
                if jj.dof:
                    k = qi[jj.name]
                    H[i, k] = H[k, i] = self.S[k] @ F
                name = jj.parent
        return H

    def base_coupling(self):
        """Columns ``Ic_i S_i`` linking joint rates to the root's spatial momentum."""
        Ic = self.composite()
        return np.array([Ic[self.joint_body[k]] @ self.S[k] for k in range(self.model.dof)]).T \
            if self.model.dof else np.zeros((6, 0))

    def rnea(self, qd, qdd, gravity=GRAVITY, root_twist=None, root_accel=None, f_ext=None):
        """Recursive Newton-Euler. Returns joint forces and the net root wrench.

        ``f_ext`` maps body index to an external spatial force acting on it.
        """
        model = self.model
        nb = len(model.bodies)
        V = [None] * nb
        A = [None] * nb
        f = [None] * nb
        qi = model.q_index
        a_root = np.zeros(6) if root_accel is None else np.asarray(root_accel, dtype=float)
        a_root = a_root + np.array([0.0, 0.0, 0.0, 0.0, 0.0, gravity])
        for bi, pi, j in model.tree_order:
            if pi is None:
                V[bi] = np.zeros(6) if root_twist is None else np.asarray(root_twist, dtype=float)
                A[bi] = a_root
            else:
                v, a = V[pi], A[pi]
                if j.dof:
                    k = qi[j.name]
                    sq = self.S[k] * qd[k]
                    v = v + sq
                    a = a + crm(v) @ sq + self.S[k] * qdd[k]
                V[bi], A[bi] = v, a
            I = self.inertia[bi]
            f[bi] = I @ A[bi] + crf(V[bi]) @ (I @ V[bi])
            if f_ext is not None and bi in f_ext:
                f[bi] = f[bi] - f_ext[bi]
        tau = np.zeros(model.dof)
        for bi, pi, j in reversed(model.tree_order):
            if pi is None:
                continue
            if j.dof:
                tau[qi[j.name]] = self.S[qi[j.name]] @ f[bi]
            f[pi] = f[pi] + f[bi]
        return tau, f[self.root]

    def total_com(self):
        ms = np.array([si.mass for si in self.model.composed])
        cs = np.array([self.ps[i] + self.Rs[i] @ si.com for i, si in enumerate(self.model.composed)])
        return ms @ cs / ms.sum()


def forward_dynamics(model, q, qd, tau, gravity=GRAVITY, locked=(), f_ext=None,
                     extra_inertia=None, state=None):
    """Joint accelerations of a fixed-root tree.

    Locked joints are held (zero rate and acceleration) and their rows are
    dropped from the solve. ``extra_inertia`` is added to the mass matrix.
    """
    ts = state or TreeState(model, q)
    qd = np.asarray(qd, dtype=float)
    H = ts.mass_matrix()
    if extra_inertia is not None:
        H = H + extra_inertia
    bias, _ = ts.rnea(qd, np.zeros(model.dof), gravity, f_ext=f_ext)
    rhs = np.asarray(tau, dtype=float) - bias
    free = [k for k in range(model.dof) if k not in set(locked)]
    qdd = np.zeros(model.dof)
    qdd[free] = np.linalg.solve(H[np.ix_(free, free)], rhs[free])
    return qdd


def kinetic_energy(model, q, qd, extra_inertia=None, state=None):
    ts = state or TreeState(model, q)
    H = ts.mass_matrix()
    if extra_inertia is not None:
        H = H + extra_inertia
    qd = np.asarray(qd, dtype=float)
    return 0.5 * qd @ H @ qd


def potential_energy(model, q, gravity=GRAVITY, state=None):
    ts = state or TreeState(model, q)
    return gravity * sum(si.mass * (ts.ps[i] + ts.Rs[i] @ si.com)[2]
                         for i, si in enumerate(model.composed))


# -- free-floating root ---------------------------------------------------------

@dataclass
class FloatingState:
    """Free-floating tree: root pose, joint state and system momentum.

    ``momentum`` is the spatial momentum about the world origin; the root
    twist is derived from it so that the two never disagree.
    """

    R: np.ndarray
    p: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    momentum: np.ndarray
    t: float = 0.0

    def tree(self, model):
        return TreeState(model, self.q, (self.R, self.p))

    def root_twist(self, model, ts=None):
        ts = ts or self.tree(model)
        Ic = ts.composite()[ts.root]
        return np.linalg.solve(Ic, self.momentum - ts.base_coupling() @ self.qd)

    def base_velocity(self, model, ts=None):
        """(omega, velocity of the root frame origin) for :mod:`legkit.spatial`."""
        V = self.root_twist(model, ts)
        return V[:3], V[3:] + cross3(V[:3], self.p)


def floating_state(model, q, qd, R=None, p=None, root_twist=None):
    """Initial free-floating state; ``root_twist`` defaults to zero net momentum."""
    R = np.eye(3) if R is None else np.asarray(R, dtype=float)
    p = np.zeros(3) if p is None else np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    ts = TreeState(model, q, (R, p))
    if root_twist is None:
        momentum = np.zeros(6)
    else:
        momentum = ts.composite()[ts.root] @ np.asarray(root_twist, dtype=float) \
            + ts.base_coupling() @ qd
    return FloatingState(R=R, p=p, q=q.copy(), qd=qd.copy(), momentum=momentum)


def floating_accelerations(model, st, tau, gravity=0.0, ts=None):
    """Root spatial acceleration and joint accelerations of the full (6+n) system."""
    ts = ts or st.tree(model)
    n = model.dof
    Vb = st.root_twist(model, ts)
    Hbb = ts.composite()[ts.root]
    Hbq = ts.base_coupling()
    H = np.zeros((6 + n, 6 + n))
    H[:6, :6] = Hbb
    H[:6, 6:] = Hbq
    H[6:, :6] = Hbq.T
    H[6:, 6:] = ts.mass_matrix()
    tau_q, f_root = ts.rnea(st.qd, np.zeros(n), gravity, root_twist=Vb)
    rhs = np.concatenate([-f_root, np.asarray(tau, dtype=float) - tau_q])
    acc = np.linalg.solve(H, rhs)
    return acc[:6], acc[6:]


def floating_step(model, st, tau, dt, gravity=0.0):
    """One semi-implicit Euler step of a free-floating tree.

    Joint rates are advanced from the full dynamics; the root twist is then
    recovered from the (externally driven) system momentum and the root is
    placed so that the centre of mass moves with the linear momentum.
    """
    ts = st.tree(model)
    _, qdd = floating_accelerations(model, st, tau, gravity, ts)
    mass = sum(si.mass for si in model.composed)
    c = ts.total_com()
    h = st.momentum
    # external wrench about the origin: gravity only
    w_ext = np.zeros(6)
    if gravity:
        fg = np.array([0.0, 0.0, -mass * gravity])
        w_ext = np.concatenate([cross3(c, fg), fg])
    qd = st.qd + dt * qdd
    Vb = np.linalg.solve(ts.composite()[ts.root], h - ts.base_coupling() @ qd)
    w = Vb[:3]
    v_origin = Vb[3:] + cross3(w, st.p)
    h_new = h + dt * w_ext
    R = rotvec_matrix(w * dt) @ st.R
    p = st.p + dt * v_origin
    q = st.q + dt * qd
    c_target = c + dt * h_new[3:] / mass
    c_new = TreeState(model, q, (R, p)).total_com()
    p = p + (c_target - c_new)
    return FloatingState(R=R, p=p, q=q, qd=qd, momentum=h_new, t=st.t + dt)
