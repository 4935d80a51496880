"""Vertical jump of a leg on a vertical slider, driven by a three-state machine.

The rig is the leg model hung from a massless world body through a vertical
slider. The ankle joint touches a compliant, frictionless floor. States:

* Ground: task-space impedance around the crouched stance plus weight support
* Thrust: vertical task force following a quintic Bezier profile
* Aerial: joint-space PD towards a slightly bent leg

Actuator torques are computed in actuator space, clamped, and mapped to the
joints through the transmission.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from math import comb

import numpy as np

from .reference import jump_rig
from .rigid import TreeState, forward_dynamics
from .topology import SingularJacobianError, _cond, reflected_inertia

GROUND, THRUST, AERIAL = "Ground", "Thrust", "Aerial"

DEFAULT_THRUST_SHAPE = (1.0, 1.3, 2.2, 2.2, 0.6, 0.0)


class SimulationAbort(RuntimeError):
    def __init__(self, msg, state=None):
        self.state = state
        super().__init__(msg)


def bezier5(s, P):
    """Quintic Bezier (Bernstein form) at ``s`` in [0, 1]."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"Bezier parameter {s} outside [0, 1]")
    P = np.asarray(P, dtype=float)
    if P.shape[0] != 6:
        raise ValueError("a quintic Bezier needs 6 control points")
    t = 1.0 - s
    return sum(comb(5, i) * s ** i * t ** (5 - i) * P[i] for i in range(6))


def _diag(*v):
    return np.diag(np.array(v, dtype=float)).tolist()


@dataclass
class SimConfig:
    dt: float = 1e-4
    gravity: float = 9.81
    contact_stiffness: float = 5e4
    contact_damping: float = 300.0
    thrust_bezier: list = None          # N; None -> total weight times DEFAULT_THRUST_SHAPE
    thrust_duration: float = 0.22
    liftoff_threshold: float = 8.0
    touchdown_threshold: float = 8.0
    ground_lock: float = 2.0
    initial_lock: float = 0.0
    torque_sat: float = 10.0
    kx_p: list = field(default_factory=lambda: _diag(3000.0, 3000.0, 3000.0))
    kx_d: list = field(default_factory=lambda: _diag(60.0, 60.0, 60.0))
    kq_p: list = field(default_factory=lambda: _diag(0.0, 60.0, 60.0, 60.0, 10.0))
    kq_d: list = field(default_factory=lambda: _diag(0.0, 1.5, 1.5, 1.5, 0.3))
    stance_hfe: float = -0.6
    aerial_setpoint: list = field(default_factory=lambda: [0.0, 0.0, -0.2, 0.4, 0.0])
    jump_time: float = 0.1
    settle_time: float = 0.3
    t_max: float = 3.0
    locked_joints: list = field(default_factory=lambda: ["hip_yaw"])
    rotor_inertia: bool = True
    contact_body: str = "ankle_link"
    hip_body: str = "hip_roll_link"

    def __post_init__(self):
        errs = self.check()
        if errs:
            raise ValueError("invalid simulation config: " + "; ".join(errs))

    def check(self):
        errs = []
        if not self.dt > 0:
            errs.append("dt must be > 0")
        for name in ("liftoff_threshold", "touchdown_threshold", "torque_sat", "thrust_duration"):
            if not getattr(self, name) > 0:
                errs.append(f"{name} must be > 0")
        for name, n in (("kx_p", 3), ("kx_d", 3), ("kq_p", 5), ("kq_d", 5)):
            K = np.asarray(getattr(self, name), dtype=float)
            if K.shape != (n, n):
                errs.append(f"{name} must be {n}x{n}")
            elif not np.allclose(K, K.T, atol=1e-12) or np.linalg.eigvalsh(K)[0] < -1e-12:
                errs.append(f"{name} must be symmetric positive semidefinite")
        if self.thrust_bezier is not None and len(self.thrust_bezier) != 6:
            errs.append("thrust_bezier needs 6 control points")
        if len(self.aerial_setpoint) != 5:
            errs.append("aerial_setpoint needs 5 joint values")
        return errs

    def thrust_points(self, total_mass):
        if self.thrust_bezier is not None:
            return np.asarray(self.thrust_bezier, dtype=float)
        return total_mass * self.gravity * np.array(DEFAULT_THRUST_SHAPE)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d, strict=True):
        names = {f.name for f in fields(cls)}
        extra = sorted(set(d) - names)
        if extra and strict:
            raise ValueError(f"unknown config keys {extra}")
        return cls(**{k: v for k, v in d.items() if k in names})


def load_config(path, strict=True):
    with open(path, encoding="utf-8") as f:
        return SimConfig.from_dict(json.load(f), strict)


def save_config(config, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2)
        f.write("\n")


@dataclass(frozen=True)
class Phase:
    name: str = GROUND
    entry_time: float = 0.0
    lock_until: float = 0.0


def phase_transition(phase, grf_z, clock, config, command=False, prev_grf_z=None):
    """Advance the state machine by one tick (Ground -> Thrust -> Aerial -> Ground)."""
    if phase.name == GROUND:
        if command and clock >= phase.lock_until:
            return Phase(THRUST, clock, phase.lock_until)
    elif phase.name == THRUST:
        if grf_z < config.liftoff_threshold:
            return Phase(AERIAL, clock, phase.lock_until)
    elif phase.name == AERIAL:
        rising = prev_grf_z is None or grf_z > prev_grf_z
        if grf_z > config.touchdown_threshold and rising:
            return Phase(GROUND, clock, clock + config.ground_lock)
    else:
        raise ValueError(f"unknown phase {phase.name!r}")
    return phase


def contact_force(height, velocity, config):
    """Vertical unilateral spring-damper; ``height``/``velocity`` of the contact point."""
    if height >= 0.0:
        return np.zeros(3)
    fz = config.contact_stiffness * (-height) - config.contact_damping * velocity
    return np.array([0.0, 0.0, max(0.0, fz)])


@dataclass
class SimState:
    clock: float
    base_height: float
    base_vel: float
    q: np.ndarray
    qdot: np.ndarray
    psi: np.ndarray
    psidot: np.ndarray
    grf: np.ndarray


class JumpRig:
    """Rig model plus the cached index bookkeeping the controller needs."""

    def __init__(self, model, config):
        topo = model.topology
        if topo is None:
            raise ValueError("jump simulation needs a model with an actuation topology")
        self.leg = model
        self.topo = topo.bind(model)
        self.config = config
        self.rig = jump_rig(model)
        self.slider = self.rig.q_index["slider"]
        self.leg_idx = np.array([self.rig.q_index[j] for j in self.topo.joints])
        self.locked = [self.rig.q_index[j] for j in config.locked_joints]
        self.mass = self.rig.total_mass
        self.contact_bi = self.rig.body_index[config.contact_body]
        self.hip_bi = self.rig.body_index[config.hip_body]
        self.chain_contact = self._chain_mask(config.contact_body)
        self.chain_hip = self._chain_mask(config.hip_body)
        self.extra = None
        if config.rotor_inertia and self.topo.rotor_inertias is not None:
            Jh = self.topo.jacobian(self.topo.inverse(np.zeros(len(self.leg_idx))))
            Ir = reflected_inertia(Jh, self.topo.rotor_inertias)
            extra = np.zeros((self.rig.dof, self.rig.dof))
            extra[np.ix_(self.leg_idx, self.leg_idx)] = Ir
            self.extra = extra

    def _chain_mask(self, body):
        mask = np.zeros(self.rig.dof, dtype=bool)
        name = body
        while name in self.rig.parent_joint:
            j = self.rig.parent_joint[name]
            if j.dof:
                mask[self.rig.q_index[j.name]] = True
            name = j.parent
        return mask

    def point_jacobian(self, ts, bi, mask):
        x = ts.ps[bi]
        J = ts.S[:, 3:] + np.cross(ts.S[:, :3], x)
        J[~mask] = 0.0
        return J.T, x

    def full_q(self, base_height, q_leg):
        q = np.zeros(self.rig.dof)
        q[self.slider] = base_height
        q[self.leg_idx] = q_leg
        return q

    def stance_posture(self):
        q = np.zeros(len(self.leg_idx))
        names = list(self.topo.joints)
        hfe = self.config.stance_hfe
        q[names.index("hfe")] = hfe
        q[names.index("knee")] = -2.0 * hfe
        return q


def controller_step(phase, rig, ts, qd_full, psi, clock, setpoint_x, P, config):
    """Actuator torques for the current phase, clamped to ``torque_sat``.

    Returns ``(tau_psi, tau_x_z, Jpsi)``.
    """
    Jpsi = rig.topo.jacobian(psi)
    if abs(np.linalg.det(Jpsi)) <= 1e-12:
        raise SingularJacobianError("singular topology Jacobian", _cond(Jpsi))
    tau_x_z = 0.0
    if phase.name in (GROUND, THRUST):
        Jh, xh = rig.point_jacobian(ts, rig.hip_bi, rig.chain_hip)
        Jc, xc = rig.point_jacobian(ts, rig.contact_bi, rig.chain_contact)
        Jx = (Jh - Jc)[:, rig.leg_idx]
        Jxpsi = Jx @ Jpsi
        if phase.name == GROUND:
            dx = setpoint_x - (xh - xc)
            dxd = -(Jh - Jc) @ qd_full
            F = (np.array([0.0, 0.0, rig.mass * config.gravity])
                 + np.asarray(config.kx_p) @ dx + np.asarray(config.kx_d) @ dxd)
        else:
            s = min(max((clock - phase.entry_time) / config.thrust_duration, 0.0), 1.0)
            F = np.array([0.0, 0.0, bezier5(s, P)])
        tau_x_z = float(F[2])
        tau = Jxpsi.T @ F
    else:
        q = ts.q[rig.leg_idx]
        qd = qd_full[rig.leg_idx]
        dq = np.asarray(config.aerial_setpoint, dtype=float) - q
        tau = Jpsi.T @ (np.asarray(config.kq_p) @ dq - np.asarray(config.kq_d) @ qd)
    sat = config.torque_sat
    return np.clip(tau, -sat, sat), tau_x_z, Jpsi


@dataclass
class Trajectory:
    t: np.ndarray
    phase: list
    base_height: np.ndarray
    base_vel: np.ndarray
    q: np.ndarray            # (T, 5) leg joints
    qd: np.ndarray
    psi: np.ndarray
    psid: np.ndarray
    grf: np.ndarray          # (T, 3)
    tau_psi: np.ndarray      # (T, 5) commanded, clamped
    tau_q: np.ndarray        # (T, 5) resulting joint torques
    tau_x: np.ndarray        # (T,) commanded vertical task force
    contact_height: np.ndarray
    joints: tuple = ()
    actuators: tuple = ()
    metrics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    def phase_sequence(self):
        seq = []
        for p in self.phase:
            if not seq or seq[-1] != p:
                seq.append(p)
        return seq

    def phase_mask(self, name):
        return np.array([p == name for p in self.phase])


def _first(mask):
    idx = np.flatnonzero(mask)
    return int(idx[0]) if len(idx) else None


def compute_metrics(tr):
    """Summary metrics, recomputable from the recorded series."""
    thrust = tr.phase_mask(THRUST)
    aerial = tr.phase_mask(AERIAL)
    i_thrust = _first(thrust)
    m = {"phase_sequence": tr.phase_sequence(), "duration": float(tr.t[-1]) if len(tr) else 0.0}
    if i_thrust is None:
        m.update(apex=0.0, flight_rise=0.0, foot_clearance=0.0, thrust_duration=0.0,
                 aerial_duration=0.0, aerial_duration_ms=0.0)
    else:
        h0 = float(tr.base_height[i_thrust])
        m["apex"] = float(tr.base_height[i_thrust:].max() - h0)
        i_air = _first(aerial)
        m["thrust_duration"] = float(thrust.sum() * (tr.t[1] - tr.t[0])) if len(tr) > 1 else 0.0
        if i_air is None:
            m.update(flight_rise=0.0, foot_clearance=0.0, aerial_duration=0.0)
        else:
            m["flight_rise"] = float(tr.base_height[i_air:].max() - tr.base_height[i_air])
            m["foot_clearance"] = float(max(0.0, tr.contact_height[aerial].max()))
            m["aerial_duration"] = float(aerial.sum() * (tr.t[1] - tr.t[0]))
        m["aerial_duration_ms"] = 1000.0 * m["aerial_duration"]
    m["peak_joint_torque"] = dict(zip(tr.joints, np.abs(tr.tau_q).max(axis=0).tolist()))
    m["peak_actuator_torque"] = dict(zip(tr.actuators, np.abs(tr.tau_psi).max(axis=0).tolist()))
    m["peak_actuator_speed"] = dict(zip(tr.actuators, np.abs(tr.psid).max(axis=0).tolist()))
    m["peak_joint_speed"] = dict(zip(tr.joints, np.abs(tr.qd).max(axis=0).tolist()))
    m["max_abs_tau_psi"] = float(np.abs(tr.tau_psi).max())
    m["peak_grf_z"] = float(tr.grf[:, 2].max())
    if i_thrust is not None and "knee" in tr.joints:
        k, a = tr.joints.index("knee"), tr.joints.index("ankle")
        m["thrust_peak_knee_torque"] = float(np.abs(tr.tau_q[thrust, k]).max())
        m["thrust_peak_ankle_torque"] = float(np.abs(tr.tau_q[thrust, a]).max())
        m["thrust_peak_pair_motor_torque"] = float(np.abs(tr.tau_psi[thrust][:, [k, a]]).max())
    return m


def euler_step(model, q, qd, tau, dt, gravity, locked=(), extra_inertia=None, state=None):
    """Semi-implicit Euler: velocities first, then positions with the new velocities."""
    qdd = forward_dynamics(model, q, qd, tau, gravity, locked=locked, extra_inertia=extra_inertia,
                           state=state)
    qd = qd + dt * qdd
    return q + dt * qd, qd


def run_jump(model, config=None, record_stride=1):
    """Simulate one jump and return the recorded :class:`Trajectory`.

    Per step: contact, phase update, controller (with saturation), dynamics,
    semi-implicit Euler integration. A profile with all-zero control points
    never triggers the jump.
    """
    config = config or SimConfig()
    rig = JumpRig(model, config)
    topo = rig.topo
    dt = config.dt
    P = config.thrust_points(rig.mass)
    will_jump = bool(np.any(P != 0.0))

    q_leg = rig.stance_posture()
    # settle height: contact point sits at the static penetration under full weight
    q = rig.full_q(0.0, q_leg)
    ts = TreeState(rig.rig, q)
    z0 = ts.ps[rig.contact_bi][2]
    pen = rig.mass * config.gravity / config.contact_stiffness
    q[rig.slider] = -z0 - pen
    qd = np.zeros(rig.rig.dof)
    psi = topo.inverse(q[rig.leg_idx])
    ts = TreeState(rig.rig, q)
    setpoint_x = ts.ps[rig.hip_bi] - ts.ps[rig.contact_bi]

    phase = Phase(GROUND, 0.0, config.initial_lock)
    jumped = False
    prev_grf = None
    end_time = config.t_max if will_jump else min(config.t_max, config.jump_time + config.settle_time)
    n_steps = int(round(end_time / dt))
    rec = {k: [] for k in ("t", "phase", "h", "hd", "q", "qd", "psi", "psid", "grf", "tau_psi",
                           "tau_q", "tau_x", "zc")}
    ground_entries = 0
    for step in range(n_steps + 1):
        clock = step * dt
        ts = TreeState(rig.rig, q)
        Jc, xc = rig.point_jacobian(ts, rig.contact_bi, rig.chain_contact)
        vz = float(Jc[2] @ qd)
        grf = contact_force(float(xc[2]), vz, config)
        command = will_jump and not jumped and clock >= config.jump_time - 1e-12
        new_phase = phase_transition(phase, float(grf[2]), clock, config, command, prev_grf)
        if new_phase.name == THRUST and phase.name == GROUND:
            jumped = True
        if new_phase.name == GROUND and phase.name == AERIAL:
            ground_entries += 1
        phase = new_phase
        prev_grf = float(grf[2])
        try:
            psi = topo.inverse(q[rig.leg_idx], guess=psi)
            tau_psi, tau_x, Jpsi = controller_step(phase, rig, ts, qd, psi, clock, setpoint_x, P,
                                                   config)
        except (SingularJacobianError, ValueError) as e:
            raise SimulationAbort(f"controller failure at t={clock:.4f}: {e}",
                                  _snapshot(rig, clock, q, qd, psi, grf)) from e
        tau_q = np.linalg.solve(Jpsi.T, tau_psi)
        psid = np.linalg.solve(Jpsi, qd[rig.leg_idx])
        if step % record_stride == 0:
            rec["t"].append(clock)
            rec["phase"].append(phase.name)
            rec["h"].append(q[rig.slider])
            rec["hd"].append(qd[rig.slider])
            rec["q"].append(q[rig.leg_idx].copy())
            rec["qd"].append(qd[rig.leg_idx].copy())
            rec["psi"].append(psi.copy())
            rec["psid"].append(psid)
            rec["grf"].append(grf)
            rec["tau_psi"].append(tau_psi)
            rec["tau_q"].append(tau_q)
            rec["tau_x"].append(tau_x)
            rec["zc"].append(float(xc[2]))
        if ground_entries and clock >= phase.entry_time + config.settle_time - 1e-12:
            break
        if step == n_steps:
            break
        tau = np.zeros(rig.rig.dof)
        tau[rig.leg_idx] = tau_q
        tau += Jc.T @ grf
        q, qd = euler_step(rig.rig, q, qd, tau, dt, config.gravity, rig.locked, rig.extra, ts)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise SimulationAbort(f"non-finite state at t={clock:.4f}",
                                  _snapshot(rig, clock, q, qd, psi, grf))
    tr = Trajectory(t=np.array(rec["t"]), phase=rec["phase"], base_height=np.array(rec["h"]),
                    base_vel=np.array(rec["hd"]), q=np.array(rec["q"]), qd=np.array(rec["qd"]),
                    psi=np.array(rec["psi"]), psid=np.array(rec["psid"]), grf=np.array(rec["grf"]),
                    tau_psi=np.array(rec["tau_psi"]), tau_q=np.array(rec["tau_q"]),
                    tau_x=np.array(rec["tau_x"]), contact_height=np.array(rec["zc"]),
                    joints=tuple(topo.joints), actuators=tuple(topo.actuators))
    tr.metrics = compute_metrics(tr)
    return tr


def _snapshot(rig, clock, q, qd, psi, grf):
    return SimState(clock=clock, base_height=float(q[rig.slider]), base_vel=float(qd[rig.slider]),
                    q=q[rig.leg_idx].copy(), qdot=qd[rig.leg_idx].copy(),
                    psi=np.array(psi, dtype=float), psidot=np.full(len(rig.leg_idx), np.nan),
                    grf=np.array(grf, dtype=float))


# -- topology comparison ----------------------------------------------------------

DIFFERENTIAL_PAIR_J = np.array([[0.5, 0.5], [0.5, -0.5]])   # N_d = 1
SERIAL_PAIR_J = np.eye(2)                                    # N_s = 1


def replay_pair(tau_knee, tau_ankle, J):
    """Per-motor torques ``J^T tau_q`` along a joint-torque series (T x 2)."""
    tq = np.column_stack([np.asarray(tau_knee, dtype=float), np.asarray(tau_ankle, dtype=float)])
    return tq @ np.asarray(J, dtype=float)


@dataclass
class Comparison:
    peak_motor_differential: float
    peak_motor_serial: float
    ratio: float
    peak_speed_differential: float
    peak_speed_serial: float

    def to_dict(self):
        return asdict(self)


def compare_pair(tau_knee, tau_ankle, qd_knee=None, qd_ankle=None):
    """Peak per-motor torque of a knee/ankle torque series under both transmissions."""
    td = replay_pair(tau_knee, tau_ankle, DIFFERENTIAL_PAIR_J)
    ts = replay_pair(tau_knee, tau_ankle, SERIAL_PAIR_J)
    pd, ps = float(np.abs(td).max()), float(np.abs(ts).max())
    sd = ss = math.nan
    if qd_knee is not None:
        qd = np.column_stack([qd_knee, qd_ankle])
        sd = float(np.abs(qd @ np.linalg.inv(DIFFERENTIAL_PAIR_J).T).max())
        ss = float(np.abs(qd @ np.linalg.inv(SERIAL_PAIR_J).T).max())
    return Comparison(pd, ps, pd / ps if ps > 0 else math.nan, sd, ss)


def compare_topologies(model, config=None, trajectory=None):
    """Replay the knee/ankle torques of a jump through differential and serial maps."""
    tr = trajectory if trajectory is not None else run_jump(model, config)
    k, a = tr.joints.index("knee"), tr.joints.index("ankle")
    return compare_pair(tr.tau_q[:, k], tr.tau_q[:, a], tr.qd[:, k], tr.qd[:, a])


# -- export -------------------------------------------------------------------------

def write_trajectory_csv(tr, path, stride=1):
    n = tr.q.shape[1]
    head = (["t", "phase", "base_height", "grf_z"] + [f"q{i + 1}" for i in range(n)]
            + [f"qd{i + 1}" for i in range(n)] + [f"tau_psi{i + 1}" for i in range(n)] + ["tau_x_z"])
    g = "%.17g"
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(head)
        for i in range(0, len(tr), stride):
            w.writerow([g % tr.t[i], tr.phase[i], g % tr.base_height[i], g % tr.grf[i, 2]]
                       + [g % v for v in tr.q[i]] + [g % v for v in tr.qd[i]]
                       + [g % v for v in tr.tau_psi[i]] + [g % tr.tau_x[i]])


def write_summary_json(metrics, path, extra=None):
    doc = dict(metrics)
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def config_with(config, **changes):
    return replace(config, **changes)
