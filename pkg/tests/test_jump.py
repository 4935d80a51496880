import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from legkit.jump import (AERIAL, GROUND, THRUST, JumpRig, Phase, SimConfig, SimulationAbort,
                         bezier5, compare_pair, compare_topologies, compute_metrics, config_with,
                         contact_force, controller_step, load_config, phase_transition, run_jump,
                         save_config, write_summary_json, write_trajectory_csv)
from legkit.rigid import TreeState
from legkit.topology import InverseKinematicsError, tello_forward
from oracles import de_casteljau

CFG = SimConfig()


# -- Bezier ---------------------------------------------------------------------

def test_bezier_endpoints_and_constant():
    P = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0]
    assert bezier5(0.0, P) == 3.0
    assert bezier5(1.0, P) == 9.0
    for s in (0.0, 0.2, 0.5, 0.9, 1.0):
        assert bezier5(s, [2.5] * 6) == pytest.approx(2.5, abs=1e-15)


def test_bezier_de_casteljau():
    rng = np.random.default_rng(0)
    P = rng.normal(size=6) * 50
    assert bezier5(0.37, P) == pytest.approx(de_casteljau(0.37, P), abs=1e-12)


@given(st.floats(0.0, 1.0), st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6))
@settings(max_examples=200, deadline=None)
def test_bezier_matches_oracle(s, P):
    assert bezier5(s, P) == pytest.approx(de_casteljau(s, P), abs=1e-9)


def test_bezier_domain():
    with pytest.raises(ValueError):
        bezier5(1.01, [0.0] * 6)
    with pytest.raises(ValueError):
        bezier5(-0.01, [0.0] * 6)
    with pytest.raises(ValueError):
        bezier5(0.5, [0.0] * 5)


# -- state machine and contact --------------------------------------------------

def test_phase_transitions():
    thrust = Phase(THRUST, 0.1, 0.0)
    assert phase_transition(thrust, 7.9, 0.3, CFG).name == AERIAL
    assert phase_transition(thrust, 8.1, 0.3, CFG).name == THRUST
    aerial = Phase(AERIAL, 0.3, 0.0)
    back = phase_transition(aerial, 30.0, 0.5, CFG, prev_grf_z=0.0)
    assert back.name == GROUND and back.lock_until == pytest.approx(2.5)
    assert phase_transition(aerial, 30.0, 0.5, CFG, prev_grf_z=40.0).name == AERIAL
    locked = Phase(GROUND, 0.5, 2.5)
    assert phase_transition(locked, 70.0, 1.0, CFG, command=True).name == GROUND
    assert phase_transition(locked, 70.0, 2.6, CFG, command=True).name == THRUST
    assert phase_transition(Phase(GROUND), 70.0, 0.0, CFG, command=False).name == GROUND
    with pytest.raises(ValueError):
        phase_transition(Phase("Hover"), 0.0, 0.0, CFG)


def test_contact_examples():
    np.testing.assert_array_equal(contact_force(1e-3, 0.0, CFG), 0.0)
    np.testing.assert_allclose(contact_force(-1e-3, 0.0, CFG), [0.0, 0.0, 50.0])
    # fast withdrawal: spring minus damper would pull the foot down
    np.testing.assert_array_equal(contact_force(-1e-3, 1.0, CFG), 0.0)
    # compression rate adds damping force
    assert contact_force(-1e-3, -0.1, CFG)[2] == pytest.approx(80.0)


# -- controller -----------------------------------------------------------------

def _rig_state(tello, config, q_leg, height=0.4):
    rig = JumpRig(tello, config)
    q = rig.full_q(height, q_leg)
    ts = TreeState(rig.rig, q)
    psi = rig.topo.inverse(q_leg)
    setpoint = ts.ps[rig.hip_bi] - ts.ps[rig.contact_bi]
    return rig, q, ts, psi, setpoint


def test_ground_zero_error_is_gravity_compensation(tello):
    cfg = SimConfig(torque_sat=1e6)
    rig, q, ts, psi, x0 = _rig_state(tello, cfg, JumpRig(tello, cfg).stance_posture())
    tau, fz, Jpsi = controller_step(Phase(GROUND), rig, ts, np.zeros(rig.rig.dof), psi, 0.0, x0,
                                    cfg.thrust_points(rig.mass), cfg)
    assert fz == pytest.approx(rig.mass * cfg.gravity)
    Jh, _ = rig.point_jacobian(ts, rig.hip_bi, rig.chain_hip)
    Jc, _ = rig.point_jacobian(ts, rig.contact_bi, rig.chain_contact)
    Jx = (Jh - Jc)[:, rig.leg_idx]
    np.testing.assert_allclose(tau, (Jx @ Jpsi).T @ [0.0, 0.0, rig.mass * cfg.gravity], atol=1e-12)


def _two_link_tau(hfe, knee, F, L1=0.22, L2=0.22):
    # vertical task force on hip - ankle of a planar two-link leg (pitch axes +y)
    dz_dhfe = -L1 * math.sin(hfe) - L2 * math.sin(hfe + knee)
    dz_dknee = -L2 * math.sin(hfe + knee)
    return np.array([0.0, 0.0, F * dz_dhfe, F * dz_dknee, 0.0])


@pytest.mark.parametrize("hfe,knee", [(-0.6, 1.2), (-0.3, 0.9), (-0.7, 1.0)])
def test_thrust_start_matches_two_link_oracle(tello, hfe, knee):
    cfg = SimConfig(torque_sat=1e6)
    rig, q, ts, psi, x0 = _rig_state(tello, cfg, np.array([0.0, 0.0, hfe, knee, 0.0]))
    P = cfg.thrust_points(rig.mass)
    clock = 0.25
    tau, fz, Jpsi = controller_step(Phase(THRUST, clock), rig, ts, np.zeros(rig.rig.dof), psi,
                                    clock, x0, P, cfg)
    weight = rig.mass * cfg.gravity
    assert fz == pytest.approx(weight, rel=1e-12)
    tau_q = np.linalg.solve(Jpsi.T, tau)
    np.testing.assert_allclose(tau_q, _two_link_tau(hfe, knee, weight), atol=1e-9)


@pytest.mark.parametrize("phase", [GROUND, THRUST, AERIAL])
def test_huge_gains_saturate(tello, phase):
    big = (np.eye(3) * 1e9).tolist()
    cfg = SimConfig(kx_p=big, kx_d=big, kq_p=(np.eye(5) * 1e9).tolist(),
                    kq_d=(np.eye(5) * 1e9).tolist(), thrust_bezier=[1e9] * 6)
    q_leg = np.array([0.0, 0.1, -0.5, 0.8, 0.2])
    rig, q, ts, psi, x0 = _rig_state(tello, cfg, q_leg)
    qd = np.zeros(rig.rig.dof)
    qd[rig.leg_idx] = [0.0, 0.3, -0.2, 0.5, -0.4]
    tau, _, _ = controller_step(Phase(phase), rig, ts, qd, psi, 0.0, x0 + 0.01,
                                cfg.thrust_points(rig.mass), cfg)
    moving = np.abs(tau) > 0
    assert moving.sum() >= 3
    np.testing.assert_array_equal(np.abs(tau[moving]), 10.0)


# -- full runs ------------------------------------------------------------------

def test_default_jump_qualitative(default_jump):
    tr = default_jump
    m = tr.metrics
    assert tr.phase_sequence() == [GROUND, THRUST, AERIAL, GROUND]
    assert m["apex"] >= 0.05
    assert 0.1 <= m["thrust_duration"] <= 0.4
    assert np.abs(tr.tau_psi).max() <= 10.0 + 1e-12
    assert m["thrust_peak_knee_torque"] >= 1.5 * m["thrust_peak_pair_motor_torque"]
    assert m["thrust_peak_ankle_torque"] < 5.0
    assert m["aerial_duration_ms"] > 0


def test_trajectory_invariants(tello, default_jump):
    tr = default_jump
    assert np.all(np.diff(tr.t) > 0)
    assert np.all(tr.grf[:, 2] >= 0.0)
    params = tello.topology.tello
    worst = max(np.abs(tello_forward(params, tr.psi[i]) - tr.q[i]).max() for i in range(0, len(tr), 7))
    assert worst < 1e-6
    # metrics are recomputable from the recorded series
    again = compute_metrics(tr)
    assert json.dumps(again, sort_keys=True) == json.dumps(tr.metrics, sort_keys=True)
    # aerial phase: the foot leaves the floor
    assert tr.metrics["foot_clearance"] > 0


def test_zero_thrust_never_leaves_ground(tello):
    cfg = SimConfig(thrust_bezier=[0.0] * 6, settle_time=0.05, jump_time=0.05)
    tr = run_jump(tello, cfg)
    assert tr.phase_sequence() == [GROUND]
    assert tr.metrics["apex"] == 0.0
    assert tr.t[-1] == pytest.approx(0.1)


def test_heavier_gravity_lowers_apex(tello):
    # same force profile; both runs stop after their first landing (the heavy landing
    # later crouches past the hip transmission's range)
    P = list(CFG.thrust_points(JumpRig(tello, CFG).mass))
    light = run_jump(tello, SimConfig(t_max=0.45, thrust_bezier=P))
    heavy = run_jump(tello, SimConfig(t_max=0.45, thrust_bezier=P, gravity=2 * 9.81))
    for tr in (light, heavy):
        assert tr.phase_sequence() == [GROUND, THRUST, AERIAL, GROUND]
    assert heavy.metrics["apex"] < light.metrics["apex"]


def test_deterministic(tello):
    cfg = SimConfig(t_max=0.3)
    a = run_jump(tello, cfg)
    b = run_jump(tello, cfg)
    for name in ("t", "base_height", "q", "qd", "psi", "tau_psi", "grf"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert a.phase == b.phase


def test_stride_subsamples(tello):
    cfg = SimConfig(t_max=0.05)
    full = run_jump(tello, cfg)
    thin = run_jump(tello, cfg, record_stride=10)
    np.testing.assert_array_equal(thin.t, full.t[::10])
    np.testing.assert_array_equal(thin.q, full.q[::10])


def test_unreachable_stance_is_rejected(tello):
    with pytest.raises(InverseKinematicsError):
        run_jump(tello, SimConfig(stance_hfe=-1.4))


def test_abort_reports_state(tello):
    with pytest.raises(SimulationAbort) as e:
        run_jump(tello, SimConfig(stance_hfe=-0.7))
    assert e.value.state is not None
    assert e.value.state.clock > 0


def test_model_without_topology(tello):
    from dataclasses import replace
    with pytest.raises(ValueError):
        run_jump(replace(tello, topology=None), SimConfig(t_max=0.01))


# -- comparison -----------------------------------------------------------------

def test_pure_knee_ratio_half():
    t = np.linspace(0, 1, 200)
    c = compare_pair(-20 * np.sin(np.pi * t), np.zeros_like(t))
    assert c.ratio == pytest.approx(0.5, abs=1e-9)


def test_equal_torques_ratio_one():
    t = np.linspace(0, 1, 200)
    tau = 12 * np.sin(np.pi * t)
    assert compare_pair(tau, tau).ratio == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-50, 50), st.floats(-50, 50))
@settings(max_examples=100, deadline=None)
def test_ratio_bounds(knee, ankle):
    c = compare_pair([knee], [ankle])
    if c.peak_motor_serial > 0:
        assert 0.5 - 1e-12 <= c.ratio <= 1.0 + 1e-12


def test_shipped_jump_ratio(tello, default_jump):
    c = compare_topologies(tello, trajectory=default_jump)
    assert 0.5 <= c.ratio <= 0.65
    # actuators of the differential pair run faster than the joints
    assert c.peak_speed_differential > c.peak_speed_serial


# -- config and export ----------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = config_with(CFG, dt=2e-4, stance_hfe=-0.5)
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg
    with pytest.raises(ValueError):
        SimConfig.from_dict({"dt": 1e-4, "colour": 1})
    assert SimConfig.from_dict({"dt": 1e-4, "colour": 1}, strict=False).dt == 1e-4


def test_invalid_config():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(kx_p=[[1, 2, 0], [0, 1, 0], [0, 0, 1]])
    with pytest.raises(ValueError):
        SimConfig(kq_p=(-np.eye(5)).tolist())
    with pytest.raises(ValueError):
        SimConfig(thrust_bezier=[1.0] * 5)
    with pytest.raises(ValueError):
        SimConfig(torque_sat=0.0)


def test_exports(tmp_path, default_jump):
    write_trajectory_csv(default_jump, tmp_path / "t.csv", stride=100)
    lines = (tmp_path / "t.csv").read_text().splitlines()
    head = lines[0].split(",")
    assert head[:4] == ["t", "phase", "base_height", "grf_z"]
    assert head[-1] == "tau_x_z"
    assert len(head) == 4 + 15 + 1
    assert len(lines) == 1 + len(range(0, len(default_jump), 100))
    write_summary_json(default_jump.metrics, tmp_path / "s.json")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["apex"] == default_jump.metrics["apex"]
