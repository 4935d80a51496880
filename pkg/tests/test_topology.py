import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from legkit.topology import (POLY_EXPONENTS, ActuationTopology, InverseKinematicsError,
                             SingularJacobianError, Tello5Params, actuator_torques,
                             fit_polynomial_map, hip_linkage_surrogate, poly_eval,
                             reflected_inertia, surrogate_samples, tello_forward,
                             tello_home_jacobian, tello_inverse, tello_jacobian,
                             topology_jacobian, torque_map)
from legkit.polytope import velocity_polytope
from oracles import central_jacobian

PARAMS = Tello5Params()
elem = st.floats(-3.0, 3.0, allow_nan=False)


def test_differential_jacobian_substitution():
    J = topology_jacobian(ActuationTopology.differential_pair(3.0))
    np.testing.assert_array_equal(J, np.array([[1, 1], [1, -1]]) / 6.0)


def test_serial_unit_gear_is_identity():
    np.testing.assert_array_equal(topology_jacobian(ActuationTopology.serial([1.0, 1.0])),
                                  np.eye(2))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        topology_jacobian(ActuationTopology.serial([2.0, 2.0]), np.zeros(3))
    with pytest.raises(ValueError):
        ActuationTopology.tello5().jacobian(np.zeros(4))


def test_torque_map_examples():
    np.testing.assert_array_equal(torque_map(topology_jacobian(ActuationTopology.differential_pair(1.0))),
                                  [[1, 1], [1, -1]])
    np.testing.assert_allclose(torque_map(np.diag([1 / 3.0, 1 / 7.0])), np.diag([3.0, 7.0]),
                               rtol=1e-15)
    Nd = 2.5
    np.testing.assert_allclose(torque_map(topology_jacobian(ActuationTopology.differential_pair(Nd))),
                               [[Nd, Nd], [Nd, -Nd]], rtol=1e-15)


def test_torque_map_singular():
    with pytest.raises(SingularJacobianError) as e:
        torque_map([[1.0, 2.0], [2.0, 4.0]])
    assert e.value.cond > 1e12


@given(arrays(float, (3, 3), elements=elem))
@settings(max_examples=200, deadline=None)
def test_duality(J):
    assume(abs(np.linalg.det(J)) > 1e-3)
    np.testing.assert_allclose(torque_map(J).T @ J, np.eye(3), atol=1e-10)


def test_reflected_inertia_examples():
    N0 = 3.0
    Jd = topology_jacobian(ActuationTopology.differential_pair(N0))
    Js = topology_jacobian(ActuationTopology.serial([2 * N0, 2 * N0]))
    np.testing.assert_allclose(reflected_inertia(Jd, [1.0, 1.0]), np.diag([2 * N0 ** 2] * 2), rtol=1e-14)
    np.testing.assert_allclose(reflected_inertia(Js, [1.0, 1.0]), np.diag([4 * N0 ** 2] * 2), rtol=1e-14)
    np.testing.assert_array_equal(reflected_inertia(np.eye(2), np.diag([0.3, 0.7])), np.diag([0.3, 0.7]))


@given(st.floats(0.1, 100.0), st.floats(1e-6, 1.0))
@settings(max_examples=100, deadline=None)
def test_reflected_ratio_is_two(Nd, rotor):
    Jd = topology_jacobian(ActuationTopology.differential_pair(Nd))
    Js = topology_jacobian(ActuationTopology.serial([2 * Nd, 2 * Nd]))
    ed = np.linalg.eigvalsh(reflected_inertia(Jd, [rotor, rotor]))
    es = np.linalg.eigvalsh(reflected_inertia(Js, [rotor, rotor]))
    np.testing.assert_allclose(es / ed, 2.0, rtol=1e-12)


@given(st.floats(0.1, 100.0), st.floats(-50.0, 50.0))
@settings(max_examples=100, deadline=None)
def test_single_joint_torque_is_halved(N, tau):
    Jd = topology_jacobian(ActuationTopology.differential_pair(N))
    Js = topology_jacobian(ActuationTopology.serial([N, N]))
    td = actuator_torques(Jd, [tau, 0.0])
    ts = actuator_torques(Js, [tau, 0.0])
    np.testing.assert_allclose(td, [tau / (2 * N)] * 2, atol=1e-12 * max(1.0, abs(tau)))
    assert ts[0] == pytest.approx(tau / N, rel=1e-12, abs=1e-300)
    assert abs(td[0]) == pytest.approx(0.5 * abs(ts[0]), rel=1e-12, abs=1e-300)


@given(st.floats(0.5, 50.0), st.floats(0.1, 100.0))
@settings(max_examples=100, deadline=None)
def test_differential_vcp_inside_serial(N, vmax):
    Jd = topology_jacobian(ActuationTopology.differential_pair(N))
    Js = topology_jacobian(ActuationTopology.serial([N, N]))
    small = velocity_polytope(Jd, vmax)
    big = velocity_polytope(Js, vmax)
    for v in small.vertices:
        assert big.signed_distance(v) >= -1e-12 * vmax


def test_tello_forward_examples():
    p = Tello5Params(gamma=0.5)
    q = tello_forward(p, np.zeros(5))
    np.testing.assert_allclose(q, [0, *p.hip(0.0, 0.0), 0, 0], atol=0)
    np.testing.assert_allclose(tello_forward(p, [0, 0, 0, 2, 0])[3:], [1, 1])
    np.testing.assert_allclose(tello_forward(p, [0, 0, 0, 0, 2])[3:], [1, -1])
    off = Tello5Params(q4_offset=0.1, q5_offset=-0.2)
    np.testing.assert_allclose(tello_forward(off, np.zeros(5))[3:], [0.1, -0.2])


def test_tello_inverse_linear_pair():
    psi = tello_inverse(Tello5Params(gamma=0.5), [0.0, 0.0, 0.0, 1.0, 1.0])
    np.testing.assert_allclose(psi[3:], [2.0, 0.0], atol=1e-15)


def test_tello_inverse_unreachable():
    with pytest.raises(InverseKinematicsError):
        tello_inverse(PARAMS, [0.0, 1.4, 0.0, 0.0, 0.0])


@pytest.mark.parametrize("seed", range(3))
def test_tello_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        psi = rng.uniform(-0.5, 0.5, 5)
        J = tello_jacobian(PARAMS, psi)
        ref = central_jacobian(lambda x: tello_forward(PARAMS, x), psi)
        np.testing.assert_allclose(J[3:, 3:], ref[3:, 3:], atol=1e-8)
        np.testing.assert_allclose(J, ref, atol=1e-8)


def test_home_jacobian():
    for gamma in (0.5, 0.3):
        p = Tello5Params(gamma=gamma)
        H = tello_home_jacobian(p)
        np.testing.assert_array_equal(H[3:, 3:], [[0.5, gamma], [0.5, -gamma]])
        assert H[0, 0] == 1.0
        np.testing.assert_array_equal(H[0, 1:], 0.0)
        np.testing.assert_array_equal(H[1:, 0], 0.0)
    H = tello_home_jacobian(PARAMS)
    psi0 = tello_inverse(PARAMS, np.zeros(5))
    ref = central_jacobian(lambda x: np.array(PARAMS.hip(*x)), psi0[1:3])
    np.testing.assert_allclose(H[1:3, 1:3], ref, atol=1e-8)
    # surrogate linkage: first row of the hip block carries beta, second the difference mode
    np.testing.assert_allclose(H[1:3, 1:3], [[0.465, 0.465], [0.5, -0.5]], atol=2e-3)
    assert abs(np.linalg.det(H[1:3, 1:3])) > 1e-6


def test_surrogate_home_jacobian_exact():
    f = lambda x: np.array(hip_linkage_surrogate(x[0], x[1]))
    np.testing.assert_allclose(central_jacobian(f, [0.0, 0.0]), [[0.465, 0.465], [0.5, -0.5]],
                               atol=1e-9)


def test_fit_recovers_polynomial_exactly():
    rng = np.random.default_rng(2)
    c2, c3 = rng.normal(size=21), rng.normal(size=21)
    x, y = rng.uniform(-0.8, 0.8, (2, 80))
    samples = np.column_stack([x, y, [poly_eval(c2, a, b) for a, b in zip(x, y)],
                               [poly_eval(c3, a, b) for a, b in zip(x, y)]])
    fit = fit_polynomial_map(samples)
    assert fit.max_residual < 1e-10
    np.testing.assert_allclose(fit.f2, c2, atol=1e-7)
    np.testing.assert_allclose(fit.f3, c3, atol=1e-7)
    assert len(POLY_EXPONENTS) == 21


def test_fit_surrogate_residual():
    fit = fit_polynomial_map(surrogate_samples(half_width=0.6, n=25))
    assert fit.max_residual < 1e-3


def test_fit_too_few_samples():
    rng = np.random.default_rng(0)
    with pytest.raises(np.linalg.LinAlgError):
        fit_polynomial_map(rng.uniform(-0.5, 0.5, (10, 4)))


@given(arrays(float, 5, elements=st.floats(-0.5, 0.5)))
@settings(max_examples=100, deadline=None)
def test_round_trip(psi):
    back = tello_inverse(PARAMS, tello_forward(PARAMS, psi))
    np.testing.assert_allclose(back, psi, atol=1e-8)


def test_topology_dict_round_trip():
    for topo in (ActuationTopology.serial([2.0, 3.0], joints=("a", "b")),
                 ActuationTopology.differential_pair(1.5),
                 ActuationTopology.linear([[1.0, 2.0], [0.5, -1.0]]),
                 ActuationTopology.tello5()):
        again = ActuationTopology.from_dict(topo.to_dict())
        assert again.to_dict() == topo.to_dict()
        np.testing.assert_array_equal(again.jacobian(), topo.jacobian())


def test_bad_topology():
    with pytest.raises(ValueError):
        ActuationTopology("planetary")
    assert ActuationTopology.serial([0.0, 1.0]).diagnostics()
    assert ActuationTopology.tello5(Tello5Params(gamma=-1.0)).diagnostics()


def test_tello_topology_bound_to_model(tello):
    topo = tello.topology
    assert topo.kind == "tello5"
    assert topo.diagnostics(tello) == []
    bound = topo.bind(tello)
    assert bound.torque_limits == tuple(a.torque_limit for a in tello.actuators)
