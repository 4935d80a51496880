"""Actuation topologies: maps from actuator space (psi) to joint space (q).

Velocities map forward through the topology Jacobian ``J = dq/dpsi``;
torques map back through its inverse transpose. Four kinds are supported:

``serial``             one actuator per joint, ``q_i = psi_i / N_i``
``differential_pair``  two actuators sharing two joints, ``q = J_d psi`` with
                       ``J_d = [[1, 1], [1, -1]] / (2 N_d)``
``linear``             an arbitrary constant matrix
``tello5``             hip yaw direct drive, a nonlinear hip pair given by two
                       bivariate quintic polynomials and a linear knee/ankle
                       differential
"""

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

POLY_DEGREE = 5
# monomials psi2**i * psi3**j ordered by total degree, then decreasing i
POLY_EXPONENTS = tuple((i, d - i) for d in range(POLY_DEGREE + 1) for i in range(d, -1, -1))
N_POLY = len(POLY_EXPONENTS)  # 21

DEFAULT_GAMMA = 0.5
DEFAULT_BETA = 0.465
DEFAULT_HIP_DOMAIN = 0.8


class SingularJacobianError(ValueError):
    def __init__(self, msg, cond=math.inf):
        self.cond = cond
        super().__init__(f"{msg} (condition estimate {cond:.3g})")


class InverseKinematicsError(ValueError):
    """Newton inversion of the hip polynomial map failed or left its domain."""


# -- bivariate polynomials --------------------------------------------------

def poly_eval(c, x, y):
    """Evaluate a degree-5 bivariate polynomial (21 coefficients) at (x, y)."""
    xp = [1.0, x, x * x, x ** 3, x ** 4, x ** 5]
    yp = [1.0, y, y * y, y ** 3, y ** 4, y ** 5]
    return sum(ck * xp[i] * yp[j] for ck, (i, j) in zip(c, POLY_EXPONENTS))


def poly_grad(c, x, y):
    xp = [1.0, x, x * x, x ** 3, x ** 4, x ** 5]
    yp = [1.0, y, y * y, y ** 3, y ** 4, y ** 5]
    gx = gy = 0.0
    for ck, (i, j) in zip(c, POLY_EXPONENTS):
        if i:
            gx += ck * i * xp[i - 1] * yp[j]
        if j:
            gy += ck * j * xp[i] * yp[j - 1]
    return gx, gy


def _design_matrix(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.stack([x ** i * y ** j for i, j in POLY_EXPONENTS], axis=-1)


@dataclass(frozen=True)
class PolyFit:
    f2: tuple
    f3: tuple
    max_residual: float


def fit_polynomial_map(samples):
    """Least-squares quintic fit of ``(psi2, psi3) -> (q2, q3)`` samples.

    ``samples`` is an ``(n, 4)`` array of rows ``(psi2, psi3, q2, q3)``.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2 or s.shape[1] != 4:
        raise ValueError("samples must be an (n, 4) array of (psi2, psi3, q2, q3)")
    V = _design_matrix(s[:, 0], s[:, 1])
    rank = np.linalg.matrix_rank(V)
    if rank < N_POLY:
        raise np.linalg.LinAlgError(
            f"rank-deficient fit: {len(s)} samples give rank {rank} < {N_POLY}")
    coef, *_ = np.linalg.lstsq(V, s[:, 2:], rcond=None)
    resid = np.max(np.abs(V @ coef - s[:, 2:])) if len(s) else 0.0
    return PolyFit(tuple(coef[:, 0]), tuple(coef[:, 1]), float(resid))


def hip_linkage_surrogate(psi2, psi3, beta=DEFAULT_BETA):
    """Synthetic stand-in for Tello's non-planar hip four-bar linkages.

    Abduction follows the common mode ``psi2 + psi3`` through a crank-like
    arcsine, flexion follows the differential mode with a tilt coupling to
    abduction. The home Jacobian is ``[[beta, beta], [1/2, -1/2]]``.
    """
    u = 0.5 * (np.asarray(psi2) + np.asarray(psi3))
    w = 0.5 * (np.asarray(psi2) - np.asarray(psi3))
    q2 = np.arcsin(2.0 * beta * np.sin(u))
    q3 = np.arctan(np.tan(w) * np.cos(q2))
    return q2, q3


def surrogate_samples(beta=DEFAULT_BETA, half_width=0.6, n=25):
    g = np.linspace(-half_width, half_width, n)
    p2, p3 = np.meshgrid(g, g, indexing="ij")
    q2, q3 = hip_linkage_surrogate(p2, p3, beta)
    return np.column_stack([p2.ravel(), p3.ravel(), q2.ravel(), q3.ravel()])


@lru_cache(maxsize=8)
def default_hip_polynomials(beta=DEFAULT_BETA, half_width=DEFAULT_HIP_DOMAIN):
    return fit_polynomial_map(surrogate_samples(beta, half_width, 25))


# -- Tello 5-DoF transmission ----------------------------------------------

@dataclass(frozen=True)
class Tello5Params:
    gamma: float = DEFAULT_GAMMA
    beta: float = DEFAULT_BETA
    q4_offset: float = 0.0
    q5_offset: float = 0.0
    hip_poly_f2: tuple = None
    hip_poly_f3: tuple = None
    # actuator-space half-width over which the hip polynomials are trusted
    hip_domain: float = DEFAULT_HIP_DOMAIN

    def __post_init__(self):
        if self.hip_poly_f2 is None or self.hip_poly_f3 is None:
            fit = default_hip_polynomials(self.beta, self.hip_domain)
            object.__setattr__(self, "hip_poly_f2", fit.f2)
            object.__setattr__(self, "hip_poly_f3", fit.f3)
        object.__setattr__(self, "hip_poly_f2", tuple(float(c) for c in self.hip_poly_f2))
        object.__setattr__(self, "hip_poly_f3", tuple(float(c) for c in self.hip_poly_f3))

    def hip(self, psi2, psi3):
        return poly_eval(self.hip_poly_f2, psi2, psi3), poly_eval(self.hip_poly_f3, psi2, psi3)

    def hip_jacobian(self, psi2, psi3):
        return np.array([poly_grad(self.hip_poly_f2, psi2, psi3),
                         poly_grad(self.hip_poly_f3, psi2, psi3)])

    def knee_ankle_block(self):
        return np.array([[0.5, self.gamma], [0.5, -self.gamma]])


def tello_forward(params, psi):
    p1, p2, p3, p4, p5 = psi
    q2, q3 = params.hip(p2, p3)
    g = params.gamma
    return np.array([p1, q2, q3,
                     0.5 * p4 + g * p5 + params.q4_offset,
                     0.5 * p4 - g * p5 + params.q5_offset])


def tello_jacobian(params, psi):
    J = np.zeros((5, 5))
    J[0, 0] = 1.0
    J[1:3, 1:3] = params.hip_jacobian(psi[1], psi[2])
    J[3:5, 3:5] = params.knee_ankle_block()
    return J


def _hip_inverse(params, q2, q3, guess, tol=1e-10, max_iter=50):
    x = np.array(guess, dtype=float)
    target = np.array([q2, q3])
    r = target - np.array(params.hip(*x))
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            break
        J = params.hip_jacobian(*x)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        if abs(det) < 1e-12:
            raise InverseKinematicsError(f"hip Jacobian singular at psi = {x.tolist()}")
        step = np.linalg.solve(J, r)
        # damped step: halve until the residual shrinks
        t = 1.0
        while True:
            xn = x + t * step
            rn = target - np.array(params.hip(*xn))
            if np.max(np.abs(rn)) < np.max(np.abs(r)) or t < 1e-4:
                break
            t *= 0.5
        x, r = xn, rn
    if np.max(np.abs(r)) >= tol:
        raise InverseKinematicsError(
            f"Newton did not converge for hip (q2, q3) = ({q2}, {q3}); residual {np.max(np.abs(r)):.3g}")
    if np.max(np.abs(x)) > params.hip_domain + 1e-9:
        raise InverseKinematicsError(
            f"hip (q2, q3) = ({q2}, {q3}) outside the reachable range (psi = {x.tolist()})")
    return x


def tello_inverse(params, q, guess=None):
    """Actuator positions for joint positions ``q`` (Newton on the hip pair)."""
    q1, q2, q3, q4, q5 = q
    if guess is None:
        J0 = params.hip_jacobian(0.0, 0.0)
        h0 = np.array(params.hip(0.0, 0.0))
        g23 = np.linalg.solve(J0, np.array([q2, q3]) - h0)
    else:
        g23 = np.asarray(guess, dtype=float)[1:3]
    p2, p3 = _hip_inverse(params, q2, q3, g23)
    a = q4 - params.q4_offset
    b = q5 - params.q5_offset
    p4 = a + b
    p5 = (a - b) / (2.0 * params.gamma)
    return np.array([q1, p2, p3, p4, p5])


def tello_home_jacobian(params):
    psi0 = tello_inverse(params, np.zeros(5))
    return tello_jacobian(params, psi0)


# -- generic topology -------------------------------------------------------

def _tup(a):
    return None if a is None else tuple(float(x) for x in np.ravel(a))


@dataclass(frozen=True, eq=False)
class ActuationTopology:
    kind: str
    joints: tuple = ()
    actuators: tuple = ()
    gear: tuple = None          # serial: N_s per joint; differential_pair: (N_d,)
    matrix: np.ndarray = None   # linear: q = matrix @ psi
    tello: Tello5Params = None
    rotor_inertias: tuple = None
    torque_limits: tuple = None
    velocity_limits: tuple = None

    def __post_init__(self):
        if self.kind not in ("serial", "differential_pair", "linear", "tello5"):
            raise ValueError(f"unknown topology kind {self.kind!r}")
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "actuators", tuple(self.actuators))
        if self.gear is not None:
            object.__setattr__(self, "gear", _tup(self.gear))
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=float)
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        for attr in ("rotor_inertias", "torque_limits", "velocity_limits"):
            object.__setattr__(self, attr, _tup(getattr(self, attr)))

    # constructors
    @classmethod
    def serial(cls, gears, **kw):
        return cls("serial", gear=np.atleast_1d(gears), **kw)

    @classmethod
    def differential_pair(cls, n_d, **kw):
        return cls("differential_pair", gear=(n_d,), **kw)

    @classmethod
    def linear(cls, matrix, **kw):
        return cls("linear", matrix=matrix, **kw)

    @classmethod
    def tello5(cls, params=None, **kw):
        return cls("tello5", tello=params or Tello5Params(), **kw)

    @property
    def n_joints(self):
        if self.kind == "serial":
            return len(self.gear)
        if self.kind == "differential_pair":
            return 2
        if self.kind == "linear":
            return self.matrix.shape[0]
        return 5

    @property
    def n_actuators(self):
        if self.kind == "linear":
            return self.matrix.shape[1]
        return self.n_joints

    def _check_psi(self, psi):
        psi = np.asarray(psi, dtype=float)
        if psi.shape != (self.n_actuators,):
            raise ValueError(f"actuator vector has shape {psi.shape}, topology expects ({self.n_actuators},)")
        return psi

    def jacobian(self, psi=None):
        if psi is None:
            psi = np.zeros(self.n_actuators)
        psi = self._check_psi(psi)
        if self.kind == "serial":
            return np.diag(1.0 / np.array(self.gear))
        if self.kind == "differential_pair":
            h = 1.0 / (2.0 * self.gear[0])
            return np.array([[h, h], [h, -h]])
        if self.kind == "linear":
            return np.array(self.matrix)
        return tello_jacobian(self.tello, psi)

    def forward(self, psi):
        psi = self._check_psi(psi)
        if self.kind == "tello5":
            return tello_forward(self.tello, psi)
        return self.jacobian() @ psi

    def inverse(self, q, guess=None):
        q = np.asarray(q, dtype=float)
        if self.kind == "tello5":
            return tello_inverse(self.tello, q, guess)
        J = self.jacobian()
        if J.shape[0] != J.shape[1]:
            raise ValueError("inverse requires a square topology")
        return np.linalg.solve(J, q)

    def bind(self, model):
        """Copy per-actuator limits and rotor inertias from the model's actuators."""
        try:
            acts = [model.actuator(n) for n in self.actuators]
        except KeyError:
            return self
        if not acts:
            return self
        return replace(self,
                       rotor_inertias=[a.rotor_inertia for a in acts],
                       torque_limits=[a.torque_limit for a in acts],
                       velocity_limits=[a.velocity_limit for a in acts])

    def diagnostics(self, model=None):
        out = []
        if self.gear is not None and not all(g > 0 for g in self.gear):
            out.append(".gear: gear ratios must be > 0")
        if self.kind == "tello5":
            p = self.tello
            if not p.gamma > 0:
                out.append(".gamma: must be > 0")
            if not p.beta > 0:
                out.append(".beta: must be > 0")
            for name in ("hip_poly_f2", "hip_poly_f3"):
                if len(getattr(p, name)) != N_POLY:
                    out.append(f".{name}: expected {N_POLY} coefficients")
            if not out:
                det = np.linalg.det(p.hip_jacobian(0.0, 0.0))
                if abs(det) <= 1e-6:
                    out.append(f": hip Jacobian singular at home (det {det:.3g})")
        if model is not None:
            if len(self.joints) != self.n_joints:
                out.append(f".joints: expected {self.n_joints} names, got {len(self.joints)}")
            if len(self.actuators) != self.n_actuators:
                out.append(f".actuators: expected {self.n_actuators} names, got {len(self.actuators)}")
            for n in self.joints:
                if n not in model.q_index:
                    out.append(f".joints: {n!r} is not a movable joint of the model")
            names = {a.name for a in model.actuators}
            for n in self.actuators:
                if n not in names:
                    out.append(f".actuators: unknown actuator {n!r}")
        return out

    # serialization
    def to_dict(self):
        d = {"kind": self.kind, "joints": list(self.joints), "actuators": list(self.actuators)}
        if self.kind == "serial":
            d["gear"] = list(self.gear)
        elif self.kind == "differential_pair":
            d["gear"] = self.gear[0]
        elif self.kind == "linear":
            d["matrix"] = self.matrix.tolist()
        else:
            p = self.tello
            d.update(gamma=p.gamma, beta=p.beta, q4_offset=p.q4_offset, q5_offset=p.q5_offset,
                     hip_domain=p.hip_domain, hip_poly_f2=list(p.hip_poly_f2),
                     hip_poly_f3=list(p.hip_poly_f3))
        return d

    @classmethod
    def from_dict(cls, d, strict=True):
        kind = d["kind"]
        allowed = {"kind", "joints", "actuators"}
        allowed |= {"serial": {"gear"}, "differential_pair": {"gear"}, "linear": {"matrix"},
                    "tello5": {"gamma", "beta", "q4_offset", "q5_offset", "hip_domain",
                               "hip_poly_f2", "hip_poly_f3"}}.get(kind, set())
        extra = sorted(set(d) - allowed)
        if extra and strict:
            raise ValueError(f"unknown keys {extra}")
        kw = dict(joints=d.get("joints", ()), actuators=d.get("actuators", ()))
        if kind == "serial":
            return cls.serial(d["gear"], **kw)
        if kind == "differential_pair":
            return cls.differential_pair(float(d["gear"]), **kw)
        if kind == "linear":
            return cls.linear(d["matrix"], **kw)
        if kind == "tello5":
            params = Tello5Params(**{k: d[k] for k in ("gamma", "beta", "q4_offset", "q5_offset",
                                                        "hip_domain", "hip_poly_f2", "hip_poly_f3")
                                     if k in d})
            return cls.tello5(params, **kw)
        raise ValueError(f"unknown topology kind {kind!r}")


# -- maps -------------------------------------------------------------------

def topology_jacobian(topo, psi=None):
    """Topology Jacobian ``dq/dpsi`` at actuator configuration ``psi``."""
    return topo.jacobian(psi)


def _cond(J):
    try:
        return float(np.linalg.cond(J))
    except np.linalg.LinAlgError:
        return math.inf


def torque_map(J):
    """Actuator-to-joint torque map, the inverse transpose of ``J``."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("torque_map needs a square Jacobian")
    if abs(np.linalg.det(J)) <= 1e-12:
        raise SingularJacobianError("singular topology Jacobian", _cond(J))
    return np.linalg.inv(J).T


def reflected_inertia(J, rotor):
    """Rotor inertia seen in joint space: ``J^-T diag(rotor) J^-1``."""
    rotor = np.asarray(rotor, dtype=float)
    if rotor.ndim == 1:
        rotor = np.diag(rotor)
    Jit = torque_map(J)
    out = Jit @ rotor @ Jit.T
    return 0.5 * (out + out.T)


def actuator_torques(J, tau_q):
    """Actuator torques that produce joint torques ``tau_q`` (``J^T tau_q``)."""
    return np.asarray(J, dtype=float).T @ np.asarray(tau_q, dtype=float)
