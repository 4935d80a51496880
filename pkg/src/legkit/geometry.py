"""Small rotation and cross-product helpers shared by the kinematics code."""

import math

import numpy as np


def skew(v):
    """Matrix ``S`` with ``S @ w == np.cross(v, w)``."""
    return np.array([[0.0, -v[2], v[1]],
                     [v[2], 0.0, -v[0]],
                     [-v[1], v[0], 0.0]])


def cross3(a, b):
    """Cross product of two 3-vectors (cheaper than ``np.cross`` for single vectors)."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def axis_angle(axis, angle):
    """Rodrigues rotation about a unit ``axis``."""
    x, y, z = axis
    c = math.cos(angle)
    s = math.sin(angle)
    t = 1.0 - c
    return np.array([[t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                     [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                     [t * x * z - s * y, t * y * z + s * x, t * z * z + c]])


def rpy_matrix(rpy):
    """Fixed-axis roll/pitch/yaw (X, then Y, then Z) rotation, URDF convention."""
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array([[cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
                     [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
                     [-sp, cp * sr, cp * cr]])


def matrix_rpy(R):
    """Inverse of :func:`rpy_matrix` (pitch restricted to [-pi/2, pi/2])."""
    p = math.atan2(-R[2, 0], math.hypot(R[0, 0], R[1, 0]))
    if abs(math.cos(p)) < 1e-12:
        # gimbal lock: fold yaw into roll
        r = math.atan2(-R[1, 2], R[1, 1])
        return (r, p, 0.0)
    r = math.atan2(R[2, 1], R[2, 2])
    y = math.atan2(R[1, 0], R[0, 0])
    return (r, p, y)


def rotvec_matrix(w):
    """Rotation matrix of the rotation vector ``w`` (exponential map)."""
    angle = float(np.linalg.norm(w))
    if angle < 1e-300:
        return np.eye(3)
    return axis_angle(w / angle, angle)


# reflection across the sagittal (x-z) plane
MIRROR_Y = np.diag([1.0, -1.0, 1.0])
