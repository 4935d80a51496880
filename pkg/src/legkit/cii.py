"""Centroidal inertia isotropy (CII) and its range over a joint grid (rCII).

CII compares the centroidal rotational inertia at ``q`` with the one at a
nominal posture ``q0``::

    CII(q) = det(I_G(q) I_G(q0)^-1 - 1)

It vanishes whenever limb motion leaves the whole-body inertia unchanged, so
a robot with light limbs sweeps a narrow range of values. The determinant is
kept signed.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .geometry import axis_angle
from .model import FrontalPlaneRule, mirrored
from .spatial import EZ, _joint_motion, ccrbi

LOG_ZERO = float("-inf")  # log10 sentinel for rcii == 0


class SingularInertiaError(ValueError):
    """Nominal centroidal inertia is not invertible."""


class DependentJointError(ValueError):
    def __init__(self, msg, haa=None, hfe=None):
        self.haa = haa
        self.hfe = hfe
        super().__init__(msg)


def _check_nominal(IG0):
    ev = np.linalg.eigvalsh(IG0)
    if ev[-1] <= 0.0 or ev[0] <= 1e-12 * ev[-1]:
        raise SingularInertiaError(f"nominal centroidal inertia is singular (eigenvalues {ev})")


def cii_from_inertia(IG, IG0):
    # det(IG IG0^-1 - 1) = det(IG - IG0) / det(IG0); exact 0 at IG == IG0
    return float(np.linalg.det(IG - IG0) / np.linalg.det(IG0))


def cii(model, q, q0=None):
    """CII of configuration ``q`` relative to ``q0`` (all zeros by default)."""
    if q0 is None:
        q0 = np.zeros(model.dof)
    IG0 = ccrbi(model, q0).rot
    _check_nominal(IG0)
    return cii_from_inertia(ccrbi(model, q).rot, IG0)


# -- dependent joint ----------------------------------------------------------

def _chain(model, body):
    out = []
    name = body
    while name in model.parent_joint:
        j = model.parent_joint[name]
        out.append(j)
        name = j.parent
    return out[::-1]


def _walk(model, joints, q, R, p):
    qi = model.q_index
    for j in joints:
        qv = q[qi[j.name]] if j.dof else 0.0
        Rr, pr = _joint_motion(j, qv)
        p = p + R @ pr
        if j.type == "floating_vertical":
            p = p + EZ * qv
        R = R @ Rr
    return R, p


def resolve_dependent(model, haa, hfe, rule=None, q=None, joint_a="haa", joint_b="hfe",
                      xtol=1e-10):
    """Angle of ``rule.target_joint`` putting the constrained point in the hip frontal plane.

    The residual is the x (sagittal) offset between the constrained point and
    the origin of ``rule.plane_body``; it is bisected over the target joint's
    limits.
    """
    rule = rule or FrontalPlaneRule()
    if q is None:
        q = model.configuration({joint_a: haa, joint_b: hfe}, check=False)
    q = np.array(q, dtype=float)
    target = model.joint(rule.target_joint)
    k = model.q_index[target.name]

    chain = _chain(model, rule.body)
    cut = next(i for i, j in enumerate(chain) if j.name == target.name)
    R0, p0 = _walk(model, chain[:cut], q, np.eye(3), np.zeros(3))
    _, plane = _walk(model, _chain(model, rule.plane_body), q, np.eye(3), np.zeros(3))
    tail = chain[cut + 1:]
    Ro, po = target.origin_rotation, target.origin_xyz
    offset = np.asarray(rule.offset, dtype=float)
    p_joint = p0 + R0 @ po
    R_fixed = R0 @ Ro

    def residual(angle):
        R = R_fixed @ axis_angle(target.axis, angle)
        R, p = _walk(model, tail, q, R, p_joint)
        return (p + R @ offset)[0] - plane[0]

    lo, hi = target.limits
    flo, fhi = residual(lo), residual(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise DependentJointError(
            f"no {target.name} angle in [{lo}, {hi}] puts {rule.body} in the frontal plane "
            f"at ({joint_a}={haa}, {joint_b}={hfe})", haa, hfe)
    return bisect(residual, lo, hi, xtol=xtol, maxiter=200)


# -- sweeps ---------------------------------------------------------------------

@dataclass(eq=False)
class CiiReport:
    grid: object
    q0: np.ndarray
    values: np.ndarray            # n_a x n_b, NaN at excluded nodes
    q_max: np.ndarray
    q_min: np.ndarray
    rcii: float
    dependent_angles: np.ndarray = None
    excluded: np.ndarray = None   # bool mask of failed nodes
    model_name: str = ""
    failures: list = field(default_factory=list)

    @property
    def excluded_count(self):
        return 0 if self.excluded is None else int(self.excluded.sum())

    def summary(self):
        return {
            "model": self.model_name,
            "rcii": self.rcii,
            "log10_rcii": log10_rcii(self.rcii),
            "q_max": [float(v) for v in self.q_max],
            "q_min": [float(v) for v in self.q_min],
            "excluded_count": self.excluded_count,
            "grid": {"joint_a": self.grid.joint_a, "range_a": list(self.grid.range_a),
                     "joint_b": self.grid.joint_b, "range_b": list(self.grid.range_b),
                     "resolution": list(self.grid.resolution)},
        }


def log10_rcii(r):
    return math.log10(r) if r > 0 else LOG_ZERO


def sweep_model(model, mirror=True):
    """Model actually swept: single legs are completed by their mirror image."""
    return mirrored(model) if mirror else model


def _node(model, grid, a, b):
    q = model.configuration({grid.joint_a: a, grid.joint_b: b}, check=False)
    dep = math.nan
    rule = grid.dependent_rule
    if rule is not None:
        dep = resolve_dependent(model, a, b, rule, q=q, joint_a=grid.joint_a, joint_b=grid.joint_b)
        q[model.q_index[rule.target_joint]] = dep
        m = model.mirror_of(rule.target_joint)
        if m is not None:
            q[model.q_index[m]] = dep
    return q, dep


def _rows(args):
    model, grid, IG0, rows = args
    a_vals, b_vals = grid.axes()
    out = []
    for i in rows:
        vals = np.full(len(b_vals), np.nan)
        deps = np.full(len(b_vals), np.nan)
        errs = []
        for jdx, b in enumerate(b_vals):
            try:
                q, dep = _node(model, grid, a_vals[i], b)
            except DependentJointError as e:
                errs.append((i, jdx, str(e)))
                continue
            deps[jdx] = dep
            vals[jdx] = cii_from_inertia(ccrbi(model, q).rot, IG0)
        out.append((i, vals, deps, errs))
    return out


def default_workers():
    env = os.environ.get("LEGKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def cii_sweep(model, grid, q0=None, workers=None, mirror=True):
    """Evaluate CII on every node of ``grid``.

    Rows are distributed over ``workers`` processes and written back by index,
    so the result does not depend on the worker count. Nodes whose dependent
    joint cannot be resolved are excluded (NaN) and counted.
    """
    grid.check(model)
    m = sweep_model(model, mirror)
    if q0 is None:
        q0 = np.zeros(m.dof)
    else:
        q0 = np.asarray(q0, dtype=float)
        if q0.shape == (model.dof,) and m is not model:
            q0 = m.configuration(dict(zip(model.q_index, q0)), check=False)
    q0 = m.check_configuration(q0, limits=False)
    IG0 = ccrbi(m, q0).rot
    _check_nominal(IG0)

    na, nb = grid.resolution
    workers = workers or 1
    chunks = [list(range(w, na, workers)) for w in range(min(workers, na))]
    tasks = [(m, grid, IG0, rows) for rows in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_rows, tasks))
    else:
        results = [_rows(t) for t in tasks]

    values = np.full((na, nb), np.nan)
    deps = np.full((na, nb), np.nan)
    failures = []
    for part in results:
        for i, vals, dep, errs in part:
            values[i] = vals
            deps[i] = dep
            failures.extend(errs)
    failures.sort()
    excluded = np.isnan(values)
    if excluded.all():
        raise DependentJointError("no grid node could be evaluated")

    imax = np.unravel_index(np.nanargmax(values), values.shape)
    imin = np.unravel_index(np.nanargmin(values), values.shape)
    a_vals, b_vals = grid.axes()
    q_max, _ = _node(m, grid, a_vals[imax[0]], b_vals[imax[1]])
    q_min, _ = _node(m, grid, a_vals[imin[0]], b_vals[imin[1]])
    rcii = float(values[imax] - values[imin])
    return CiiReport(grid=grid, q0=q0, values=values, q_max=q_max, q_min=q_min, rcii=rcii,
                     dependent_angles=deps if grid.dependent_rule is not None else None,
                     excluded=excluded, model_name=model.name, failures=failures)


# -- comparison -----------------------------------------------------------------

@dataclass
class CompareRow:
    rank: int
    label: str
    rcii: float
    log10: float
    ratio_to_best: float


def _ratio(a, b):
    if a == b:
        return 1.0
    if b == 0.0:
        return math.inf
    return a / b


def rcii_compare(reports):
    """Order ``(label, report)`` pairs by ascending rCII.

    Returns ``(rows, ratios)``; ``ratios[x][y]`` is rcii(x) / rcii(y) keyed by
    label. Ties share a rank and are listed by label.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    items = sorted(((float(r.rcii), str(label)) for label, r in reports))
    best = items[0][0]
    rows = []
    for pos, (r, label) in enumerate(items):
        rank = rows[-1].rank if rows and rows[-1].rcii == r else pos + 1
        rows.append(CompareRow(rank, label, r, log10_rcii(r), _ratio(r, best)))
    ratios = {a: {b: _ratio(ra, rb) for rb, b in items} for ra, a in items}
    return rows, ratios


# -- export -----------------------------------------------------------------------

def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else "%.17g" % x


def write_report_csv(report, path):
    a_vals, b_vals = report.grid.axes()
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["i", "j", report.grid.joint_a, report.grid.joint_b, "dependent_angle", "cii"])
        for i, a in enumerate(a_vals):
            for j, b in enumerate(b_vals):
                dep = report.dependent_angles[i, j] if report.dependent_angles is not None else math.nan
                w.writerow([i, j, _fmt(float(a)), _fmt(float(b)), _fmt(float(dep)),
                            _fmt(float(report.values[i, j]))])


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("-inf" if x < 0 else "inf")
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def write_report_json(report, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_json_safe(report.summary()), f, indent=2, sort_keys=True)
        f.write("\n")
