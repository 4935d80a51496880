"""``legkit`` command line: validate, cii, polytope and jump.

Exit codes: 0 success, 1 domain failure, 2 I/O error, 3 parse error,
4 simulation abort. Every file is written inside ``--out``.
"""

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .cii import (DependentJointError, SingularInertiaError, cii_sweep, log10_rcii, rcii_compare,
                  sweep_model, write_report_csv, write_report_json, default_workers)
from .jump import (AERIAL, THRUST, SimConfig, SimulationAbort, compare_topologies, load_config,
                   run_jump, write_summary_json, write_trajectory_csv)
from .model import (FrontalPlaneRule, GridSpec, ModelError, ModelValidationError, parse_model,
                    relocate_actuators, serialize_model, validate_model)
from .polytope import (RequirementSet, closed_form_gear_ratio, contains, gear_polytope,
                       min_gear_ratio, velocity_polytope, write_vertices_csv)
from .reference import BUILDERS, serial_placement, shipped_model
from .spatial import forward_kinematics
from .topology import InverseKinematicsError
from . import svg

EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_PARSE, EXIT_SIM = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg, code):
        self.code = code
        super().__init__(msg)


def _sha(data):
    return hashlib.sha256(data).hexdigest()


def load_model_arg(spec, lenient=False, check=True):
    """Model from a path or ``builtin:NAME``; returns ``(model, sha256 of the source)``."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILDERS:
            raise CliError(f"unknown builtin model {name!r} (have {', '.join(BUILDERS)})", EXIT_IO)
        model = shipped_model(name)
        return model, _sha(serialize_model(model).encode())
    try:
        raw = Path(spec).read_bytes()
    except OSError as e:
        raise CliError(f"cannot read {spec}: {e}", EXIT_IO) from e
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise CliError(f"{spec}: not UTF-8 ({e})", EXIT_PARSE) from e
    try:
        model = parse_model(text, strict=not lenient, check=check)
    except ModelValidationError as e:
        raise CliError(str(e), EXIT_DOMAIN) from e
    except ModelError as e:
        raise CliError(f"{spec}: {e}", EXIT_PARSE) from e
    return model, _sha(raw)


class Outputs:
    def __init__(self, out, meta):
        self.dir = Path(out)
        self.meta = meta
        self.files = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise CliError(f"cannot create output directory {out}: {e}", EXIT_IO) from e

    def path(self, name):
        p = self.dir / name
        self.files.append(name)
        return p

    def svg(self, name, canvas):
        canvas.save(self.path(name), meta=self.meta)

    def json(self, name, doc):
        with open(self.path(name), "w", encoding="utf-8") as f:
            json.dump(_json_safe(doc), f, indent=2, sort_keys=True)
            f.write("\n")

    def manifest(self, argv, hashes, started):
        doc = {"command": ["legkit"] + list(argv), "version": __version__,
               "inputs": hashes, "outputs": sorted(self.files)}
        if self.meta:
            doc["wall_time"] = time.perf_counter() - started
        with open(self.dir / "manifest.json", "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("-inf" if x < 0 else "inf")
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


# -- validate -------------------------------------------------------------------

def cmd_validate(args):
    model, _ = load_model_arg(args.model, args.lenient, check=False)
    diags = validate_model(model)
    for d in diags:
        print(d)
    if diags:
        return EXIT_DOMAIN
    print(f"{model.name}: ok ({len(model.bodies)} bodies, {model.dof} DoF, "
          f"total mass {model.total_mass:.6g} kg)")
    return EXIT_OK


# -- cii --------------------------------------------------------------------------

def _parse_q0(text, model):
    text = text.strip()
    try:
        if "=" in text:
            vals = {}
            for item in text.split(","):
                k, v = item.split("=")
                vals[k.strip()] = float(v)
            return model.configuration(vals, check=False)
        q = np.array([float(v) for v in text.split(",")])
    except (ValueError, KeyError) as e:
        raise CliError(f"bad --q0 {text!r}: {e}", EXIT_PARSE) from e
    if q.shape != (model.dof,):
        raise CliError(f"--q0 needs {model.dof} values", EXIT_PARSE)
    return q


def _leaf_chains(model, q):
    T = forward_kinematics(model, q)
    parents = {j.parent for j in model.joints}
    chains = []
    for name, _ in model.bodies:
        if name in parents:
            continue
        chain = [name]
        while chain[-1] in model.parent_joint:
            chain.append(model.parent_joint[chain[-1]].parent)
        chains.append([T[b][:3, 3] for b in reversed(chain)])
    return chains


def cmd_cii(args, out, hashes):
    model, h = load_model_arg(args.model, args.lenient)
    hashes[args.model] = h
    rule = None if args.no_dependent else FrontalPlaneRule(target_joint=args.dependent)
    grid = GridSpec(joint_a=args.joint_a, range_a=tuple(args.range_a), joint_b=args.joint_b,
                    range_b=tuple(args.range_b), resolution=tuple(args.resolution),
                    dependent_rule=rule)
    try:
        grid.check(model)
    except (ValueError, KeyError) as e:
        raise CliError(f"bad grid: {e}", EXIT_DOMAIN) from e
    q0 = _parse_q0(args.q0, model) if args.q0 else None
    workers = default_workers()
    mirror = not args.no_mirror

    def sweep(m):
        try:
            return cii_sweep(m, grid, q0, workers=workers, mirror=mirror)
        except (DependentJointError, SingularInertiaError) as e:
            raise CliError(str(e), EXIT_DOMAIN) from e

    report = sweep(model)
    if report.excluded_count:
        print(f"warning: {report.excluded_count} grid node(s) excluded (dependent joint unresolved)",
              file=sys.stderr)
    write_report_csv(report, out.path("cii_values.csv"))
    write_report_json(report, out.path("cii_summary.json"))
    a, b = grid.axes()
    out.svg("cii_heatmap.svg", svg.heatmap(report.values, a, b, f"CII  {model.name}",
                                           f"{grid.joint_a} [rad]", f"{grid.joint_b} [rad]"))
    sm = sweep_model(model, mirror)
    out.svg("posture_qmax.svg", svg.stick_figure(_leaf_chains(sm, report.q_max), "posture at max CII"))
    out.svg("posture_qmin.svg", svg.stick_figure(_leaf_chains(sm, report.q_min), "posture at min CII"))
    print(f"{model.name}: rcii = {report.rcii:.6g} (log10 {log10_rcii(report.rcii):.4f}), "
          f"{report.values.size - report.excluded_count} nodes")

    if args.compare:
        reports = [(model.name, report)]
        for spec in args.compare:
            if spec == "serial":
                if model.topology is None:
                    raise CliError("--compare serial needs a model with a topology", EXIT_DOMAIN)
                other = relocate_actuators(model, serial_placement(model))
                label = model.name + " (serial)"
            else:
                other, h2 = load_model_arg(spec, args.lenient)
                hashes[spec] = h2
                label = other.name
            reports.append((label, sweep(other)))
        rows, ratios = rcii_compare(reports)
        print(f"{'rank':>4}  {'rcii':>12}  {'log10':>9}  {'ratio':>8}  model")
        for r in rows:
            print(f"{r.rank:>4}  {r.rcii:>12.6g}  {r.log10:>9.4f}  {r.ratio_to_best:>8.4f}  {r.label}")
        out.json("cii_compare.json", {"rows": [r.__dict__ for r in rows], "ratios": ratios})
    return EXIT_OK


# -- polytope -------------------------------------------------------------------

def cmd_polytope(args, out, hashes):
    kind = args.kind
    peaks = args.require or []
    if len(peaks) == 1:
        peaks = [peaks[0], peaks[0]]
    if len(peaks) not in (0, 2):
        raise CliError("--require takes one or two peak values", EXIT_PARSE)
    if args.gear <= 0 or args.tau_max <= 0 or args.vel_max <= 0:
        raise CliError("--gear, --tau-max and --vel-max must be > 0", EXIT_DOMAIN)
    tcp = gear_polytope(kind, args.gear, args.tau_max)
    J = np.eye(2) / args.gear if kind == "serial" else \
        np.array([[1.0, 1.0], [1.0, -1.0]]) / (2.0 * args.gear)
    vcp = velocity_polytope(J, args.vel_max)
    write_vertices_csv(tcp, out.path("tcp_vertices.csv"), ("tau_q1", "tau_q2"))
    write_vertices_csv(vcp, out.path("vcp_vertices.csv"), ("qd1", "qd2"))
    print(f"{kind} N={args.gear:g}: TCP vertices " +
          " ".join(f"({v[0]:.6g}, {v[1]:.6g})" for v in tcp.vertices + 0.0))
    print(f"{kind} N={args.gear:g}: VCP vertices " +
          " ".join(f"({v[0]:.6g}, {v[1]:.6g})" for v in vcp.vertices + 0.0))
    summary = {"kind": kind, "gear": args.gear, "tau_max": args.tau_max, "vel_max": args.vel_max,
               "tcp_vertices": tcp.vertices.tolist(), "vcp_vertices": vcp.vertices.tolist()}
    if peaks:
        req = RequirementSet(peaks)
        ok, margin = contains(tcp, req)
        print(f"requirement {peaks}: {'contained' if ok else 'NOT contained'} (margin {margin:.6g} Nm)")
        summary.update(requirement=peaks, contained=ok, margin=margin)
    if args.size:
        if not peaks or min(peaks) <= 0:
            raise CliError("--size needs --require with positive peaks", EXIT_DOMAIN)
        req = RequirementSet(peaks)
        nd = min_gear_ratio("differential", req, args.tau_max)
        ns = min_gear_ratio("serial", req, args.tau_max)
        print(f"N_d = {nd:.6g}, N_s = {ns:.6g}")
        summary.update(min_gear_differential=nd, min_gear_serial=ns)
        if max(peaks) == min(peaks):
            summary.update(closed_form_differential=closed_form_gear_ratio("differential", peaks[0],
                                                                           args.tau_max),
                           closed_form_serial=closed_form_gear_ratio("serial", peaks[0], args.tau_max))
    panels = [
        {"title": "torque capability", "xlabel": "tau_q1 [Nm]", "ylabel": "tau_q2 [Nm]",
         "polygons": [(f"{kind} TCP", tcp.vertices)], "cross": peaks or None},
        {"title": "velocity capability", "xlabel": "qd1 [rad/s]", "ylabel": "qd2 [rad/s]",
         "polygons": [(f"{kind} VCP", vcp.vertices)]},
    ]
    out.svg("polytope.svg", svg.polytope_panels(panels, f"{kind}, N = {args.gear:g}"))
    out.json("polytope_summary.json", summary)
    return EXIT_OK


# -- jump -------------------------------------------------------------------------

def cmd_jump(args, out, hashes):
    model, h = load_model_arg(args.model, args.lenient)
    hashes[args.model] = h
    if args.config:
        try:
            raw = Path(args.config).read_bytes()
        except OSError as e:
            raise CliError(f"cannot read {args.config}: {e}", EXIT_IO) from e
        hashes[args.config] = _sha(raw)
        try:
            config = load_config(args.config, strict=not args.lenient)
        except (ValueError, TypeError) as e:
            raise CliError(f"{args.config}: {e}", EXIT_PARSE) from e
    else:
        config = SimConfig()
    try:
        tr = run_jump(model, config)
    except SimulationAbort as e:
        state = e.state
        dump = None
        if state is not None:
            dump = {"clock": state.clock, "base_height": state.base_height,
                    "base_vel": state.base_vel, "q": state.q.tolist(), "qdot": state.qdot.tolist(),
                    "psi": state.psi.tolist(), "grf": state.grf.tolist()}
            out.json("last_state.json", dump)
        print(f"simulation aborted: {e}", file=sys.stderr)
        if dump:
            print(json.dumps(_json_safe(dump)), file=sys.stderr)
        raise CliError(str(e), EXIT_SIM) from e
    except (InverseKinematicsError, ValueError) as e:
        raise CliError(f"cannot set up the jump: {e}", EXIT_DOMAIN) from e
    m = dict(tr.metrics)
    if THRUST not in m["phase_sequence"]:
        print("warning: thrust profile is zero, the jump was never triggered", file=sys.stderr)
    extra = {"model": model.name}
    if args.compare_serial:
        comp = compare_topologies(model, trajectory=tr)
        extra["compare"] = comp.to_dict()
        out.json("compare.json", comp.to_dict())
        print(f"peak per-motor torque: differential {comp.peak_motor_differential:.4g} Nm, "
              f"serial {comp.peak_motor_serial:.4g} Nm, ratio {comp.ratio:.4f}")
    write_trajectory_csv(tr, out.path("trajectory.csv"), stride=args.stride)
    write_summary_json(_json_safe(m), out.path("summary.json"), _json_safe(extra))
    _jump_plots(tr, config, out)
    print(f"phases {' -> '.join(m['phase_sequence'])}; apex {m['apex'] * 1000:.1f} mm, "
          f"thrust {m['thrust_duration'] * 1000:.0f} ms, aerial {m['aerial_duration'] * 1000:.0f} ms, "
          f"max |tau_psi| {m['max_abs_tau_psi']:.3g} Nm")
    return EXIT_OK


def _jump_plots(tr, config, out):
    s = max(1, len(tr) // 2000)
    t = tr.t[::s]
    out.svg("grf.svg", svg.line_plot(
        [("GRF z (contact)", t, tr.grf[::s, 2]), ("commanded task force z", t, tr.tau_x[::s])],
        "vertical force", "time [s]", "force [N]", hlines=(config.liftoff_threshold,)))
    out.svg("torques.svg", svg.line_plot(
        [(f"tau_{j}", t, tr.tau_q[::s, k]) for k, j in enumerate(tr.joints)],
        "joint torques", "time [s]", "torque [Nm]"))
    if "knee" in tr.joints and "ankle" in tr.joints:
        k, a = tr.joints.index("knee"), tr.joints.index("ankle")
        sat = config.torque_sat
        J = np.array([[0.5, 0.5], [0.5, -0.5]])
        tcp = gear_polytope("differential", 1.0, sat)
        vcp = velocity_polytope(J, float(np.abs(tr.psid[:, [k, a]]).max()))
        panels = [
            {"title": "knee/ankle torque", "xlabel": "tau_knee [Nm]", "ylabel": "tau_ankle [Nm]",
             "polygons": [("TCP (+-%g Nm motors)" % sat, tcp.vertices)],
             "path": [("jump", tr.tau_q[::s][:, [k, a]])]},
            {"title": "knee/ankle velocity", "xlabel": "qd_knee [rad/s]", "ylabel": "qd_ankle [rad/s]",
             "polygons": [("VCP at peak motor speed", vcp.vertices)],
             "path": [("jump", tr.qd[::s][:, [k, a]])]},
        ]
        out.svg("pair_polytopes.svg", svg.polytope_panels(panels, "knee/ankle pair"))
    phases = {AERIAL: 2.0, THRUST: 1.0}
    out.svg("height.svg", svg.line_plot(
        [("base height", t, tr.base_height[::s]),
         ("phase (0 G, 1 T, 2 A)", t, [0.1 * phases.get(p, 0.0) + tr.base_height.min()
                                       for p in tr.phase[::s]])],
        "base height", "time [s]", "height [m]"))


# -- argument parsing -------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="legkit", description="Leg actuation and inertia analysis.")
    p.add_argument("--version", action="version", version=f"legkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--lenient", action="store_true", help="ignore unknown keys in input files")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
            sp.add_argument("--no-meta", action="store_true",
                            help="omit timestamps and wall time from outputs")

    v = sub.add_parser("validate", help="check a robot description file")
    v.add_argument("model", help="path or builtin:NAME")
    common(v, out=False)

    c = sub.add_parser("cii", help="CII sweep over a two-joint grid")
    c.add_argument("model")
    c.add_argument("--joint-a", default="haa")
    c.add_argument("--range-a", nargs=2, type=float, default=[-math.pi / 4, math.pi / 4])
    c.add_argument("--joint-b", default="hfe")
    c.add_argument("--range-b", nargs=2, type=float, default=[-math.pi / 3, 0.0])
    c.add_argument("--resolution", nargs=2, type=int, default=[30, 30])
    c.add_argument("--dependent", default="knee", help="joint resolved by the frontal-plane rule")
    c.add_argument("--no-dependent", action="store_true")
    c.add_argument("--no-mirror", action="store_true", help="sweep the model as given")
    c.add_argument("--q0", help="nominal posture: comma list or name=value pairs")
    c.add_argument("--compare", action="append", metavar="PATH|serial")
    common(c)

    t = sub.add_parser("polytope", help="capability polytopes and gear sizing")
    t.add_argument("--kind", choices=("serial", "differential"), default="differential")
    t.add_argument("--gear", type=float, default=1.0)
    t.add_argument("--tau-max", type=float, default=10.0)
    t.add_argument("--vel-max", type=float, default=40.0)
    t.add_argument("--require", type=float, nargs="+")
    t.add_argument("--size", action="store_true", help="print minimal gear ratios")
    common(t)

    j = sub.add_parser("jump", help="simulate a vertical jump")
    j.add_argument("model", nargs="?", default="builtin:tello")
    j.add_argument("--config", help="simulation config JSON")
    j.add_argument("--compare-serial", action="store_true")
    j.add_argument("--stride", type=int, default=1, help="trajectory CSV row stride")
    common(j)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_PARSE
    started = time.perf_counter()
    out = None
    hashes = {}
    try:
        if args.command == "validate":
            return cmd_validate(args)
        out = Outputs(args.out, not args.no_meta)
        handler = {"cii": cmd_cii, "polytope": cmd_polytope, "jump": cmd_jump}[args.command]
        code = handler(args, out, hashes)
        out.manifest(argv, hashes, started)
        return code
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        if e.code == EXIT_SIM and out is not None:
            # keep the partial outputs (last_state.json) discoverable
            out.manifest(argv, hashes, started)
        return e.code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
