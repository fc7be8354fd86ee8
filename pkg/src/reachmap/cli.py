"""Command-line front end: sampling, training, evaluation, planning, and
heatmap export, with a JSON manifest written next to every output so any
run can be reproduced byte-identically with the rerun command.

Exit codes: 0 success, 1 domain error (missing file, bad schema, failed
precondition), 2 usage error.  Domain errors print a single line starting
with "error: " to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .evaluation import compute_iou, offset_sweep
from .geometry import SE2, Pose, pose_from_vector
from .kinematics import IkOptions, load_chain, oracle_reachable
from .models import load_model, mirror_se2, save_model
from .models import MlpClassifier, OneClassRbfSvm, RbfSvmClassifier
from .planner import (SqpConfig, plan_footsteps, plan_placement,
                      plan_with_trajectory_param)
from .sampling import (load_samples, sample_fk, sample_footsteps, sample_ik,
                       save_samples, workspace_bounds)

DEFAULT_FOOTSTEP_BOUNDS = [[-1.5, 1.5], [-1.5, 1.5], [-np.pi, np.pi]]


class CliError(Exception):
    """Domain error reported as a one-line message with exit code 1."""


def _write_manifest(out_path, command, config):
    manifest = {"command": command, "config": config}
    with open(str(out_path) + ".manifest.json", "w") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
        f.write("\n")


def _parse_bounds(text):
    try:
        pairs = [[float(v) for v in part.split(",")]
                 for part in text.split(";")]
    except ValueError as exc:
        raise CliError(f"bad bounds {text!r}: {exc}") from exc
    if any(len(p) != 2 for p in pairs):
        raise CliError(f"bad bounds {text!r}: each part must be lo,hi")
    return [tuple(p) for p in pairs]


def _load_chain_arg(name):
    try:
        return load_chain(name)
    except FileNotFoundError as exc:
        raise CliError(f"chain not found: {name}") from exc


def cmd_sample(args):
    chain = _load_chain_arg(args.chain)
    if args.bounds:
        bounds = _parse_bounds(args.bounds)
    elif args.method == "footstep":
        bounds = [tuple(b) for b in DEFAULT_FOOTSTEP_BOUNDS]
    else:
        bounds = workspace_bounds(chain)
    opts = IkOptions(restarts=args.restarts)
    if args.method == "fk":
        samples = sample_fk(chain, args.count, args.seed)
    elif args.method == "ik":
        samples = sample_ik(chain, bounds, args.count, args.seed, opts)
    elif args.method == "footstep":
        samples = sample_footsteps(chain, bounds, args.count, args.seed, opts)
    else:
        raise CliError(f"unknown sampling method: {args.method}")
    save_samples(samples, args.out)
    _write_manifest(args.out, "sample", {
        "chain": args.chain, "method": args.method, "count": args.count,
        "seed": args.seed, "bounds": [list(b) for b in bounds],
        "restarts": args.restarts, "out": args.out})
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _parse_hidden(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise CliError(f"bad hidden layer spec {text!r}") from exc


def cmd_train(args):
    try:
        data = load_samples(args.data)
    except FileNotFoundError as exc:
        raise CliError(f"data not found: {args.data}") from exc
    if args.model == "svm":
        model = RbfSvmClassifier(gamma=args.gamma, C=args.C,
                                 offset=args.offset, tol=args.tol)
        model.fit(data.inputs, data.labels)
    elif args.model == "ocsvm":
        model = OneClassRbfSvm(gamma=args.gamma, nu=args.nu,
                               offset=args.offset)
        pos = data.inputs[data.labels == 1]
        if len(pos) == 0:
            raise CliError("one-class training needs positive samples")
        model.fit(pos)
    elif args.model == "mlp":
        model = MlpClassifier(hidden=_parse_hidden(args.hidden), lr=args.lr,
                              batch_size=args.batch_size, epochs=args.epochs,
                              seed=args.mlp_seed, offset=args.offset)
        model.fit(data.inputs, data.labels)
    else:
        raise CliError(f"unknown model kind: {args.model}")
    save_model(model, args.out)
    _write_manifest(args.out, "train", {
        "model": args.model, "data": args.data, "gamma": args.gamma,
        "C": args.C, "nu": args.nu, "offset": args.offset, "tol": args.tol,
        "hidden": args.hidden, "lr": args.lr, "batch_size": args.batch_size,
        "epochs": args.epochs, "mlp_seed": args.mlp_seed, "out": args.out})
    print(f"wrote model to {args.out}")
    return 0


def cmd_eval(args):
    try:
        model = load_model(args.model)
        test = load_samples(args.test)
    except FileNotFoundError as exc:
        raise CliError(str(exc)) from exc
    if args.sweep:
        rhos = [float(v) for v in args.sweep.split(",")]
        pairs = offset_sweep(model, test, rhos)
        lines = ["rho,iou"] + ["%.17g,%.6f" % (r, i) for r, i in pairs]
        text = "\n".join(lines) + "\n"
    else:
        rho = args.rho if args.rho is not None else None
        report = compute_iou(model, test, rho_override=rho)
        print(report)
        text = "iou,tp,fp,fn,tn,time\n" + report.as_csv_row() + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
        _write_manifest(args.out, "eval", {
            "model": args.model, "test": args.test, "rho": args.rho,
            "sweep": args.sweep, "out": args.out})
    elif args.sweep:
        sys.stdout.write(text)
    return 0


def _load_map_ref(ref, base_dir=""):
    if isinstance(ref, str):
        return load_model(ref)
    if isinstance(ref, dict) and "mirror_of" in ref:
        return mirror_se2(load_model(ref["mirror_of"]))
    raise CliError(f"bad model reference: {ref!r}")


def _build_trajectory(spec):
    if spec.get("kind") != "door_arc":
        raise CliError(f"unknown trajectory kind: {spec.get('kind')!r}")
    hinge = np.asarray(spec["hinge"], dtype=float)
    radius = float(spec["radius"])

    def traj(s):
        return np.array([hinge[0] + radius * np.sin(s),
                         hinge[1] - radius * np.cos(s), s])

    def dtraj(s):
        return np.array([radius * np.cos(s), radius * np.sin(s), 1.0])

    return traj, dtraj


def cmd_plan(args):
    try:
        with open(args.problem) as f:
            spec = json.load(f)
    except FileNotFoundError as exc:
        raise CliError(f"problem file not found: {args.problem}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"bad problem JSON: {exc}") from exc
    cfg = SqpConfig(**spec.get("cfg", {}))
    kind = spec.get("type")
    if kind == "footsteps":
        maps = {k: _load_map_ref(v) for k, v in spec["maps"].items()}
        result = plan_footsteps(spec["start_left"], spec["start_right"],
                                spec["goal_left"], spec["goal_right"],
                                spec["n_steps"], maps, cfg,
                                obstacles=spec.get("obstacles"))
    elif kind == "placement":
        model = _load_map_ref(spec["model"])
        result = plan_placement(spec["waypoints"], spec["base_target"], model,
                                cfg, base_init=spec.get("base_init"))
    elif kind == "trajectory_param":
        foot_maps = {k: _load_map_ref(v) for k, v in spec["foot_maps"].items()}
        hand_map = _load_map_ref(spec["hand_map"])
        traj, dtraj = _build_trajectory(spec["trajectory"])
        result = plan_with_trajectory_param(
            spec["start_left"], spec["start_right"], spec["goal_left"],
            spec["goal_right"], spec["n_steps"], foot_maps, hand_map,
            traj, dtraj, spec["s_start"], spec["s_goal"], cfg)
    else:
        raise CliError(f"unknown plan type: {kind!r}")
    m = result.poses.shape[1]
    cols = ["x", "y", "theta"][:m] if m == 3 else [f"x{k}" for k in range(m)]
    lines = ["index," + ",".join(cols) + ",s"]
    for i, pose in enumerate(result.poses):
        s_val = "%.17g" % result.s[i] if i < len(result.s) else ""
        lines.append("%d,%s,%s" % (i, ",".join("%.17g" % v for v in pose),
                                   s_val))
    with open(args.out, "w") as f:
        f.write("\n".join(lines) + "\n")
    _write_manifest(args.out, "plan", {"problem": args.problem,
                                       "out": args.out})
    print(f"converged={result.converged} iterations={result.iterations} "
          f"wrote {args.out}")
    return 0 if result.converged else 1


def _parse_slice(text):
    try:
        name, value = text.split("=")
        return name.strip(), float(value)
    except ValueError as exc:
        raise CliError(f"bad slice {text!r}: expected name=value") from exc


def cmd_heatmap(args):
    try:
        model = load_model(args.model)
    except FileNotFoundError as exc:
        raise CliError(f"model not found: {args.model}") from exc
    name, value = _parse_slice(args.slice)
    bounds = _parse_bounds(args.bounds) if args.bounds else [(-2.0, 2.0)] * 2
    if len(bounds) != 2:
        raise CliError("heatmap bounds must cover exactly the two grid axes")
    xs = np.linspace(bounds[0][0], bounds[0][1], args.res)
    ys = np.linspace(bounds[1][0], bounds[1][1], args.res)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    if name == "theta":
        inputs = np.concatenate(
            [pts, np.full((len(pts), 1), np.cos(value)),
             np.full((len(pts), 1), np.sin(value))], axis=1)
    elif name == "z":
        inputs = np.concatenate([pts, np.full((len(pts), 1), value)], axis=1)
    elif name == "none":
        inputs = pts
    else:
        raise CliError(f"unknown slice axis: {name!r}")
    values = model.decision_function(inputs)
    lines = ["x,y,value"]
    for (x, y), v in zip(pts, values):
        lines.append("%.17g,%.17g,%.17g" % (x, y, v))
    with open(args.out, "w") as f:
        f.write("\n".join(lines) + "\n")
    _write_manifest(args.out, "heatmap", {
        "model": args.model, "slice": args.slice, "res": args.res,
        "bounds": [list(b) for b in bounds], "out": args.out})
    print(f"wrote {args.res}x{args.res} grid to {args.out}")
    return 0


def cmd_rerun(args):
    try:
        with open(args.manifest) as f:
            manifest = json.load(f)
    except FileNotFoundError as exc:
        raise CliError(f"manifest not found: {args.manifest}") from exc
    command = manifest.get("command")
    config = manifest.get("config", {})
    if command not in ("sample", "train", "eval", "plan", "heatmap"):
        raise CliError(f"manifest has unknown command: {command!r}")
    argv = [command]
    for key, val in sorted(config.items()):
        if val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if key == "bounds" and isinstance(val, list):
            val = ";".join("%.17g,%.17g" % tuple(b) for b in val)
        # --flag=value keeps argparse from mistaking negative numbers for flags
        argv.append(f"{flag}={val}")
    return main(argv)


def _build_parser():
    p = argparse.ArgumentParser(prog="reachmap",
                                description="reachability-map toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sample", help="generate labeled pose samples")
    ps.add_argument("--chain", required=True,
                    help="chain JSON file or preset name (arm2, leg3, hand3)")
    ps.add_argument("--method", required=True,
                    choices=["fk", "ik", "footstep"])
    ps.add_argument("--count", type=int, required=True)
    ps.add_argument("--seed", type=int, required=True)
    ps.add_argument("--bounds", help="per-dimension lo,hi;lo,hi;...")
    ps.add_argument("--restarts", type=int, default=10)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_sample)

    pt = sub.add_parser("train", help="fit a reachability model")
    pt.add_argument("--model", required=True, choices=["svm", "ocsvm", "mlp"])
    pt.add_argument("--data", required=True)
    pt.add_argument("--gamma", type=float, default=30.0)
    pt.add_argument("--C", type=float, default=10.0)
    pt.add_argument("--nu", type=float, default=0.05)
    pt.add_argument("--offset", type=float, default=0.1)
    pt.add_argument("--tol", type=float, default=1e-3)
    pt.add_argument("--hidden", default="64,32")
    pt.add_argument("--lr", type=float, default=1e-3)
    pt.add_argument("--batch-size", type=int, default=256)
    pt.add_argument("--epochs", type=int, default=500)
    pt.add_argument("--mlp-seed", type=int, default=0)
    pt.add_argument("--out", required=True)
    pt.set_defaults(func=cmd_train)

    pe = sub.add_parser("eval", help="score a model against labeled samples")
    pe.add_argument("--model", required=True)
    pe.add_argument("--test", required=True)
    pe.add_argument("--rho", type=float, default=None,
                    help="override the stored decision offset")
    pe.add_argument("--sweep", help="comma-separated offsets to sweep")
    pe.add_argument("--out")
    pe.set_defaults(func=cmd_eval)

    pp = sub.add_parser("plan", help="solve a planning problem JSON")
    pp.add_argument("--problem", required=True)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=cmd_plan)

    ph = sub.add_parser("heatmap", help="export a decision-value grid")
    ph.add_argument("--model", required=True)
    ph.add_argument("--slice", required=True,
                    help="fixed axis, e.g. theta=0 (SE2), z=0.5 (R3), none=0")
    ph.add_argument("--res", type=int, default=200)
    ph.add_argument("--bounds", help="grid bounds lo,hi;lo,hi")
    ph.add_argument("--out", required=True)
    ph.set_defaults(func=cmd_heatmap)

    pr = sub.add_parser("rerun", help="re-execute a command from a manifest")
    pr.add_argument("--manifest", required=True)
    pr.set_defaults(func=cmd_rerun)
    return p


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
