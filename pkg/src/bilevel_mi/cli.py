"""Command-line front end: solve, tradeoff, validate, attack."""

import argparse
import logging
import math
import os
import sys

import numpy as np
from scipy.stats import kstest

from . import __version__
from .errors import BilevelMIError, InvalidArgumentError
from .lab import attacks as atk
from .lab.dump import loo_rows, write_csv
from .lab.experiments import leave_one_out_experiment, run_mi_experiment, run_shadow_experiment
from .metrics import (
    SampleContext,
    cdf_test,
    cdf_train,
    density_test,
    density_train,
    evaluate,
    global_threshold_advantage,
    match_error,
    sweep,
    tune_lambda,
)
from .solver import BiLevelSpec, solve

log = logging.getLogger("bilevel_mi")

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_PARTIAL, EXIT_MISMATCH, EXIT_UNDERPOWERED = range(6)

TRADEOFF_COLUMNS = ["axis_name", "axis_value", "lambda", "delta", "phi", "eta", "sigma_beta",
                    "test_error", "advantage", "residual", "reason"]

DEFAULTS = {
    "delta": None, "phi": None, "eta": 1.0, "sigma_beta": None, "lambda": None,
    "grid": None, "axis": "lambda", "n": 500, "trials": 500, "models": 50, "seed": 0,
    "out": None, "attack_kind": "global-threshold", "fpr_budget": 0.01, "bin_width": 0.05,
    "tune": "none", "lambda_grid": "0.01:100:25:log", "ks_threshold": 0.08, "probes": 4,
    "error_targets": None, "n_over_d": None,
    "null": False,
}
FLOATS = {"n_over_d", "delta", "phi", "eta", "sigma_beta", "lambda", "fpr_budget", "bin_width", "ks_threshold"}
INTS = {"n", "trials", "models", "seed", "probes"}
BOOLS = {"null"}


class UsageError(Exception):
    pass


def parse_grid(text):
    """'start:stop:count:log|lin' -> list of floats."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) not in (3, 4):
        raise UsageError(f"bad grid {text!r}; expected start:stop:count[:log|lin]")
    start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    mode = parts[3] if len(parts) == 4 else "lin"
    if count < 1:
        raise UsageError("grid count must be positive")
    if mode == "log":
        if start <= 0 or stop <= 0:
            raise UsageError("log grid needs positive endpoints")
        return np.geomspace(start, stop, count).tolist()
    if mode == "lin":
        return np.linspace(start, stop, count).tolist()
    raise UsageError(f"unknown grid spacing {mode!r}")


def read_config(path):
    """Flat key=value file with '#' comments; keys may use '-' or '_'."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value
    return values


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in FLOATS:
            return float(value)
        if key in INTS:
            return int(value)
        if key in BOOLS:
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
    except ValueError as exc:
        raise UsageError(f"bad value for {key}: {value!r}") from exc
    return value


def resolve(args):
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            cfg[key] = value
    return {k: _coerce(k, v) for k, v in cfg.items()}


def make_spec(cfg, need_lambda=True):
    if cfg.get("n_over_d") is not None and cfg["delta"] is None and cfg["phi"] is not None:
        cfg = {**cfg, "delta": cfg["n_over_d"] / cfg["phi"]}
    missing = [k for k in ("delta", "phi", "sigma_beta") if cfg[k] is None]
    if need_lambda and cfg["lambda"] is None:
        missing.append("lambda")
    if missing:
        raise UsageError("missing required parameters: " + ", ".join(missing))
    try:
        return BiLevelSpec(cfg["delta"], cfg["phi"], cfg["eta"], cfg["sigma_beta"],
                           cfg["lambda"] if cfg["lambda"] is not None else 1.0)
    except InvalidArgumentError as exc:
        raise UsageError(str(exc)) from exc


def _side_path(path, suffix):
    root, ext = os.path.splitext(path)
    return f"{root}_{suffix}{ext or '.csv'}"


def _echo_config(cfg):
    return {k: v for k, v in cfg.items() if k not in ("out", "seed")}


def cmd_solve(cfg):
    spec = make_spec(cfg)
    try:
        rep = solve(spec)
    except BilevelMIError as exc:
        print(f"solve failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    s = rep.state
    cols = ["alpha", "sigma", "gamma", "theta", "tau", "r", "residual", "iterations"]
    row = [s.alpha, s.sigma, s.gamma, s.theta, s.tau, s.r, rep.residual, rep.iterations]
    print(",".join(cols))
    print(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    if cfg["out"]:
        write_csv(cfg["out"], cols, [row], _echo_config(cfg), cfg["seed"])
    return EXIT_OK


def _at(cfg, base, axis, value):
    """Spec for one axis value; with --n-over-d a phi sweep keeps n/d fixed."""
    if axis == "lambda":
        return base.with_(lam=value)
    spec = base.with_(**{axis: value})
    if axis == "phi" and cfg["n_over_d"] is not None:
        spec = spec.with_(delta=cfg["n_over_d"] / value)
    return spec


def _tradeoff_rows(cfg, base):
    axis = cfg["axis"]
    grid = parse_grid(cfg["grid"]) if cfg["grid"] else None
    if grid is None:
        raise UsageError("--grid is required for tradeoff")
    if axis not in ("lambda", "phi", "delta"):
        raise UsageError(f"unknown axis {axis!r}")
    if cfg["n_over_d"] is not None and axis != "phi":
        raise UsageError("--n-over-d only applies to a phi axis")
    if cfg["tune"] == "none":
        if axis != "lambda" and cfg["lambda"] is None:
            raise UsageError("--lambda is required unless sweeping lambda or tuning it")
        specs = [_at(cfg, base, axis, v) for v in grid]
        return [_row(axis, v, sp, _try_evaluate(sp)) for v, sp in zip(grid, specs)]
    if axis == "lambda":
        raise UsageError("--tune needs a phi or delta axis")
    lam_grid = parse_grid(cfg["lambda_grid"])
    families = {v: _at(cfg, base, axis, v).with_(lam=lam_grid[0]) for v in grid}
    curves = {v: sweep(families[v], "lambda", lam_grid) for v in grid}
    if cfg["tune"] == "matched-error":
        if not cfg["error_targets"]:
            raise UsageError("--tune matched-error needs --error-targets")
        jobs = [(t, v) for t in parse_grid(cfg["error_targets"]) for v in grid]
    else:
        jobs = [(None, v) for v in grid]
    rows = []
    # one row per (target, axis value) in matched-error mode
    for target, value in jobs:
        family = families[value]
        try:
            if target is None:
                lam, pt = tune_lambda(family, "min-error", lam_grid, points=curves[value])
            else:
                lam, pt = match_error(family, target, lam_grid, points=curves[value])
            rows.append(_row(axis, value, family.with_(lam=lam), pt))
        except BilevelMIError as exc:
            rows.append(_row(axis, value, family, None, str(exc), tuned=True))
    return rows


def _try_evaluate(spec):
    try:
        return evaluate(spec)
    except BilevelMIError as exc:
        log.warning("%s failed: %s", spec, exc)
        return None


def _row(axis, value, spec, pt, reason=None, tuned=False):
    # a failed tuning has no meaningful lambda
    head = [axis, float(value), None if tuned else spec.lam,
            spec.delta, spec.phi, spec.eta, spec.sigma_beta]
    if pt is None:
        return head + [None, None, None, reason or "solve failed"]
    return head + [pt.test_error, pt.advantage, pt.solve_residual, ""]


def cmd_tradeoff(cfg):
    axis = cfg["axis"]
    if axis in ("phi", "delta") and cfg[axis] is None and cfg["grid"]:
        # the swept parameter comes from the grid
        cfg = {**cfg, axis: parse_grid(cfg["grid"])[0]}
    base = make_spec(cfg, need_lambda=False)
    rows = _tradeoff_rows(cfg, base)
    ok = sum(r[-1] == "" for r in rows)
    out = cfg["out"] or "tradeoff.csv"
    write_csv(out, TRADEOFF_COLUMNS, rows, _echo_config(cfg), cfg["seed"])
    print(f"wrote {len(rows)} rows ({ok} solved) to {out}")
    if not rows or ok < 0.9 * len(rows):
        return EXIT_PARTIAL
    return EXIT_OK


def ks_power_ok(trials, threshold):
    """True when a KS test at this many samples can resolve the threshold (5% level)."""
    return 1.358 / math.sqrt(max(trials, 1)) < threshold


def cmd_validate(cfg):
    spec = make_spec(cfg)
    trials, thr = cfg["trials"], cfg["ks_threshold"]
    if not ks_power_ok(trials, thr):
        print(f"warning: {trials} trials cannot resolve KS < {thr}; run is underpowered",
              file=sys.stderr)
        return EXIT_UNDERPOWERED
    try:
        state = solve(spec).state
        res = leave_one_out_experiment(spec, cfg["n"], trials, cfg["seed"], n_probes=cfg["probes"])
    except BilevelMIError as exc:
        print(f"validation failed to compute: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    out = cfg["out"] or "validate.csv"
    config = _echo_config(cfg)
    write_csv(out, ["trial", "arm", "output", "loss", "seed"], loo_rows(res, cfg["seed"]),
              config, cfg["seed"])
    dens_rows, worst = [], 0.0
    for j, probe in enumerate(res.setup.probes):
        ctx = SampleContext(probe.z_star, probe.y)
        both = np.concatenate([res.train_outputs[j], res.test_outputs[j]])
        z = np.linspace(both.min() - 3 * state.sigma, both.max() + 3 * state.sigma, 2001)
        mtr, mte = density_train(state, ctx, z), density_test(state, ctx, z)
        dens_rows.extend((j, float(a), float(b), float(c)) for a, b, c in zip(z, mtr, mte))
        ks_tr = kstest(res.train_outputs[j], lambda t: cdf_train(state, ctx, t)).statistic
        ks_te = kstest(res.test_outputs[j], lambda t: cdf_test(state, ctx, t)).statistic
        worst = max(worst, ks_tr, ks_te)
        print(f"probe {j}: y={probe.y} z_star={probe.z_star:.4f} "
              f"ks_train={ks_tr:.4f} ks_test={ks_te:.4f}")
    write_csv(_side_path(out, "density"), ["probe", "z", "mu_train", "mu_test"], dens_rows,
              config, cfg["seed"])
    verdict = "pass" if worst < thr else "fail"
    print(f"summary: trials={trials} failed={res.failed} max_ks={worst:.4f} threshold={thr} {verdict}")
    return EXIT_OK if worst < thr else EXIT_MISMATCH


def cmd_attack(cfg):
    spec = make_spec(cfg)
    kind = cfg["attack_kind"]
    try:
        if kind == "sample-threshold":
            losses, member, n_shadow = run_shadow_experiment(
                spec, cfg["n"], cfg["models"], cfg["models"], cfg["seed"])
            if cfg["null"]:
                member = member[np.random.default_rng(cfg["seed"]).permutation(len(member))]
            report = atk.sample_threshold_from_matrix(losses, member, n_shadow)
            tl, tm = losses[n_shadow:], member[n_shadow:]
            report.tpr_at_1pct = atk.tpr_at_fpr(tl[tm], tl[~tm], cfg["fpr_budget"])
        else:
            runs = run_mi_experiment(spec, cfg["n"], cfg["models"], cfg["seed"], null=cfg["null"])
            mem = np.concatenate([r["member"] for r in runs])
            non = np.concatenate([r["nonmember"] for r in runs])
            if kind == "global-threshold":
                report = atk.attack_global_threshold(mem, non)
            elif kind == "lrt-histogram":
                report = atk.attack_lrt_histogram(mem, non, cfg["bin_width"])
            else:
                raise UsageError(f"unknown attack kind {kind!r}")
            report.tpr_at_1pct = atk.tpr_at_fpr(mem, non, cfg["fpr_budget"])
    except BilevelMIError as exc:
        print(f"attack failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    out = cfg["out"] or "attack.csv"
    write_csv(out, ["fpr", "tpr"], report.tpr_points, _echo_config(cfg), cfg["seed"])
    line = (f"summary: kind={kind} advantage={report.advantage:.6f} "
            f"tpr_at_fpr({cfg['fpr_budget']})={report.tpr_at_1pct:.6f}")
    if kind == "global-threshold" and not cfg["null"]:
        try:
            theory, _ = global_threshold_advantage(solve(spec).state, spec.sigma_beta)
            line += f" theory={theory:.6f}"
        except BilevelMIError:
            pass
    print(line)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "tradeoff": cmd_tradeoff, "validate": cmd_validate,
            "attack": cmd_attack}


def build_parser():
    parser = argparse.ArgumentParser(prog="bilevel-mi", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--delta", type=float, help="n/p")
    common.add_argument("--phi", type=float, help="p/d")
    common.add_argument("--eta", type=float, help="tail variance mass")
    common.add_argument("--sigma-beta", dest="sigma_beta", type=float, help="signal scale")
    common.add_argument("--lambda", dest="lambda", type=float, help="ridge strength")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--out", help="output CSV path")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the fixed-point system")
    p = sub.add_parser("tradeoff", parents=[common], help="sweep error/advantage")
    p.add_argument("--axis", choices=["lambda", "phi", "delta"])
    p.add_argument("--grid", help="start:stop:count:log|lin")
    p.add_argument("--tune", choices=["none", "min-error", "matched-error"],
                   help="pick lambda per grid point (phi/delta axes)")
    p.add_argument("--n-over-d", dest="n_over_d", type=float,
                   help="hold n/d fixed along a phi axis (delta = n_over_d / phi)")
    p.add_argument("--error-targets", dest="error_targets",
                   help="test-error targets for --tune matched-error (grid syntax)")
    p.add_argument("--lambda-grid", dest="lambda_grid", help="grid searched when tuning")
    p = sub.add_parser("validate", parents=[common], help="leave-one-out check against theory")
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--probes", type=int)
    p.add_argument("--ks-threshold", dest="ks_threshold", type=float)
    p = sub.add_parser("attack", parents=[common], help="empirical membership attacks")
    p.add_argument("--n", type=int)
    p.add_argument("--models", type=int)
    p.add_argument("--attack-kind", dest="attack_kind",
                   choices=["global-threshold", "sample-threshold", "lrt-histogram"])
    p.add_argument("--fpr-budget", dest="fpr_budget", type=float)
    p.add_argument("--bin-width", dest="bin_width", type=float)
    p.add_argument("--null", action="store_true", default=None,
                   help="draw both arms from non-members (sanity check)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
