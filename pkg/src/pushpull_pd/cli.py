"""
Batch command line front-end.

    pushpull-pd generate --seed 42 --out runs/
    pushpull-pd run config.json [--rounds N] [--out DIR] ...
    pushpull-pd verify config.json

Exit codes: 0 success, 1 validation failure, 2 runtime error.

A config is one JSON document::

    {
      "instance": {"seed": 42}            # or {"file": "instance.json"}
      "schedule": "canonical4",           # or {"file": "schedule.json"}
      "weights": {"file": "w.json"},      # optional, uniform otherwise
      "step": {"c": 2.0, "exponent": 0.6},
      "rounds": 5000,
      "record_every": 1,
      "init": "zeros",                    # or {"policy": "random", "seed": 0}
      "oracle_tol": 1e-6,
      "out": "out"
    }

Relative paths are resolved against the directory of the config file.
Certificates are cached in ``$PUSHPULL_CACHE_DIR`` if set, else next to
the instance file (or in the output directory for seeded instances).
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, network, oracle, problem
from .engine import StepSchedule, init_state, run, step
from .errors import PushPullError
from .projections import DualSet, in_dual_set, project_box, project_dual

log = logging.getLogger("pushpull_pd")

EXIT_OK, EXIT_INVALID, EXIT_ERROR = 0, 1, 2
CACHE_ENV = "PUSHPULL_CACHE_DIR"

DEFAULT_CONFIG = {
    "instance": {"seed": 42},
    "schedule": "canonical4",
    "step": {"c": 2.0, "exponent": 0.6},
    "rounds": 5000,
    "record_every": 1,
    "init": "zeros",
    "oracle_tol": 1e-6,
    "out": "out",
}


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# config handling

def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1: config must be a JSON object")
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    cfg.update(doc)
    cfg["_base"] = str(path.parent.resolve())
    return cfg


def apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg["instance"] = {"seed": args.seed}
    for flag, key in (("rounds", "rounds"), ("record_every", "record_every"),
                      ("oracle_tol", "oracle_tol"), ("out", "out")):
        val = getattr(args, flag, None)
        if val is not None:
            cfg[key] = val
    step_cfg = dict(cfg.get("step", {}))
    if getattr(args, "step_c", None) is not None:
        step_cfg["c"] = args.step_c
    if getattr(args, "step_exponent", None) is not None:
        step_cfg["exponent"] = args.step_exponent
    cfg["step"] = step_cfg
    return cfg


def _resolve(cfg, p):
    p = Path(p)
    return p if p.is_absolute() else Path(cfg.get("_base", ".")) / p


def _require_file(path):
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    return path


def build_setup(cfg):
    """Materialize instance, schedule, weights, step schedule and initial point."""
    src = cfg["instance"]
    if "file" in src:
        inst_path = _require_file(_resolve(cfg, src["file"]))
        inst = problem.load_instance(inst_path)
    elif "seed" in src:
        inst_path = None
        inst = problem.canonical_instance(int(src["seed"]))
    else:
        raise ConfigError("instance needs 'seed' or 'file'")

    sch = cfg["schedule"]
    if sch == "canonical4":
        sched = network.canonical_schedule()
    elif isinstance(sch, dict) and "file" in sch:
        sched = network.load_schedule(_require_file(_resolve(cfg, sch["file"])))
    else:
        raise ConfigError(f"unknown schedule {sch!r}")

    if cfg.get("weights"):
        with open(_require_file(_resolve(cfg, cfg["weights"]["file"]))) as fh:
            ws = network.weights_from_dict(json.load(fh))
    else:
        ws = network.uniform_weights(sched)

    ss = StepSchedule(float(cfg["step"]["c"]), float(cfg["step"]["exponent"]))
    rounds = int(cfg["rounds"])
    if rounds < 0:
        raise ConfigError("rounds must be >= 0")

    init = cfg.get("init", "zeros")
    if init == "zeros":
        x0 = np.zeros((inst.m, inst.n))
    elif isinstance(init, dict) and init.get("policy") == "random":
        rng = np.random.default_rng(int(init.get("seed", 0)))
        x0 = rng.uniform(inst.feasible_set.lo, inst.feasible_set.hi, size=(inst.m, inst.n))
    else:
        raise ConfigError(f"unknown init policy {init!r}")
    lam0 = np.zeros((inst.m, inst.r))
    return inst, inst_path, sched, ws, ss, x0, lam0


def cached_certificate(inst, inst_path, tol, out_dir):
    """Load a certificate from the cache or solve and store it."""
    cache = os.environ.get(CACHE_ENV)
    if cache:
        cache_dir = Path(cache)
    elif inst_path is not None:
        cache_dir = Path(inst_path).parent
    else:
        cache_dir = Path(out_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = f"certificate-{problem.instance_hash(inst)}-tol{tol:g}.json"
    path = cache_dir / key
    if path.is_file():
        log.info("using cached certificate %s", path)
        return oracle.load_certificate(path)
    cert = oracle.solve_centralized(inst, tol=tol)
    oracle.save_certificate(cert, path)
    return cert


# --------------------------------------------------------------------------
# commands

def cmd_generate(seed, out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    inst = problem.canonical_instance(seed)
    sched = network.canonical_schedule()
    problem.save_instance(inst, out / "instance.json")
    network.save_schedule(sched, out / "schedule.json")
    slater = problem.check_slater(inst)
    conn = network.check_connectivity(sched, sched.connectivity_window)
    ineq, eq = problem.slater_values(inst)
    print(f"instance: m={inst.m} n={inst.n} p={inst.p} q={inst.q} dual_radius={inst.dual_radius:.6g}")
    print(f"slater: {'PASS' if slater else 'FAIL'} (ineq={ineq.tolist()}, eq={eq.tolist()})")
    print(f"connectivity(B={sched.connectivity_window}): {'PASS' if conn else 'FAIL'}")
    return EXIT_OK if slater and conn else EXIT_INVALID


def write_trace_csv(path, trace, inst):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(analysis.csv_header(inst.m, inst.p, inst.q))
        for row in trace.rows:
            w.writerow(analysis.row_to_csv(row, inst.m))


def cmd_run(cfg):
    out = _resolve(cfg, cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    inst, inst_path, sched, ws, ss, x0, lam0 = build_setup(cfg)
    t0 = time.perf_counter()
    cert = cached_certificate(inst, inst_path, float(cfg["oracle_tol"]), out)
    t1 = time.perf_counter()
    trace = run(inst, sched, ws, ss, x0, lam0, rounds=int(cfg["rounds"]),
                record_every=int(cfg["record_every"]), certificate=cert)
    t2 = time.perf_counter()
    write_trace_csv(out / "trace.csv", trace, inst)
    with open(out / "final_state.json", "w") as fh:
        json.dump(state_to_dict(trace.final), fh, indent=1)

    last = trace.rows[-1]
    fin = trace.final
    rate = None
    if trace.rounds >= 200:
        fit = analysis.fit_rate(trace, inst, cert)
        rate = {"empirical_M1": fit.constant, "slope": fit.slope, "stabilized": fit.stabilized}
    echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    summary = {
        "config": echo,
        "instance_hash": problem.instance_hash(inst),
        "certificate": oracle.certificate_to_dict(cert),
        "final": {
            "round": fin.round,
            "consensus_x": last.consensus_x,
            "consensus_lam": last.consensus_lam,
            "tracking_z": last.tracking_z,
            "tracking_y": last.tracking_y,
            "violation_ineq": last.violation_ineq.tolist(),
            "violation_eq": last.violation_eq.tolist(),
            "gap": last.gap,
            "max_dist_x": float(np.max(np.linalg.norm(fin.x - cert.x_star, axis=1))),
            "max_dist_lam": float(np.max(np.linalg.norm(fin.lam - cert.lam_star, axis=1))),
            "s_norm": last.s_norm,
        },
        "rate": rate,
        "wall_time": {"oracle": t1 - t0, "engine": t2 - t1},
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=1)
    print(f"wrote {out / 'trace.csv'} ({len(trace.rows)} rows) and {out / 'summary.json'}")
    return EXIT_OK


def state_to_dict(state):
    return {
        "round": state.round,
        "x": state.x.tolist(),
        "lam": state.lam.tolist(),
        "z": state.z.tolist(),
        "y": state.y.tolist(),
        "d": state.d.tolist(),
    }


def verification_checks(cfg, n_random=1000, track_rounds=100, probes=1000):
    """Yield ``(name, passed, detail)`` for the invariant suite."""
    inst, inst_path, sched, ws, ss, x0, lam0 = build_setup(cfg)
    rep = network.validate_weights(ws, sched)
    yield "weights", rep.ok, "; ".join(rep.messages) or f"eta={rep.eta:.4g}"
    B = sched.connectivity_window
    yield f"connectivity(B={B})", network.check_connectivity(sched, B), ""
    yield "slater", problem.check_slater(inst), f"ineq={problem.slater_values(inst)[0].tolist()}"

    rng = np.random.default_rng(0)
    box = inst.feasible_set
    ds = DualSet.for_instance(inst)
    span = box.hi - box.lo
    idem, nonexp, feas = 0.0, 0.0, True
    for _ in range(n_random):
        u = rng.normal(0, 2 * span.max(), inst.n)
        v = rng.normal(0, 2 * span.max(), inst.n)
        pu, pv = project_box(u, box), project_box(v, box)
        idem = max(idem, float(np.max(np.abs(project_box(pu, box) - pu))))
        nonexp = max(nonexp, float(np.linalg.norm(pu - pv) - np.linalg.norm(u - v)))
        lu = rng.normal(0, 2 * max(ds.radius, 1.0), inst.r)
        lv = rng.normal(0, 2 * max(ds.radius, 1.0), inst.r)
        plu, plv = project_dual(lu, ds), project_dual(lv, ds)
        idem = max(idem, float(np.max(np.abs(project_dual(plu, ds) - plu))))
        nonexp = max(nonexp, float(np.linalg.norm(plu - plv) - np.linalg.norm(lu - lv)))
        feas &= box.contains(pu) and in_dual_set(plu, ds)
    yield "projections", idem == 0.0 and nonexp <= 1e-12 and feas, f"idempotence={idem:.3g} expansion={nonexp:.3g}"

    state = init_state(inst, x0, lam0)
    worst = 0.0
    for _ in range(track_rounds):
        state = step(state, inst, ws, ss)
        worst = max(worst, *analysis.tracking_residuals(state, inst))
    yield f"tracking({track_rounds} rounds)", worst <= 1e-9 * inst.m, f"max residual={worst:.3g}"

    tol = float(cfg["oracle_tol"])
    cert = oracle.solve_centralized(inst, tol=tol)
    saddle = oracle.verify_saddle(inst, cert.x_star, cert.lam_star, probes=probes, tol=max(tol, 1e-4))
    yield "oracle saddle", saddle.passed, f"kkt={cert.kkt_residual:.3g} gap={saddle.gap:.3g}"


def cmd_verify(cfg):
    ok = True
    for name, passed, detail in verification_checks(cfg):
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'} {name}" + (f": {detail}" if detail else ""))
    return EXIT_OK if ok else EXIT_INVALID


# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="pushpull-pd", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write canonical instance and schedule JSON")
    gen.add_argument("--seed", type=int, default=42)
    gen.add_argument("--out", default=".")

    for name, helptext in (("run", "run an experiment"), ("verify", "run the invariant suite")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", nargs="?", help="JSON config (defaults are used when omitted)")
        p.add_argument("--seed", type=int)
        p.add_argument("--rounds", type=int)
        p.add_argument("--step-c", type=float)
        p.add_argument("--step-exponent", type=float)
        p.add_argument("--record-every", type=int)
        p.add_argument("--out")
        p.add_argument("--oracle-tol", type=float)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "generate":
            return cmd_generate(args.seed, args.out)
        if args.config:
            cfg = load_config(args.config)
        else:
            cfg = copy.deepcopy(DEFAULT_CONFIG)
            cfg["_base"] = os.getcwd()
        cfg = apply_overrides(cfg, args)
        return cmd_run(cfg) if args.command == "run" else cmd_verify(cfg)
    except (ConfigError, PushPullError, ValueError, KeyError, OSError) as exc:
        msg = exc.strerror + f": {exc.filename}" if isinstance(exc, OSError) and exc.filename else str(exc)
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
