"""Command-line front end.

Every subcommand reads one JSON config (see ``io.CONFIG_SCHEMA``), prints a
JSON report on stdout and writes any requested artifacts.  Exit codes: 0 on
success, 1 when a check fails, 2 on usage or config errors.  Errors are
reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .abstraction import build, verify_relation_empirical
from .errors import (
    ArgumentError,
    BindError,
    ConfigError,
    ExprSyntaxError,
    PreconditionError,
    SuggestionError,
    SymbolicModelError,
)
from .lattice import check_gas_condition, check_iss_condition, lattice_points, suggest_params
from .synth import Controller, SequenceSpec, simulate_closed_loop, simulate_feedback, synth_sequence
from .sysmodel import lyap_check_bounds, lyap_check_dissipation
from .ts import TransitionSystem, greatest_bisim, greatest_sim, is_bisimilar

logger = logging.getLogger("symbolic_models")

USAGE_ERRORS = (ConfigError, ArgumentError, ExprSyntaxError, BindError, PreconditionError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit(report, path=None):
    text = io.dumps(report)
    sys.stdout.write(text)
    if path:
        Path(path).write_text(text, encoding="utf-8")


def _load_ts(path) -> TransitionSystem:
    doc = io.read_json(path)
    if not isinstance(doc, dict) or doc.get("format") != "transition-system":
        raise ConfigError(f"{path}: not a transition-system document")
    try:
        return TransitionSystem.from_dict(doc)
    except (KeyError, ValueError, TypeError) as err:
        raise ConfigError(f"{path}: malformed transition system ({err})") from None


def _abstraction(cfg: io.Config, args) -> TransitionSystem:
    if getattr(args, "ts", None):
        return _load_ts(args.ts)
    force = getattr(args, "force", False)
    if force:
        logger.warning("--force: skipping the precision-condition check")
        cert = cfg.certificate if "certificate" in cfg.doc else None
    else:
        cert = cfg.certificate
    return build(cfg.system, cert, cfg.params, cfg.steps, unsafe=force, threads=args.threads)


# --- subcommands -------------------------------------------------------------


def cmd_params(cfg, args):
    cert, p = cfg.certificate, cfg.params
    report = {"params": {k: float(getattr(p, k)) for k in ("tau", "eta", "mu", "eps", "nu")}}
    report["gas"] = check_gas_condition(cert, p).to_dict()
    if cert.gamma is not None:
        report["iss"] = check_iss_condition(cert, p).to_dict()
    try:
        s = suggest_params(cert, p.eps, p.tau)
        report["suggested"] = {"eta": s.eta, "mu": s.mu}
    except SuggestionError as err:
        report["suggested"] = {"error": str(err), "min_tau": err.min_tau}
    report["holds"] = report["iss" if "iss" in report else "gas"]["holds"]
    _emit(report, args.out)
    return 0 if report["holds"] else 1


def cmd_lyap(cfg, args):
    cert, density = cfg.lyapunov
    if args.density:
        density = args.density
    diss = lyap_check_dissipation(cfg.system, cert, density)
    bounds = lyap_check_bounds(cfg.system, cert, density)
    report = {"density": density, "dissipation": diss.to_dict(), "bounds": bounds.to_dict()}
    report["passed"] = diss.passed and bounds.passed
    _emit(report, args.out)
    return 0 if report["passed"] else 1


def cmd_abstract(cfg, args):
    T = _abstraction(cfg, args)
    if args.out:
        io.write_json(args.out, T.to_dict())
    if args.dot:
        Path(args.dot).write_text(T.to_dot(collapse=args.collapse), encoding="utf-8")
    A = T.adjacency()
    _emit(
        {
            "states": T.num_states,
            "labels": T.num_labels,
            "transitions": int(len(T.transitions)),
            "edges": int(A.sum()),
            "blocking_pairs": int(T.num_states * T.num_labels - len(np.unique(T._keys))),
        }
    )
    return 0


def cmd_bisim(cfg, args):
    T1, T2 = _load_ts(args.first), _load_ts(args.second)
    if args.eps is None or args.eps < 0:
        raise UsageError("--eps must be given and non-negative")
    R = greatest_sim(T1, T2, args.eps) if args.sim else greatest_bisim(T1, T2, args.eps)
    if args.relation:
        io.write_json(args.relation, R.to_dict())
    if args.sim:
        ok = {a for a, _ in R.pairs} == set(range(T1.num_states))
        report = {"mode": "simulation", "pairs": len(R), "simulated": ok}
    else:
        ok = is_bisimilar(T1, T2, args.eps)
        report = {"mode": "bisimulation", "pairs": len(R), "bisimilar": ok}
    report["eps"] = args.eps
    _emit(report)
    return 0 if ok else 1


def cmd_verify(cfg, args):
    T = _abstraction(cfg, args)
    rep = verify_relation_empirical(
        cfg.system,
        T,
        cfg.params,
        init_samples=args.samples,
        horizon=args.horizon,
        seed=args.seed,
        label_samples=args.label_samples,
        steps=cfg.steps,
    )
    _emit(rep.to_dict(), args.out)
    return 0 if rep.passed else 1


def _spec(cfg):
    d = cfg.spec
    if "start" not in d:
        raise ConfigError("spec block needs 'start'")
    return SequenceSpec(d["legs"], d.get("safe")), int(d["start"])


def cmd_synth(cfg, args):
    T = _abstraction(cfg, args)
    spec, start = _spec(cfg)
    t0 = time.perf_counter()
    plan = synth_sequence(T, spec, start)
    logger.info("synthesis: %.3fs", time.perf_counter() - t0)
    if args.controller:
        io.write_json(args.controller, plan.controller.to_dict())
    _emit(plan.to_dict(), args.out)
    return 0


def cmd_simulate(cfg, args):
    sim = cfg.sim
    p = cfg.params
    substeps = sim.get("substeps", 10)
    feedback = args.feedback or sim.get("feedback", False)
    explicit = "inputs" in sim and not feedback
    if explicit and not args.ts:
        # only the state lattice is needed to locate the waypoints
        states = lattice_points(cfg.system.X, p.eta)
        T = TransitionSystem(states, lattice_points(cfg.system.U, p.mu), [], {"eta": p.eta})
    else:
        T = _abstraction(cfg, args)
    if feedback:
        if args.controller:
            ctrl = Controller.from_dict(io.read_json(args.controller))
        else:
            spec, start = _spec(cfg)
            ctrl = synth_sequence(T, spec, start).controller
        traj, rep = simulate_feedback(cfg.system, T, ctrl, sim["x0"], p, cfg.steps, substeps)
    else:
        if explicit:
            inputs = sim["inputs"]
            if "waypoints" not in sim or "start" not in sim:
                raise ConfigError("sim block with 'inputs' also needs 'waypoints' and 'start'")
            waypoints, start = sim["waypoints"], sim["start"]
        else:
            spec, start = _spec(cfg)
            plan = synth_sequence(T, spec, start)
            inputs, waypoints = plan.inputs, plan.waypoints
        traj, rep = simulate_closed_loop(
            cfg.system, T, inputs, sim["x0"], p, start, waypoints, cfg.steps, substeps
        )
    if args.csv:
        Path(args.csv).write_text(traj.to_csv(cfg.system.m), encoding="utf-8")
    _emit(rep.to_dict(), args.out)
    return 0 if rep.passed else 1


# --- entry point ----------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="symbolic-models", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, fn, help, config=True):
        p = sub.add_parser(name, help=help)
        if config:
            p.add_argument("config")
        p.set_defaults(fn=fn, needs_config=config)
        p.add_argument("--threads", type=int, default=None)
        return p

    def builds(p):
        p.add_argument("--ts", help="use a prebuilt transition-system JSON")
        p.add_argument("--force", action="store_true", help="build even if the precision condition fails")

    p = cmd("params", cmd_params, "evaluate the precision conditions")
    p.add_argument("--out")

    p = cmd("lyap", cmd_lyap, "sampled Lyapunov certificate checks")
    p.add_argument("--density", type=int)
    p.add_argument("--out")

    p = cmd("abstract", cmd_abstract, "build the symbolic model")
    p.add_argument("--out", help="transition-system JSON")
    p.add_argument("--dot", help="Graphviz output")
    p.add_argument("--collapse", action="store_true", help="one DOT edge per state pair")
    p.add_argument("--force", action="store_true", help="build even if the precision condition fails")

    p = cmd("bisim", cmd_bisim, "greatest approximate (bi)simulation", config=False)
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--eps", type=float)
    p.add_argument("--sim", action="store_true", help="one-sided simulation")
    p.add_argument("--relation", help="write the relation JSON")

    p = cmd("verify", cmd_verify, "empirical relation check")
    builds(p)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--horizon", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-samples", type=int, default=21)
    p.add_argument("--out")

    p = cmd("synth", cmd_synth, "sequence synthesis")
    builds(p)
    p.add_argument("--controller", help="write controller JSON")
    p.add_argument("--out", help="write the plan JSON")

    p = cmd("simulate", cmd_simulate, "closed-loop simulation and tube check")
    builds(p)
    p.add_argument("--csv")
    p.add_argument("--out", help="tube report JSON")
    p.add_argument("--feedback", action="store_true")
    p.add_argument("--controller", help="controller JSON for --feedback")
    return ap


def _fail(code, kind, message, **extra):
    doc = {"error": kind, "message": message, "exit": code}
    doc.update(extra)
    sys.stderr.write(io.dumps(doc))
    return code


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
    except UsageError as err:
        return _fail(2, "usage", str(err))
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = io.Config.load(args.config) if args.needs_config else None
        return args.fn(cfg, args)
    except UsageError as err:
        return _fail(2, "usage", str(err))
    except USAGE_ERRORS as err:
        return _fail(2, err.kind, str(err), **{k: v for k, v in err.to_dict().items() if k not in ("error", "message")})
    except SymbolicModelError as err:
        return _fail(1, err.kind, str(err), **{k: v for k, v in err.to_dict().items() if k not in ("error", "message")})


if __name__ == "__main__":
    sys.exit(main())
