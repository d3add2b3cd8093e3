"""Batch command-line front end.

Every subcommand accepts ``--config FILE`` (a flat JSON object); explicit
flags override file values. The resolved configuration and the package
version are embedded in every artifact written.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 numerical-tolerance escalation.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import RandomStream, phi, random_direction
from .distributions import ClweParams, sample_clwe, sample_null, sample_pnn, sample_pphi
from .learners import (ConstantLearner, OracleLearner, SGDArch, SGDLearner, SGDOptions,
                       evaluate_edge, fit_sgd)
from .params import eta_exponent, derive_chain, eta_regime
from .reduction import (NN_CLAMP, PHI_CLAMP, ConfigError, DEFAULT_FAILURE_BUDGET, ReductionConfig,
                        default_gamma, default_nn_radius, run_trials)
from .relu import build_nn_1d, evaluate, lift
from .stats import NumericalToleranceError, verify_all

OUTPUT_DIR_ENV = "CLWE_RELU_OUTPUT_DIR"

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "sample": {"dist": "clwe", "d": 32, "gamma": None, "beta": 0.0, "sigma": 0.0, "R": None,
               "m": 1000, "seed": 0, "output": "samples.csv", "emit_secret": False},
    "build-nn": {"R": 3, "output": "nn.json"},
    "plot-fig1": {"R": 3, "output": "fig1.svg"},
    "distinguish": {"d": 32, "gamma": None, "sigma": 0.01, "epsilon": 0.05, "m1": 1000, "m2": None,
                    "beta": None, "failure_budget": DEFAULT_FAILURE_BUDGET, "learner": "oracle",
                    "R": None, "trials": 100, "seed": 0, "output": "distinguish.json",
                    "sgd_k": 16, "sgd_lr": 0.05, "sgd_epochs": 2, "sgd_batch": 64},
    "train": {"d": 8, "gamma": 0.25, "sigma": 0.01, "k": 64, "init_scale": 1.0, "lr": 0.05,
              "epochs": 20, "batch": 64, "m": 20000, "m_eval": 100000, "seed": 0,
              "output": "train"},
    "verify": {"seed": 0, "mc_x": 200, "mc": 100000, "noisy_gamma": 11.3, "bound_scale": 1.0,
               "output": "verify.json"},
    "params": {"n": None, "d": None, "sigma_log2": None, "eta": None, "poly_slack": 1.0,
               "c_const": 1.0, "output": "params.json"},
}


def _out_path(name: str) -> Path:
    p = Path(name)
    if not p.is_absolute():
        p = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(name: str, text: str) -> Path:
    path = _out_path(name)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


def _resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a flat JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _header(command: str, cfg: dict) -> dict:
    return {"artifact_version": __version__, "command": command,
            "config": {k: v for k, v in cfg.items() if k != "output"}}


# --- subcommands -------------------------------------------------------------


def cmd_sample(cfg: dict, threads: int) -> int:
    d, m = int(cfg["d"]), int(cfg["m"])
    gamma = default_gamma(d) if cfg["gamma"] is None else float(cfg["gamma"])
    cfg["gamma"] = gamma
    base = RandomStream(int(cfg["seed"]), 0)
    w = random_direction(d, base.spawn(0))
    dist = cfg["dist"]
    if dist == "clwe":
        s = sample_clwe(ClweParams(d, gamma, float(cfg["beta"])), w, m, base.spawn(1))
    elif dist == "null":
        s = sample_null(d, m, base.spawn(1))
    elif dist == "pphi":
        s = sample_pphi(d, gamma, w, float(cfg["sigma"]), m, base.spawn(1))
    elif dist == "pnn":
        R = cfg["R"] if cfg["R"] is not None else default_nn_radius(gamma, max(d, 2), max(cfg["sigma"], 1e-12))
        cfg["R"] = int(R)
        s = sample_pnn(lift(build_nn_1d(int(R)), gamma, w), float(cfg["sigma"]), m, base.spawn(1))
    else:
        raise ConfigError(f"unknown distribution {dist!r}")
    header = json.dumps(_header("sample", cfg), sort_keys=True)
    path = _out_path(cfg["output"])
    with open(path, "w", newline="\n") as fh:
        s.to_csv(fh, header_comment=header)
    if cfg["emit_secret"]:
        _write(str(cfg["output"]) + ".secret.json", _dump({**_header("sample", cfg), "w": w.tolist()}))
    print(f"wrote {m} samples ({dist}, d={d}) to {path}")
    return EXIT_OK


def _nn_grid_deviation(R: int) -> tuple[float, float]:
    net = build_nn_1d(R)
    quarter = np.arange(-4 * (R + 2), 4 * (R + 2) + 1) / 4.0
    target = phi(quarter) * (np.abs(quarter) <= R)
    dev_q = float(np.max(np.abs(evaluate(net, quarter) - target)))
    fine = np.linspace(-R - 2, R + 2, 20001)
    target = phi(fine) * (np.abs(fine) <= R)
    dev_f = float(np.max(np.abs(evaluate(net, fine) - target)))
    return dev_q, dev_f


def cmd_build_nn(cfg: dict, threads: int) -> int:
    R = cfg["R"]
    if isinstance(R, bool) or not isinstance(R, int) or R < 1:
        raise ConfigError("R must be a positive integer")
    net = build_nn_1d(R)
    dev_q, dev_f = _nn_grid_deviation(R)
    rec = {**net.to_dict(), **_header("build-nn", cfg),
           "max_abs_dev_quarter_grid": dev_q, "max_abs_dev_fine_grid": dev_f}
    path = _write(cfg["output"], _dump(rec))
    print(f"width {net.k} (= 4R+2 = {4 * R + 2})")
    print(f"max |nn - phi*1[|x|<=R]| on quarter grid over [-R-2, R+2]: {dev_q:.3g}")
    print(f"max |nn - phi*1[|x|<=R]| on 20001-point grid:            {dev_f:.3g}")
    print(f"model written to {path}")
    return EXIT_OK


def cmd_plot_fig1(cfg: dict, threads: int) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    R = int(cfg["R"])
    if R < 1:
        raise ConfigError("R must be >= 1")
    net = build_nn_1d(R)
    x = np.linspace(-R - 2, R + 2, 8 * (2 * R + 4) + 1)
    with matplotlib.rc_context({"svg.hashsalt": "clwe-relu", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.axvspan(-R, R, color="0.92", label=f"[-R, R], R={R}")
        ax.plot(x, phi(x), color="tab:blue", lw=2.5, label="phi(x)")
        ax.plot(x, evaluate(net, x), color="tab:orange", lw=1.2, ls="--", label="nn(x)")
        ax.set_xlabel("x")
        ax.set_ylim(-0.35, 0.35)
        ax.legend(loc="upper right", fontsize=8)
        ax.set_title(f"phi(x) and nn(x), R={R} ({net.k} ReLU units)")
        fig.tight_layout()
        path = _out_path(cfg["output"])
        meta = {"Date": None, "Creator": f"clwe-relu {__version__}",
                "Description": json.dumps(_header("plot-fig1", cfg), sort_keys=True)}
        fig.savefig(path, format="svg", metadata=meta)
        plt.close(fig)
    print(f"figure written to {path}")
    return EXIT_OK


def _learner_factory(cfg: dict, R: int | None):
    kind = cfg["learner"]
    if kind == "oracle":
        return lambda w, gamma: OracleLearner(w, gamma)
    if kind == "nn-oracle":
        return lambda w, gamma: OracleLearner(w, gamma, "nn", R)
    if kind == "constant":
        return lambda w, gamma: ConstantLearner()
    if kind == "sgd":
        arch = SGDArch(int(cfg["sgd_k"]))
        return lambda w, gamma: SGDLearner(arch, float(cfg["sgd_lr"]), int(cfg["sgd_epochs"]),
                                           int(cfg["sgd_batch"]))
    raise ConfigError(f"unknown learner {kind!r}")


def cmd_distinguish(cfg: dict, threads: int) -> int:
    d = int(cfg["d"])
    gamma = default_gamma(d) if cfg["gamma"] is None else float(cfg["gamma"])
    cfg["gamma"] = gamma
    nn = cfg["learner"] == "nn-oracle"
    R = None
    if nn:
        R = int(cfg["R"]) if cfg["R"] is not None else default_nn_radius(gamma, d, float(cfg["sigma"]))
        cfg["R"] = R
    rc = ReductionConfig.with_defaults(
        d, gamma, float(cfg["sigma"]), float(cfg["epsilon"]), int(cfg["m1"]),
        m2=cfg["m2"], beta=cfg["beta"], failure_budget=float(cfg["failure_budget"]),
        clamp=NN_CLAMP if nn else PHI_CLAMP,
    )
    cfg["m2"], cfg["beta"] = rc.m2, rc.beta
    factory = _learner_factory(cfg, R)
    trials, seed = int(cfg["trials"]), int(cfg["seed"])
    planted = run_trials(rc, factory, True, trials, seed, threads)
    null = run_trials(rc, factory, False, trials, seed, threads)
    completeness = sum(t.correct for t in planted) / trials
    soundness = sum(t.correct for t in null) / trials
    report = {**_header("distinguish", cfg), "reduction": rc.to_dict(),
              "completeness": completeness, "soundness": soundness,
              "planted_trials": [t.to_dict() for t in planted],
              "null_trials": [t.to_dict() for t in null]}
    path = _write(cfg["output"], _dump(report))
    print(f"learner={cfg['learner']} d={d} gamma={gamma:.6g} m1={rc.m1} m2={rc.m2} beta={rc.beta:.3g}")
    print(f"completeness (CLWE -> ClwePlanted): {completeness:.3f}")
    print(f"soundness    (null -> Null):        {soundness:.3f}")
    print(f"report written to {path}")
    return EXIT_OK


def cmd_train(cfg: dict, threads: int) -> int:
    d, gamma, sigma = int(cfg["d"]), float(cfg["gamma"]), float(cfg["sigma"])
    base = RandomStream(int(cfg["seed"]), 0)
    w = random_direction(d, base.spawn(0))
    train = sample_pphi(d, gamma, w, sigma, int(cfg["m"]), base.spawn(1))
    res = fit_sgd(train, SGDArch(int(cfg["k"]), float(cfg["init_scale"])),
                  SGDOptions(float(cfg["lr"]), int(cfg["epochs"]), int(cfg["batch"]), base.spawn(2)))
    sampler = lambda m, s: sample_pphi(d, gamma, w, sigma, m, s)  # noqa: E731
    edge = evaluate_edge(res.hypothesis, sampler, int(cfg["m_eval"]), base.spawn(3))
    prefix = cfg["output"]
    hdr = "# " + json.dumps(_header("train", cfg), sort_keys=True) + "\n"
    _write(prefix + ".history.csv", hdr + res.history_csv())
    _write(prefix + ".model.json", _dump({**res.net.to_dict(), **_header("train", cfg)}))
    summary = {**_header("train", cfg), "diverged": res.diverged, "init": res.init,
               "final_train_loss": res.history[-1][1] if res.history else None,
               "heldout_edge": edge}
    _write(prefix + ".summary.json", _dump(summary))
    print(f"diverged={res.diverged} held-out edge={edge:.6g}")
    return EXIT_OK


def cmd_verify(cfg: dict, threads: int) -> int:
    try:
        checks = verify_all(noisy_gamma=float(cfg["noisy_gamma"]), mc_x=int(cfg["mc_x"]),
                            mc=int(cfg["mc"]), seed=int(cfg["seed"]),
                            bound_scale=float(cfg["bound_scale"]))
    except NumericalToleranceError as exc:
        _write(cfg["output"], _dump({**_header("verify", cfg), "error": str(exc)}))
        print(f"numerical tolerance escalation: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    ok = all(c.passed for c in checks)
    _write(cfg["output"], _dump({**_header("verify", cfg), "passed": ok,
                                 "checks": [c.to_dict() for c in checks]}))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:20s} {json.dumps(c.params, sort_keys=True):45s} "
              f"value={c.value:.4g} bound={c.bound:.4g} tol={c.tolerance:.2g}")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_params(cfg: dict, threads: int) -> int:
    if cfg["eta"] is not None:
        if cfg["d"] is None:
            raise ConfigError("--eta needs --d")
        rep = eta_regime(float(cfg["eta"]), int(cfg["d"]), float(cfg["poly_slack"]), float(cfg["c_const"]))
    else:
        if cfg["n"] is None or cfg["d"] is None or cfg["sigma_log2"] is None:
            raise ConfigError("need either --eta and --d, or --n, --d and --sigma-log2")
        rep = derive_chain(int(cfg["n"]), int(cfg["d"]), float(cfg["sigma_log2"]) * math.log(2.0),
                           float(cfg["poly_slack"]), float(cfg["c_const"]))
    _write(cfg["output"], _dump({**_header("params", cfg), "report": rep.to_dict()}))
    print(rep.table())
    if cfg["eta"] is not None:
        print(f"\nGapSVP factor 2^O(n^delta) with delta = eta/(1-eta) = {eta_exponent(float(cfg['eta'])):.6g}")
    return EXIT_OK


COMMANDS = {
    "sample": cmd_sample, "build-nn": cmd_build_nn, "plot-fig1": cmd_plot_fig1,
    "distinguish": cmd_distinguish, "train": cmd_train, "verify": cmd_verify, "params": cmd_params,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON file of parameters; flags override it")
    common.add_argument("--threads", type=int, default=1, help="trial-level worker threads")
    common.add_argument("--output", help=f"output path (relative paths go under ${OUTPUT_DIR_ENV})")

    p = argparse.ArgumentParser(prog="clwe-relu", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", parents=[common], help="draw samples to CSV")
    s.add_argument("--dist", choices=["clwe", "null", "pphi", "pnn"])
    s.add_argument("--d", type=int)
    s.add_argument("--gamma", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--R", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--emit-secret", action="store_true", default=None)

    for name, helptext in (("build-nn", "write the exact width-(4R+2) network"),
                           ("plot-fig1", "plot phi and nn over [-R-2, R+2] as SVG")):
        b = sub.add_parser(name, parents=[common], help=helptext)
        b.add_argument("--R", type=int)

    dd = sub.add_parser("distinguish", parents=[common], help="seeded CLWE-vs-null trials")
    for flag, typ in (("--d", int), ("--gamma", float), ("--sigma", float), ("--epsilon", float),
                      ("--m1", int), ("--m2", int), ("--beta", float), ("--failure-budget", float),
                      ("--R", int), ("--trials", int), ("--seed", int), ("--sgd-k", int),
                      ("--sgd-lr", float), ("--sgd-epochs", int), ("--sgd-batch", int)):
        dd.add_argument(flag, type=typ)
    dd.add_argument("--learner", choices=["oracle", "nn-oracle", "constant", "sgd"])

    t = sub.add_parser("train", parents=[common], help="SGD baseline on a planted instance")
    for flag, typ in (("--d", int), ("--gamma", float), ("--sigma", float), ("--k", int),
                      ("--init-scale", float), ("--lr", float), ("--epochs", int), ("--batch", int),
                      ("--m", int), ("--m-eval", int), ("--seed", int)):
        t.add_argument(flag, type=typ)

    v = sub.add_parser("verify", parents=[common], help="numerical TV-bound witnesses")
    v.add_argument("--seed", type=int)
    v.add_argument("--mc-x", type=int)
    v.add_argument("--mc", type=int)
    v.add_argument("--noisy-gamma", type=float)
    v.add_argument("--bound-scale", type=float, help=argparse.SUPPRESS)

    q = sub.add_parser("params", parents=[common], help="GapSVP parameter chain")
    q.add_argument("--n", type=int)
    q.add_argument("--d", type=int)
    q.add_argument("--sigma-log2", type=float)
    q.add_argument("--eta", type=float)
    q.add_argument("--poly-slack", type=float)
    q.add_argument("--c-const", type=float)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args.command, args)
        return COMMANDS[args.command](cfg, max(1, args.threads))
    except (ConfigError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
