"""Command line experiment runner.

Usage::

    sospderand {toy1d,nn,maxcut,jl,sosp-demo} [--config PATH] [--seed N]
               [--out DIR] [--set key=value ...]

Configs are flat ``key = value`` files; ``#`` starts a comment. Every run
writes ``manifest.txt`` holding the resolved config in the same format, so
``--config OUT/manifest.txt`` reproduces it. Exit status is 0 on success,
2 on a configuration error and 3 on a numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalAbort
from .optim import HDConfig, PGDConfig, hessian_descent, pgd_minimize, write_trajectory_csv

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    pass


_GLOBAL = {"seed": 0, "out_dir": "", "samples": 0, "T": 0}

DEFAULTS: dict[str, dict[str, object]] = {
    "toy1d": {
        "lambdas": "1e-3,1e-2,1e-1,1,10",
        "w_max": 2.0,
        "w_points": 401,
        "b_min": -2.0,
        "b_max": 2.0,
        "b_points": 201,
        "nodes": 80,
    },
    "nn": {
        "d": 2,
        "h": 100,
        "T": 3000,
        "lam": 1e-5,
        "samples": 2000,
        "noise_std": 0.1,
        "iota": 2.0,
        "eta": 0.0,
        "perturb_threshold": 1e-6,
        "perturb_scale": 0.005,
    },
    "maxcut": {
        "graph": "bundled",
        "n": 12,
        "p": 0.5,
        "rank": 0,
        "sdp_iters": 2000,
        "trials": 1000,
        "T": 5000,
        "samples": 100,
        "lr_mean": 0.01,
        "lr_sigma": 0.001,
        "decay": 0.99,
        "eps_fraction": 0.05,
        "rho": 1e-4,
        "Delta": 0.5,
    },
    "jl": {
        "data": "",
        "n": 50,
        "d": 100,
        "k": 20,
        "T": 5000,
        "batch": 20,
        "lr": 0.01,
        "early_stop": 0.01,
        "eps": 0.02,
        "eps1": 1.0,
        "samples": 4,
        "trials": 1000,
        "optimizer": "adam",
    },
    "sosp-demo": {
        "T": 25,
        "rho": 1e-2,
        "K": 1.0,
        "quartic_rho": 1e-3,
        "quartic_start": 1.0,
        "quartic_iters": 20000,
        "cosh_rho": 1e-4,
        "cosh_Delta": 0.1,
        "samples": 2000,
    },
}


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out


def _coerce(key, raw, default):
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return str(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def resolve_config(command: str, file_values: dict[str, str], overrides: dict[str, str]):
    defaults = {**_GLOBAL, **DEFAULTS[command]}
    cfg = dict(defaults)
    for source in (file_values, overrides):
        for key, raw in source.items():
            if key not in defaults:
                raise ConfigError(f"unknown key {key!r} for {command}")
            cfg[key] = _coerce(key, raw, defaults[key])
    if not cfg["out_dir"]:
        cfg["out_dir"] = f"runs/{command}"
    return cfg


def write_manifest(command: str, cfg: dict, out: Path) -> None:
    lines = [f"# command: {command}", f"# version: {__version__}"]
    lines += [f"{k} = {_fmt(v)}" for k, v in sorted(cfg.items())]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _positive(cfg, *keys):
    for k in keys:
        if not cfg[k] > 0:
            raise ConfigError(f"{k} must be positive")


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_toy1d(cfg: dict, out: Path) -> dict:
    from .nn import toy_1d

    try:
        lams = [float(s) for s in cfg["lambdas"].split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad lambdas list {cfg['lambdas']!r}") from None
    if not lams:
        raise ConfigError("lambdas grid is empty")
    _positive(cfg, "w_max", "w_points", "b_points", "nodes")
    wg = np.linspace(0.0, cfg["w_max"], cfg["w_points"])
    bg = np.linspace(cfg["b_min"], cfg["b_max"], cfg["b_points"])
    rows = []
    for trained in (False, True):
        grid = (wg, bg) if trained else wg
        for lam in lams:
            r = toy_1d(lam, trained, grid, cfg["nodes"])
            rows.append((lam, r.w_star, r.b_star, r.f_star, int(trained)))
    with open(out / "toy1d.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "w_star", "b_star", "f_star", "bias_trained"])
        w.writerows([[repr(a), repr(b), repr(c), repr(d), e] for a, b, c, d, e in rows])
    return {"rows": len(rows)}


def run_nn(cfg: dict, out: Path) -> dict:
    from .nn import init_student, perp_ratio, single_index_teacher, train_student, write_perp_csv
    from .reparam import MCConfig
    from .smoothing import SmoothRelu

    _positive(cfg, "d", "h", "T", "samples", "iota", "perturb_threshold", "perturb_scale")
    if cfg["lam"] < 0 or cfg["noise_std"] < 0 or cfg["eta"] < 0:
        raise ConfigError("lam, noise_std and eta must be nonnegative")
    seed, d = cfg["seed"], cfg["d"]
    teacher = single_index_teacher(np.ones(d) / math.sqrt(d), noise_std=cfg["noise_std"], seed=seed)
    student = init_student(d, cfg["h"], seed=seed, activation=SmoothRelu(cfg["iota"]))
    pgd = PGDConfig(
        T=cfg["T"], eta=cfg["eta"] or None, perturb_threshold=cfg["perturb_threshold"],
        perturb_scale=cfg["perturb_scale"], seed=seed,
    )
    gaps: list[float] = []
    final, rows = train_student(teacher, student, pgd, cfg["lam"], MCConfig(cfg["samples"], seed),
                                decoupling_log=gaps, decoupling_every=10)
    write_perp_csv(rows, out / "perp_trajectory.csv")
    summary = {
        "init_ratio": perp_ratio(student, teacher),
        "final_ratio": perp_ratio(final, teacher),
        "final_risk": rows[-1].risk,
        "max_decoupling_gap": max(gaps),
    }
    _write_json(summary, out / "summary.json")
    return summary


def _bundled_graph():
    from .maxcut import read_graph

    with resources.as_file(resources.files("sospderand") / "data" / "g12.txt") as path:
        return read_graph(path)


def run_maxcut(cfg: dict, out: Path) -> dict:
    from .maxcut import (
        BRUTE_FORCE_MAX_N,
        DerandConfig,
        brute_force_maxcut,
        derandomize_round,
        gw_randomized_round,
        random_graph,
        read_graph,
        sdp_embedding,
        sdp_value,
        write_derand_csv,
    )

    _positive(cfg, "sdp_iters", "trials", "T", "samples")
    seed = cfg["seed"]
    src = cfg["graph"]
    if src == "bundled":
        g = _bundled_graph()
    elif src == "random":
        _positive(cfg, "n")
        g = random_graph(cfg["n"], cfg["p"], seed)
    else:
        try:
            g = read_graph(src)
        except OSError as exc:
            raise ConfigError(f"cannot read graph: {exc}") from None
    emb = sdp_embedding(g, cfg["rank"] or None, cfg["sdp_iters"], seed)
    gw = gw_randomized_round(g, emb, cfg["trials"], seed)
    dcfg = DerandConfig(
        T=cfg["T"], samples=cfg["samples"], lr_mean=cfg["lr_mean"], lr_sigma=cfg["lr_sigma"],
        decay=cfg["decay"], eps_fraction=cfg["eps_fraction"], rho=cfg["rho"],
        Delta=cfg["Delta"], seed=seed,
    )
    res = derandomize_round(emb, g, dcfg)
    opt = brute_force_maxcut(g).value if g.n_vertices <= BRUTE_FORCE_MAX_N else None
    summary = {
        "opt": opt,
        "sdp_value": sdp_value(g, emb.V),
        "randomized_mean": gw.mean_cut,
        "randomized_best": gw.best_cut,
        "derandomized_cut": res.assignment.value,
        "iters": dcfg.T,
    }
    write_derand_csv(res.trajectory, out / "trajectory.csv")
    _write_json(summary, out / "summary.json")
    return summary


def run_jl(cfg: dict, out: Path) -> dict:
    from .jl import (
        JLConfig,
        distortion_report,
        learn_projection,
        random_dataset,
        random_gaussian_baseline,
        read_dataset,
        write_jl_csv,
        write_matrix,
    )

    _positive(cfg, "k", "trials")
    seed = cfg["seed"]
    if cfg["data"]:
        try:
            ds = read_dataset(cfg["data"])
        except OSError as exc:
            raise ConfigError(f"cannot read dataset: {exc}") from None
    else:
        _positive(cfg, "n", "d")
        ds = random_dataset(cfg["n"], cfg["d"], seed)
    jcfg = JLConfig(
        T=cfg["T"], batch=cfg["batch"], lr=cfg["lr"], early_stop=cfg["early_stop"],
        eps=cfg["eps"], eps1=cfg["eps1"], samples=cfg["samples"], seed=seed,
        optimizer=cfg["optimizer"],
    )
    base = random_gaussian_baseline(ds, cfg["k"], cfg["trials"], seed)
    res = learn_projection(ds, cfg["k"], jcfg)
    write_matrix(res.M, out / "M.txt")
    write_jl_csv(res.trajectory, out / "trajectory.csv")
    summary = {
        "k": cfg["k"],
        "d": ds.d,
        "n": ds.n,
        "max_distortion": distortion_report(res.M, ds).max,
        "baseline_mean": base.mean_maxdist,
        "baseline_min": base.min_maxdist,
        "sigma_max_final": float(res.pd.sigma.max()),
    }
    _write_json(summary, out / "summary.json")
    return summary


def run_sosp_demo(cfg: dict, out: Path) -> dict:
    from .testbeds import cosh_weight_bound_run, quartic, saddle

    _positive(cfg, "T", "rho", "K", "quartic_rho", "quartic_iters", "samples")
    seed = cfg["seed"]
    f = saddle()
    hd_rows: list = []
    x_hd, hd_rep = hessian_descent(f, np.zeros(2), HDConfig(cfg["rho"], cfg["K"], max_iters=cfg["T"]),
                                   trajectory=hd_rows)
    x_pgd, pgd_rows = pgd_minimize(f, np.zeros(2), PGDConfig(T=cfg["T"], seed=seed))
    write_trajectory_csv(hd_rows, out / "saddle_hd.csv")
    write_trajectory_csv(pgd_rows, out / "saddle_pgd.csv")
    q = quartic(abs(cfg["quartic_start"]))
    x_q, q_rep = hessian_descent(
        q, np.array([cfg["quartic_start"]]), HDConfig(cfg["quartic_rho"], q.K, max_iters=cfg["quartic_iters"])
    )
    cosh = cosh_weight_bound_run(rho=cfg["cosh_rho"], Delta=cfg["cosh_Delta"], samples=cfg["samples"], seed=seed)
    summary = {
        "saddle_hd_value": f.value(x_hd),
        "saddle_pgd_value": f.value(x_pgd),
        "quartic_x": float(x_q.data[0]),
        "quartic_certified": q_rep.certified,
        "cosh_certified": cosh.report.certified,
        "cosh_w_norm": cosh.w_norm,
        "cosh_bound": cosh.bound,
    }
    _write_json(summary, out / "summary.json")
    return summary


RUNNERS = {
    "toy1d": run_toy1d,
    "nn": run_nn,
    "maxcut": run_maxcut,
    "jl": run_jl,
    "sosp-demo": run_sosp_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sospderand", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_values = parse_config_text(args.config.read_text()) if args.config else {}
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v.strip()
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        if args.out is not None:
            overrides["out_dir"] = str(args.out)
        cfg = resolve_config(args.command, file_values, overrides)
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(args.command, cfg, out)
        summary = RUNNERS[args.command](cfg, out)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
