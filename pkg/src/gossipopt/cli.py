"""Command line front end.

Subcommands:
    run              execute a configured experiment, write metrics CSV
    spectral         report mixing constants (rho, C) for a topology
    check-constants  search or verify the convergence-rate constant system
    compress-bench   measure empirical contraction of a compressor

Exit codes: 0 success, 2 bad configuration, 3 bad data file, 4 divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import diagnostics
from .compression import RandKUnbiased, parse_compressor
from .datasets import DataError
from .experiment import ConfigError, DivergenceError, config_from_dict, run
from .rng import COMPRESS_H, RngStream
from .topology import build_graph, lazy_mix, metropolis_weights, spectral_constants

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})")


def _emit(payload, output):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if output is None:
        print(text)
    else:
        with open(output, "w") as fh:
            fh.write(text + "\n")


def cmd_run(args):
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.output is not None:
        raw["output"] = args.output
    cfg = config_from_dict(raw)
    result = run(cfg)
    if cfg.output is None:
        sys.stdout.write(diagnostics.csv_text(result.rows))
    else:
        diagnostics.write_csv(result.rows, cfg.output)
        with open(cfg.output + ".meta.json", "w") as fh:
            json.dump(result.meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        last = result.rows[-1]
        print(
            f"wrote {len(result.rows)} rows to {cfg.output} "
            f"(final grad_norm_sq={last.grad_norm_sq:.6e}, cum_bits={last.cum_bits})"
        )
    return 0


def cmd_spectral(args):
    raw = _load_config(args.config)
    topo = raw.get("topology", raw)
    kind = topo.get("kind")
    n = topo.get("n")
    if not isinstance(kind, str) or not isinstance(n, int):
        raise ConfigError("topology: need kind (string) and n (integer)")
    try:
        graph = build_graph(kind, n, topo.get("p"), topo.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(f"topology: {exc}")
    mix = metropolis_weights(graph)
    payload = {
        "kind": kind,
        "n": n,
        "edges": len(graph.edges),
        "rho": mix.rho,
        "C": mix.c,
    }
    gamma = raw.get("gamma")
    if gamma is not None and gamma != "auto":
        lazy = spectral_constants(lazy_mix(mix.w, float(gamma)))
        payload["gamma"] = float(gamma)
        payload["lazy_rho"] = lazy.rho
        payload["lazy_C"] = lazy.c
    _emit(payload, args.output)
    return 0


def cmd_check_constants(args):
    raw = _load_config(args.config)
    c = raw.get("C")
    if not isinstance(c, (int, float)) or isinstance(c, bool) or c < 0:
        raise ConfigError("C: need the squared gossip-deviation norm, a number >= 0")
    kappa = raw.get("kappa")
    if kappa is not None and (not isinstance(kappa, (int, float)) or kappa < 1):
        raise ConfigError(f"kappa: must be >= 1, got {kappa}")
    if "constants" in raw:
        for key in ("c_gamma", "c_eta"):
            if key not in raw:
                raise ConfigError(f"{key}: required when verifying explicit constants")
        ok, slacks = diagnostics.verify_rate_constants(
            np.asarray(raw["constants"], dtype=float),
            raw["c_gamma"],
            raw["c_eta"],
            float(c),
            kappa=kappa,
        )
        payload = {
            "feasible": bool(ok),
            "constants": list(map(float, raw["constants"])),
            "c_gamma": raw["c_gamma"],
            "c_eta": raw["c_eta"],
            "slacks": [float(s) for s in slacks],
        }
    else:
        found = diagnostics.find_feasible_constants(float(c), kappa=kappa)
        if found is None:
            payload = {"feasible": False}
        else:
            payload = {
                "feasible": True,
                "constants": [float(v) for v in found["constants"]],
                "c_gamma": found["c_gamma"],
                "c_eta": found["c_eta"],
                "slacks": [float(s) for s in found["slacks"]],
            }
    payload["C"] = float(c)
    if kappa is not None:
        payload["kappa"] = float(kappa)
    _emit(payload, args.output)
    print("FEASIBLE" if payload["feasible"] else "INFEASIBLE", file=sys.stderr)
    return 0


def cmd_compress_bench(args):
    raw = _load_config(args.config)
    spec = raw.get("compressor")
    if not isinstance(spec, str):
        raise ConfigError("compressor: need a compressor spec string")
    d = raw.get("d")
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ConfigError(f"d: need a positive integer dimension, got {d}")
    draws = raw.get("draws", 10000)
    if not isinstance(draws, int) or draws < 1:
        raise ConfigError(f"draws: need a positive integer, got {draws}")
    try:
        comp = parse_compressor(spec)
    except ValueError as exc:
        raise ConfigError(f"compressor: {exc}")
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    stream = RngStream(seed if isinstance(seed, int) else 0)
    gen = stream.child("bench-inputs").generator()
    ratios = np.empty(draws)
    for i in range(draws):
        x = gen.standard_normal(d)
        cx = comp.compress(x, stream.child(COMPRESS_H, i))
        ratios[i] = np.sum((cx - x) ** 2) / np.sum(x**2)
    payload = {
        "compressor": spec,
        "d": d,
        "draws": draws,
        "mean_distortion": float(ratios.mean()),
        "max_distortion": float(ratios.max()),
        "message_bits": comp.message_bits(d),
    }
    if isinstance(comp, RandKUnbiased):
        payload["omega"] = comp.omega(d)
        payload["variance_bound"] = comp.omega(d)
    else:
        alpha = comp.alpha(d)
        payload["alpha"] = alpha
        payload["contraction_bound"] = 1.0 - alpha
        payload["violations"] = int(np.sum(ratios > 1.0 - alpha + 1e-12))
    _emit(payload, args.output)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gossipopt",
        description="Decentralized optimization with compressed gossip.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, desc in (
        ("run", cmd_run, "execute an experiment config and emit metrics CSV"),
        ("spectral", cmd_spectral, "report rho and C for a topology"),
        ("check-constants", cmd_check_constants, "search or verify rate constants"),
        ("compress-bench", cmd_compress_bench, "measure compressor contraction"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to a JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--output", default=None, help="write results to this path")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
