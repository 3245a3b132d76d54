"""Experiment configuration, validation, and the round loop.

A run is described by a JSON-friendly dict; ``config_from_dict`` validates
it field by field (every rejection names the offending field) and ``run``
executes it, producing metrics rows plus a metadata record of every resolved
quantity (alpha, rho, C, L, the step sizes actually used, the bit-accounting
convention).

Runs are bit-deterministic: same config and seed produce identical metric
rows, including when per-node gradient work is dispatched to a thread pool
(``parallel: true``).  Wall-clock timing is therefore opt-in; with
``timing: false`` the wall_ms column is written as 0.0 so that emitted CSV
files compare equal byte for byte.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import algorithms, datasets, diagnostics, oracles
from .compression import Compressor, Identity, parse_compressor
from .rng import RngStream
from .topology import KINDS, MixingMatrix, build_graph, metropolis_weights

DIVERGENCE_GRAD_SQ = 1e12


class ConfigError(ValueError):
    """A run configuration is malformed; the message names the field."""


class DivergenceError(RuntimeError):
    """Iterates left the finite range or the gradient norm exploded."""


@dataclass(eq=False)
class TopologyConfig:
    kind: str
    n: int
    p: float | None = None
    seed: int = 0


@dataclass(eq=False)
class ObjectiveConfig:
    kind: str  # "logreg_ncvx" | "quadratic"
    reg: float = 0.05
    d: int | None = None
    cond: float | None = None
    seed: int = 0


@dataclass(eq=False)
class DataConfig:
    path: str | None = None
    test_path: str | None = None
    synthetic: dict | None = None
    partition: str = "unshuffled"
    partition_seed: int = 0


@dataclass(eq=False)
class ExperimentConfig:
    algorithm: str
    rounds: int
    topology: TopologyConfig
    objective: ObjectiveConfig
    compressor: str = "identity"
    data: DataConfig = field(default_factory=DataConfig)
    eta: float | str = "auto"
    gamma: float | str = "auto"
    batch: int | None = None  # None means full gradients
    seed: int = 0
    metrics_every: int = 1
    lyapunov_constants: tuple | None = None
    lyapunov_exponent: int = 2
    fstar: float | str | None = "auto"
    parallel: bool = False
    timing: bool = False
    output: str | None = None


def _need(mapping, key, types, path, default=None, required=False):
    if key not in mapping or (mapping[key] is None and not required):
        if required:
            raise ConfigError(f"{path}: missing required field")
        return default
    val = mapping[key]
    if types is not None and not isinstance(val, types):
        raise ConfigError(
            f"{path}: expected {getattr(types, '__name__', types)}, got {type(val).__name__}"
        )
    return val


def _int_field(mapping, key, path, minimum, default=None, required=False):
    val = _need(mapping, key, None, path, default=default, required=required)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{path}: expected an integer, got {val!r}")
    if val < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}, got {val}")
    return val


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    known = {
        "algorithm", "rounds", "topology", "objective", "compressor", "data",
        "eta", "gamma", "batch", "seed", "metrics_every", "lyapunov_constants",
        "lyapunov_exponent", "fstar", "parallel", "timing", "output",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(f"{key}: unknown config field")

    algorithm = _need(raw, "algorithm", str, "algorithm", required=True)
    if algorithm not in algorithms.ALGORITHMS:
        raise ConfigError(
            f"algorithm: unknown algorithm {algorithm!r}, expected one of "
            f"{algorithms.ALGORITHMS}"
        )
    rounds = _int_field(raw, "rounds", "rounds", minimum=1, required=True)

    topo_raw = _need(raw, "topology", dict, "topology", required=True)
    kind = _need(topo_raw, "kind", str, "topology.kind", required=True)
    if kind not in KINDS:
        raise ConfigError(f"topology.kind: unknown kind {kind!r}, expected one of {KINDS}")
    n = _int_field(topo_raw, "n", "topology.n", minimum=2, required=True)
    if kind == "grid" and round(n**0.5) ** 2 != n:
        raise ConfigError(f"topology.n: grid needs a perfect square, got {n}")
    p = _need(topo_raw, "p", (int, float), "topology.p")
    if kind == "erdos_renyi":
        if p is None or not (0.0 < float(p) <= 1.0):
            raise ConfigError(f"topology.p: erdos_renyi needs p in (0, 1], got {p}")
    topology = TopologyConfig(
        kind=kind,
        n=n,
        p=None if p is None else float(p),
        seed=_int_field(topo_raw, "seed", "topology.seed", minimum=0, default=0),
    )

    obj_raw = _need(raw, "objective", dict, "objective", required=True)
    obj_kind = _need(obj_raw, "kind", str, "objective.kind", required=True)
    if obj_kind not in ("logreg_ncvx", "quadratic"):
        raise ConfigError(f"objective.kind: unknown kind {obj_kind!r}")
    if obj_kind == "quadratic":
        d = _int_field(obj_raw, "d", "objective.d", minimum=1, required=True)
        cond = _need(obj_raw, "cond", (int, float), "objective.cond", required=True)
        if float(cond) < 1.0:
            raise ConfigError(f"objective.cond: must be >= 1, got {cond}")
        objective = ObjectiveConfig(
            kind=obj_kind,
            d=d,
            cond=float(cond),
            seed=_int_field(obj_raw, "seed", "objective.seed", minimum=0, default=0),
        )
    else:
        reg = _need(obj_raw, "reg", (int, float), "objective.reg", default=0.05)
        if float(reg) < 0:
            raise ConfigError(f"objective.reg: must be >= 0, got {reg}")
        objective = ObjectiveConfig(kind=obj_kind, reg=float(reg))

    data_raw = _need(raw, "data", dict, "data", default=None)
    data = DataConfig()
    if data_raw is not None:
        for key in data_raw:
            if key not in ("path", "test_path", "synthetic", "partition", "partition_seed"):
                raise ConfigError(f"data.{key}: unknown config field")
        data = DataConfig(
            path=_need(data_raw, "path", str, "data.path"),
            test_path=_need(data_raw, "test_path", str, "data.test_path"),
            synthetic=_need(data_raw, "synthetic", dict, "data.synthetic"),
            partition=_need(data_raw, "partition", str, "data.partition", default="unshuffled"),
            partition_seed=_int_field(
                data_raw, "partition_seed", "data.partition_seed", minimum=0, default=0
            ),
        )
        if data.partition not in ("unshuffled", "shuffled"):
            raise ConfigError(
                f"data.partition: expected 'unshuffled' or 'shuffled', got {data.partition!r}"
            )
        if data.path is not None and data.synthetic is not None:
            raise ConfigError("data: give either path or synthetic, not both")
        if data.synthetic is not None:
            for key in data.synthetic:
                if key not in ("m", "d", "seed", "positive_fraction"):
                    raise ConfigError(f"data.synthetic.{key}: unknown config field")
            _int_field(data.synthetic, "m", "data.synthetic.m", minimum=2, required=True)
            _int_field(data.synthetic, "d", "data.synthetic.d", minimum=2, required=True)
    if obj_kind == "logreg_ncvx" and data.path is None and data.synthetic is None:
        raise ConfigError("data: logreg_ncvx needs data.path or data.synthetic")
    if obj_kind == "quadratic" and (data.path is not None or data.synthetic is not None):
        raise ConfigError("data: quadratic instances are synthesized; remove data sources")

    compressor = _need(raw, "compressor", str, "compressor", default="identity")
    try:
        comp = parse_compressor(compressor)
    except ValueError as exc:
        raise ConfigError(f"compressor: {exc}")
    if algorithm in ("dsgd", "d2") and not isinstance(comp, Identity):
        raise ConfigError(
            f"compressor: {algorithm} is an uncompressed baseline; use 'identity'"
        )

    eta = _need(raw, "eta", (int, float, str), "eta", default="auto")
    if isinstance(eta, str):
        if eta != "auto":
            raise ConfigError(f"eta: expected a number or 'auto', got {eta!r}")
    elif not (float(eta) > 0):
        raise ConfigError(f"eta: must be > 0, got {eta}")
    else:
        eta = float(eta)
    gamma = _need(raw, "gamma", (int, float, str), "gamma", default="auto")
    if isinstance(gamma, str):
        if gamma != "auto":
            raise ConfigError(f"gamma: expected a number or 'auto', got {gamma!r}")
    elif not (0.0 < float(gamma) <= 1.0):
        raise ConfigError(f"gamma: must lie in (0, 1], got {gamma}")
    else:
        gamma = float(gamma)

    batch = _need(raw, "batch", (int, str), "batch", default="full")
    if isinstance(batch, str):
        if batch != "full":
            raise ConfigError(f"batch: expected a positive integer or 'full', got {batch!r}")
        batch = None
    elif isinstance(batch, bool) or batch < 1:
        raise ConfigError(f"batch: must be >= 1, got {batch}")

    constants = _need(raw, "lyapunov_constants", (list, tuple), "lyapunov_constants")
    if constants is not None:
        if len(constants) != 4 or not all(isinstance(v, (int, float)) for v in constants):
            raise ConfigError("lyapunov_constants: expected four numbers [c1, c2, c3, c4]")
        if any(float(v) < 0 for v in constants):
            raise ConfigError("lyapunov_constants: entries must be >= 0")
        constants = tuple(float(v) for v in constants)

    if "fstar" in raw and raw["fstar"] is None:
        fstar = None  # explicit null: suppress the gap column even when f* is known
    else:
        fstar = _need(raw, "fstar", (int, float, str), "fstar", default="auto")
        if isinstance(fstar, str) and fstar != "auto":
            raise ConfigError(f"fstar: expected a number, 'auto', or null, got {fstar!r}")
        if isinstance(fstar, (int, float)) and not isinstance(fstar, bool):
            fstar = float(fstar)

    return ExperimentConfig(
        algorithm=algorithm,
        rounds=rounds,
        topology=topology,
        objective=objective,
        compressor=compressor,
        data=data,
        eta=eta,
        gamma=gamma,
        batch=batch,
        seed=_int_field(raw, "seed", "seed", minimum=0, default=0),
        metrics_every=_int_field(raw, "metrics_every", "metrics_every", minimum=1, default=1),
        lyapunov_constants=constants,
        lyapunov_exponent=_int_field(
            raw, "lyapunov_exponent", "lyapunov_exponent", minimum=0, default=2
        ),
        fstar=fstar,
        parallel=bool(_need(raw, "parallel", bool, "parallel", default=False)),
        timing=bool(_need(raw, "timing", bool, "timing", default=False)),
        output=_need(raw, "output", str, "output"),
    )


def _read_libsvm(path: str, d_hint: int = 0) -> datasets.Dataset:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise datasets.DataError(f"cannot read {path}: {exc.strerror}")
    return datasets.parse_libsvm(text, d_hint=d_hint)


@dataclass(eq=False)
class Problem:
    objective: object
    shards: list
    info: oracles.SmoothnessInfo
    fstar: float | None
    test_data: datasets.Dataset | None = None


def build_problem(cfg: ExperimentConfig) -> Problem:
    """Materialize objective, shards, curvature info, and f* per the config."""
    n = cfg.topology.n
    if cfg.objective.kind == "quadratic":
        inst = datasets.synth_quadratic(
            n=n, d=cfg.objective.d, seed=cfg.objective.seed, cond=cfg.objective.cond
        )
        obj = oracles.QuadraticObjective(d=inst.d)
        info = oracles.SmoothnessInfo(
            lipschitz=inst.lipschitz, strong_convexity=inst.strong_convexity
        )
        fstar = inst.fstar if cfg.fstar == "auto" else cfg.fstar
        return Problem(objective=obj, shards=inst.shards, info=info, fstar=fstar)

    if cfg.data.synthetic is not None:
        syn = cfg.data.synthetic
        ds = datasets.synth_binary(
            m=syn["m"],
            d=syn["d"],
            seed=syn.get("seed", 0),
            positive_fraction=syn.get("positive_fraction", 0.24),
        )
    else:
        ds = _read_libsvm(cfg.data.path)
    if cfg.data.partition == "unshuffled":
        shards = datasets.partition_unshuffled(ds, n)
    else:
        shards = datasets.partition_shuffled(ds, n, cfg.data.partition_seed)
    obj = oracles.LogisticObjective(d=ds.d, reg=cfg.objective.reg)
    info = oracles.smoothness_estimate(obj, shards)
    test_data = None
    if cfg.data.test_path is not None:
        test_data = _read_libsvm(cfg.data.test_path, d_hint=ds.d)
    if cfg.fstar == "auto":
        fstar = None  # a reference minimum is a deliberate, costly request
    else:
        fstar = cfg.fstar
    return Problem(objective=obj, shards=shards, info=info, fstar=fstar, test_data=test_data)


@dataclass(eq=False)
class RunResult:
    rows: list
    meta: dict
    final_state: algorithms.AlgoState


def resolve_stepsizes(cfg: ExperimentConfig, alpha: float, mix: MixingMatrix, lipschitz: float):
    auto_gamma, auto_eta = algorithms.theoretical_stepsizes(
        alpha, mix.rho, mix.c, lipschitz
    )
    gamma = auto_gamma if cfg.gamma == "auto" else cfg.gamma
    if cfg.eta == "auto":
        # eta's theoretical scale depends on the gamma actually in force.
        eta = auto_eta if cfg.gamma == "auto" else (auto_eta / auto_gamma) * gamma
    else:
        eta = cfg.eta
    return gamma, eta


def run(cfg: ExperimentConfig) -> RunResult:
    graph = build_graph(cfg.topology.kind, cfg.topology.n, cfg.topology.p, cfg.topology.seed)
    mix = metropolis_weights(graph)
    comp = parse_compressor(cfg.compressor)
    problem = build_problem(cfg)
    obj, shards = problem.objective, problem.shards
    d = obj.d
    alpha = comp.alpha(d)
    gamma, eta = resolve_stepsizes(cfg, alpha, mix, problem.info.lipschitz)
    hp = algorithms.HyperParams(eta=eta, gamma=gamma, batch=cfg.batch)
    step = algorithms.STEP_FUNCTIONS[cfg.algorithm]
    stream = RngStream(cfg.seed)
    bits_per_round = (
        algorithms.MESSAGES_PER_ROUND[cfg.algorithm] * mix.n * comp.message_bits(d)
    )

    executor = ThreadPoolExecutor(max_workers=min(mix.n, 8)) if cfg.parallel else None
    try:
        state = algorithms.init_state(obj, shards, np.zeros(d), hp, stream, executor)
        rows = [_metrics_row(state, problem, cfg, mix, cum_bits=0, wall_ms=0.0)]
        cum_bits = 0
        for _ in range(cfg.rounds):
            tick = time.perf_counter() if cfg.timing else 0.0
            state = step(state, obj, shards, mix, comp, hp, stream, executor)
            cum_bits += bits_per_round
            if not np.all(np.isfinite(state.x)):
                raise DivergenceError(f"non-finite iterates at round {state.round}")
            if state.round % cfg.metrics_every == 0 or state.round == cfg.rounds:
                wall = (time.perf_counter() - tick) * 1e3 if cfg.timing else 0.0
                row = _metrics_row(state, problem, cfg, mix, cum_bits, wall)
                if row.grad_norm_sq > DIVERGENCE_GRAD_SQ:
                    raise DivergenceError(
                        f"gradient norm exploded at round {state.round} "
                        f"(grad_norm_sq={row.grad_norm_sq:.3e})"
                    )
                rows.append(row)
    finally:
        if executor is not None:
            executor.shutdown()

    meta = {
        "algorithm": cfg.algorithm,
        "compressor": cfg.compressor,
        "topology": cfg.topology.kind,
        "n": mix.n,
        "d": d,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "alpha": alpha,
        "rho": mix.rho,
        "C": mix.c,
        "L": problem.info.lipschitz,
        "mu": problem.info.strong_convexity,
        "eta": eta,
        "gamma": gamma,
        "batch": "full" if cfg.batch is None else cfg.batch,
        "fstar": problem.fstar,
        "messages_per_round": algorithms.MESSAGES_PER_ROUND[cfg.algorithm],
        "bits_per_round": bits_per_round,
        "bit_convention": "32-bit floats, ceil(log2 d) bits per index, "
        "per-round cost = messages_per_round * n * message_bits",
    }
    return RunResult(rows=rows, meta=meta, final_state=state)


def _metrics_row(state, problem, cfg, mix, cum_bits, wall_ms):
    obj, shards = problem.objective, problem.shards
    om = diagnostics.omegas(state)
    grad_sq = diagnostics.grad_norm_at_mean(state, obj, shards)
    fgap = None
    if problem.fstar is not None:
        fgap = diagnostics.fval_gap_at_mean(state, obj, shards, problem.fstar)
    lyap = None
    if cfg.lyapunov_constants is not None and fgap is not None:
        lyap = diagnostics.lyapunov_value(
            fgap,
            om,
            cfg.lyapunov_constants,
            rho=mix.rho,
            lipschitz=problem.info.lipschitz,
            n=mix.n,
            exponent=cfg.lyapunov_exponent,
        )
    acc = None
    if problem.test_data is not None:
        xbar = state.x.mean(axis=1)
        acc = oracles.accuracy(problem.test_data.features, problem.test_data.labels, xbar)
    return diagnostics.MetricsRow(
        round=state.round,
        cum_bits=cum_bits,
        grad_norm_sq=grad_sq,
        fval_gap=fgap,
        omega1=om.omega1,
        omega2=om.omega2,
        omega3=om.omega3,
        omega4=om.omega4,
        omega5=om.omega5,
        lyapunov=lyap,
        test_accuracy=acc,
        wall_ms=wall_ms,
    )
