"""End-to-end orchestration: experiment configuration, the synthesis cache,
baseline and RL deployment schemes, evaluation, and report emission."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import shutil
import time
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from .agent import (
    DeploymentEnv,
    RewardWeights,
    SearchResult,
    TrainConfig,
    run_search,
    save_curves,
    save_selections,
    spawn_seed,
)
from .circuits import circuit_to_text, cnot_count, depth, save_circuit
from .device import BUNDLED_DEVICES, DeviceModel, bundled_device, estimate_p, load_device
from .fairness import fairness_score
from .partition import Partition, partition, space_size
from .qnn import (
    Dataset,
    QnnModel,
    accuracy,
    build_qnn,
    load_dataset,
    load_params,
    load_schema,
    synthetic_dataset,
)
from .seeding import spawn
from .synthesis import (
    CandidateList,
    OptimizerConfig,
    generate_candidates,
    load_candidate_lists,
    save_candidate_lists,
)

OUTPUT_DIR_ENV = "QFAIRDEPLOY_OUTPUT_DIR"

SCHEME_WEIGHTS = {
    "quest": RewardWeights(0.5, 0.5),
    "random": RewardWeights(0.5, 0.5),
    "rl1": RewardWeights(0.1, 0.9),
    "rl2": RewardWeights(0.4, 0.5),  # shipped verbatim; sums to 0.9 unlike the rest
    "rl3": RewardWeights(0.5, 0.5),
    "rl4": RewardWeights(0.6, 0.4),
    "rl5": RewardWeights(0.9, 0.1),
}


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name and config hash."""

    def __init__(self, stage: str, config_hash: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed (config {config_hash}): {cause}")
        self.stage = stage
        self.config_hash = config_hash
        self.cause = cause


@dataclass(frozen=True)
class ExperimentConfig:
    arch: str
    num_qubits: int
    layers: int
    params_path: str
    measure_qubit: int
    device_ref: str                  # bundled name or a file path
    data_csv: str | None
    data_schema: str | None
    synthetic_rows: int
    synthetic_flip: float
    s_blk: int
    eps_syn: float
    k_max: int
    max_candidates: int
    opt: OptimizerConfig
    schemes: tuple[str, ...]
    weights: dict[str, RewardWeights]
    train: TrainConfig
    eval_split: str
    r_twirls: int
    fill: str
    seed: int
    output_dir: str
    config_hash: str

    def scheme_weights(self, scheme: str) -> RewardWeights:
        if scheme in self.weights:
            return self.weights[scheme]
        if scheme in SCHEME_WEIGHTS:
            return SCHEME_WEIGHTS[scheme]
        raise ConfigError(f"no weights for scheme {scheme!r}")


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition(" ")
        if not value.strip():
            raise ConfigError(f"config line {line!r} has no value")
        out[key] = value.strip()
    return out


def _hash_config(kv: dict[str, str]) -> str:
    canon = "\n".join(f"{k} {v}" for k, v in sorted(kv.items()))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Parse the flat key-value experiment file; overrides replace keys before
    hashing so a changed run is a different config."""
    path = Path(path)
    try:
        kv = _parse_kv(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if overrides:
        kv.update({k: v for k, v in overrides.items() if v is not None})

    def get(key: str, default: str | None = None) -> str:
        if key in kv:
            return kv[key]
        if default is None:
            raise ConfigError(f"missing config key {key!r}")
        return default

    base = path.parent

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    weights = {}
    for key, value in kv.items():
        if key.startswith("weights."):
            try:
                a, b = (float(v) for v in value.split(","))
            except ValueError:
                raise ConfigError(f"bad weights {value!r} for {key}")
            weights[key.removeprefix("weights.")] = RewardWeights(a, b)

    hidden = tuple(int(v) for v in get("train.hidden", "256,128").split(","))
    train = TrainConfig(
        iterations=int(get("train.iterations", "1000")),
        learning_rate=float(get("train.learning_rate", "1e-3")),
        gamma=float(get("train.gamma", "0.99")),
        epsilon_start=float(get("train.epsilon_start", "0.05")),
        epsilon_final=float(get("train.epsilon_final", "0.01")),
        target_sync_period=int(get("train.target_sync_period", "10")),
        replay_capacity=int(get("train.replay_capacity", "1000")),
        batch_size=int(get("train.batch_size", "32")),
        hidden_sizes=hidden,
        seed=int(get("seed", "0")),
    )
    opt = OptimizerConfig(
        starts=int(get("opt.starts", "8")),
        iterations=int(get("opt.iterations", "500")),
    )
    s_blk = int(get("s_blk", "2"))
    if s_blk not in (2, 3):
        raise ConfigError(f"s_blk must be 2 or 3, got {s_blk}")

    output_dir = os.environ.get(OUTPUT_DIR_ENV) or resolve(get("output_dir", "out"))
    data_csv = kv.get("data.csv")
    cfg = ExperimentConfig(
        arch=get("model.arch"),
        num_qubits=int(get("model.qubits")),
        layers=int(get("model.layers", "1")),
        params_path=resolve(get("model.params")),
        measure_qubit=int(get("model.measure_qubit", "0")),
        device_ref=get("device"),
        data_csv=resolve(data_csv) if data_csv else None,
        data_schema=resolve(kv["data.schema"]) if "data.schema" in kv else None,
        synthetic_rows=int(get("data.synthetic.rows", "40")),
        synthetic_flip=float(get("data.synthetic.flip", "0")),
        s_blk=s_blk,
        eps_syn=float(get("eps_syn", "1e-2")),
        k_max=int(get("k_max", "4")),
        max_candidates=int(get("max_candidates", "9")),
        opt=opt,
        schemes=tuple(s.strip() for s in get("schemes", "quest,random,rl3").split(",")),
        weights=weights,
        train=train,
        eval_split=get("eval.split", "test"),
        r_twirls=int(get("eval.r_twirls", "4")),
        fill=get("eval.fill", "original"),
        seed=int(get("seed", "0")),
        output_dir=output_dir,
        config_hash=_hash_config(kv),
    )
    missing = [p for p in (cfg.params_path,) if not Path(p).exists()]
    if cfg.data_csv and not Path(cfg.data_csv).exists():
        missing.append(cfg.data_csv)
    if missing:
        raise ConfigError(f"referenced files do not exist: {missing}")
    return cfg


# --- stage loaders ------------------------------------------------------------


def load_model(cfg: ExperimentConfig) -> QnnModel:
    params = load_params(cfg.params_path)
    return build_qnn(cfg.arch, cfg.num_qubits, cfg.layers, params, cfg.measure_qubit)


def load_device_ref(ref: str) -> DeviceModel:
    if ref in BUNDLED_DEVICES:
        return bundled_device(ref)
    if not Path(ref).exists():
        raise ConfigError(f"device {ref!r} is neither bundled nor a file")
    return load_device(ref)


def load_data(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_csv:
        if not cfg.data_schema:
            raise ConfigError("data.csv needs data.schema")
        return load_dataset(cfg.data_csv, load_schema(cfg.data_schema), cfg.seed)
    return synthetic_dataset(cfg.synthetic_rows, cfg.num_qubits, cfg.seed, cfg.synthetic_flip)


# --- synthesis with an on-disk cache --------------------------------------------


def _synthesis_key(cfg: ExperimentConfig, model: QnnModel) -> str:
    payload = "\n".join([
        circuit_to_text(model.circuit),
        f"s_blk {cfg.s_blk}",
        f"eps_syn {'%.17g' % cfg.eps_syn}",
        f"k_max {cfg.k_max}",
        f"max_candidates {cfg.max_candidates}",
        f"opt {cfg.opt}",
        f"seed {cfg.seed}",
    ])
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def synthesize(cfg: ExperimentConfig, model: QnnModel) -> tuple[list[Partition], list[CandidateList]]:
    """Partition the ansatz and produce candidate lists, cached on disk keyed
    by the synthesis-relevant part of the config."""
    parts = partition(model.circuit, cfg.s_blk)
    cache_dir = Path(cfg.output_dir) / "cache" / f"synth-{_synthesis_key(cfg, model)}"
    if (cache_dir / "index.csv").exists():
        return parts, load_candidate_lists(cache_dir)
    lists = [
        generate_candidates(
            p, cfg.eps_syn, cfg.k_max, cfg.opt,
            seed=cfg.seed, max_candidates=cfg.max_candidates,
        )
        for p in parts
    ]
    tmp = cache_dir.with_name(cache_dir.name + f".tmp-{os.getpid()}")
    save_candidate_lists(lists, tmp)
    if cache_dir.exists():
        shutil.rmtree(tmp)
    else:
        os.replace(tmp, cache_dir)
    return parts, lists


# --- baselines --------------------------------------------------------------------


def baseline_min_cnot(lists: list[CandidateList]) -> tuple[int, ...]:
    """Per partition the fewest-CNOT candidate; ties by distance then ordinal."""
    out = []
    for cl in lists:
        best = min(range(len(cl)), key=lambda i: (cl.candidates[i].cnots, cl.candidates[i].distance, i))
        out.append(best)
    return tuple(out)


def baseline_random(lists: list[CandidateList], rng: np.random.Generator) -> tuple[int, ...]:
    return tuple(int(rng.integers(0, len(cl))) for cl in lists)


# --- reports ------------------------------------------------------------------------


@dataclass(frozen=True)
class DeploymentReport:
    scheme: str
    accuracy: float
    fairness: float
    reward: float
    cnot_count: int
    depth: int
    space_size: int
    wall_time: float
    config_hash: str


# wall_time is deliberately absent: reports must be byte-identical across
# reruns of the same config, and it lives in the JSON emission instead
CSV_COLUMNS = ("scheme", "accuracy", "fairness", "reward",
               "cnot_count", "depth", "space_size", "config_hash")


def emit_report(reports: list[DeploymentReport], fmt: str, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in reports:
                writer.writerow([
                    r.scheme, "%.6f" % r.accuracy, "%.6f" % r.fairness, "%.6f" % r.reward,
                    r.cnot_count, r.depth, r.space_size, r.config_hash,
                ])
    elif fmt == "json":
        with open(path, "w") as fh:
            json.dump([asdict(r) for r in reports], fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report_json(path: str | Path) -> list[DeploymentReport]:
    with open(path) as fh:
        return [DeploymentReport(**rec) for rec in json.load(fh)]


# --- the experiment driver ------------------------------------------------------------


def _evaluate_selections(
    env: DeploymentEnv, selections: tuple[int, ...], cfg: ExperimentConfig, scheme: str,
) -> DeploymentReport:
    deployed = env.deployed_circuit(selections)
    reward = env.reward(selections)
    acc = accuracy(env.model.with_circuit(deployed), env.data, env.split, env.device)
    p_hat = estimate_p(deployed, env.device, r_twirls=env.r_twirls,
                       shots=env.estimate_shots, seed=spawn_seed(env.seed, selections))
    return DeploymentReport(
        scheme=scheme,
        accuracy=acc,
        fairness=fairness_score(p_hat),
        reward=reward,
        cnot_count=cnot_count(deployed),
        depth=depth(deployed),
        space_size=space_size(env.lists),
        wall_time=0.0,
        config_hash=cfg.config_hash,
    )


def run_experiment(cfg: ExperimentConfig) -> list[DeploymentReport]:
    """Load everything, synthesize (cached), run each configured scheme, and
    write reports, curves, and winning circuits under the output directory."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def stage(name: str, fn):
        try:
            return fn()
        except (ConfigError, StageError):
            raise
        except Exception as exc:
            raise StageError(name, cfg.config_hash, exc)

    model = stage("load-model", lambda: load_model(cfg))
    device = stage("load-device", lambda: load_device_ref(cfg.device_ref))
    data = stage("load-data", lambda: load_data(cfg))
    parts, lists = stage("synthesize", lambda: synthesize(cfg, model))

    reports = []
    for scheme in cfg.schemes:
        started = time.perf_counter()
        weights = cfg.scheme_weights(scheme)
        env = DeploymentEnv(
            parts, lists, model, device, data, weights,
            split=cfg.eval_split, fill=cfg.fill, r_twirls=cfg.r_twirls, seed=cfg.seed,
        )
        if scheme == "quest":
            selections = baseline_min_cnot(lists)
        elif scheme == "random":
            selections = stage(scheme, lambda: baseline_random(lists, spawn(cfg.seed, "random-baseline")))
        elif scheme.startswith("rl"):
            train = replace(cfg.train, seed=int(spawn(cfg.seed, "scheme", scheme).integers(0, 2**31)))
            result: SearchResult = stage(scheme, lambda: run_search(env, train))
            selections = result.best_selections
            save_curves(result, out_dir / f"curves_{scheme}.csv")
        else:
            raise ConfigError(f"unknown scheme {scheme!r}")
        report = stage(f"evaluate-{scheme}", lambda: _evaluate_selections(env, selections, cfg, scheme))
        report = replace(report, wall_time=time.perf_counter() - started)
        reports.append(report)
        save_selections(selections, out_dir / f"selections_{scheme}.txt")
        save_circuit(env.deployed_circuit(selections), out_dir / f"deployed_{scheme}.qc")

    emit_report(reports, "csv", out_dir / "reports.csv")
    emit_report(reports, "json", out_dir / "reports.json")
    return reports
