"""Experiment configuration, algorithm factories, and the run protocols.

A single JSON config drives every subcommand. The synthetic protocol follows
the two-level replication scheme: a list of dataset seeds fixes the loss
tables, a list of algorithm seeds fixes the bandit's random draws, and every
(dataset, presentation) pair is one run. All seeds are explicit in the config
(or filled with documented deterministic defaults and echoed back); nothing is
ever drawn from system entropy.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .baselines import Exp3, SExp3, exp3_tuning
from .ecoc import EcocSetup, make_separable_stream
from .environments import (
    SinusoidalBernoulliEnv,
    read_logged_csv,
    replay_evaluate,
)
from .errors import ConfigError, LogParseError
from .evaluation import (
    RegretReport,
    best_mapping_loss,
    check_structured_bound,
    quantization_gap,
    flat_mixture_regret_bound,
)
from .experts import FlatMixture, FlatMixtureBandit
from .grid import CellGrid
from .hsb import HsbLearner, optimal_eta
from .records import write_round_records
from .structures import (
    build_arbitrary_position_splitting,
    build_arbitrary_splitting,
    build_binary_tree,
    build_kary_tree,
    build_kgroup_lexicographic,
    build_lexicographic_graph,
)

HSB_ALGORITHMS = ("hsb-bt", "hsb-kary", "hsb-lg", "hsb-kgroup", "hsb-arb",
                  "hsb-aps")
ALGORITHMS = HSB_ALGORITHMS + ("exp3", "sexp3", "exp4-flat", "hamming")


@dataclass
class StructureConfig:
    depth: int | None = None
    cells: int | None = None
    arity: int = 2
    group_size: int = 2
    dims: int = 1


@dataclass
class EnvConfig:
    model: str = "stationary"
    horizon: int = 1000
    switch_fraction: float = 0.25


@dataclass
class ReplayConfig:
    log: str | None = None


@dataclass
class EcocConfig:
    classes: int = 6
    features: int = 36
    samples: int = 6435
    epochs: int = 9
    seed: int = 7
    dataset: str | None = None


@dataclass
class ExperimentConfig:
    algorithm: str = "hsb-bt"
    arms: int = 3
    eta: float | str = "auto"
    regions: int = 2
    structure: StructureConfig = field(default_factory=StructureConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    datasets: int = 2
    presentations: int = 2
    dataset_seeds: list[int] = field(default_factory=list)
    algorithm_seeds: list[int] = field(default_factory=list)
    write_round_records: bool = True
    jobs: int = 1
    output_dir: str = "hsbandit-out"
    replay: ReplayConfig = field(default_factory=ReplayConfig)
    ecoc: EcocConfig = field(default_factory=EcocConfig)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}; pick one of {ALGORITHMS}"
            )
        if self.arms < 2:
            raise ConfigError(f"arms must be >= 2, got {self.arms}")
        if isinstance(self.eta, str) and self.eta not in ("auto", "fair"):
            raise ConfigError(
                f"eta must be a number, 'auto', or 'fair', got {self.eta!r}"
            )
        if not isinstance(self.eta, str) and not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if self.regions < 1:
            raise ConfigError(f"regions must be >= 1, got {self.regions}")
        if self.datasets < 1 or self.presentations < 1:
            raise ConfigError("datasets and presentations must be >= 1")
        if self.env.model not in ("stationary", "switched"):
            raise ConfigError(
                f"env.model must be stationary or switched, got {self.env.model!r}"
            )
        if self.env.horizon < 1:
            raise ConfigError(f"env.horizon must be >= 1, got {self.env.horizon}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        if not self.dataset_seeds:
            self.dataset_seeds = [101 + i for i in range(self.datasets)]
        if not self.algorithm_seeds:
            self.algorithm_seeds = [201 + i for i in range(self.presentations)]
        _check_seed_list("dataset_seeds", self.dataset_seeds, self.datasets)
        _check_seed_list("algorithm_seeds", self.algorithm_seeds,
                         self.presentations)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return cls(**_parse_section(raw, cls, path=""))

    @classmethod
    def from_file(cls, path: str, overrides=()) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        for item in overrides:
            raw = _apply_override(raw, item)
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "structure": StructureConfig,
    "env": EnvConfig,
    "replay": ReplayConfig,
    "ecoc": EcocConfig,
}


def _parse_section(raw: dict, cls, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {path or '<root>'} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {sorted(unknown)} under {path or '<root>'}"
        )
    out = {}
    for key, value in raw.items():
        if key in _SECTIONS and path == "":
            out[key] = _SECTIONS[key](**_parse_section(value, _SECTIONS[key],
                                                       key))
        else:
            out[key] = value
    return out


def _apply_override(raw: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    dotted, text = item.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text  # bare strings stay strings
    target = raw
    keys = dotted.split(".")
    for key in keys[:-1]:
        target = target.setdefault(key, {})
        if not isinstance(target, dict):
            raise ConfigError(f"cannot override inside non-object {key!r}")
    target[keys[-1]] = value
    return raw


def _check_seed_list(name, seeds, expected):
    if len(seeds) != expected:
        raise ConfigError(
            f"{name} has {len(seeds)} entries, expected {expected}"
        )
    for s in seeds:
        if not isinstance(s, int) or s < 0:
            raise ConfigError(f"{name} entries must be nonnegative ints, got {s}")


# -- factories -------------------------------------------------------------


def _resolve_cells(config: ExperimentConfig) -> int:
    s = config.structure
    if config.algorithm == "hsb-kary":
        if s.depth is None:
            raise ConfigError("hsb-kary needs structure.depth")
        return s.arity**s.depth
    if s.cells is not None:
        return s.cells
    if s.depth is not None:
        return 2**s.depth
    raise ConfigError("structure needs either cells or depth")


def build_grid(config: ExperimentConfig) -> CellGrid:
    cells = _resolve_cells(config)
    dims = config.structure.dims
    if cells >= 2 and cells & (cells - 1) == 0:
        return CellGrid.uniform(dims, cells)
    if dims == 1:
        return CellGrid((cells,))
    raise ConfigError(
        f"{cells} cells over {dims} dimensions needs a power-of-2 cell count"
    )


def build_structure(config: ExperimentConfig):
    algo = config.algorithm
    grid = build_grid(config)
    s = config.structure
    if algo in ("hsb-bt", "sexp3"):
        return build_binary_tree(grid)
    if algo == "hsb-kary":
        return build_kary_tree(grid, s.arity)
    if algo == "hsb-lg":
        return build_lexicographic_graph(grid)
    if algo == "hsb-kgroup":
        return build_kgroup_lexicographic(grid, s.group_size)
    if algo == "hsb-arb":
        return build_arbitrary_splitting(grid, arm_count=config.arms)
    if algo == "hsb-aps":
        if s.depth is None:
            raise ConfigError("hsb-aps needs structure.depth")
        return build_arbitrary_position_splitting(grid, s.depth)
    raise ConfigError(f"algorithm {algo} has no splitting structure")


def resolve_eta(config: ExperimentConfig, structure, horizon: int) -> float:
    """Learning rate policy for the hierarchical learners.

    "auto" optimizes the structured regret bound for the configured region
    count. "fair" copies the per-cell baseline's learning rate at the same
    grid, the handicapped choice used when the true region count is unknown.
    """
    if config.eta == "fair":
        local = max(1.0, horizon / structure.grid.total_cells)
        return exp3_tuning(config.arms, local)[1]
    if config.eta != "auto":
        return float(config.eta)
    p = structure.params
    return optimal_eta(p.psi, p.hs, p.a_r(config.regions), config.arms, horizon)


def build_algorithm(config: ExperimentConfig, horizon: int):
    """Fresh algorithm instance for one run; returns (algorithm, info dict)."""
    algo = config.algorithm
    if algo == "exp3":
        bandit = Exp3(config.arms, horizon)
        return bandit, {"exploration": bandit.exploration, "eta": bandit.eta}
    if algo == "sexp3":
        grid = build_grid(config)
        bandit = SExp3(grid, config.arms, horizon)
        return bandit, {"cells": grid.total_cells,
                        "exploration": bandit.exploration, "eta": bandit.eta}
    if algo == "exp4-flat":
        grid = build_grid(config)
        if config.eta == "fair":
            raise ConfigError("eta 'fair' applies to the hierarchical learners")
        if config.eta == "auto":
            eta = math.sqrt(
                2.0 * grid.total_cells * math.log(config.arms)
                / (config.arms * horizon)
            )
        else:
            eta = float(config.eta)
        mixture = FlatMixture.uniform(grid.total_cells, config.arms, eta)
        return FlatMixtureBandit(mixture, grid), {
            "cells": grid.total_cells, "eta": eta,
            "experts": len(mixture.experts),
        }
    if algo in HSB_ALGORITHMS:
        structure = build_structure(config)
        eta = resolve_eta(config, structure, horizon)
        learner = HsbLearner(structure, config.arms, eta)
        return learner, {
            "cells": structure.grid.total_cells, "eta": eta,
            "psi": structure.psi, "hs": structure.hs,
            "a_r": structure.params.a_r(config.regions),
            "kind": structure.params.kind,
        }
    raise ConfigError(f"cannot build algorithm {algo!r} for this protocol")


def run_rounds(algorithm, contexts, loss_matrix, rng, record_probs=False):
    """Per-round select/update fallback for algorithms without a batch driver."""
    horizon = len(contexts)
    arms = np.zeros(horizon, dtype=np.int64)
    incurred = np.zeros(horizon)
    probs = np.zeros((horizon if record_probs else 0, loss_matrix.shape[1]))
    for t in range(horizon):
        decision = algorithm.select(float(contexts[t]), rng)
        loss = loss_matrix[t, decision.arm]
        algorithm.update(decision, loss)
        arms[t] = decision.arm
        incurred[t] = loss
        if record_probs:
            probs[t] = decision.simplex
    return arms, incurred, (probs if record_probs else None)


# -- synthetic protocol ----------------------------------------------------


def _make_env(config: ExperimentConfig) -> SinusoidalBernoulliEnv:
    return SinusoidalBernoulliEnv(
        config.env.horizon,
        switched=config.env.model == "switched",
        switch_fraction=config.env.switch_fraction,
    )


def _run_seed(config: ExperimentConfig, dataset_seed: int,
              algorithm_seed: int):
    """One (dataset, presentation) run; returns per-run scalars and arrays."""
    env = _make_env(config)
    data_rng = np.random.default_rng(dataset_seed)
    contexts, losses = env.generate(data_rng)
    if config.algorithm == "exp3":
        cells = np.zeros(env.horizon, dtype=np.int64)
        n_cells = 1
    else:
        grid = build_grid(config)
        cells = grid.cells_of(contexts)
        n_cells = grid.total_cells
    best, _ = best_mapping_loss(cells, losses, n_cells)
    algorithm, info = build_algorithm(config, env.horizon)
    rng = np.random.default_rng(
        np.random.SeedSequence([dataset_seed, algorithm_seed])
    )
    record = config.write_round_records
    if hasattr(algorithm, "run_bandit_rounds"):
        arms, incurred, probs = algorithm.run_bandit_rounds(
            cells, losses, rng, record_probs=record
        )
    else:
        arms, incurred, probs = run_rounds(
            algorithm, contexts, losses, rng, record_probs=record
        )
    return {
        "cells": cells, "arms": arms, "incurred": incurred, "probs": probs,
        "best_mapping_loss": best, "info": info,
    }


def _synthetic_task(config_dict, d_idx, p_idx):
    config = ExperimentConfig.from_dict(config_dict)
    result = _run_seed(config, config.dataset_seeds[d_idx],
                       config.algorithm_seeds[p_idx])
    record_path = None
    if config.write_round_records:
        record_path = os.path.join(
            config.output_dir, f"records_d{d_idx}_p{p_idx}.csv"
        )
        write_round_records(record_path, result["cells"], result["arms"],
                            result["incurred"], result["probs"])
    return (d_idx, p_idx, float(result["incurred"].sum()),
            float(result["best_mapping_loss"]),
            np.cumsum(result["incurred"]), result["info"], record_path)


def run_synthetic(config: ExperimentConfig) -> dict:
    """Full replication protocol; writes records, curve, and summary files."""
    os.makedirs(config.output_dir, exist_ok=True)
    horizon = config.env.horizon
    tasks = [
        (d, p)
        for d in range(config.datasets)
        for p in range(config.presentations)
    ]
    results = {}
    if config.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=config.jobs
        ) as pool:
            futures = [
                pool.submit(_synthetic_task, config.to_dict(), d, p)
                for d, p in tasks
            ]
            for fut in concurrent.futures.as_completed(futures):
                out = fut.result()
                results[out[0], out[1]] = out
    else:
        for d, p in tasks:
            out = _synthetic_task(config.to_dict(), d, p)
            results[out[0], out[1]] = out

    t_axis = np.arange(1, horizon + 1)
    cum_sum = np.zeros(horizon)
    run_rows = []
    info = None
    for d, p in tasks:
        _, _, total, best, cum, run_info, record_path = results[d, p]
        cum_sum += cum
        info = run_info
        run_rows.append({
            "dataset": d, "presentation": p,
            "dataset_seed": config.dataset_seeds[d],
            "algorithm_seed": config.algorithm_seeds[p],
            "total_loss": total, "best_mapping_loss": best,
            "regret": total - best,
            "records": os.path.basename(record_path) if record_path else None,
        })
    n_runs = len(tasks)
    curve = cum_sum / n_runs / t_axis
    mean_loss = float(np.mean([r["total_loss"] for r in run_rows]))
    mean_best = float(np.mean([r["best_mapping_loss"] for r in run_rows]))
    mean_regret = mean_loss - mean_best

    eta = info.get("eta") if info else None
    bound = bound_ok = None
    if config.algorithm in HSB_ALGORITHMS:
        check = check_structured_bound(
            mean_regret, info["psi"], info["hs"], info["a_r"],
            config.arms, horizon, info["eta"],
        )
        bound, bound_ok = check.bound, bool(check.ok)

    report = RegretReport(
        algorithm=config.algorithm, horizon=horizon, runs=n_runs,
        mean_algorithm_loss=mean_loss, mean_best_mapping_loss=mean_best,
        mean_regret=mean_regret, eta=eta, bound=bound, bound_ok=bound_ok,
        final_average_loss=float(curve[-1]), extras=info or {},
    )

    curve_path = os.path.join(config.output_dir, "curve.csv")
    with open(curve_path, "w") as fh:
        fh.write("t,avg_accumulated_loss\n")
        for t, v in zip(t_axis, curve):
            fh.write(f"{t},{float(v)!r}\n")

    summary = {
        "subcommand": "run-synthetic",
        "config": config.to_dict(),
        "report": report.to_dict(),
        "runs": run_rows,
        "curve": os.path.basename(curve_path),
    }
    _write_summary(config.output_dir, summary)
    return summary


def _write_summary(output_dir, summary) -> None:
    path = os.path.join(output_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- replay protocol -------------------------------------------------------


def run_replay(config: ExperimentConfig) -> dict:
    if not config.replay.log:
        raise ConfigError("replay.log must point to a logged CSV")
    rounds = read_logged_csv(config.replay.log)
    horizon = len(rounds)
    if horizon == 0:
        raise LogParseError("log holds no rounds", 2)
    os.makedirs(config.output_dir, exist_ok=True)
    rows = []
    for seed in config.algorithm_seeds:
        algorithm, info = build_algorithm(config, horizon)
        rng = np.random.default_rng(seed)
        result = replay_evaluate(algorithm, rounds, rng)
        rows.append({
            "algorithm_seed": seed,
            "matched": result.matched,
            "total_loss": result.total_loss,
            "click_rate": (result.click_rate if result.matched else None),
        })
    rates = [r["click_rate"] for r in rows if r["click_rate"] is not None]
    csv_path = os.path.join(config.output_dir, "replay.csv")
    with open(csv_path, "w") as fh:
        fh.write("algorithm_seed,matched,total_loss,click_rate\n")
        for r in rows:
            fh.write(
                f"{r['algorithm_seed']},{r['matched']},{r['total_loss']!r},"
                f"{'' if r['click_rate'] is None else repr(r['click_rate'])}\n"
            )
    summary = {
        "subcommand": "run-replay",
        "config": config.to_dict(),
        "log_rounds": horizon,
        "runs": rows,
        "mean_click_rate": (float(np.mean(rates)) if rates else None),
        "replay_csv": os.path.basename(csv_path),
    }
    _write_summary(config.output_dir, summary)
    return summary


# -- classification protocol ----------------------------------------------


def run_ecoc(config: ExperimentConfig) -> dict:
    cfg = config.ecoc
    if cfg.dataset:
        features, labels = _read_ecoc_csv(cfg.dataset)
    else:
        rng = np.random.default_rng(cfg.seed)
        features, labels = make_separable_stream(
            cfg.classes, cfg.samples, cfg.features, rng
        )
    n_samples, n_features = features.shape
    n_classes = int(labels.max()) + 1 if cfg.dataset else cfg.classes
    if config.arms != n_classes:
        raise ConfigError(
            f"arms ({config.arms}) must equal the class count ({n_classes})"
        )
    gridded = config.algorithm in HSB_ALGORITHMS + ("sexp3", "exp4-flat")
    if gridded and config.structure.dims != n_classes:
        raise ConfigError(
            f"structure.dims must equal the code length {n_classes} "
            f"for codeword contexts"
        )
    setup = EcocSetup(n_classes, n_features)
    epochs = cfg.epochs
    if n_samples % epochs:
        raise ConfigError(
            f"{n_samples} samples do not split into {epochs} equal epochs"
        )
    epoch_size = n_samples // epochs

    if config.algorithm == "hamming":
        algorithm = None
    else:
        algorithm, _info = build_algorithm(config, n_samples)
    rng = np.random.default_rng(config.algorithm_seeds[0])
    errors = np.zeros(epochs, dtype=np.int64)
    for t in range(n_samples):
        x, y = features[t], int(labels[t])
        round_info = setup.step(x)
        if algorithm is None:
            arm = setup.hamming_arm(round_info.bits)
            loss = setup.loss_for(arm, y)
        else:
            decision = algorithm.select(round_info.context, rng)
            loss = setup.loss_for(decision.arm, y)
            algorithm.update(decision, loss)
        errors[t // epoch_size] += int(loss)
        setup.train(x, y)

    os.makedirs(config.output_dir, exist_ok=True)
    csv_path = os.path.join(config.output_dir, "ecoc_epochs.csv")
    with open(csv_path, "w") as fh:
        fh.write("epoch,errors,error_rate\n")
        for e in range(epochs):
            fh.write(f"{e + 1},{int(errors[e])},"
                     f"{float(errors[e] / epoch_size)!r}\n")
    summary = {
        "subcommand": "run-ecoc",
        "config": config.to_dict(),
        "samples": n_samples,
        "epoch_size": epoch_size,
        "errors_per_epoch": [int(e) for e in errors],
        "total_error_rate": float(errors.sum() / n_samples),
        "epochs_csv": os.path.basename(csv_path),
    }
    _write_summary(config.output_dir, summary)
    return summary


def _read_ecoc_csv(path):
    import csv as _csv

    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1] != "label":
            raise LogParseError("last column must be 'label'", 1)
        dims = len(header) - 1
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dims + 1:
                raise LogParseError(
                    f"expected {dims + 1} fields, got {len(row)}", lineno
                )
            try:
                feats.append([float(v) for v in row[:dims]])
                labels.append(int(row[dims]))
            except ValueError as exc:
                raise LogParseError(str(exc), lineno) from None
    return np.asarray(feats), np.asarray(labels, dtype=np.int64)


# -- structure dump --------------------------------------------------------


def dump_structure(config: ExperimentConfig) -> dict:
    structure = build_structure(config)
    return structure.to_json_dict()


# -- self-check battery ----------------------------------------------------


def _small_structure_zoo():
    return [
        ("binary-tree", build_binary_tree(CellGrid((4,)))),
        ("kary-tree", build_kary_tree(CellGrid((9,)), 3)),
        ("lexicographic", build_lexicographic_graph(CellGrid((3,)))),
        ("kgroup-lexicographic",
         build_kgroup_lexicographic(CellGrid((4,)), 2)),
        ("arbitrary-splitting",
         build_arbitrary_splitting(CellGrid((3,)), arm_count=2)),
        ("arbitrary-position-splitting",
         build_arbitrary_position_splitting(CellGrid.uniform(2, 4), 1)),
    ]


def _check_mixture_equivalence() -> dict:
    """Learner simplex and root weight must track the enumerated mixture."""
    worst_p = worst_w = 0.0
    for name, structure in _small_structure_zoo():
        eta = 0.1
        learner = HsbLearner(structure, 2, eta)
        mixture = FlatMixture.from_structure(structure, 2, eta)
        rng = np.random.default_rng(5)
        for _ in range(40):
            cell = int(rng.integers(structure.grid.total_cells))
            p_learner = learner.simplex_at(cell)
            p_mixture = mixture.simplex(cell)
            worst_p = max(worst_p, float(np.abs(p_learner - p_mixture).max()))
            root_w = math.exp(learner.recompute_log_w(structure.root_id))
            mix_w = float(np.exp(mixture.log_weights).sum())
            worst_w = max(worst_w, abs(root_w - mix_w) / mix_w)
            decision = learner.select_arm(cell_to_context(structure.grid, cell),
                                          rng)
            loss = float(rng.integers(2))
            learner.update(decision, loss)
            mixture.apply_feedback(cell, decision.arm,
                                   decision.chosen_probability, loss)
    ok = worst_p < 1e-9 and worst_w < 1e-9
    return {"name": "mixture-equivalence", "ok": ok,
            "max_simplex_diff": worst_p, "max_root_weight_rel_diff": worst_w}


def cell_to_context(grid: CellGrid, cell: int):
    center = grid.cell_center(cell)
    return center[0] if grid.dims == 1 else center


def _check_fresh_state() -> dict:
    """Before any feedback: unit node weights, unit prior mass."""
    worst = 0.0
    for name, structure in _small_structure_zoo():
        learner = HsbLearner(structure, 2, 0.05)
        for node_id in structure.node_ids():
            worst = max(worst, abs(learner.recompute_log_w(node_id)))
        mixture = FlatMixture.from_structure(structure, 2, 0.05)
        worst = max(worst, abs(float(np.exp(mixture.log_weights).sum()) - 1.0))
    return {"name": "fresh-state-identities", "ok": worst < 1e-12,
            "max_deviation": worst}


def _check_flat_bound() -> dict:
    horizon, arms, n_cells = 2000, 2, 2
    n_experts = arms**n_cells
    eta = math.sqrt(2.0 * math.log(n_experts) / (arms * horizon))
    bound = flat_mixture_regret_bound(1.0 / n_experts, eta, arms, horizon)
    env = SinusoidalBernoulliEnv(horizon)
    grid = CellGrid((n_cells,))
    regrets = []
    for seed in (11, 12, 13):
        contexts, losses = env.generate(np.random.default_rng(seed))
        losses = losses[:, :arms]
        cells = grid.cells_of(contexts)
        bandit = FlatMixtureBandit(FlatMixture.uniform(n_cells, arms, eta),
                                   grid)
        _, incurred, _ = run_rounds(bandit, contexts, losses,
                                    np.random.default_rng(seed + 100))
        best, _ = best_mapping_loss(cells, losses, n_cells)
        regrets.append(float(incurred.sum()) - best)
    mean_regret = float(np.mean(regrets))
    return {"name": "flat-mixture-regret-bound", "ok": mean_regret <= bound,
            "mean_regret": mean_regret, "bound": bound}


def _check_structured_regret() -> dict:
    config = ExperimentConfig(
        algorithm="hsb-bt", arms=3, structure=StructureConfig(depth=3),
        env=EnvConfig(horizon=20000), datasets=3, presentations=1,
        dataset_seeds=[21, 22, 23], algorithm_seeds=[31],
        write_round_records=False, output_dir="unused",
    )
    structure = build_structure(config)
    eta = resolve_eta(config, structure, config.env.horizon)
    env = _make_env(config)
    regrets = []
    for seed in config.dataset_seeds:
        contexts, losses = env.generate(np.random.default_rng(seed))
        cells = structure.grid.cells_of(contexts)
        learner = HsbLearner(structure, 3, eta)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 31]))
        _, incurred, _ = learner.run_bandit_rounds(cells, losses, rng)
        best, _ = best_mapping_loss(cells, losses, structure.grid.total_cells)
        regrets.append(float(incurred.sum()) - best)
    p = structure.params
    check = check_structured_bound(float(np.mean(regrets)), p.psi, p.hs,
                                   p.a_r(2), 3, config.env.horizon, eta)
    return {"name": "structured-regret-bound", "ok": bool(check.ok),
            "mean_regret": check.empirical, "bound": check.bound, "eta": eta}


def _check_quantization_gaps() -> dict:
    from .environments import stationary_means

    loss_fns = [
        (lambda pts, m=m: stationary_means(pts)[..., m]) for m in range(3)
    ]
    gaps = []
    under = True
    for n in (4, 16, 64):
        report = quantization_gap(loss_fns, CellGrid((n,)),
                                  n_points=200_001)
        gaps.append(report.measured_gap)
        under = under and report.ok
    shrinks = gaps[-1] < gaps[0]
    return {"name": "quantization-gaps", "ok": under and shrinks,
            "gaps": gaps}


def _check_kernel_agreement() -> dict:
    from ._kernels import HAVE_NUMBA

    if not HAVE_NUMBA:
        return {"name": "kernel-generic-agreement", "ok": True,
                "skipped": "numba unavailable"}
    structure = build_binary_tree(CellGrid((16,)))
    fast = HsbLearner(structure, 3, 0.05)
    slow = HsbLearner(structure, 3, 0.05, force_generic=True)
    rng_cells = np.random.default_rng(9)
    rng_fast = np.random.default_rng(77)
    rng_slow = np.random.default_rng(77)
    worst = 0.0
    for t in range(200):
        cell = int(rng_cells.integers(16))
        context = cell_to_context(structure.grid, cell)
        d_fast = fast.select_arm(context, rng_fast)
        d_slow = slow.select_arm(context, rng_slow)
        worst = max(worst,
                    float(np.abs(d_fast.simplex - d_slow.simplex).max()))
        if d_fast.arm != d_slow.arm:
            return {"name": "kernel-generic-agreement", "ok": False,
                    "round": t, "detail": "arm choice diverged"}
        loss = float(rng_cells.integers(2))
        fast.update(d_fast, loss)
        slow.update(d_slow, loss)
    return {"name": "kernel-generic-agreement", "ok": worst < 1e-9,
            "max_simplex_diff": worst}


def verify() -> dict:
    """Reduced-scale battery of the core identities and bound checks."""
    checks = [
        _check_fresh_state(),
        _check_mixture_equivalence(),
        _check_flat_bound(),
        _check_structured_regret(),
        _check_quantization_gaps(),
        _check_kernel_agreement(),
    ]
    return {"ok": all(c["ok"] for c in checks), "checks": checks}
