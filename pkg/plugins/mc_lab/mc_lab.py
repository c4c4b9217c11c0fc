"""
Monte Carlo estimation of the hypothesis-testing bound and its baselines.

Each repetition draws a two-row supersample, then runs Langevin dynamics
from the same W_0 once with the first candidate of the held-out column in
the training set and once with the second. Each branch is replicated over
independent noise streams, and the replicates of one (supersample, U, J)
cell are averaged inside the square root of the bound. Every branch is
scored for every decision function, so θ can be tuned on even repetitions
and reported on odd ones.

Repetition r uses seed key (master_seed, r); replicate k of branch u adds
(u, k) to the key of its noise stream.
"""
import os
import math
import time
import logging
import concurrent.futures
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from plugins.common.errors import ValidationError, InvariantViolation, ResourceExceededError
from plugins.common.resources import default_threads, check_memory_usage
from plugins.common.serialization import write_csv, write_json
from plugins.common.validation import validate_parameters
from plugins.model_zoo.model_zoo import model_from_dict
from plugins.model_zoo.data import source_from_dict
from plugins.ld_engine.ld_engine import (
    LDSchedule, sample_supersample, run_ld, stream_rng, write_trajectory_csv, dump_trajectory,
    STREAM_INIT, STREAM_EVAL,
)
from plugins.ht_prior.ht_prior import (
    DecisionFunction, BranchStatistics, branch_statistics, bound_curve,
    theta_family_objective, search_scale, log_grid, THETA_KINDS, SCALED_KINDS,
)
from plugins.baselines.baselines import (
    BASELINE_KINDS, CONSTANTS_NOTE, BaselineConfig, BaselineStatistics,
    baseline_statistics, empirical_lipschitz,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "t", "cmi_mean", "cmi_stderr", "cmi_opt_mean", "li_dd", "negrea_dd", "li_lip", "negrea_lip",
    "test_err_sq_mean", "zeta_sq_mean", "incoherence_mean", "train01", "test01", "ege_hat",
]

EXPERIMENT_SCHEMA = [
    {"name": "source", "type": "dict", "description": "Data source config",
     "default": {"kind": "blobs", "input_dim": 5, "n_classes": 2, "separation": 1.0, "scale": 1.0, "seed": 0}},
    {"name": "model", "type": "dict", "description": "Model config", "default": {"kind": "logistic"}},
    {"name": "n", "type": "int", "default": 50, "min": 2, "max": 100000, "description": "Training set size"},
    {"name": "schedule", "type": "dict", "description": "Langevin schedule",
     "default": {"T": 500, "eta": 0.01, "beta": 1e4}},
    {"name": "repetitions", "type": "int", "default": 40, "min": 2, "max": 100000,
     "description": "Monte Carlo repetitions"},
    {"name": "noise_replicates", "type": "int", "default": 4, "min": 1, "max": 10000,
     "description": "Independent noise draws per (supersample, U, J) cell"},
    {"name": "master_seed", "type": "int", "default": 0, "min": 0, "description": "Master seed"},
    {"name": "fixed_repetition_seed", "type": "int", "default": None, "min": 0,
     "description": "Use the same seed for every repetition"},
    {"name": "theta", "type": "str", "default": "erf:1", "description": "Decision function kind[:a]"},
    {"name": "theta_families", "type": "list", "options": list(THETA_KINDS),
     "default": ["erf", "tanh", "sign", "constant-half"], "description": "Families searched by the θ optimizer"},
    {"name": "theta_grid", "type": "dict", "default": {"a_min": 1e-3, "a_max": 1e3, "points": 25},
     "description": "Log-spaced scale grid"},
    {"name": "baselines", "type": "list", "options": list(BASELINE_KINDS), "default": [],
     "description": "Baselines to evaluate"},
    {"name": "lipschitz_L", "type": "scalar", "default": "empirical",
     "description": "Lipschitz constant or 'empirical'"},
    {"name": "eval_size", "type": "int", "default": 0, "min": 0,
     "description": "Held-out evaluation points per repetition (0 means 10·n)"},
    {"name": "threads", "type": "int", "default": 0, "min": 0, "description": "Worker threads (0 means default)"},
    {"name": "out_dir", "type": "str", "default": "results", "description": "Output directory"},
    {"name": "dump_trajectories", "type": "bool", "default": False,
     "description": "Write every trajectory as .npz plus a per-iterate CSV"},
    {"name": "records_csv", "type": "bool", "default": False,
     "description": "Write the per-step records CSV next to the curves"},
]


@dataclass
class ExperimentConfig:
    source: dict
    model: dict
    n: int
    schedule: LDSchedule
    repetitions: int
    noise_replicates: int = 4
    master_seed: int = 0
    fixed_repetition_seed: Optional[int] = None
    theta: DecisionFunction = field(default_factory=DecisionFunction)
    theta_families: List[str] = field(default_factory=lambda: ["erf", "tanh", "sign", "constant-half"])
    theta_grid: np.ndarray = field(default_factory=log_grid)
    baselines: BaselineConfig = field(default_factory=lambda: BaselineConfig(which=()))
    eval_size: int = 0
    threads: int = 0
    out_dir: str = "results"
    dump_trajectories: bool = False
    records_csv: bool = False

    @classmethod
    def from_dict(cls, data):
        """Validate a JSON-style config against EXPERIMENT_SCHEMA and build the config."""
        params = validate_parameters(EXPERIMENT_SCHEMA, data)
        grid = params["theta_grid"]
        return cls(
            source=params["source"],
            model=params["model"],
            n=params["n"],
            schedule=LDSchedule.from_dict(params["schedule"]),
            repetitions=params["repetitions"],
            noise_replicates=params["noise_replicates"],
            master_seed=params["master_seed"],
            fixed_repetition_seed=params["fixed_repetition_seed"],
            theta=DecisionFunction.parse(params["theta"]),
            theta_families=list(params["theta_families"]),
            theta_grid=log_grid(float(grid.get("a_min", 1e-3)), float(grid.get("a_max", 1e3)),
                                int(grid.get("points", 25))),
            baselines=BaselineConfig(tuple(params["baselines"]), params["lipschitz_L"]),
            eval_size=params["eval_size"],
            threads=params["threads"],
            out_dir=params["out_dir"],
            dump_trajectories=params["dump_trajectories"],
            records_csv=params["records_csv"],
        )

    def to_dict(self):
        return {
            "source": self.source, "model": self.model, "n": self.n,
            "schedule": self.schedule.to_dict(), "repetitions": self.repetitions,
            "noise_replicates": self.noise_replicates,
            "master_seed": self.master_seed, "fixed_repetition_seed": self.fixed_repetition_seed,
            "theta": self.theta.label, "theta_families": self.theta_families,
            "theta_grid": [float(a) for a in self.theta_grid],
            "baselines": list(self.baselines.which), "lipschitz_L": self.baselines.lipschitz_L,
            "eval_size": self.resolved_eval_size, "out_dir": self.out_dir,
        }

    @property
    def resolved_eval_size(self):
        return self.eval_size or 10 * self.n

    def repetition_seed(self, rep_index):
        if self.fixed_repetition_seed is not None:
            return (self.fixed_repetition_seed, 0)
        return (self.master_seed, rep_index)

    def build(self):
        """Instantiate the data source and the model (model dims default to the source's)."""
        source = source_from_dict(self.source)
        model_config = dict(self.model)
        model_config.setdefault("input_dim", source.input_dim)
        model_config.setdefault("n_classes", source.n_classes)
        return source, model_from_dict(model_config)

    @property
    def needs_point_grads(self):
        """L̂ is estimated from the trajectories, so every training-point gradient counts."""
        return bool(self.baselines.which) and self.baselines.lipschitz_L == "empirical"

    @property
    def trajectory_dir(self):
        return os.path.join(self.out_dir, "trajectories")


@dataclass(frozen=True, eq=False)
class BranchResult:
    """
    One Langevin branch: hypothesis-test and baseline statistics per noise
    replicate, plus risks of W_1..W_T averaged over the replicates.
    """
    u_j_value: int
    replicates: List[BranchStatistics]
    baselines: List[BaselineStatistics]
    train01: np.ndarray
    test01: np.ndarray

    def summands(self, theta):
        """(replicates, T) array of β·η·‖ζ‖²·(indicator − θ)²."""
        return np.array([s.summands(theta) for s in self.replicates])


@dataclass(frozen=True, eq=False)
class RepetitionResult:
    rep_index: int
    branches: List[BranchResult]

    def v_values(self, theta):
        """V_u = √(mean over replicates of Σ_t summand_t) for both branches."""
        return [math.sqrt(float(b.summands(theta).sum(axis=1).mean())) for b in self.branches]


@dataclass(frozen=True, eq=False)
class BoundCurve:
    """
    Per-iteration curves over t = 1..T (iterate W_t); baseline entries are None when off.

    cmi_heldout_mean is the configured θ on the held-out repetitions, so it
    can be set against cmi_opt_mean on the same draws.
    """
    t: np.ndarray
    cmi_mean: np.ndarray
    cmi_stderr: np.ndarray
    cmi_opt_mean: Optional[np.ndarray]
    cmi_heldout_mean: Optional[np.ndarray]
    baselines: Dict[str, np.ndarray]
    test_err_sq_mean: np.ndarray
    zeta_sq_mean: np.ndarray
    incoherence_mean: np.ndarray
    train01: np.ndarray
    test01: np.ndarray
    ege_hat: np.ndarray
    ege_stderr: np.ndarray

    def rows(self):
        def col(values, i):
            return None if values is None else values[i]

        return [[int(self.t[i]), self.cmi_mean[i], self.cmi_stderr[i], col(self.cmi_opt_mean, i),
                 col(self.baselines.get("li-data-dependent"), i), col(self.baselines.get("negrea-data-dependent"), i),
                 col(self.baselines.get("li-lipschitz"), i), col(self.baselines.get("negrea-lipschitz"), i),
                 self.test_err_sq_mean[i], self.zeta_sq_mean[i], self.incoherence_mean[i],
                 self.train01[i], self.test01[i], self.ege_hat[i]] for i in range(len(self.t))]


@dataclass(frozen=True)
class ThetaSelection:
    kind: str
    a: Optional[float]
    train_bound: float
    test_bound: float
    train_reps: tuple
    test_reps: tuple

    @property
    def theta(self):
        return DecisionFunction(self.kind, self.a) if self.kind in SCALED_KINDS else DecisionFunction(self.kind)


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: ExperimentConfig
    curve: BoundCurve
    selection: Optional[ThetaSelection]
    repetitions: List[RepetitionResult]
    lipschitz_L: Optional[float]
    elapsed: float

    def summary(self):
        """Final-iteration values, one entry per reported quantity."""
        R = len(self.repetitions)
        def final(values):
            return None if values is None or not len(values) else float(values[-1])

        summary = {
            "n": self.config.n,
            "T": self.config.schedule.T,
            "repetitions": R,
            "noise_replicates": self.config.noise_replicates,
            "theta": self.config.theta.label,
            "train01": final(self.curve.train01),
            "test01": final(self.curve.test01),
            "generalization_error": final(self.curve.ege_hat),
            "generalization_error_stderr": final(self.curve.ege_stderr),
            "cmi": final(self.curve.cmi_mean),
            "cmi_stderr": final(self.curve.cmi_stderr),
            "cmi_heldout": final(self.curve.cmi_heldout_mean),
            "cmi_opt": final(self.curve.cmi_opt_mean),
            "baselines": {k: final(v) for k, v in self.curve.baselines.items()},
            "lipschitz_L": self.lipschitz_L,
            "elapsed_seconds": round(self.elapsed, 3),
        }
        if self.selection is not None:
            summary["theta_selection"] = {
                "kind": self.selection.kind, "a": self.selection.a,
                "train_bound": self.selection.train_bound, "test_bound": self.selection.test_bound,
                "train_reps": list(self.selection.train_reps), "test_reps": list(self.selection.test_reps),
            }
        if self.curve.baselines:
            summary["baseline_note"] = CONSTANTS_NOTE
        return summary


def _zero_one_curve(model, trajectory, data):
    return np.array([model.zero_one(w, data).mean() for w in trajectory.params[1:]])


def _dump(config, rep_index, u, k, model, trajectory, train_set, eval_set):
    os.makedirs(config.trajectory_dir, exist_ok=True)
    stem = os.path.join(config.trajectory_dir, f"rep{rep_index:05d}_u{u}_r{k:03d}")
    dump_trajectory(f"{stem}.npz", trajectory)
    write_trajectory_csv(f"{stem}.csv", model, trajectory, train_set, eval_set)


def run_repetition(config: ExperimentConfig, rep_index, source=None, model=None) -> RepetitionResult:
    """
    Simulate both branches of one repetition, each over every noise replicate.

    The branches share the supersample, J and W_0 and differ in which
    candidate sits in column J; every replicate has its own noise stream.

    Raises:
        DataExhaustedError: the source cannot supply the points
    """
    if source is None or model is None:
        source, model = config.build()
    seed = config.repetition_seed(rep_index)
    pair = sample_supersample(source, config.n, seed)
    eval_set = source.draw(config.resolved_eval_size, stream_rng(seed, STREAM_EVAL))
    w0 = model.init_params(stream_rng(seed, STREAM_INIT))

    branches = []
    for u in (1, 2):
        train_set = pair.training_set(u)
        replicates, baselines, train01, test01 = [], [], [], []
        for k in range(config.noise_replicates):
            trajectory = run_ld(model, pair, u, config.schedule, seed=seed + (u, k), w0=w0)
            replicates.append(branch_statistics(trajectory))
            if config.needs_point_grads:
                baselines.append(baseline_statistics(trajectory, model, train_set))
            else:
                baselines.append(baseline_statistics(trajectory))
            train01.append(_zero_one_curve(model, trajectory, train_set))
            test01.append(_zero_one_curve(model, trajectory, eval_set))
            if config.dump_trajectories:
                _dump(config, rep_index, u, k, model, trajectory, train_set, eval_set)
        branches.append(BranchResult(u, replicates, baselines,
                                     np.mean(train01, axis=0), np.mean(test01, axis=0)))
    logger.debug(f"Repetition {rep_index} done (j={pair.j}, {config.noise_replicates} replicates per branch)")
    return RepetitionResult(rep_index, branches)


def _mean_stderr(per_rep):
    per_rep = np.asarray(per_rep, dtype=float)
    mean = per_rep.mean(axis=0)
    if per_rep.shape[0] < 2:
        return mean, np.zeros_like(mean)
    return mean, per_rep.std(axis=0, ddof=1) / math.sqrt(per_rep.shape[0])


def _rep_curve(rep, theta, n):
    return bound_curve([b.summands(theta) for b in rep.branches], n)


def _data_dependent_curve(reps, values, beta_eta, scale):
    per_rep = [np.mean([np.sqrt(np.cumsum(beta_eta * values(s))) for b in rep.branches for s in b.baselines],
                       axis=0) for rep in reps]
    return scale * np.mean(per_rep, axis=0)


def split_by_parity(results: List[RepetitionResult]):
    """
    Even repetitions select θ, odd repetitions report it.

    Each half maps a repetition to its cells, one list of noise replicates per branch.
    """
    train = {r.rep_index: [list(b.replicates) for b in r.branches] for r in results if r.rep_index % 2 == 0}
    test = {r.rep_index: [list(b.replicates) for b in r.branches] for r in results if r.rep_index % 2 == 1}
    return train, test


def optimize_theta(train: Dict[int, list], test: Dict[int, list], families, grid, n,
                   reference: Optional[DecisionFunction] = None) -> ThetaSelection:
    """
    Pick the decision function minimizing the bound on ``train`` and report it on ``test``.

    Scaled families are searched over ``grid`` (smallest a wins ties);
    families are compared in the order given and the first strict minimum
    wins. A ``reference`` θ is the starting candidate and its scale joins
    its family's grid, so the choice never scores worse than it on ``train``.

    Raises:
        ValidationError: fewer than two repetitions in a half, or no families
        InvariantViolation: the halves share a repetition
    """
    shared = set(train) & set(test)
    if shared:
        raise InvariantViolation("held-out-theta", "θ selection and reporting share repetitions",
                                 param_info=f"shared = {sorted(shared)}")
    if len(train) < 2 or len(test) < 2:
        raise ValidationError("θ optimization needs at least two repetitions per half",
                              param_info=f"train = {len(train)}, test = {len(test)}",
                              suggestion="Use at least four repetitions.")
    if not families:
        raise ValidationError("θ optimization needs at least one family")

    train_cells = [cell for rep in sorted(train) for cell in train[rep]]
    test_cells = [cell for rep in sorted(test) for cell in test[rep]]
    best = None
    if reference is not None:
        a = reference.a if reference.kind in SCALED_KINDS else None
        best = (reference.kind, a, theta_family_objective(reference, train_cells, n), reference)
    for kind in families:
        if kind in SCALED_KINDS:
            kind_grid = list(grid)
            if reference is not None and reference.kind == kind:
                kind_grid.append(reference.a)
            a, value = search_scale(kind, train_cells, n, kind_grid)
            theta = DecisionFunction(kind, a)
        else:
            theta = DecisionFunction(kind)
            a, value = None, theta_family_objective(theta, train_cells, n)
        if best is None or value < best[2]:
            best = (kind, a, value, theta)

    kind, a, train_value, theta = best
    test_value = theta_family_objective(theta, test_cells, n)
    logger.info(f"Selected θ = {theta.label}: train {train_value:.6g}, held-out {test_value:.6g}")
    return ThetaSelection(kind, a, train_value, test_value, tuple(sorted(train)), tuple(sorted(test)))


def simulation_footprint(config: ExperimentConfig, dim, workers):
    """
    Bytes a simulation holds at its peak: one gradient cache of 6·(T+1)·d
    floats per worker, plus about ten length-T arrays kept per trajectory.
    """
    T = config.schedule.T
    live = workers * 6 * (T + 1) * dim * 8
    kept = config.repetitions * 2 * config.noise_replicates * 10 * T * 8
    return live + kept


def simulate(config: ExperimentConfig, threads=None) -> List[RepetitionResult]:
    """
    Run all repetitions concurrently; results come back in repetition order.

    Raises:
        ResourceExceededError: the simulation does not fit in memory even on one thread
    """
    source, model = config.build()
    workers = threads or config.threads or default_threads()
    if not check_memory_usage(simulation_footprint(config, model.dim, workers)):
        if not check_memory_usage(simulation_footprint(config, model.dim, 1)):
            raise ResourceExceededError(
                "Not enough memory for the simulation",
                param_info=f"R = {config.repetitions}, replicates = {config.noise_replicates}, "
                           f"T = {config.schedule.T}, d = {model.dim}",
                suggestion="Reduce repetitions, noise_replicates or T.")
        logger.warning("Simulation does not fit in memory on every thread; running single-threaded")
        workers = 1
    logger.info(f"Simulating {config.repetitions} repetitions × {config.noise_replicates} noise replicates "
                f"on {workers} threads (n={config.n}, T={config.schedule.T}, d={model.dim})")
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda r: run_repetition(config, r, source, model), range(config.repetitions)))


def summarize(config: ExperimentConfig, results: List[RepetitionResult], elapsed=0.0) -> ExperimentResult:
    """Reduce repetition results, in repetition order, into curves and a θ selection."""
    n, T = config.n, config.schedule.T
    theta = config.theta
    beta_eta = config.schedule.beta_eta()
    branches = [b for rep in results for b in rep.branches]
    statistics = [s for b in branches for s in b.replicates]
    baseline_stats = [s for b in branches for s in b.baselines]

    cmi_mean, cmi_stderr = _mean_stderr([_rep_curve(rep, theta, n) for rep in results])
    ege_mean, ege_stderr = _mean_stderr([np.mean([b.test01 - b.train01 for b in rep.branches], axis=0)
                                         for rep in results])

    selection, cmi_opt, cmi_heldout = None, None, None
    train, test = split_by_parity(results)
    if len(train) >= 2 and len(test) >= 2:
        selection = optimize_theta(train, test, config.theta_families, config.theta_grid, n, reference=theta)
        held_out = [rep for rep in results if rep.rep_index in set(selection.test_reps)]
        cmi_opt = np.mean([_rep_curve(rep, selection.theta, n) for rep in held_out], axis=0)
        cmi_heldout = np.mean([_rep_curve(rep, theta, n) for rep in held_out], axis=0)
    else:
        logger.warning("Fewer than four repetitions: skipping θ optimization")

    lipschitz_L = None
    curves = {}
    which = config.baselines.which
    if which:
        lipschitz_L = config.baselines.resolve_L(empirical_lipschitz(baseline_stats))
        partial = np.sqrt(np.cumsum(beta_eta))
        if "li-lipschitz" in which:
            curves["li-lipschitz"] = math.sqrt(2.0) * lipschitz_L / n * partial
        if "negrea-lipschitz" in which:
            curves["negrea-lipschitz"] = lipschitz_L / (2.0 * (n - 1)) * partial
        if "li-data-dependent" in which:
            curves["li-data-dependent"] = _data_dependent_curve(
                results, lambda s: s.train_grad_sq, beta_eta, math.sqrt(2.0) / n)
        if "negrea-data-dependent" in which:
            curves["negrea-data-dependent"] = _data_dependent_curve(
                results, lambda s: s.incoherence, beta_eta, 1.0 / (4.0 * (n - 1)))

    curve = BoundCurve(
        t=np.arange(1, T + 1),
        cmi_mean=cmi_mean,
        cmi_stderr=cmi_stderr,
        cmi_opt_mean=cmi_opt,
        cmi_heldout_mean=cmi_heldout,
        baselines=curves,
        test_err_sq_mean=np.mean([s.test_error_sq(theta) for s in statistics], axis=0),
        zeta_sq_mean=np.mean([s.zeta_sq for s in statistics], axis=0),
        incoherence_mean=np.mean([s.incoherence for s in baseline_stats], axis=0),
        train01=np.mean([b.train01 for b in branches], axis=0),
        test01=np.mean([b.test01 for b in branches], axis=0),
        ege_hat=ege_mean,
        ege_stderr=ege_stderr,
    )
    return ExperimentResult(config, curve, selection, results, lipschitz_L, elapsed)


def estimate_curves(config: ExperimentConfig, threads=None) -> ExperimentResult:
    """Simulate every repetition and reduce them into curves and a summary."""
    start = time.perf_counter()
    results = simulate(config, threads)
    return summarize(config, results, time.perf_counter() - start)


RECORD_COLUMNS = ["rep", "u_j", "replicate", "t", "zeta_sq", "delta_y", "theta", "test_err_sq", "kl"]


def record_rows(results: List[RepetitionResult], theta: DecisionFunction):
    """
    Per-step records of every trajectory under ``theta``.

    Row t describes the step from W_{t-1} to W_t, the last step entering
    row t of the curves.
    """
    rows = []
    for rep in results:
        for branch in rep.branches:
            for k, statistics in enumerate(branch.replicates):
                for record in statistics.records(theta):
                    rows.append([rep.rep_index, branch.u_j_value, k, record.t + 1, record.zeta_sq,
                                 float(statistics.delta_y[record.t]), record.theta_val,
                                 (record.indicator - record.theta_val) ** 2, record.kl])
    return rows


def write_outputs(result: ExperimentResult, out_dir, prefix="ld_bound", records=None):
    """
    Write the per-iteration CSV, the summary JSON and, when asked, the records CSV.

    Args:
        result: Reduced experiment
        out_dir: Output directory
        prefix: File name prefix
        records: Write ``<prefix>_records.csv``; defaults to the config's records_csv

    Returns:
        Dictionary of written paths (csv, json and possibly records)
    """
    paths = {"csv": os.path.join(out_dir, f"{prefix}.csv"),
             "json": os.path.join(out_dir, f"{prefix}_summary.json")}
    write_csv(paths["csv"], CSV_COLUMNS, result.curve.rows())
    summary = result.summary()
    summary.pop("elapsed_seconds", None)
    write_json(paths["json"], {"config": result.config.to_dict(), "summary": summary})
    want_records = result.config.records_csv if records is None else records
    if want_records:
        paths["records"] = os.path.join(out_dir, f"{prefix}_records.csv")
        write_csv(paths["records"], RECORD_COLUMNS, record_rows(result.repetitions, result.config.theta))
    logger.info(f"Wrote {', '.join(paths.values())}")
    return paths


def apply_overrides(config=None, seed=None, threads=None, out=None, theta=None, baselines=None,
                    dump_trajectories=None, records_csv=None):
    """Merge command-line style overrides into a JSON-style experiment config."""
    params = dict(config or {})
    if seed is not None:
        params["master_seed"] = seed
    if threads is not None:
        params["threads"] = threads
    if out is not None:
        params["out_dir"] = out
    if theta is not None:
        params["theta"] = theta
    if baselines is not None:
        params["baselines"] = list(baselines)
    if dump_trajectories:
        params["dump_trajectories"] = True
    if records_csv:
        params["records_csv"] = True
    return params


def _summary_log(result: ExperimentResult, title):
    summary = result.summary()
    log = [f"=== {title} ===",
           f"n = {summary['n']}, T = {summary['T']}, R = {summary['repetitions']}, "
           f"replicates = {summary['noise_replicates']}, θ = {summary['theta']}",
           f"train 0-1 error      = {summary['train01']:.6f}",
           f"test 0-1 error       = {summary['test01']:.6f}",
           f"generalization error = {summary['generalization_error']:.6f} ± {summary['generalization_error_stderr']:.6f}",
           f"CMI bound            = {summary['cmi']:.6f} ± {summary['cmi_stderr']:.6f}"]
    if summary["cmi_opt"] is not None:
        selection = summary["theta_selection"]
        a = "" if selection["a"] is None else f":{selection['a']:.4g}"
        log.append(f"CMI bound, held-out  = {summary['cmi_heldout']:.6f} ({summary['theta']})")
        log.append(f"CMI bound, tuned θ   = {summary['cmi_opt']:.6f} ({selection['kind']}{a})")
    for name, value in summary["baselines"].items():
        log.append(f"{name:<20} = {value:.6f}")
    if summary["lipschitz_L"] is not None:
        log.append(f"Lipschitz constant L = {summary['lipschitz_L']:.6f}")
    log.append(f"Elapsed: {summary['elapsed_seconds']:.2f} s")
    return summary, log


def run_ld_bound(config=None, seed=None, threads=None, out=None, theta=None, baselines=None,
                 dump_trajectories=None, records_csv=None, prefix="ld_bound"):
    """
    Plugin entry point: estimate the bound curves and write the CSV and summary.

    Returns:
        Dictionary with the summary, output paths and a log
    """
    experiment = ExperimentConfig.from_dict(apply_overrides(config, seed, threads, out, theta, baselines,
                                                            dump_trajectories, records_csv))
    result = estimate_curves(experiment)
    paths = write_outputs(result, experiment.out_dir, prefix)
    summary, log = _summary_log(result, "Langevin dynamics bound")
    log.append(f"Wrote {paths['csv']}")
    if "records" in paths:
        log.append(f"Wrote {paths['records']}")
    if experiment.dump_trajectories:
        paths["trajectories"] = experiment.trajectory_dir
        log.append(f"Trajectories in {experiment.trajectory_dir}")
    return dict(paths, summary=summary, log="\n".join(log))


def run_compare(config=None, seed=None, threads=None, out=None, theta=None, baselines=None,
                dump_trajectories=None, records_csv=None):
    """Like run_ld_bound, with every baseline switched on unless told otherwise."""
    return run_ld_bound(config, seed, threads, out, theta, BASELINE_KINDS if baselines is None else baselines,
                        dump_trajectories, records_csv, prefix="compare")


def run_theta_opt(config=None, seed=None, threads=None, out=None, theta=None, baselines=None,
                  dump_trajectories=None, records_csv=None):
    """
    Plugin entry point: tune θ per family on even repetitions, report on odd ones.

    The configured θ is the starting candidate of the overall choice.

    Returns:
        Dictionary with one row per family, the overall choice and a log
    """
    experiment = ExperimentConfig.from_dict(apply_overrides(config, seed, threads, out, theta, baselines,
                                                            dump_trajectories, records_csv))
    results = simulate(experiment)
    train, test = split_by_parity(results)
    n = experiment.n
    log = [f"=== θ optimization (train reps {len(train)}, held-out reps {len(test)}) ==="]
    families = []
    for kind in experiment.theta_families:
        selection = optimize_theta(train, test, [kind], experiment.theta_grid, n)
        families.append({"kind": kind, "a": selection.a, "train_bound": selection.train_bound,
                         "test_bound": selection.test_bound})
        a = "" if selection.a is None else f" a = {selection.a:<10.4g}"
        log.append(f"  {kind:<14}{a} train {selection.train_bound:.6f}  held-out {selection.test_bound:.6f}")
    best = optimize_theta(train, test, experiment.theta_families, experiment.theta_grid, n,
                          reference=experiment.theta)
    log.append(f"Selected {best.theta.label}")
    output = {"families": families, "selected": best.theta.label,
              "train_bound": best.train_bound, "test_bound": best.test_bound}
    if experiment.records_csv:
        records_path = os.path.join(experiment.out_dir, "theta_opt_records.csv")
        write_csv(records_path, RECORD_COLUMNS, record_rows(results, best.theta))
        output["records"] = records_path
    json_path = os.path.join(experiment.out_dir, "theta_opt.json")
    write_json(json_path, {"config": experiment.to_dict(), "result": output})
    output["json"] = json_path
    output["log"] = "\n".join(log)
    return output
