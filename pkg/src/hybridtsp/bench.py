"""Experiment orchestration: classical, quantum-only and hybrid solvers per run."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cluster
from .forest import ForestConfig, build_training_set, ml_refine, random_tours, train_forest
from .geo import DistanceMatrix, build_distance_matrix, default_cities_path, load_cities
from .metrics import SummaryStats, approximation_ratio, percent_gap, summarize
from .qsim import NoiseParams, build_ansatz
from .qubo import encode_tsp_qubo, qubo_to_ising
from .tour import Tour, mst_heuristic, stitch, tour_cost
from .vqe import VqeConfig, solve_subproblem

log = logging.getLogger(__name__)

SOLVERS = ("classical", "quantum", "hybrid")
METRICS = ("cost", "rho", "delta")
RESULTS_FILE = "results.json"
TIMINGS_FILE = "timings.json"
ML_ROUNDS = 3
RANDOM_TRAINING_TOURS = 100


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    cities: str = str(default_cities_path())
    n: int = 8
    runs: int = 30
    seed: int = 0
    backend: str = "ideal"
    shots: int = 1024
    reps: int = 3
    max_iter: int = 100
    ml: bool = True
    penalty_scale: float = 2.0
    start: str = "Calais"
    out: str | None = None
    matrix: str | None = None  # optional cached matrix JSON
    n_trees: int = 300
    max_depth: int = 30
    trajectories: int = 32

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.backend not in ("ideal", "nisq"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if not self.penalty_scale > 0:
            raise ValueError("penalty_scale must be positive")

    def noise(self) -> NoiseParams | None:
        return NoiseParams.nisq() if self.backend == "nisq" else None

    def vqe_config(self) -> VqeConfig:
        return VqeConfig(
            max_iter=self.max_iter, shots=self.shots, reps=self.reps, trajectories=self.trajectories
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SolverResult:
    order: list[int]
    cost: float
    rho: float
    delta: float

    @classmethod
    def make(cls, tour: Tour, dm: DistanceMatrix, classical_cost: float) -> "SolverResult":
        cost = tour_cost(tour, dm)
        rho = approximation_ratio(cost, classical_cost)
        return cls(list(tour.order), cost, rho, percent_gap(rho))


@dataclass
class ClusterRecord:
    members: list[int]
    path: list[int]
    energy: float | None
    bitstring: str | None
    repaired: bool
    evaluations: int
    qubits: int
    depth: int
    cz_count: int


@dataclass
class RunRecord:
    run_id: int
    n: int
    seed: int
    cities: list[str]
    classical: SolverResult
    quantum: SolverResult
    hybrid: SolverResult | None
    clusters: list[ClusterRecord]
    wall_times: dict[str, float] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("wall_times")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            run_id=data["run_id"],
            n=data["n"],
            seed=data["seed"],
            cities=list(data["cities"]),
            classical=SolverResult(**data["classical"]),
            quantum=SolverResult(**data["quantum"]),
            hybrid=SolverResult(**data["hybrid"]) if data["hybrid"] is not None else None,
            clusters=[ClusterRecord(**c) for c in data["clusters"]],
        )

    def solver(self, name: str) -> SolverResult | None:
        return getattr(self, name)


def select_instance(cfg: ExperimentConfig):
    """The start city followed by the first ``n - 1`` other cities in file order."""
    cities = load_cities(cfg.cities)
    by_name = {c.name: c for c in cities}
    if cfg.start not in by_name:
        raise ExperimentError(f"start city {cfg.start!r} not in {cfg.cities}")
    if cfg.n > len(cities):
        raise ExperimentError(f"n={cfg.n} exceeds the {len(cities)} available cities")
    chosen = [by_name[cfg.start]] + [c for c in cities if c.name != cfg.start][: cfg.n - 1]
    source = cfg.matrix if cfg.matrix else "haversine"
    return chosen, build_distance_matrix(chosen, source)


def quantum_tour(points, dm: DistanceMatrix, cfg: ExperimentConfig, rng: np.random.Generator):
    """Cluster, solve each cluster by VQE, and stitch from city 0."""
    timings = {}
    t0 = time.perf_counter()
    assignment = cluster.decompose(points, seed=int(rng.integers(2**31)))
    timings["cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    noise, vcfg = cfg.noise(), cfg.vqe_config()
    paths, records = [], []
    for members, sub_rng in zip(assignment.members, rng.spawn(assignment.k)):
        members = list(members)
        m = len(members)
        if m == 1:
            paths.append(members)
            records.append(ClusterRecord(members, members, None, None, False, 0, 0, 0, 0))
            continue
        sub = dm.submatrix(members)
        qubo = encode_tsp_qubo(sub, cfg.penalty_scale * m * float(sub.d.max()))
        local, res, repaired = solve_subproblem(qubo_to_ising(qubo), m, vcfg, noise, sub_rng)
        path = [members[i] for i in local]
        ansatz = build_ansatz(m * m, vcfg.reps)
        paths.append(path)
        records.append(
            ClusterRecord(
                members, path, res.best_energy, res.best_bitstring, repaired,
                res.evaluations, ansatz.q, ansatz.depth, ansatz.cz_count,
            )
        )
    timings["vqe"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    tour = stitch(paths, 0, dm)
    timings["stitch"] = time.perf_counter() - t0
    return tour, records, timings


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Run ``cfg.runs`` seeded repetitions on one instance.

    Every run draws from its own stream seeded by ``(cfg.seed, run_id)``. With
    ``ml`` on, a single forest is trained per instance on random tours, the
    classical tour and all quantum-only tours, then used to refine each run.
    """
    cities, dm = select_instance(cfg)
    points = [(c.lat, c.lon) for c in cities]
    n = len(cities)
    classical = mst_heuristic(dm, 0) if n >= 2 else Tour((0,))
    classical_cost = tour_cost(classical, dm)
    if n >= 2 and not classical_cost > 0:
        raise ExperimentError("classical tour has zero cost")

    quantum, per_run = [], []
    for run_id in range(cfg.runs):
        rng = np.random.default_rng([cfg.seed, run_id])
        try:
            tour, clusters, timings = quantum_tour(points, dm, cfg, rng)
            tour.validate(n, 0)
        except Exception as exc:
            raise ExperimentError(f"run {run_id} (n={n}) failed: {exc}") from exc
        quantum.append(tour)
        per_run.append((clusters, timings))
        log.info("n=%d run %d quantum cost %.1f", n, run_id, tour_cost(tour, dm))

    hybrid: list[Tour | None] = [None] * cfg.runs
    train_time = 0.0
    if cfg.ml and n >= 4:
        t0 = time.perf_counter()
        rng = np.random.default_rng([cfg.seed, n, 0x5EED])
        tours = random_tours(n, RANDOM_TRAINING_TOURS, 0, rng) + [classical] + quantum
        forest = train_forest(
            build_training_set(dm, tours),
            ForestConfig(n_trees=cfg.n_trees, max_depth=cfg.max_depth),
            rng,
        )
        train_time = time.perf_counter() - t0
        for run_id, tour in enumerate(quantum):
            t0 = time.perf_counter()
            hybrid[run_id] = ml_refine(tour, forest.predict, dm, ML_ROUNDS)
            per_run[run_id][1]["ml_refine"] = time.perf_counter() - t0
    elif cfg.ml:
        # fewer than 4 cities leaves no proper 2-opt move
        hybrid = list(quantum)

    records = []
    for run_id in range(cfg.runs):
        clusters, timings = per_run[run_id]
        if cfg.ml and n >= 4:
            timings["ml_train"] = train_time
        records.append(
            RunRecord(
                run_id=run_id,
                n=n,
                seed=cfg.seed,
                cities=[c.name for c in cities],
                classical=SolverResult.make(classical, dm, classical_cost),
                quantum=SolverResult.make(quantum[run_id], dm, classical_cost),
                hybrid=SolverResult.make(hybrid[run_id], dm, classical_cost) if hybrid[run_id] else None,
                clusters=clusters,
                wall_times=timings,
            )
        )
    return records


def compute_stats(records: Sequence[RunRecord], seed: int = 0) -> dict:
    """Per-size statistics; sizes are never pooled."""
    stats: dict[str, dict] = {}
    for n in sorted({r.n for r in records}):
        group = [r for r in records if r.n == n]
        stats[str(n)] = {}
        for s_idx, solver in enumerate(SOLVERS):
            results = [r.solver(solver) for r in group]
            if any(x is None for x in results):
                continue
            stats[str(n)][solver] = {
                metric: summarize(
                    [getattr(x, metric) for x in results],
                    rng=np.random.default_rng([seed, n, s_idx, m_idx]),
                ).to_dict()
                for m_idx, metric in enumerate(METRICS)
            }
    return stats


def results_payload(config: dict, records: Sequence[RunRecord], stats: dict) -> dict:
    return {"config": config, "runs": [r.to_dict() for r in records], "stats": stats}


def plot_rows(stats: dict, metric: str) -> list[dict]:
    rows = []
    for n in sorted(stats, key=int):
        for solver in SOLVERS:
            if solver not in stats[n]:
                continue
            s = stats[n][solver][metric]
            rows.append({"n": int(n), "solver": solver, **{k: s[k] for k in
                         ("median", "q1", "q3", "sd", "ci_low", "ci_high", "count")}})
    return rows


def write_plot_data(stats: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in METRICS:
        path = out_dir / f"plot_{metric}.csv"
        rows = plot_rows(stats, metric)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, ["n", "solver", "median", "q1", "q3", "sd", "ci_low", "ci_high", "count"]
            )
            writer.writeheader()
            writer.writerows(rows)
        written.append(path)
    return written


def emit_results(records: Sequence[RunRecord], stats: dict, path, config: dict | None = None) -> Path:
    """Write ``results.json``, ``timings.json`` and plot-data CSVs into ``path``.

    Wall-clock timings live in their own file so that ``results.json`` is
    byte-identical across repeated runs of the same configuration.
    """
    if not records:
        raise ValueError("no records to emit")
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        payload = results_payload(config or {}, records, stats)
        target = out / RESULTS_FILE
        target.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        timings = [{"n": r.n, "run_id": r.run_id, **r.wall_times} for r in records]
        (out / TIMINGS_FILE).write_text(json.dumps(timings, indent=2) + "\n", encoding="utf-8")
        write_plot_data(stats, out)
    except OSError as exc:
        raise ExperimentError(f"cannot write results to {out}: {exc}") from exc
    return target


def load_results(path) -> tuple[dict, list[RunRecord], dict]:
    p = Path(path)
    if p.is_dir():
        p = p / RESULTS_FILE
    payload = json.loads(p.read_text(encoding="utf-8"))
    return payload["config"], [RunRecord.from_dict(r) for r in payload["runs"]], payload["stats"]


def run_sweep(cfg: ExperimentConfig, sizes: Sequence[int]) -> tuple[list[RunRecord], dict]:
    records: list[RunRecord] = []
    for n in sizes:
        records += run_experiment(replace(cfg, n=n))
    return records, compute_stats(records, cfg.seed)

