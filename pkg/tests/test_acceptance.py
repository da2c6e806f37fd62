"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line and the terminal summary repeats them.
The nisq experiments are shared between criteria through session fixtures.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import record
from hybridtsp.bench import ExperimentConfig, compute_stats, emit_results, run_experiment, select_instance
from hybridtsp.geo import build_distance_matrix, default_cities_path, load_cities
from hybridtsp.metrics import approximation_ratio, percent_gap, summarize
from hybridtsp.qsim import (
    NoiseParams,
    StateVector,
    _cz_sign,
    _ry_blocks,
    _ry_layer,
    build_ansatz,
    expectation_diagonal,
    noisy_histogram,
    sample_counts,
    simulate_statevector,
)
from hybridtsp.qubo import (
    IsingHamiltonian,
    Qubo,
    basis_spins,
    diagonal_energies,
    encode_tsp_qubo,
    permutation_bits,
    qubo_to_ising,
)
from hybridtsp.tour import brute_force_optimal, mst_heuristic, tour_cost
from hybridtsp.vqe import VqeConfig, run_vqe

pytestmark = pytest.mark.slow

NISQ_SIZES = (8, 10, 12)


@contextmanager
def criterion(number):
    notes = []
    try:
        yield notes
    except BaseException as exc:
        record(number, False, "; ".join(notes + [f"{type(exc).__name__}: {exc}".strip()]))
        raise
    record(number, True, "; ".join(notes))


def iqr(x):
    q1, q3 = np.percentile(x, [25, 75])
    return q3 - q1


def euclid(pts):
    return np.linalg.norm(pts[:, None] - pts[None], axis=2)


def cycle_cost(d, order):
    return sum(d[order[k], order[(k + 1) % len(order)]] for k in range(len(order)))


def all_bits(n):
    return (1 - basis_spins(n)) // 2


@pytest.fixture(scope="session")
def nisq_runs():
    t0 = time.perf_counter()
    runs = {n: run_experiment(ExperimentConfig(n=n, runs=30, backend="nisq")) for n in NISQ_SIZES}
    return runs, time.perf_counter() - t0


def test_criterion_01_small_instance_optimal():
    with criterion(1) as notes:
        t0 = time.perf_counter()
        records = run_experiment(ExperimentConfig(n=4, runs=30, backend="ideal"))
        elapsed = time.perf_counter() - t0
        _, dm = select_instance(ExperimentConfig(n=4))
        oracle = tour_cost(brute_force_optimal(dm, 0), dm)
        ratios = [r.hybrid.cost / oracle for r in records]
        hits = sum(r == 1.0 for r in ratios)
        notes.append(f"hybrid/oracle = 1.0000 in {hits}/30 runs, {elapsed:.1f} s")
        assert hits == 30
        assert elapsed < 60


def test_criterion_02_qubo_soundness():
    with criterion(2) as notes:
        for m, seed in ((2, 0), (3, 1), (3, 2)):
            d = euclid(np.random.default_rng(seed).uniform(0, 100, (m, 2)))
            q = encode_tsp_qubo(d)
            X = all_bits(m * m)
            energies = np.einsum("zi,ij,zj->z", X, q.Q, X) + q.offset
            best = X[int(np.argmin(energies))].reshape(m, m)
            assert (best.sum(0) == 1).all() and (best.sum(1) == 1).all()
            brute = min(cycle_cost(d, p) for p in itertools.permutations(range(m)))
            assert math.isclose(energies.min(), brute, rel_tol=1e-9)
        notes.append("m=2,3 exhaustive minima are optimal permutations")

        m = 4
        d = euclid(np.random.default_rng(4).uniform(0, 100, (m, 2)))
        q = encode_tsp_qubo(d)
        energy = lambda x: float(x @ q.Q @ x + q.offset)  # noqa: E731
        feasible = [energy(permutation_bits(p, m)) for p in itertools.permutations(range(m))]
        rng = np.random.default_rng(0)
        infeasible = []
        while len(infeasible) < 1000:
            x = rng.integers(0, 2, m * m)
            mat = x.reshape(m, m)
            if not ((mat.sum(0) == 1).all() and (mat.sum(1) == 1).all()):
                infeasible.append(energy(x))
        brute = min(cycle_cost(d, p) for p in itertools.permutations(range(m)))
        assert math.isclose(min(feasible), brute, rel_tol=1e-9)
        assert min(infeasible) > max(feasible)
        notes.append(f"m=4 min infeasible {min(infeasible):.1f} > max feasible {max(feasible):.1f}")


def test_criterion_03_qubo_ising_equivalence():
    with criterion(3) as notes:
        cases = []
        for m in (2, 3, 4):
            d = euclid(np.random.default_rng(10 + m).uniform(0, 100, (m, 2)))
            cases.append(encode_tsp_qubo(d))
        rng = np.random.default_rng(3)
        for n in (1, 5, 11, 16):
            M = rng.normal(size=(n, n))
            cases.append(Qubo(n, (M + M.T) / 2, float(rng.normal()), 1.0))
        worst = 0.0
        for q in cases:
            n = len(q.Q)
            X = all_bits(n).astype(float)
            direct = np.einsum("zi,ij,zj->z", X, q.Q, X) + q.offset
            ising = diagonal_energies(qubo_to_ising(q))
            rel = np.abs(ising - direct) / np.maximum(np.abs(direct), 1.0)
            worst = max(worst, float(rel.max()))
        notes.append(f"{len(cases)} QUBOs up to 16 vars, worst relative error {worst:.1e}")
        assert worst <= 1e-9


def test_criterion_04_simulator():
    with criterion(4) as notes:
        rng = np.random.default_rng(0)
        for q in range(1, 7):
            v = rng.normal(size=2**q)
            psi = v / np.linalg.norm(v)
            t1, t2 = rng.uniform(-2 * math.pi, 2 * math.pi, (2, q))
            two = _ry_layer(_ry_layer(psi, q, _ry_blocks(q, t1)), q, _ry_blocks(q, t2))
            assert np.allclose(two, _ry_layer(psi, q, _ry_blocks(q, t1 + t2)), atol=1e-12)
            for a in range(q - 1):
                sign = _cz_sign(q, ((a, a + 1),))
                assert np.array_equal(psi * sign * sign, psi)
        worst_norm = 0.0
        for q in range(1, 17, 3):
            a = build_ansatz(q, 3)
            theta = rng.uniform(0, 2 * math.pi, a.num_params)
            worst_norm = max(worst_norm, abs(simulate_statevector(a, theta).norm() - 1))
        assert worst_norm <= 1e-9
        notes.append(f"gate algebra ok, norm drift {worst_norm:.1e}")

        worst = 0.0
        for q in range(1, 5):
            J = np.triu(rng.normal(size=(q, q)), 1)
            h = IsingHamiltonian(rng.normal(size=q), J + J.T, float(rng.normal()))
            v = rng.normal(size=2**q)
            s = StateVector(v / np.linalg.norm(v))
            explicit = 0.0
            for z in range(2**q):
                spins = [1 - 2 * ((z >> (q - 1 - i)) & 1) for i in range(q)]
                e = h.constant + sum(h.h[i] * spins[i] for i in range(q))
                e += sum(h.J[i, j] * spins[i] * spins[j] for i in range(q) for j in range(i + 1, q))
                explicit += s.amplitudes[z] ** 2 * e
            worst = max(worst, abs(expectation_diagonal(s, h) - explicit) / max(abs(explicit), 1.0))
        assert worst <= 1e-9
        notes.append(f"expectation error {worst:.1e}")

        for q, shots in ((3, 1024), (6, 777), (9, 1)):
            a = build_ansatz(q, 3)
            theta = rng.uniform(0, 2 * math.pi, a.num_params)
            assert sample_counts(simulate_statevector(a, theta), shots, rng).shots == shots
            assert sum(sample_counts(simulate_statevector(a, theta), shots, rng).counts.values()) == shots
            assert noisy_histogram(a, theta, NoiseParams.nisq(), shots, rng).sum() == shots
        notes.append("counts sum to shots")


def test_criterion_05_variational_bound():
    with criterion(5) as notes:
        rng = np.random.default_rng(5)
        checked = 0
        for q in (1, 4, 6, 9, 12):
            J = np.triu(rng.normal(size=(q, q)), 1)
            h = IsingHamiltonian(rng.normal(size=q), J + J.T, 0.0)
            ground = diagonal_energies(h).min()
            for seed in range(3):
                res = run_vqe(h, VqeConfig(), rng=np.random.default_rng([q, seed]))
                assert res.best_energy >= ground - 1e-9
                checked += 1
        cities = load_cities(default_cities_path())
        for m in (2, 3):
            dm = build_distance_matrix(cities[:m])
            h = qubo_to_ising(encode_tsp_qubo(dm.d))
            ground = diagonal_energies(h).min()
            for seed in range(3):
                assert run_vqe(h, VqeConfig(), rng=np.random.default_rng(seed)).best_energy >= ground - 1e-9
                checked += 1
        notes.append(f"bound held in {checked}/{checked} runs")

        # two-city cluster with distances scaled to a unit maximum
        d = np.array([[0.0, 1.0], [1.0, 0.0]])
        h = qubo_to_ising(encode_tsp_qubo(d))
        ground = diagonal_energies(h).min()
        gaps = [run_vqe(h, VqeConfig(max_iter=1000), rng=np.random.default_rng([0, s])).best_energy - ground
                for s in range(30)]
        hits = sum(g <= 1e-2 for g in gaps)
        notes.append(f"2-city ground within 1e-2 in {hits}/30 runs")
        assert hits >= 27


def test_criterion_06_classical_bound():
    with criterion(6) as notes:
        rng = np.random.default_rng(2024)
        violations, worst = 0, 0.0
        for _ in range(100):
            n = int(rng.integers(4, 9))
            d = euclid(rng.uniform(0, 100, (n, 2)))
            ratio = tour_cost(mst_heuristic(d), d) / tour_cost(brute_force_optimal(d), d)
            worst = max(worst, ratio)
            violations += ratio > 2 + 1e-12
        notes.append(f"{violations} violations over 100 instances, worst ratio {worst:.3f}")
        assert violations == 0


def test_criterion_07_ml_improvement(nisq_runs):
    runs, elapsed = nisq_runs
    with criterion(7) as notes:
        ok = True
        for n in NISQ_SIZES:
            q = np.median([r.quantum.cost for r in runs[n]])
            h = np.median([r.hybrid.cost for r in runs[n]])
            notes.append(f"n={n} hybrid/quantum median {h / q:.3f}")
            ok &= h <= 0.95 * q
        notes.append(f"{elapsed:.0f} s")
        assert ok
        assert elapsed < 600


def test_criterion_08_variability(nisq_runs):
    runs, _ = nisq_runs
    with criterion(8) as notes:
        ok = True
        for n in (8, 10):
            iq = iqr([r.quantum.rho for r in runs[n]])
            ih = iqr([r.hybrid.rho for r in runs[n]])
            notes.append(f"n={n} rho IQR hybrid {ih:.4f} vs quantum {iq:.4f}")
            ok &= ih < iq
        assert ok


def test_criterion_09_noise_direction(nisq_runs):
    runs, _ = nisq_runs
    with criterion(9) as notes:
        ideal = run_experiment(ExperimentConfig(n=8, runs=30, backend="ideal", ml=False))
        noisy = np.median([r.quantum.rho for r in runs[8]])
        clean = np.median([r.quantum.rho for r in ideal])
        notes.append(f"n=8 quantum median rho nisq {noisy:.4f} vs ideal {clean:.4f}")
        assert noisy > clean


def test_criterion_10_metrics():
    with criterion(10) as notes:
        assert round(approximation_ratio(67889.0, 34612.9), 4) == 1.9614
        assert round(approximation_ratio(35605.4, 34612.9), 4) == 1.0287
        assert round(percent_gap(1.0287), 4) == 2.87
        assert round(percent_gap(0.9418), 4) == -5.82
        s = summarize([1.0, 2.0, 3.0])
        assert (s.median, s.iqr, s.sd) == (2.0, 1.0, 1.0)
        s = summarize([2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0])
        assert (s.median, s.q1, s.q3) == (4.5, 4.0, 5.5)
        assert s.sd == pytest.approx(math.sqrt(32 / 7), rel=1e-15)
        notes.append("ratios, gaps and summaries match hand values")


def test_criterion_11_determinism(tmp_path):
    with criterion(11) as notes:
        for backend in ("ideal", "nisq"):
            cfg = ExperimentConfig(n=7, runs=3, backend=backend, n_trees=50)
            blobs = []
            for sub in ("a", "b"):
                records = run_experiment(cfg)
                path = emit_results(records, compute_stats(records, cfg.seed), tmp_path / backend / sub, cfg.to_dict())
                blobs.append(path.read_bytes())
            assert blobs[0] == blobs[1]
        notes.append("results.json byte-identical for repeated ideal and nisq runs")
