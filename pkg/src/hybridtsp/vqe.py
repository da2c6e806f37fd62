"""Variational minimisation of an Ising Hamiltonian and decoding of its samples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .qsim import (
    Counts,
    NoiseParams,
    build_ansatz,
    noisy_histogram,
    noisy_outcomes,
    sample_counts,
    simulate_statevector,
)
from .qubo import IsingHamiltonian, diagonal_energies

MAX_QUBITS = 16


class NonFiniteObjective(FloatingPointError):
    def __init__(self, x, value):
        super().__init__(f"objective returned {value!r} at x={list(np.asarray(x))}")
        self.x = np.asarray(x, dtype=float)
        self.value = value


@dataclass(frozen=True)
class VqeConfig:
    max_iter: int = 100
    shots: int = 1024
    reps: int = 3
    rho_begin: float = 1.0
    rho_end: float = 1e-4
    trajectories: int = 32

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0 < self.rho_end < self.rho_begin:
            raise ValueError("need 0 < rho_end < rho_begin")


@dataclass(frozen=True, eq=False)
class VqeResult:
    best_params: np.ndarray
    best_energy: float
    final_counts: Counts
    best_bitstring: str
    evaluations: int
    trace: tuple[float, ...] = ()


@dataclass
class CobylaResult:
    x: np.ndarray
    fun: float
    nfev: int
    trace: list[float]  # best-so-far value after each evaluation


def cobyla_minimize(f, x0, rho_begin=1.0, rho_end=1e-4, max_iter=100) -> CobylaResult:
    """Minimise ``f`` with COBYLA, returning the best point evaluated.

    ``max_iter`` bounds the number of objective evaluations. The first
    evaluation is always ``x0``, so the result is never worse than ``f(x0)``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.size < 1:
        raise ValueError("dimension must be >= 1")
    best_x = x0.copy()
    best_f = math.inf
    trace: list[float] = []

    def wrapped(x):
        nonlocal best_x, best_f
        val = float(f(x))
        if not math.isfinite(val):
            raise NonFiniteObjective(x, val)
        if val < best_f:
            best_f, best_x = val, np.array(x, dtype=float)
        trace.append(best_f)
        return val

    minimize(
        wrapped,
        x0,
        method="COBYLA",
        options={"rhobeg": rho_begin, "tol": rho_end, "maxiter": max_iter},
    )
    return CobylaResult(best_x, best_f, len(trace), trace)


def run_vqe(
    hmt: IsingHamiltonian,
    cfg: VqeConfig = VqeConfig(),
    noise: NoiseParams | None = None,
    rng: np.random.Generator | None = None,
) -> VqeResult:
    """Optimise the TwoLocal ansatz against ``hmt`` and sample the result.

    Without noise the objective is the exact statevector expectation; with
    noise it is the mean energy of ``cfg.shots`` noisy samples. Shots are
    always used for the final readout.
    """
    q = hmt.num_spins
    if q > MAX_QUBITS:
        raise ValueError(f"{q} qubits exceeds the {MAX_QUBITS}-qubit simulator limit")
    rng = np.random.default_rng() if rng is None else rng
    ansatz = build_ansatz(q, cfg.reps)
    energies = diagonal_energies(hmt)
    x0 = rng.uniform(0.0, 2 * math.pi, ansatz.num_params)
    noisy = noise is not None and not noise.is_zero

    if noisy:
        def objective(theta):
            outcomes = noisy_outcomes(ansatz, theta, noise, cfg.shots, rng, cfg.trajectories)
            return float(energies[outcomes].mean())
    else:
        def objective(theta):
            psi = simulate_statevector(ansatz, theta).amplitudes
            return float((psi * psi) @ energies)

    res = cobyla_minimize(objective, x0, cfg.rho_begin, cfg.rho_end, cfg.max_iter)
    if noisy:
        hist = noisy_histogram(ansatz, res.x, noise, cfg.shots, rng, cfg.trajectories)
        counts = Counts.from_array(hist, q)
    else:
        counts = sample_counts(simulate_statevector(ansatz, res.x), cfg.shots, rng)
    return VqeResult(
        best_params=res.x,
        best_energy=res.fun,
        final_counts=counts,
        best_bitstring=counts.most_frequent(),
        evaluations=res.nfev,
        trace=tuple(res.trace),
    )


def _bits_array(bits) -> np.ndarray:
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    return np.asarray(bits, dtype=int)


def decode_bitstring(bits, m: int) -> list[int] | None:
    """City order encoded by a permutation matrix, or None when infeasible.

    Rows are cities and columns positions, read row-major.
    """
    x = _bits_array(bits)
    if x.shape != (m * m,):
        raise ValueError(f"expected {m * m} bits, got {x.size}")
    mat = x.reshape(m, m)
    if np.any((mat != 0) & (mat != 1)):
        raise ValueError("bits must be 0 or 1")
    if not (np.all(mat.sum(axis=0) == 1) and np.all(mat.sum(axis=1) == 1)):
        return None
    return [int(np.argmax(mat[:, p])) for p in range(m)]


def marginals(counts: Counts, num_vars: int) -> np.ndarray:
    freq = np.zeros(num_vars)
    for key, c in counts.counts.items():
        freq += c * np.fromiter((ch == "1" for ch in key), dtype=float, count=num_vars)
    return freq / counts.shots


def repair_to_permutation(bits, counts: Counts, m: int) -> list[int]:
    """Greedy permutation from per-variable marginal frequencies of ``counts``.

    Repeatedly fixes the unassigned (city, position) pair with the highest
    marginal; ties go to the lowest (city, position).
    """
    n = m * m
    if len(_bits_array(bits)) != n:
        raise ValueError(f"expected {n} bits")
    score = marginals(counts, n).reshape(m, m)
    free = np.ones((m, m), dtype=bool)
    path = [-1] * m
    for _ in range(m):
        masked = np.where(free, score, -np.inf)
        flat = int(np.argmax(masked))  # first maximum in row-major order
        i, p = divmod(flat, m)
        path[p] = i
        free[i, :] = False
        free[:, p] = False
    return path


def solve_subproblem(hmt, m, cfg, noise, rng):
    """Run VQE on a cluster Hamiltonian and return (path, result, repaired)."""
    result = run_vqe(hmt, cfg, noise, rng)
    path = decode_bitstring(result.best_bitstring, m)
    if path is not None:
        return path, result, False
    return repair_to_permutation(result.best_bitstring, result.final_counts, m), result, True
