"""Permutation-matrix QUBO for a closed sub-tour and its Ising form.

Variable ``x[i, p]`` (city ``i`` at position ``p``) lives at index ``i * m + p``.
Spins use ``x = (1 - s) / 2``, so bit 0 is spin +1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class Qubo:
    m: int
    Q: np.ndarray
    offset: float
    A: float

    @property
    def num_vars(self) -> int:
        return self.m * self.m


@dataclass(frozen=True, eq=False)
class IsingHamiltonian:
    h: np.ndarray
    J: np.ndarray
    constant: float

    @property
    def num_spins(self) -> int:
        return len(self.h)


def var_index(i: int, p: int, m: int) -> int:
    return i * m + p


def default_penalty(d: np.ndarray, scale: float = 2.0) -> float:
    """``scale * m * max(d)``; the default scale 2 clears the dominance bound ``m * max(d)``."""
    d = np.asarray(d, dtype=float)
    return float(scale * len(d) * d.max())


def encode_tsp_qubo(d, A: float | None = None) -> Qubo:
    d = np.asarray(getattr(d, "d", d), dtype=float)
    m = len(d)
    if m < 2:
        raise ValueError("sub-problem needs at least 2 cities")
    if A is None:
        A = default_penalty(d)
    if not A > 0:
        raise ValueError("penalty weight must be positive")

    n = m * m
    W = np.zeros((n, n))  # W[a, b] multiplies x_a * x_b; diagonal is linear
    offset = 0.0

    # distance between consecutive positions, wrapping around
    for p in range(m):
        q = (p + 1) % m
        for i in range(m):
            for j in range(m):
                if i != j:
                    W[var_index(i, p, m), var_index(j, q, m)] += d[i, j]

    # A * (sum(group) - 1)^2 = A * (-sum x + 2 * sum_{a<b} x_a x_b + 1)
    groups = [[var_index(i, p, m) for p in range(m)] for i in range(m)]
    groups += [[var_index(i, p, m) for i in range(m)] for p in range(m)]
    for g in groups:
        for a in g:
            W[a, a] -= A
        for s, a in enumerate(g):
            for b in g[s + 1:]:
                W[a, b] += 2 * A
        offset += A

    diag = np.diag(W).copy()
    off = W - np.diag(diag)
    Q = (off + off.T) / 2 + np.diag(diag)
    return Qubo(m, Q, float(offset), float(A))


def qubo_energy(q: Qubo, bits) -> float:
    x = np.asarray(bits, dtype=float)
    if x.shape != (q.num_vars,):
        raise ValueError(f"expected {q.num_vars} bits, got shape {x.shape}")
    return float(x @ q.Q @ x + q.offset)


def qubo_to_ising(q: Qubo) -> IsingHamiltonian:
    Q = np.asarray(q.Q, dtype=float)
    diag = np.diag(Q)
    off = Q - np.diag(diag)
    # sum_{a != b} Q_ab x_a x_b with x = (1 - s)/2 gives J_ab = Q_ab / 2 over pairs a < b
    J = off / 2
    h = -diag / 2 - off.sum(axis=1) / 2
    constant = q.offset + diag.sum() / 2 + off.sum() / 4
    return IsingHamiltonian(h, J, float(constant))


def ising_energy(hmt: IsingHamiltonian, spins) -> float:
    s = np.asarray(spins, dtype=float)
    if s.shape != (hmt.num_spins,):
        raise ValueError(f"expected {hmt.num_spins} spins, got shape {s.shape}")
    return float(hmt.h @ s + 0.5 * s @ hmt.J @ s + hmt.constant)


def bits_to_spins(bits) -> np.ndarray:
    return 1 - 2 * np.asarray(bits, dtype=int)


def spins_to_bits(spins) -> np.ndarray:
    return (1 - np.asarray(spins, dtype=int)) // 2


def basis_spins(num_spins: int) -> np.ndarray:
    """Spin configurations of every basis state, qubit 0 as the most significant bit."""
    z = np.arange(2**num_spins)
    shifts = np.arange(num_spins - 1, -1, -1)
    bits = (z[:, None] >> shifts[None, :]) & 1
    return 1 - 2 * bits


def diagonal_energies(hmt: IsingHamiltonian) -> np.ndarray:
    """Energy of every computational basis state, indexed by basis integer."""
    S = basis_spins(hmt.num_spins).astype(float)
    return S @ hmt.h + 0.5 * ((S @ hmt.J) * S).sum(axis=1) + hmt.constant


def permutation_bits(path, m: int) -> np.ndarray:
    """Bits of the permutation matrix placing ``path[p]`` at position ``p``."""
    bits = np.zeros(m * m, dtype=int)
    for p, i in enumerate(path):
        bits[var_index(i, p, m)] = 1
    return bits
