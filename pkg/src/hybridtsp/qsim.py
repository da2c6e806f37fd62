"""Dense statevector simulation of the ry/cz TwoLocal ansatz.

Qubit 0 is the most significant bit of a basis index and the leftmost
character of a bitstring key. Every gate in the ansatz is real, and so is
every Pauli error up to a global phase, so amplitudes are kept as float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .qubo import IsingHamiltonian, diagonal_energies

NORM_TOL = 1e-9
_GROUP = 4


@dataclass(frozen=True)
class Gate:
    name: str  # "ry" or "cz"
    qubits: tuple[int, ...]
    param: int | None = None


@dataclass(frozen=True)
class AnsatzSpec:
    q: int
    reps: int
    layout: tuple[Gate, ...] = field(repr=False)

    @property
    def num_params(self) -> int:
        return self.q * (self.reps + 1)

    @property
    def cz_count(self) -> int:
        return sum(g.name == "cz" for g in self.layout)

    @property
    def ry_count(self) -> int:
        return sum(g.name == "ry" for g in self.layout)

    @property
    def depth(self) -> int:
        """Circuit depth with as-soon-as-possible scheduling of the gate list."""
        level = [0] * self.q
        for g in self.layout:
            t = max(level[i] for i in g.qubits) + 1
            for i in g.qubits:
                level[i] = t
        return max(level)

    def layers(self) -> list[list[Gate]]:
        """Gates grouped into alternating rotation and entangling layers."""
        out: list[list[Gate]] = []
        for g in self.layout:
            if out and out[-1][0].name == g.name:
                out[-1].append(g)
            else:
                out.append([g])
        return out


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        n = amps.shape[0]
        if amps.ndim != 1 or n & (n - 1):
            raise ValueError("amplitude count must be a power of two")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return int(self.amplitudes.shape[0]).bit_length() - 1

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(self.probabilities().sum()))


@dataclass(frozen=True)
class Counts:
    counts: dict[str, int]
    shots: int

    @property
    def num_qubits(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    @classmethod
    def from_array(cls, hist: np.ndarray, num_qubits: int) -> "Counts":
        nz = np.flatnonzero(hist)
        data = {format(int(z), f"0{num_qubits}b"): int(hist[z]) for z in nz}
        return cls(data, int(hist.sum()))

    def to_array(self, num_qubits: int | None = None) -> np.ndarray:
        q = self.num_qubits if num_qubits is None else num_qubits
        hist = np.zeros(2**q, dtype=np.int64)
        for key, c in self.counts.items():
            hist[int(key, 2)] = c
        return hist

    def most_frequent(self) -> str:
        # ties go to the lexicographically smallest key
        return min(self.counts, key=lambda k: (-self.counts[k], k))


@dataclass(frozen=True)
class NoiseParams:
    p1: float = 0.0
    p2: float = 0.0
    readout_flip: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2", "readout_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @property
    def is_zero(self) -> bool:
        return self.p1 == 0.0 and self.p2 == 0.0 and self.readout_flip == 0.0

    @classmethod
    def nisq(cls) -> "NoiseParams":
        """Gate errors quoted for a 127-qubit superconducting device.

        The readout flip rate of 1e-2 is a modelling choice, not a measured value.
        """
        return cls(p1=2.726e-4, p2=7.984e-3, readout_flip=1e-2)


def build_ansatz(q: int, reps: int = 3) -> AnsatzSpec:
    if q < 1:
        raise ValueError("ansatz needs at least one qubit")
    if reps < 0:
        raise ValueError("reps must be >= 0")
    gates: list[Gate] = []
    for r in range(reps):
        gates += [Gate("ry", (i,), r * q + i) for i in range(q)]
        gates += [Gate("cz", (i, i + 1)) for i in range(q - 1)]
    gates += [Gate("ry", (i,), reps * q + i) for i in range(q)]
    return AnsatzSpec(q, reps, tuple(gates))


@lru_cache(maxsize=32)
def _basis_bits(q: int) -> np.ndarray:
    z = np.arange(2**q)
    shifts = np.arange(q - 1, -1, -1)
    bits = ((z[:, None] >> shifts[None, :]) & 1).astype(np.int8)
    bits.setflags(write=False)
    return bits


@lru_cache(maxsize=256)
def _cz_sign(q: int, pairs: tuple[tuple[int, int], ...]) -> np.ndarray:
    bits = _basis_bits(q)
    parity = np.zeros(2**q, dtype=np.int8)
    for a, b in pairs:
        parity ^= bits[:, a] & bits[:, b]
    sign = 1.0 - 2.0 * parity
    sign.setflags(write=False)
    return sign


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def _kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1))
    for m in mats:
        r, c = out.shape
        out = (out[:, None, :, None] * m[None, :, None, :]).reshape(2 * r, 2 * c)
    return out


def _ry_blocks(q: int, thetas) -> list[np.ndarray]:
    return [
        _kron_all(_ry_matrix(t) for t in thetas[lo : min(q, lo + _GROUP)])
        for lo in range(0, q, _GROUP)
    ]


def _ry_layer(psi: np.ndarray, q: int, blocks) -> np.ndarray:
    """Apply a full ry layer given its tensor-product blocks.

    Each block acts on up to ``_GROUP`` adjacent qubits.
    """
    out = psi
    for b, G in enumerate(blocks):
        lo = b * _GROUP
        out = np.matmul(G, out.reshape(2**lo, G.shape[0], -1))
    return out.reshape(-1)


def _pauli(psi: np.ndarray, qubit: int, which: int) -> None:
    """Apply X (1), Y (2) or Z (3); Y is applied as X·Z, dropping the global phase i."""
    view = psi.reshape(2**qubit, 2, -1)
    if which in (2, 3):
        view[:, 1, :] *= -1.0
    if which in (1, 2):
        view[:, [0, 1], :] = view[:, [1, 0], :]


def _check_params(ansatz: AnsatzSpec, params) -> np.ndarray:
    theta = np.asarray(params, dtype=float)
    if theta.shape != (ansatz.num_params,):
        raise ValueError(f"expected {ansatz.num_params} parameters, got shape {theta.shape}")
    return theta


def _compile(ansatz: AnsatzSpec, theta: np.ndarray) -> list:
    """Per-layer operators: ry blocks for rotation layers, sign vectors for cz layers."""
    ops = []
    for layer in ansatz.layers():
        if layer[0].name == "ry":
            ops.append(_ry_blocks(ansatz.q, [theta[g.param] for g in layer]))
        else:
            ops.append(_cz_sign(ansatz.q, tuple(g.qubits for g in layer)))
    return ops


def _apply_op(psi: np.ndarray, q: int, op) -> np.ndarray:
    if isinstance(op, list):
        return _ry_layer(psi, q, op)
    return psi * op


def _run_layers(ansatz: AnsatzSpec, theta: np.ndarray, keep: bool = False):
    psi = np.zeros(2**ansatz.q)
    psi[0] = 1.0
    ops = _compile(ansatz, theta)
    snapshots = []
    for op in ops:
        if keep:
            snapshots.append(psi)
        psi = _apply_op(psi, ansatz.q, op)
    return psi, (snapshots, ops)


def simulate_statevector(ansatz: AnsatzSpec, params) -> StateVector:
    theta = _check_params(ansatz, params)
    psi, _ = _run_layers(ansatz, theta)
    return StateVector(psi)


def _probabilities(state: StateVector) -> np.ndarray:
    p = state.probabilities()
    total = p.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"state is not normalised (sum |amp|^2 = {total!r})")
    return p / total


def sample_counts(state: StateVector, shots: int, rng: np.random.Generator) -> Counts:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    hist = rng.multinomial(shots, _probabilities(state))
    return Counts.from_array(hist, state.num_qubits)


def expectation_diagonal(state: StateVector, hmt: IsingHamiltonian) -> float:
    if hmt.num_spins != state.num_qubits:
        raise ValueError(f"{hmt.num_spins} spins vs {state.num_qubits} qubits")
    return float(state.probabilities() @ diagonal_energies(hmt))


def _gate_error_probs(ansatz: AnsatzSpec, noise: NoiseParams) -> np.ndarray:
    return np.array([noise.p1 if g.name == "ry" else noise.p2 for g in ansatz.layout])


def _draw_paulis(ansatz: AnsatzSpec, hit: np.ndarray, rng: np.random.Generator):
    """Random non-identity Paulis for the gates in ``hit``, as {gate: [(qubit, pauli)]}."""
    errors = {}
    for k in hit:
        g = ansatz.layout[k]
        if len(g.qubits) == 1:
            ops = [(g.qubits[0], int(rng.integers(1, 4)))]
        else:
            code = int(rng.integers(1, 16))  # uniform over the 15 non-identity two-qubit Paulis
            ops = [(g.qubits[0], code // 4), (g.qubits[1], code % 4)]
        errors[int(k)] = [(qb, p) for qb, p in ops if p]
    return errors


def _simulate_with_errors(ansatz, errors, snapshots, ops) -> np.ndarray:
    q = ansatz.q
    layers = ansatz.layers()
    bounds = np.cumsum([0] + [len(layer) for layer in layers])
    first = int(np.searchsorted(bounds, min(errors), side="right")) - 1
    psi = snapshots[first].copy()
    for li in range(first, len(layers)):
        layer = layers[li]
        lo = int(bounds[li])
        local = sorted(k - lo for k in errors if lo <= k < lo + len(layer))
        if not local:
            psi = _apply_op(psi, q, ops[li])
        elif layer[0].name == "ry":
            # ry gates act on distinct qubits, so each error commutes past the rest of the layer
            psi = _apply_op(psi, q, ops[li])
            for k in local:
                for qb, p in errors[lo + k]:
                    _pauli(psi, qb, p)
        else:
            done = 0
            for k in local:
                psi = psi * _cz_sign(q, tuple(g.qubits for g in layer[done : k + 1]))
                for qb, p in errors[lo + k]:
                    _pauli(psi, qb, p)
                done = k + 1
            if done < len(layer):
                psi = psi * _cz_sign(q, tuple(g.qubits for g in layer[done:]))
    return psi


def _draw_outcomes(p: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(p)
    idx = np.searchsorted(cdf, rng.random(k) * cdf[-1], side="right")
    return np.minimum(idx, len(p) - 1)


def noisy_outcomes(
    ansatz: AnsatzSpec,
    params,
    noise: NoiseParams,
    shots: int,
    rng: np.random.Generator,
    trajectories: int = 32,
) -> np.ndarray:
    """Per-shot measured basis integers under Pauli-trajectory noise.

    Shots are split over ``trajectories`` independently drawn gate-error
    patterns. After every gate a depolarising event (probability ``p1`` for
    ry, ``p2`` for cz) applies a uniformly random non-identity Pauli to the
    gate's qubits; each measured bit then flips with ``readout_flip``.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    theta = _check_params(ansatz, params)
    q = ansatz.q
    ideal, (snapshots, ops) = _run_layers(ansatz, theta, keep=True)
    n_traj = max(1, min(trajectories, shots))
    per = np.full(n_traj, shots // n_traj)
    per[: shots % n_traj] += 1

    hits = rng.random((n_traj, len(ansatz.layout))) < _gate_error_probs(ansatz, noise)
    clean_shots = 0
    parts = []
    for t in range(n_traj):
        errors = {k: v for k, v in _draw_paulis(ansatz, np.flatnonzero(hits[t]), rng).items() if v}
        if not errors:
            clean_shots += int(per[t])
            continue
        psi = _simulate_with_errors(ansatz, errors, snapshots, ops)
        parts.append(_draw_outcomes(psi * psi, int(per[t]), rng))
    if clean_shots:
        parts.insert(0, _draw_outcomes(ideal * ideal, clean_shots, rng))
    outcomes = np.concatenate(parts).astype(np.int64)

    if noise.readout_flip > 0.0:
        flips = rng.random((shots, q)) < noise.readout_flip
        weights = 1 << np.arange(q - 1, -1, -1, dtype=np.int64)
        outcomes ^= flips.astype(np.int64) @ weights
    return outcomes


def noisy_histogram(ansatz, params, noise, shots, rng, trajectories=32) -> np.ndarray:
    """Shot histogram indexed by basis integer; a disabled channel reduces to sample_counts."""
    if noise.is_zero:
        state = simulate_statevector(ansatz, params)
        return sample_counts(state, shots, rng).to_array(ansatz.q)
    outcomes = noisy_outcomes(ansatz, params, noise, shots, rng, trajectories)
    return np.bincount(outcomes, minlength=2**ansatz.q).astype(np.int64)


def noisy_sample(
    ansatz: AnsatzSpec,
    params,
    noise: NoiseParams,
    shots: int,
    rng: np.random.Generator,
    trajectories: int = 32,
) -> Counts:
    hist = noisy_histogram(ansatz, params, noise, shots, rng, trajectories)
    return Counts.from_array(hist, ansatz.q)
