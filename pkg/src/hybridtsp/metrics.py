"""Approximation ratio, percent gap and per-size summary statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

BOOTSTRAP_RESAMPLES = 10_000


def approximation_ratio(c_solver: float, c_classical: float) -> float:
    if not c_classical > 0:
        raise ValueError(f"classical cost must be positive, got {c_classical}")
    return c_solver / c_classical


def percent_gap(rho: float) -> float:
    return (rho - 1.0) * 100.0


@dataclass(frozen=True)
class SummaryStats:
    median: float
    q1: float
    q3: float
    iqr: float
    sd: float
    ci_low: float
    ci_high: float
    count: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SummaryStats":
        return cls(**data)


def summarize(samples, bootstrap_resamples: int = BOOTSTRAP_RESAMPLES, rng=None) -> SummaryStats:
    """Median, quartiles, sample SD and a bootstrap 95% CI for the median.

    Quartiles interpolate linearly between order statistics; the CI takes the
    2.5th and 97.5th percentiles of the resampled medians.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("cannot summarise an empty sample")
    rng = np.random.default_rng(0) if rng is None else rng
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    if np.all(x == x[0]):
        lo = hi = float(x[0])
        q1 = med = q3 = x[0]
    else:
        # resample in chunks to bound memory for large samples
        meds = []
        chunk = max(1, 2_000_000 // x.size)
        for start in range(0, bootstrap_resamples, chunk):
            k = min(chunk, bootstrap_resamples - start)
            idx = rng.integers(0, x.size, size=(k, x.size))
            meds.append(np.median(x[idx], axis=1))
        lo, hi = np.percentile(np.concatenate(meds), [2.5, 97.5])
    return SummaryStats(
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        iqr=float(q3 - q1),
        sd=sd,
        ci_low=float(lo),
        ci_high=float(hi),
        count=int(x.size),
    )

