"""Measurement series and binned error analysis."""
import math
from dataclasses import dataclass, field

import numpy as np

FIELDS = ("kinetic", "potential", "virial_d", "q2", "acceptance")


@dataclass
class ObservableSeries:
    """Per-measurement path averages produced by a chain.

    ``kinetic`` is the path mean of the relativistic link estimator and so
    includes the rest mass; ``potential``, ``virial_d`` and ``q2`` are site
    means.  ``metadata`` echoes the run configuration.
    """

    sweep: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    virial_d: np.ndarray
    q2: np.ndarray
    acceptance: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sweep = np.asarray(self.sweep, dtype=np.int64)
        n = len(self.sweep)
        for name in FIELDS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"column {name!r} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)
        if n > 1 and np.any(np.diff(self.sweep) <= 0):
            raise ValueError("sweep indices must be strictly increasing")

    def __len__(self):
        return len(self.sweep)

    @property
    def total_energy(self) -> np.ndarray:
        return self.kinetic + self.potential

    def tail(self, start: int) -> "ObservableSeries":
        return ObservableSeries(
            self.sweep[start:], *(getattr(self, f)[start:] for f in FIELDS),
            metadata=dict(self.metadata),
        )


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_bins: int
    bin_size: int

    def within(self, value: float, n_sigma: float = 3.0) -> bool:
        return abs(self.mean - value) <= n_sigma * self.std_error

    def __str__(self):
        return f"{self.mean:.6g} +/- {self.std_error:.2g}"


def binned_estimate(series, bin_size: int) -> Estimate:
    """Mean and blocked standard error of a correlated series.

    Trailing records that do not fill a whole bin are dropped.
    """
    x = np.asarray(series, dtype=float)
    bin_size = int(bin_size)
    if bin_size < 1:
        raise ValueError("bin_size must be >= 1")
    n_bins = len(x) // bin_size
    if n_bins < 2:
        raise ValueError(f"need at least 2 bins, have {n_bins} (n={len(x)}, bin_size={bin_size})")
    means = x[: n_bins * bin_size].reshape(n_bins, bin_size).mean(axis=1)
    err = float(np.std(means, ddof=1) / math.sqrt(n_bins))
    return Estimate(float(means.mean()), err, n_bins, bin_size)


def auto_binned_estimate(series, min_bins: int = 32, plateau_tol: float = 0.05) -> Estimate:
    """Double the bin size until the error estimate stops growing.

    Stops at the first doubling that changes the error by less than
    ``plateau_tol`` (relative), or when fewer than ``min_bins`` bins would
    remain; the largest error seen is returned so the estimate never
    undercounts autocorrelation.
    """
    x = np.asarray(series, dtype=float)
    size = 1
    best = binned_estimate(x, size)
    while len(x) // (2 * size) >= min_bins:
        nxt = binned_estimate(x, 2 * size)
        size *= 2
        grew = nxt.std_error > best.std_error
        change = abs(nxt.std_error - best.std_error) / max(best.std_error, 1e-300)
        if grew:
            best = nxt
        if change < plateau_tol:
            break
    return best


def nonrelativistic_kinetic(series: ObservableSeries) -> np.ndarray:
    """Kinetic records with the rest mass removed, K_nr = <sqrt(p^2+m^2)> - m."""
    return series.kinetic - float(series.metadata["mass"])


def virial_residual(series: ObservableSeries, bin_size: int | None = None) -> Estimate:
    """Binned estimate of 2 K_nr + V + D.

    Zero (within errors) for a bound particle in the non-relativistic
    regime.  ``bin_size=None`` picks the bin size automatically.
    """
    r = 2.0 * nonrelativistic_kinetic(series) + series.potential + series.virial_d
    if bin_size is None:
        return auto_binned_estimate(r)
    return binned_estimate(r, bin_size)
