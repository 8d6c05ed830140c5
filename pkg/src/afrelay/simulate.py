"""Monte Carlo reference for the relay mutual information.

Channels are drawn batch by batch. Batch ``b`` of stream ``j`` uses its own
generator seeded from ``(seed, j, b)``, so with a fixed batch size every
sample is a pure function of ``(seed, j, index)`` and results do not depend
on how batches are scheduled across workers. Per-batch central-moment sums
are merged in batch order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ValidationError
from .linalg import hermitian_sqrt, logdet_hpd
from .model import ChannelConfig, EffectiveCovariances

DEFAULT_BATCH_SIZE = 1024


@dataclass(frozen=True)
class SeededRng:
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}", "seed")
        if int(self.stream) < 0:
            raise ValidationError("stream id must be nonnegative", "stream")

    def generator(self, batch: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), int(batch)))
        return np.random.Generator(np.random.PCG64(ss))


def _as_generator(rng):
    return rng.generator() if isinstance(rng, SeededRng) else rng


def sample_white_gaussian(rows: int, cols: int, rng, batch: Optional[int] = None) -> np.ndarray:
    """I.i.d. unit-variance circularly symmetric complex Gaussian entries.

    With ``batch`` set, returns a ``(batch, rows, cols)`` stack.
    """
    gen = _as_generator(rng)
    shape = (rows, cols) if batch is None else (batch, rows, cols)
    z = gen.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


@dataclass(frozen=True)
class ChannelSample:
    H1: np.ndarray  # n_r x n_s (or stacked)
    H2: np.ndarray  # n_d x n_r (or stacked)


class _Coloring:
    def __init__(self, covs: EffectiveCovariances):
        self.Rr = hermitian_sqrt(covs.R_r)
        self.Ts = hermitian_sqrt(covs.T_s)
        self.Rd = hermitian_sqrt(covs.R_d)
        self.Tr = hermitian_sqrt(covs.T_r)


def _draw(config, coloring, gen, batch):
    Hw1 = sample_white_gaussian(config.n_r, config.n_s, gen, batch)
    Hw2 = sample_white_gaussian(config.n_d, config.n_r, gen, batch)
    return ChannelSample(H1=coloring.Rr @ Hw1 @ coloring.Ts, H2=coloring.Rd @ Hw2 @ coloring.Tr)


def sample_channels(config: ChannelConfig, covs: EffectiveCovariances, rng,
                    batch: Optional[int] = None) -> ChannelSample:
    """Kronecker-correlated channel pair ``H1 = R_r^1/2 Hw1 T_s^1/2``, ``H2 = R_d^1/2 Hw2 T_r^1/2``."""
    return _draw(config, _Coloring(covs), _as_generator(rng), batch)


def _ctrans(A):
    return np.swapaxes(A, -1, -2).conj()


def mutual_information_sample(config: ChannelConfig, sample: ChannelSample):
    """Per-realization mutual information in nats (array for stacked samples)."""
    H1, H2 = sample.H1, sample.H2
    I = np.eye(config.n_d)
    noise = I + (config.alpha / config.n_r) * (H2 @ _ctrans(H2))
    K = H2 @ H1
    signal = noise + (config.rho * config.alpha / (config.n_s * config.n_r)) * (K @ _ctrans(K))
    mi = logdet_hpd(signal, "signal covariance") - logdet_hpd(noise, "noise covariance")
    # clip round-off below zero; the exact value is nonnegative
    mi = np.maximum(mi, 0.0)
    return float(mi) if np.ndim(mi) == 0 else mi


# --------------------------------------------------------------------------
# cumulants


@dataclass(frozen=True)
class CumulantEstimate:
    k1: float
    k2: float
    k3: float
    k4: Optional[float]
    se1: float
    se2: float
    count: int

    @property
    def skewness(self) -> float:
        return self.k3 / self.k2**1.5 if self.k2 > 0 else float("nan")

    @property
    def excess_kurtosis(self) -> float:
        if self.k4 is None or self.k2 <= 0:
            return float("nan")
        return self.k4 / self.k2**2


@dataclass(frozen=True)
class Moments:
    """Count, mean and central-moment sums M2..M4 of a sample; mergeable."""

    count: int = 0
    mean: float = 0.0
    M2: float = 0.0
    M3: float = 0.0
    M4: float = 0.0

    @classmethod
    def from_samples(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float).ravel()
        if x.size == 0:
            return cls()
        mu = float(np.mean(x))
        d = x - mu
        d2 = d * d
        return cls(x.size, mu, float(d2.sum()), float((d2 * d).sum()), float((d2 * d2).sum()))

    def merge(self, other: "Moments") -> "Moments":
        na, nb = self.count, other.count
        if na == 0:
            return other
        if nb == 0:
            return self
        n = na + nb
        delta = other.mean - self.mean
        mean = self.mean + delta * nb / n
        M2 = self.M2 + other.M2 + delta**2 * na * nb / n
        M3 = (self.M3 + other.M3 + delta**3 * na * nb * (na - nb) / n**2
              + 3.0 * delta * (na * other.M2 - nb * self.M2) / n)
        M4 = (self.M4 + other.M4 + delta**4 * na * nb * (na * na - na * nb + nb * nb) / n**3
              + 6.0 * delta**2 * (na * na * other.M2 + nb * nb * self.M2) / n**2
              + 4.0 * delta * (na * other.M3 - nb * self.M3) / n)
        return Moments(n, mean, M2, M3, M4)

    def cumulants(self, with_k4: bool = True) -> CumulantEstimate:
        n = self.count
        minimum = 4 if with_k4 else 3
        if n < minimum:
            raise ValueError(f"need at least {minimum} samples for cumulant estimates, got {n}")
        k2 = self.M2 / (n - 1)
        k3 = n * self.M3 / ((n - 1) * (n - 2))
        k4 = None
        if with_k4:
            k4 = (n * (n + 1) * self.M4 - 3.0 * (n - 1) * self.M2**2) / ((n - 1) * (n - 2) * (n - 3))
        return CumulantEstimate(
            k1=self.mean, k2=k2, k3=k3, k4=k4,
            se1=math.sqrt(k2 / n), se2=k2 * math.sqrt(2.0 / (n - 1)), count=n,
        )


def estimate_cumulants(samples, with_k4: bool = True) -> CumulantEstimate:
    """Unbiased k-statistics k1..k4 with Gaussian-approximate standard errors.

    ``with_k4=False`` drops k4 and lowers the minimum sample count to 3.
    """
    return Moments.from_samples(samples).cumulants(with_k4)


# --------------------------------------------------------------------------
# distribution checks


class EmpiricalCDF:
    """Right-continuous empirical distribution function."""

    def __init__(self, samples):
        x = np.sort(np.asarray(samples, dtype=float).ravel())
        if x.size == 0:
            raise ValueError("empirical CDF of an empty sample")
        self.values = x
        self.ranks = np.arange(1, x.size + 1) / x.size

    def __call__(self, x):
        out = np.searchsorted(self.values, x, side="right") / self.values.size
        return float(out) if np.ndim(out) == 0 else out

    def __len__(self):
        return self.values.size


def empirical_cdf(samples) -> EmpiricalCDF:
    return EmpiricalCDF(samples)


def ks_distance(samples, mean: float, variance: float) -> float:
    """Sup distance between the sample ECDF and ``N(mean, variance)``."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance!r}")
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("KS distance of an empty sample")
    F = ndtr((x - mean) / math.sqrt(variance))
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# --------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class MonteCarloResult:
    cumulants: CumulantEstimate
    moments: Moments
    samples: Optional[np.ndarray] = None


def _run_batch(config, coloring, rng: SeededRng, b, size):
    gen = rng.generator(b)
    mi = mutual_information_sample(config, _draw(config, coloring, gen, size))
    return Moments.from_samples(mi), mi


def monte_carlo(config: ChannelConfig, samples: int, seed: int = 0, *, stream: int = 0,
                covs: EffectiveCovariances = None, batch_size: int = DEFAULT_BATCH_SIZE,
                workers: int = 1, keep_samples: bool = False) -> MonteCarloResult:
    """Draw ``samples`` channel realizations and estimate the MI cumulants."""
    if samples < 4:
        raise ValidationError(f"need at least 4 samples, got {samples}", "samples")
    if batch_size < 1:
        raise ValidationError("batch size must be positive", "batch_size")
    covs = covs if covs is not None else config.effective_covariances()
    coloring = _Coloring(covs)
    rng = SeededRng(seed, stream)
    sizes = [batch_size] * (samples // batch_size)
    if samples % batch_size:
        sizes.append(samples % batch_size)

    def job(b):
        return _run_batch(config, coloring, rng, b, sizes[b])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]

    total = Moments()
    for m, _ in parts:
        total = total.merge(m)
    values = np.concatenate([mi for _, mi in parts]) if keep_samples else None
    return MonteCarloResult(cumulants=total.cumulants(), moments=total, samples=values)


def write_samples(path, values) -> None:
    """One value per line, shortest round-trip decimal text."""
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in values))


def read_samples(path) -> np.ndarray:
    return np.array([float(line) for line in Path(path).read_text().split()], dtype=float)
