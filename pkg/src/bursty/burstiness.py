"""Burstiness and memory of inter-event times with Monte Carlo null ranges.

``delta = (sigma - m) / (sigma + m)`` with population moments, and ``mu``
is the lag-1 Pearson correlation of consecutive durations. Both are scale
invariant, so a homogeneous-Poisson null only needs the event count: the
envelope is built from unit-rate exponential durations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np

from .errors import InsufficientDataError, UndefinedStatisticError
from .event_series import InterEventSeries

__all__ = [
    "BinnedInterEventProfile",
    "BurstinessMemory",
    "assess",
    "binned_profile",
    "burstiness_delta",
    "memory_mu",
    "mc_null_envelope",
    "nearest_rank",
    "trial_seed",
    "write_delta_mu_csv",
]

_CHUNK = 1000


def _durations(x) -> np.ndarray:
    if isinstance(x, InterEventSeries):
        return x.durations
    return np.asarray(x, dtype=np.float64)


def burstiness_delta(iets) -> float:
    d = _durations(iets)
    if d.size < 2:
        raise InsufficientDataError(f"need at least 2 durations, got {d.size}")
    m = d.mean()
    s = d.std()
    if m + s == 0:
        raise UndefinedStatisticError("burstiness undefined for all-zero durations")
    return float((s - m) / (s + m))


def memory_mu(iets) -> float:
    """Lag-1 correlation between ``d[:-1]`` and ``d[1:]``."""
    d = _durations(iets)
    if d.size < 3:
        raise InsufficientDataError(f"need at least 3 durations, got {d.size}")
    # exact test: a constant run leaves rounding noise in the centred values
    if np.ptp(d[:-1]) == 0 or np.ptp(d[1:]) == 0:
        raise UndefinedStatisticError("memory undefined: a lagged subsequence has zero variance")
    a = d[:-1] - d[:-1].mean()
    b = d[1:] - d[1:].mean()
    va = np.mean(a * a)
    vb = np.mean(b * b)
    mu = np.mean(a * b) / math.sqrt(va * vb)
    return float(min(max(mu, -1.0), 1.0))


def _delta_rows(x: np.ndarray) -> np.ndarray:
    m = x.mean(axis=1)
    s = x.std(axis=1)
    return (s - m) / (s + m)


def _mu_rows(x: np.ndarray) -> np.ndarray:
    a = x[:, :-1] - x[:, :-1].mean(axis=1, keepdims=True)
    b = x[:, 1:] - x[:, 1:].mean(axis=1, keepdims=True)
    return np.mean(a * b, axis=1) / np.sqrt(np.mean(a * a, axis=1) * np.mean(b * b, axis=1))


def trial_seed(seed: int, trial: int) -> np.random.SeedSequence:
    """Generator seed for one Monte Carlo trial.

    The mixing function is numpy's ``SeedSequence`` with entropy ``seed``
    and spawn key ``(trial,)``, i.e. the ``trial``-th child of
    ``SeedSequence(seed).spawn(...)``. Trials can be computed in any order
    or in parallel and give identical values.
    """
    return np.random.SeedSequence(seed, spawn_key=(trial,))


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank empirical quantile: the ``ceil(q*N)``-th smallest value."""
    n = sorted_values.size
    k = math.ceil(q * n - 1e-9)
    return float(sorted_values[min(max(k, 1), n) - 1])


@lru_cache(maxsize=64)
def _envelope(n_events: int, trials: int, seed: int, coverage: float):
    k = n_events - 1
    deltas = np.empty(trials)
    mus = np.empty(trials)
    for start in range(0, trials, _CHUNK):
        stop = min(start + _CHUNK, trials)
        x = np.empty((stop - start, k))
        for row, trial in enumerate(range(start, stop)):
            x[row] = np.random.default_rng(trial_seed(seed, trial)).standard_exponential(k)
        deltas[start:stop] = _delta_rows(x)
        mus[start:stop] = _mu_rows(x)
    deltas.sort()
    mus.sort()
    tail = (1.0 - coverage) / 2.0
    return (
        (nearest_rank(deltas, tail), nearest_rank(deltas, 1.0 - tail)),
        (nearest_rank(mus, tail), nearest_rank(mus, 1.0 - tail)),
    )


def mc_null_envelope(
    n_events: int, trials: int = 10_000, seed: int = 0, coverage: float = 0.95
) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Central ``coverage`` ranges of delta and mu under a Poisson null.

    Each trial draws ``n_events - 1`` i.i.d. unit exponential durations.
    Returns ``((delta_lo, delta_hi), (mu_lo, mu_hi))``. Results are cached
    on the arguments.
    """
    if n_events < 4:
        raise ValueError(f"n_events must be >= 4, got {n_events}")
    if trials < 100:
        raise ValueError(f"trials must be >= 100, got {trials}")
    if not 0.0 < coverage < 1.0:
        raise ValueError(f"coverage must lie in (0, 1), got {coverage}")
    return _envelope(int(n_events), int(trials), int(seed), float(coverage))


@dataclass(frozen=True)
class BurstinessMemory:
    delta: float
    mu: Optional[float]
    mc_range_delta: Tuple[float, float]
    mc_range_mu: Tuple[float, float]
    trials: int
    seed: int
    coverage: float = 0.95

    @property
    def significant_delta(self) -> bool:
        lo, hi = self.mc_range_delta
        return not lo <= self.delta <= hi

    @property
    def significant_mu(self) -> bool:
        if self.mu is None:
            return False
        lo, hi = self.mc_range_mu
        return not lo <= self.mu <= hi

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mc_range_delta"] = list(self.mc_range_delta)
        out["mc_range_mu"] = list(self.mc_range_mu)
        out["significant_delta"] = self.significant_delta
        out["significant_mu"] = self.significant_mu
        return out


def assess(iets, trials: int = 10_000, seed: int = 0, coverage: float = 0.95) -> BurstinessMemory:
    """Delta and mu with envelopes matched on event count.

    An observed value exactly on an envelope endpoint is not significant.
    ``mu`` is None when a lagged subsequence is constant (e.g. perfectly
    regular durations); delta is still assessed.
    """
    d = _durations(iets)
    delta = burstiness_delta(d)
    if d.size < 3:
        raise InsufficientDataError(f"need at least 3 durations, got {d.size}")
    try:
        mu = memory_mu(d)
    except UndefinedStatisticError:
        mu = None
    rd, rm = mc_null_envelope(d.size + 1, trials, seed, coverage)
    return BurstinessMemory(delta, mu, rd, rm, int(trials), int(seed), float(coverage))


@dataclass(frozen=True)
class BinnedInterEventProfile:
    bin_edges: np.ndarray
    empirical_probs: np.ndarray
    exponential_probs: np.ndarray

    def to_dict(self) -> dict:
        return {
            "bin_edges": self.bin_edges.tolist(),
            "empirical_probs": self.empirical_probs.tolist(),
            "exponential_probs": self.exponential_probs.tolist(),
        }

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "empirical", "exponential"])
        for lo, hi, pe, px in zip(self.bin_edges[:-1], self.bin_edges[1:], self.empirical_probs, self.exponential_probs):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(pe)), repr(float(px))])


def binned_profile(iets) -> BinnedInterEventProfile:
    """Mean-normalized durations in ``ceil(sqrt(k))`` equal-width bins.

    The exponential column holds unit-rate CDF differences over the same
    edges, with the last bin taking the whole upper tail.
    """
    d = _durations(iets)
    k = d.size
    if k < 4:
        raise InsufficientDataError(f"need at least 4 durations, got {k}")
    mean = d.mean()
    if not mean > 0:
        raise UndefinedStatisticError("binned profile undefined for all-zero durations")
    x = d / mean
    nbins = math.ceil(math.sqrt(k))
    edges = np.linspace(0.0, float(x.max()), nbins + 1)
    counts, _ = np.histogram(x, bins=edges)
    empirical = counts / k
    cdf = -np.expm1(-edges)
    cdf[-1] = 1.0
    return BinnedInterEventProfile(edges, empirical, np.diff(cdf))


def write_delta_mu_csv(stream, rows) -> None:
    """(label, delta, mu) rows for burstiness-memory scatter overlays."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["label", "delta", "mu"])
    for label, delta, mu in rows:
        w.writerow([label, repr(float(delta)), repr(float(mu))])
