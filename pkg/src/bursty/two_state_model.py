"""Continuous-time two-state (normal/excited) event model.

A trajectory of ``n`` events has hidden states ``S_0..S_{n-1}`` and
durations ``d_1..d_{n-1}``. Duration ``d_i`` is Exponential with the rate of
state ``S_{i-1}``; after each emission the next state is excited with
probability ``p0`` (from normal) or ``p1`` (from excited). Run lengths in
each state are therefore geometric. The last state emits no observed
duration.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Union

import numpy as np

from . import _kernels
from .errors import ZeroDurationWarning

__all__ = [
    "EPSILON",
    "Trajectory",
    "TwoStateParams",
    "clamp_durations",
    "loglik",
    "read_trajectory_csv",
    "run_lengths",
    "simulate",
]

EPSILON = 1e-6

Initial = Union[Literal["0", "1", "random"], int]


@dataclass(frozen=True)
class TwoStateParams:
    """Rates ``lambda0`` (normal) and ``lambda1`` (excited); ``p_j`` is the
    probability that the next state is excited given current state ``j``."""

    lambda0: float
    lambda1: float
    p0: float
    p1: float

    def __post_init__(self):
        for name in ("lambda0", "lambda1"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("p0", "p1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def as_tuple(self):
        return (self.lambda0, self.lambda1, self.p0, self.p1)


@dataclass(frozen=True)
class Trajectory:
    event_times: np.ndarray
    states: np.ndarray
    params_used: TwoStateParams
    seed: Optional[int] = None

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.event_times)

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["event_time", "hidden_state"])
        for t, s in zip(self.event_times, self.states):
            w.writerow([repr(float(t)), int(s)])


def _initial_state(initial, rng) -> int:
    if initial in ("random", None):
        return int(rng.random() < 0.5)
    if initial in (0, 1, "0", "1"):
        return int(initial)
    raise ValueError(f"initial must be 0, 1 or 'random', got {initial!r}")


def simulate(params: TwoStateParams, n_events: int, initial: Initial = "random", seed=None) -> Trajectory:
    """Draw a trajectory of ``n_events`` events starting at time 0.

    Bit-reproducible for a fixed ``seed``. The generator is consumed in the
    order: initial state (only when random), ``n_events - 1`` transition
    uniforms, ``n_events - 1`` unit exponentials.
    """
    if n_events < 1:
        raise ValueError(f"n_events must be >= 1, got {n_events}")
    rng = np.random.default_rng(seed)
    s0 = _initial_state(initial, rng)
    u = rng.random(n_events - 1)
    e = rng.standard_exponential(n_events - 1)
    states = _kernels.markov_states(s0, u, params.p0, params.p1)
    rates = np.where(states[:-1] == 1, params.lambda1, params.lambda0)
    times = np.concatenate(([0.0], np.cumsum(e / rates)))
    seed_out = seed if isinstance(seed, (int, np.integer)) else None
    return Trajectory(times, states, params, seed_out)


def run_lengths(traj_or_states) -> Dict[int, List[int]]:
    """Lengths of maximal runs of equal states, keyed by state.

    >>> run_lengths(np.array([0, 0, 1, 1, 1, 0]))
    {0: [2, 1], 1: [3]}
    """
    states = traj_or_states.states if isinstance(traj_or_states, Trajectory) else np.asarray(traj_or_states)
    out: Dict[int, List[int]] = {0: [], 1: []}
    if states.size == 0:
        return out
    change = np.flatnonzero(np.diff(states) != 0) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [states.size])))
    for s, length in zip(states[starts], lengths):
        out[int(s)].append(int(length))
    return out


def clamp_durations(durations, eps: float = EPSILON) -> np.ndarray:
    """Replace non-positive durations with ``eps``, warning when any are hit."""
    d = np.asarray(durations, dtype=np.float64)
    bad = d <= 0
    if bad.any():
        warnings.warn(
            f"{int(bad.sum())} zero or negative durations clamped to {eps:g}; "
            "consider the jitter tie policy",
            ZeroDurationWarning,
            stacklevel=3,
        )
        d = np.where(bad, eps, d)
    return d


def loglik(event_times, states, params: TwoStateParams, eps: float = EPSILON) -> float:
    """Joint log-likelihood of hidden states and durations.

    ``log 0.5 + sum_i [log P(S_i | S_{i-1}) + log f(d_i | S_{i-1})]`` with
    ``f`` the exponential density.
    """
    t = np.asarray(event_times, dtype=np.float64)
    s = np.asarray(states, dtype=np.int64)
    if t.shape != s.shape:
        raise ValueError("event_times and states must be aligned")
    if s.size == 0:
        raise ValueError("empty trajectory")
    if np.any((s != 0) & (s != 1)):
        raise ValueError("states must be 0 or 1")
    total = math.log(0.5)
    if s.size == 1:
        return total
    d = clamp_durations(np.diff(t), eps)
    prev, nxt = s[:-1], s[1:]
    lam = np.where(prev == 1, params.lambda1, params.lambda0)
    p = np.where(prev == 1, params.p1, params.p0)
    with np.errstate(divide="ignore"):
        trans = np.where(nxt == 1, np.log(p), np.log1p(-p))
    return float(total + np.sum(trans) + np.sum(np.log(lam) - lam * d))


def read_trajectory_csv(stream) -> tuple:
    """Read ``event_time,hidden_state`` rows; returns (times, states)."""
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or [h.strip() for h in header[:2]] != ["event_time", "hidden_state"]:
        raise ValueError("expected header 'event_time,hidden_state'")
    times, states = [], []
    for row in reader:
        if not row:
            continue
        times.append(float(row[0]))
        states.append(int(row[1]))
    return np.asarray(times), np.asarray(states, dtype=np.int64)
