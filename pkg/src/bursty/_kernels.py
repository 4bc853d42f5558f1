"""Compiled inner loops. Randomness is supplied by the caller as uniforms so
every stream comes from a numpy ``Generator``."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def markov_states(s0, uniforms, p0, p1):
    n = uniforms.shape[0] + 1
    states = np.empty(n, dtype=np.int64)
    states[0] = s0
    for i in range(1, n):
        p = p1 if states[i - 1] == 1 else p0
        states[i] = 1 if uniforms[i - 1] < p else 0
    return states


@njit(cache=True)
def _log_p(p):
    return math.log(p) if p > 0.0 else -math.inf


@njit(cache=True)
def _log_q(p):
    return math.log1p(-p) if p < 1.0 else -math.inf


@njit(cache=True)
def _site_weights(durations, states, i, ll0, ll1, lam0, lam1, lt):
    # lt[j, k] = log P(next = k | current = j); ll_s = log(lam_s)
    n = states.shape[0]
    w0 = 0.0
    w1 = 0.0
    if i > 0:
        prev = states[i - 1]
        w0 += lt[prev, 0]
        w1 += lt[prev, 1]
    if i < n - 1:
        nxt = states[i + 1]
        d = durations[i]
        w0 += lt[0, nxt] + ll0 - lam0 * d
        w1 += lt[1, nxt] + ll1 - lam1 * d
    return w0, w1


@njit(cache=True)
def _log_transitions(p0, p1):
    lt = np.empty((2, 2))
    lt[0, 0] = _log_q(p0)
    lt[0, 1] = _log_p(p0)
    lt[1, 0] = _log_q(p1)
    lt[1, 1] = _log_p(p1)
    return lt


@njit(cache=True)
def site_log_weights(durations, states, i, lam0, lam1, p0, p1):
    """Unnormalized log P(S_i = 0 | rest), log P(S_i = 1 | rest).

    State i emits durations[i] (absent for the last state); the initial
    state's uniform prior is a constant and is omitted.
    """
    lt = _log_transitions(p0, p1)
    return _site_weights(durations, states, i, math.log(lam0), math.log(lam1), lam0, lam1, lt)


@njit(cache=True)
def prob_excited(w0, w1):
    if w1 == -math.inf and w0 == -math.inf:
        return math.nan
    if w1 == -math.inf:
        return 0.0
    if w0 == -math.inf:
        return 1.0
    diff = w0 - w1
    if diff > 0:
        e = math.exp(-diff)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(diff))


@njit(cache=True)
def gibbs_sweep(durations, states, uniforms, lam0, lam1, p0, p1):
    """One in-place sweep i = 0..n-1. Returns the failing site or -1."""
    n = states.shape[0]
    lt = _log_transitions(p0, p1)
    ll0 = math.log(lam0)
    ll1 = math.log(lam1)
    for i in range(n):
        w0, w1 = _site_weights(durations, states, i, ll0, ll1, lam0, lam1, lt)
        p = prob_excited(w0, w1)
        if p != p:
            return i
        states[i] = 1 if uniforms[i] < p else 0
    return -1


@njit(cache=True)
def sufficient_stats(states, durations):
    """(n0, n1, sum0, sum1, k00, k01, k10, k11) for the conjugate updates."""
    n = states.shape[0]
    n0 = 0
    n1 = 0
    s0 = 0.0
    s1 = 0.0
    k = np.zeros(4, dtype=np.int64)
    for i in range(n - 1):
        if states[i] == 1:
            n1 += 1
            s1 += durations[i]
        else:
            n0 += 1
            s0 += durations[i]
        k[2 * states[i] + states[i + 1]] += 1
    return n0, n1, s0, s1, k[0], k[1], k[2], k[3]
