"""Gibbs sampler for the two-state model from observed durations.

Each iteration sweeps the hidden states site by site, then draws the rates
and transition probabilities from their conjugate posteriors:

    lambda_s | S, d ~ Gamma(shape_s + n_s, rate_s + sum of d emitted in s)
    p_j | S        ~ Beta(a + #(j -> 1), b + #(j -> 0))

Gamma priors use the shape-rate convention. Label ordering (excited state
faster) comes from the asymmetric rate priors and, by default, from starting
each chain with its prior-drawn rates in that order; no sampled draw is
rejected or reordered.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from . import _kernels
from .errors import ConvergenceWarning, InsufficientDataError, UndefinedStatisticError
from .two_state_model import EPSILON, TwoStateParams, clamp_durations

__all__ = [
    "PARAM_NAMES",
    "ChainResult",
    "PosteriorSamples",
    "PriorConfig",
    "fit",
    "gelman_rubin",
    "rate_posterior",
    "run_chain",
    "sample_states",
    "site_probability",
    "transition_posterior",
    "update_rates",
    "update_transitions",
]

PARAM_NAMES = ("lambda0", "lambda1", "p0", "p1")


@dataclass(frozen=True)
class PriorConfig:
    """Beta(p_a, p_b) on both transition probabilities; Gamma(shape, rate)
    on each rate."""

    p_a: float = 1.0
    p_b: float = 1.0
    lambda0_shape: float = 1.0
    lambda0_rate: float = 2.0
    lambda1_shape: float = 3.0
    lambda1_rate: float = 2.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _as_states(states) -> np.ndarray:
    s = np.ascontiguousarray(states, dtype=np.int64)
    if np.any((s != 0) & (s != 1)):
        raise ValueError("states must be 0 or 1")
    return s


def _check_aligned(durations, states):
    if durations.size != states.size - 1:
        raise ValueError(
            f"expected len(durations) == len(states) - 1, got {durations.size} and {states.size}"
        )


# ---------------------------------------------------------------- states


def site_probability(durations, states, params: TwoStateParams, i: int) -> float:
    """P(S_i = 1 | all other states, durations, params)."""
    d = np.ascontiguousarray(durations, dtype=np.float64)
    s = _as_states(states)
    _check_aligned(d, s)
    w0, w1 = _kernels.site_log_weights(d, s, i, *params.as_tuple())
    return float(_kernels.prob_excited(w0, w1))


def sample_states(durations, current_states, params: TwoStateParams, seed=None) -> np.ndarray:
    """One sequential sweep over all sites; returns a new state array.

    Site ``i`` is drawn from P(S_i | S_{i-1}, S_{i+1}, d_{i+1}); the first
    site uses the uniform initial prior instead of a transition-in term and
    the last site has no emission term.
    """
    d = np.ascontiguousarray(durations, dtype=np.float64)
    s = _as_states(current_states).copy()
    _check_aligned(d, s)
    u = _rng(seed).random(s.size)
    bad = _kernels.gibbs_sweep(d, s, u, *params.as_tuple())
    if bad >= 0:
        raise UndefinedStatisticError(f"state conditional at site {bad} is zero for both states")
    return s


# ------------------------------------------------------------ parameters


def rate_posterior(states, durations, priors: PriorConfig) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Gamma (shape, rate) posteriors of lambda0 and lambda1."""
    s = _as_states(states)
    d = np.ascontiguousarray(durations, dtype=np.float64)
    _check_aligned(d, s)
    n0, n1, s0, s1, *_ = _kernels.sufficient_stats(s, d)
    return (
        (priors.lambda0_shape + n0, priors.lambda0_rate + s0),
        (priors.lambda1_shape + n1, priors.lambda1_rate + s1),
    )


def transition_posterior(states, priors: PriorConfig) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Beta (a, b) posteriors of p0 and p1 from consecutive state pairs."""
    s = _as_states(states)
    if s.size < 2:
        raise InsufficientDataError("need at least 2 states")
    *_, k00, k01, k10, k11 = _kernels.sufficient_stats(s, np.zeros(s.size - 1))
    return (
        (priors.p_a + k01, priors.p_b + k00),
        (priors.p_a + k11, priors.p_b + k10),
    )


def update_rates(states, durations, priors: PriorConfig, seed=None) -> Tuple[float, float]:
    rng = _rng(seed)
    (a0, b0), (a1, b1) = rate_posterior(states, durations, priors)
    return float(rng.gamma(a0, 1.0 / b0)), float(rng.gamma(a1, 1.0 / b1))


def update_transitions(states, priors: PriorConfig, seed=None) -> Tuple[float, float]:
    rng = _rng(seed)
    (a0, b0), (a1, b1) = transition_posterior(states, priors)
    return float(rng.beta(a0, b0)), float(rng.beta(a1, b1))


# ----------------------------------------------------------------- chains


@dataclass
class ChainResult:
    draws: np.ndarray  # (iterations, 4) in PARAM_NAMES order
    occupancy: np.ndarray  # per-site excited frequency from ``occupancy_from`` on
    final_states: np.ndarray
    initial: TwoStateParams


INITS = ("ordered-prior", "prior")


def _prior_draw(priors: PriorConfig, rng, init: str = "ordered-prior") -> TwoStateParams:
    if init not in INITS:
        raise ValueError(f"unknown init {init!r}; expected one of {INITS}")
    lam0 = rng.gamma(priors.lambda0_shape, 1.0 / priors.lambda0_rate)
    lam1 = rng.gamma(priors.lambda1_shape, 1.0 / priors.lambda1_rate)
    p0 = rng.beta(priors.p_a, priors.p_b)
    p1 = rng.beta(priors.p_a, priors.p_b)
    # A chain started with lambda0 > lambda1 settles in the label-swapped
    # mode and stays there; the ordering applies to the start only.
    if init == "ordered-prior" and lam0 > lam1:
        lam0, lam1 = lam1, lam0
    return TwoStateParams(float(lam0), float(lam1), float(p0), float(p1))


def run_chain(
    durations,
    priors: PriorConfig = PriorConfig(),
    iterations: int = 5000,
    seed=None,
    occupancy_from: int = 0,
    eps: float = EPSILON,
    init: str = "ordered-prior",
) -> ChainResult:
    """Run one Gibbs chain from a random start.

    Parameters start at independent prior draws and states at i.i.d.
    Bernoulli(0.5). With ``init="ordered-prior"`` the two starting rates
    are swapped if needed so the excited rate starts higher; ``"prior"``
    keeps the raw draws. Each iteration is [states -> rates -> transitions]
    and records the parameters once. Zero durations are clamped to ``eps``.
    """
    d = np.ascontiguousarray(clamp_durations(durations, eps), dtype=np.float64)
    if d.size < 2:
        raise InsufficientDataError(f"need at least 2 durations, got {d.size}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = _rng(seed)
    params = _prior_draw(priors, rng, init)
    initial = params
    n = d.size + 1
    states = (rng.random(n) < 0.5).astype(np.int64)
    draws = np.empty((iterations, 4))
    occupied = np.zeros(n, dtype=np.int64)
    for it in range(iterations):
        u = rng.random(n)
        bad = _kernels.gibbs_sweep(d, states, u, params.lambda0, params.lambda1, params.p0, params.p1)
        if bad >= 0:
            raise UndefinedStatisticError(f"state conditional at site {bad} is zero for both states")
        n0, n1, s0, s1, k00, k01, k10, k11 = _kernels.sufficient_stats(states, d)
        lam0 = rng.gamma(priors.lambda0_shape + n0, 1.0 / (priors.lambda0_rate + s0))
        lam1 = rng.gamma(priors.lambda1_shape + n1, 1.0 / (priors.lambda1_rate + s1))
        p0 = rng.beta(priors.p_a + k01, priors.p_b + k00)
        p1 = rng.beta(priors.p_a + k11, priors.p_b + k10)
        params = TwoStateParams(lam0, lam1, p0, p1)
        draws[it] = (lam0, lam1, p0, p1)
        if it >= occupancy_from:
            occupied += states
    kept = iterations - occupancy_from
    occupancy = occupied / kept if kept > 0 else np.full(n, np.nan)
    return ChainResult(draws, occupancy, states.copy(), initial)


def gelman_rubin(chains) -> float:
    """Potential scale reduction factor for one parameter.

    ``chains`` has shape (m, L). With W the mean within-chain variance and
    B = L * var(chain means) (both with ddof=1),
    ``R = sqrt(((L-1)/L * W + B/L) / W)``.
    """
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise InsufficientDataError("need at least 2 chains of length >= 2")
    m, L = x.shape
    W = np.mean(np.var(x, axis=1, ddof=1))
    if not W > 0:
        raise UndefinedStatisticError("all chains are constant; R-hat undefined")
    B = L * np.var(np.mean(x, axis=1), ddof=1)
    return float(math.sqrt(((L - 1) / L * W + B / L) / W))


@dataclass
class PosteriorSamples:
    chains: np.ndarray  # (n_chains, iterations, 4)
    burn_in: int
    rhat: Optional[Dict[str, float]]
    rhat_threshold: float = 1.1
    state_occupancy: Optional[np.ndarray] = None
    master_seed: Optional[int] = None
    priors: PriorConfig = field(default_factory=PriorConfig)

    @property
    def iterations_per_chain(self) -> int:
        return int(self.chains.shape[1])

    @property
    def converged(self) -> Optional[bool]:
        if self.rhat is None:
            return None
        return all(v < self.rhat_threshold for v in self.rhat.values())

    @property
    def pooled(self) -> np.ndarray:
        """Post-burn-in draws of all chains, chain-major, shape (N, 4)."""
        return self.chains[:, self.burn_in :, :].reshape(-1, 4)

    def summary(self) -> Dict[str, Dict[str, float]]:
        pooled = self.pooled
        out = {}
        for j, name in enumerate(PARAM_NAMES):
            col = pooled[:, j]
            out[name] = {
                "mean": float(col.mean()),
                "sd": float(col.std(ddof=1)) if col.size > 1 else 0.0,
                "q025": float(np.quantile(col, 0.025)),
                "q975": float(np.quantile(col, 0.975)),
            }
        return out

    def to_dict(self) -> dict:
        return {
            "chains": int(self.chains.shape[0]),
            "iterations_per_chain": self.iterations_per_chain,
            "burn_in": self.burn_in,
            "pooled_count": int(self.pooled.shape[0]),
            "master_seed": self.master_seed,
            "priors": dict(self.priors.__dict__),
            "rhat": self.rhat,
            "rhat_threshold": self.rhat_threshold,
            "converged": self.converged,
            "summary": self.summary(),
            "state_occupancy": None if self.state_occupancy is None else self.state_occupancy.tolist(),
        }

    def write_draws_csv(self, stream, thin: int = 1) -> None:
        """One row per retained draw: chain, iteration, lambda0, lambda1, p0, p1."""
        if thin < 1:
            raise ValueError("thin must be >= 1")
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["chain", "iteration", *PARAM_NAMES])
        for c in range(self.chains.shape[0]):
            for it in range(self.burn_in, self.iterations_per_chain, thin):
                w.writerow([c, it, *(repr(float(v)) for v in self.chains[c, it])])


def fit(
    durations,
    priors: PriorConfig = PriorConfig(),
    chains: int = 10,
    iterations: int = 5000,
    burn_in: int = 1500,
    master_seed: int = 0,
    rhat_threshold: float = 1.1,
    eps: float = EPSILON,
    init: str = "ordered-prior",
) -> PosteriorSamples:
    """Multi-chain posterior sample of the two-state parameters.

    Chain ``c`` is seeded with child ``c`` of ``SeedSequence(master_seed)``,
    so results do not depend on the order chains are run. When R-hat of any
    parameter reaches ``rhat_threshold`` the result is still returned,
    with ``converged == False`` and a :class:`ConvergenceWarning`.
    """
    d = np.asarray(durations, dtype=np.float64)
    if d.size < 2:
        raise InsufficientDataError(f"need at least 2 durations, got {d.size}")
    if chains < 1:
        raise ValueError("chains must be >= 1")
    if not 0 <= burn_in < iterations:
        raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
    d = clamp_durations(d, eps)
    seeds = np.random.SeedSequence(master_seed).spawn(chains)
    results = [run_chain(d, priors, iterations, np.random.default_rng(ss), burn_in, eps, init) for ss in seeds]
    draws = np.stack([r.draws for r in results])
    occupancy = np.mean([r.occupancy for r in results], axis=0)
    rhat = None
    if chains >= 2 and iterations - burn_in >= 2:
        rhat = {name: gelman_rubin(draws[:, burn_in:, j]) for j, name in enumerate(PARAM_NAMES)}
    out = PosteriorSamples(draws, burn_in, rhat, rhat_threshold, occupancy, master_seed, priors)
    if out.converged is False:
        bad = {k: round(v, 4) for k, v in rhat.items() if v >= rhat_threshold}
        warnings.warn(f"chains did not converge: R-hat {bad}", ConvergenceWarning, stacklevel=2)
    return out
