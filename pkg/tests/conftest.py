"""Shared Monte Carlo oracles, independent of the event simulator.

Every estimator here samples the photon-pair number directly from the
geometric law and applies binomial thinning with numpy primitives, so the
closed forms in muxsim.hsps are checked against a second, structurally
different implementation.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MCEstimate:
    value: float
    std_error: float
    n: int

    def z_against(self, exact: float) -> float:
        """Z-score using the exact probability for the standard error."""
        se = math.sqrt(max(exact * (1.0 - exact), 0.0) / self.n)
        if se == 0.0:
            return 0.0 if self.value == exact else math.inf
        return (self.value - exact) / se


def _estimate(hits: np.ndarray) -> MCEstimate:
    n = hits.shape[0]
    p = float(hits.mean())
    return MCEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), n)


def sample_source(xi, eta_i, eta_s, n_trials, rng):
    """(idler_click, signal_survivors) arrays for n_trials independent pulses."""
    s = xi * xi
    if s > 0.0:
        pairs = rng.geometric(1.0 - s, size=n_trials) - 1
    else:
        pairs = np.zeros(n_trials, dtype=np.int64)
    idler_click = rng.binomial(pairs, eta_i) >= 1
    signal_surv = rng.binomial(pairs, eta_s)
    return idler_click, signal_surv


def mc_source_probs(xi, eta_i, eta_s, n_trials, seed):
    """MC estimates of the five per-pulse quantities of one source.

    Returns a dict with keys p_trig, p_single, p_multi, p_c, p_a; the
    conditional estimates carry the trigger count as their n.  When no
    trigger occurs the conditionals are reported with n = 0.
    """
    rng = np.random.default_rng(seed)
    idler_click, signal_surv = sample_source(xi, eta_i, eta_s, n_trials, rng)
    # Accidentals: signal click one pulse later (independent pulses, so the
    # shifted-gate estimator is an exact product sampler).
    signal_click = signal_surv >= 1
    acc = idler_click[:-1] & signal_click[1:]

    out = {
        "p_trig": _estimate(idler_click),
        "p_c": _estimate(idler_click & signal_click),
        "p_a": _estimate(acc),
    }
    n_trig = int(idler_click.sum())
    if n_trig > 0:
        cond = signal_surv[idler_click]
        out["p_single"] = _estimate(cond == 1)
        out["p_multi"] = _estimate(cond >= 2)
    else:
        out["p_single"] = MCEstimate(0.0, 0.0, 0)
        out["p_multi"] = MCEstimate(0.0, 0.0, 0)
    return out


def mc_no_trigger_probs(xi, eta_i, eta_s, n_trials, seed):
    """(p_single, p_multi) on the signal arm conditioned on no idler click,
    scaled back to joint probabilities for a stable comparison."""
    rng = np.random.default_rng(seed)
    idler_click, signal_surv = sample_source(xi, eta_i, eta_s, n_trials, rng)
    quiet = ~idler_click
    return (
        _estimate(quiet & (signal_surv == 1)),
        _estimate(quiet & (signal_surv >= 2)),
    )
