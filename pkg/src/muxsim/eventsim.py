"""Pulse-level Monte Carlo simulation of the multiplexed source.

Every clock cycle pumps each configured time bin, samples a photon-pair
number per bin, thins both arms through their losses, applies the
amplifier deadtimes and the global feed-forward idle window to the herald
stream, and routes the first heralded bin's signal photons through the
switch network.  This is the independent oracle for the closed forms in
:mod:`muxsim.hsps`, :mod:`muxsim.saturation` and :mod:`muxsim.mux`.

The generator is counter-based (Philox), so a fixed seed gives a
bit-identical trace.
"""

import csv
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .hsps import p_trig_idler
from .mux import MuxTopology, bin_squeezing
from .report import RateReport
from .saturation import DeadtimeChain


class RoutingError(ValueError):
    """Requested delay is not representable by the available loops."""


class ConfigurationError(ValueError):
    """A pulse-train configuration violates an invariant."""


# Delay loops available in the switch network, in units of the bin period.
LOOP_LENGTHS = (1, 2)


@dataclass(frozen=True)
class PulseTrainConfig:
    """Apparatus and run-length settings for one simulation."""

    topology: MuxTopology
    reference_power_mw: float
    n_clock_cycles: int
    deadtime_chain: DeadtimeChain = DeadtimeChain((1e-7, 1e-7))
    idle_time_s: float = 2e-6
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_clock_cycles <= 0:
            raise ConfigurationError(
                f"n_clock_cycles must be > 0, got {self.n_clock_cycles}"
            )
        if self.reference_power_mw < 0.0:
            raise ConfigurationError("reference_power_mw must be >= 0")
        if self.idle_time_s < 0.0:
            raise ConfigurationError("idle_time_s must be >= 0")
        topo = self.topology
        slots = max(b.delay_id for b in topo.bins) + 1
        if slots * topo.bin_spacing_s >= 1.0 / topo.rep_rate_hz:
            raise ConfigurationError(
                f"{slots} bins of {topo.bin_spacing_s}s do not fit in one "
                f"clock period of {1.0 / topo.rep_rate_hz}s"
            )
        for bin_ in topo.bins:
            route_bin(bin_.delay_id, slots)  # raises RoutingError if unroutable


@dataclass
class EventTrace:
    """Per-cycle records of one simulated pulse train."""

    rep_rate_hz: float
    n_cycles: int
    herald_bin: np.ndarray  # candidate bin index per cycle, -1 if none
    accepted: np.ndarray  # herald survived deadtimes and idle window
    back_reflection: np.ndarray  # selected herald was a back-reflection only
    loop_mask: np.ndarray  # bit mask of loops used, -1 when not accepted
    photons_out: np.ndarray  # signal photons surviving to the output slot
    signal_click: np.ndarray  # coincidence click in the gated output slot
    accidental_click: np.ndarray  # click against the herald shifted one cycle

    def to_csv(self, path) -> None:
        """One row per clock cycle."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                [
                    "cycle",
                    "herald_bin",
                    "accepted",
                    "back_reflection",
                    "loop_mask",
                    "photons_out",
                    "signal_click",
                    "accidental_click",
                ]
            )
            for i in range(self.n_cycles):
                writer.writerow(
                    [
                        i,
                        int(self.herald_bin[i]),
                        int(self.accepted[i]),
                        int(self.back_reflection[i]),
                        int(self.loop_mask[i]),
                        int(self.photons_out[i]),
                        int(self.signal_click[i]),
                        int(self.accidental_click[i]),
                    ]
                )


def sample_pair_count(xi: float, rng: np.random.Generator) -> int:
    """Draw a photon-pair number from P(n) = (1 - xi^2) xi^(2n)."""
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"xi must be in [0, 1), got {xi}")
    if xi == 0.0:
        return 0
    return int(rng.geometric(1.0 - xi * xi)) - 1


def thin(n: int, eta: float, rng: np.random.Generator) -> int:
    """Binomial loss channel: each of n photons survives with probability eta."""
    if n < 0:
        raise ValueError(f"photon number must be >= 0, got {n}")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    return int(rng.binomial(n, eta))


def route_bin(herald_bin: int, n_output_bins: int) -> Tuple[Tuple[int, ...], int]:
    """Loop configuration that offsets a heralded bin into the last bin.

    Returns (loop_mask, output_bin) where loop_mask[j] is 1 when loop j
    (lengths in LOOP_LENGTHS bin periods) is switched into the path.
    """
    if not 0 <= herald_bin < n_output_bins:
        raise ValueError(
            f"herald_bin {herald_bin} outside [0, {n_output_bins})"
        )
    delay = (n_output_bins - 1) - herald_bin
    mask = []
    remaining = delay
    for length in reversed(LOOP_LENGTHS):
        if remaining >= length:
            mask.append(1)
            remaining -= length
        else:
            mask.append(0)
    if remaining != 0:
        raise RoutingError(
            f"delay of {delay} bin periods not representable by loops "
            f"{LOOP_LENGTHS}"
        )
    mask.reverse()
    return tuple(mask), n_output_bins - 1


def _deadtime_cycles(duration_s: float, rep_rate_hz: float) -> int:
    """Blocked clock cycles after an event that passes a deadtime stage."""
    return int(round(duration_s * rep_rate_hz))


def _accept_heralds(
    candidate_cycles: np.ndarray,
    rep_rate_hz: float,
    chain: DeadtimeChain,
    idle_time_s: float,
) -> np.ndarray:
    """Boolean acceptance per candidate after sequential refractory stages."""
    blocks = [_deadtime_cycles(d, rep_rate_hz) for d in chain.stages]
    blocks.append(_deadtime_cycles(idle_time_s, rep_rate_hz))
    next_free = [0] * len(blocks)
    accepted = np.zeros(candidate_cycles.shape[0], dtype=bool)
    for i, t in enumerate(candidate_cycles):
        passed = True
        for j, k in enumerate(blocks):
            if t < next_free[j]:
                passed = False
                break
            next_free[j] = t + k + 1
        accepted[i] = passed
    return accepted


def run_pulse_train(config: PulseTrainConfig) -> Tuple[EventTrace, RateReport]:
    """Simulate the full apparatus for config.n_clock_cycles clock cycles."""
    topo = config.topology
    bins = topo.bins
    n = config.n_clock_cycles
    n_bins = len(bins)
    slots = max(b.delay_id for b in bins) + 1
    rng = np.random.Generator(np.random.Philox(config.rng_seed))

    xis = np.array(
        [bin_squeezing(b, config.reference_power_mw) for b in bins]
    )
    eta_path = np.array([b.source.eta_s * b.eta_sw for b in bins])

    # Pair numbers per cycle and bin; signal photon number equals idler
    # photon number before loss (perfect pair correlation).
    n_pairs = np.zeros((n, n_bins), dtype=np.int32)
    idler_click = np.zeros((n, n_bins), dtype=bool)
    back_click = np.zeros((n, n_bins), dtype=bool)
    for k, bin_ in enumerate(bins):
        s = xis[k] * xis[k]
        if s > 0.0:
            n_pairs[:, k] = rng.geometric(1.0 - s, size=n).astype(np.int32) - 1
        surv = rng.binomial(n_pairs[:, k], bin_.source.eta_i)
        idler_click[:, k] = surv >= 1
        f = bin_.source.back_reflection_fraction
        if f > 0.0 and s > 0.0:
            p_back = f * p_trig_idler(xis[k], bin_.source.eta_i)
            back_click[:, k] = rng.random(n) < p_back

    any_idler = idler_click | back_click
    has_candidate = any_idler.any(axis=1)
    first_bin = np.where(has_candidate, np.argmax(any_idler, axis=1), -1)

    candidates = np.flatnonzero(has_candidate)
    accepted_mask = _accept_heralds(
        candidates, topo.rep_rate_hz, config.deadtime_chain, config.idle_time_s
    )
    accepted_cycles = candidates[accepted_mask]
    sel_bins = first_bin[accepted_cycles]

    # Route the selected bin's signal photons; at most one output slot per
    # cycle by construction.
    loop_bits = np.full(n, -1, dtype=np.int8)
    photons_out = np.zeros(n, dtype=np.int32)
    signal_click = np.zeros(n, dtype=bool)
    accidental_click = np.zeros(n, dtype=bool)
    back_flag = np.zeros(n, dtype=bool)

    if accepted_cycles.size:
        delays = np.array([bins[k].delay_id for k in sel_bins])
        masks = np.array(
            [
                sum(bit << j for j, bit in enumerate(route_bin(d, slots)[0]))
                for d in delays
            ],
            dtype=np.int8,
        )
        loop_bits[accepted_cycles] = masks
        out = rng.binomial(
            n_pairs[accepted_cycles, sel_bins], eta_path[sel_bins]
        )
        photons_out[accepted_cycles] = out
        signal_click[accepted_cycles] = out >= 1
        back_flag[accepted_cycles] = back_click[
            accepted_cycles, sel_bins
        ] & ~idler_click[accepted_cycles, sel_bins]

        # Accidental estimate: gate from the herald shifted by one clock
        # cycle; the switch configuration persists through the idle window,
        # so the next cycle's photons from the same bin reach the output.
        in_range = accepted_cycles + 1 < n
        t_next = accepted_cycles[in_range] + 1
        k_next = sel_bins[in_range]
        acc_out = rng.binomial(n_pairs[t_next, k_next], eta_path[k_next])
        accidental_click[accepted_cycles[in_range]] = acc_out >= 1

    accepted = np.zeros(n, dtype=bool)
    accepted[accepted_cycles] = True
    trace = EventTrace(
        rep_rate_hz=topo.rep_rate_hz,
        n_cycles=n,
        herald_bin=first_bin.astype(np.int16),
        accepted=accepted,
        back_reflection=back_flag,
        loop_mask=loop_bits,
        photons_out=photons_out,
        signal_click=signal_click,
        accidental_click=accidental_click,
    )
    return trace, _rates_from_trace(trace)


def _binomial_rate(count: int, n: int, rep_rate_hz: float) -> Tuple[float, float]:
    duration = n / rep_rate_hz
    p = count / n
    err = math.sqrt(max(p * (1.0 - p), 0.0) / n) * rep_rate_hz
    return count / duration, err


def _rates_from_trace(trace: EventTrace) -> RateReport:
    n = trace.n_cycles
    n_trig = int(trace.accepted.sum())
    n_c = int(trace.signal_click.sum())
    n_a = int(trace.accidental_click.sum())
    r_trig, e_trig = _binomial_rate(n_trig, n, trace.rep_rate_hz)
    r_c, e_c = _binomial_rate(n_c, n, trace.rep_rate_hz)
    r_a, e_a = _binomial_rate(n_a, n, trace.rep_rate_hz)
    car = car_err = None
    if n_a > 0:
        car = n_c / n_a
        if n_c > 0:
            car_err = car * math.sqrt(1.0 / n_c + 1.0 / n_a)
    return RateReport(
        r_trig_hz=r_trig,
        r_coincidence_hz=r_c,
        r_accidental_hz=r_a,
        car=car,
        r_trig_err_hz=e_trig,
        r_coincidence_err_hz=e_c,
        r_accidental_err_hz=e_a,
        car_err=car_err,
    )


def accidental_estimator(trace: EventTrace) -> float:
    """Cross-cycle herald x signal click rate in Hz."""
    if trace.n_cycles < 2:
        raise ValueError("need at least two cycles to estimate accidentals")
    return float(
        trace.accidental_click.sum() * trace.rep_rate_hz / trace.n_cycles
    )
