"""Analytic composition of per-bin sources into multiplexed sources.

Bins are listed in priority order: the first bin whose herald clicks wins
the clock cycle, and lower-priority bins contribute only weighted by the
non-trigger probability of everything above them.  Switch-network path
loss enters as a per-bin factor eta_sw multiplying the signal
transmission.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from .hsps import (
    SourceParams,
    calibrate_coupling,
    p_multi_signal,
    p_signal_given_no_pair_trigger,
    p_single_signal,
    p_trig_signal,
    pass2_coincidence_prob,
    pass2_trigger_split,
    squeezing_from_power,
)
from .report import RateReport
from .saturation import DeadtimeChain, detected_from_true

# Pump power reaching the second pass is roughly halved by the uncoated
# crystal facets and extra filtering.
PASS2_POWER_FACTOR = 0.5


class LossMask(Enum):
    """Which loss factors are zeroed out when extracting emission curves."""

    NONE = "none"
    EXTRINSIC_REMOVED = "extrinsic_removed"
    ALL_EXCEPT_SWITCH = "all_except_switch"


@dataclass(frozen=True)
class MuxBin:
    """One (pass, delay) time bin with its source and routing loss."""

    pass_id: int
    delay_id: int
    source: SourceParams
    pump_fraction: float
    eta_sw: float

    def __post_init__(self):
        if self.pass_id not in (1, 2):
            raise ValueError(f"pass_id must be 1 or 2, got {self.pass_id}")
        if self.delay_id < 0:
            raise ValueError("delay_id must be >= 0")
        if not 0.0 <= self.pump_fraction <= 1.0:
            raise ValueError(
                f"pump_fraction must be in [0, 1], got {self.pump_fraction}"
            )
        if not 0.0 < self.eta_sw <= 1.0:
            raise ValueError(f"eta_sw must be in (0, 1], got {self.eta_sw}")


@dataclass(frozen=True)
class MuxTopology:
    """Priority-ordered bins plus the clock parameters they share."""

    bins: Tuple[MuxBin, ...]
    rep_rate_hz: float = 80e6
    bin_spacing_s: float = 3e-9

    def __post_init__(self):
        if not self.bins:
            raise ValueError("topology needs at least one bin")
        if self.rep_rate_hz <= 0.0:
            raise ValueError("rep_rate_hz must be > 0")
        if self.bin_spacing_s <= 0.0:
            raise ValueError("bin_spacing_s must be > 0")
        for pass_id in (1, 2):
            total = sum(
                b.pump_fraction for b in self.bins if b.pass_id == pass_id
            )
            if total > 1.0 + 1e-9:
                raise ValueError(
                    f"pass {pass_id} pump fractions sum to {total} > 1"
                )

    def subset(self, pass_id: int) -> "MuxTopology":
        bins = tuple(b for b in self.bins if b.pass_id == pass_id)
        if not bins:
            raise ValueError(f"topology has no pass-{pass_id} bins")
        return MuxTopology(bins, self.rep_rate_hz, self.bin_spacing_s)


@dataclass(frozen=True)
class MuxProbabilities:
    """Per-clock-cycle trigger / coincidence / accidental probabilities."""

    p_trig: float
    p_coincidence: float
    p_accidental: float

    @property
    def car(self) -> Optional[float]:
        if self.p_accidental == 0.0:
            return None
        return self.p_coincidence / self.p_accidental


def bin_pump_power_mw(bin_: MuxBin, reference_power_mw: float) -> float:
    """Pump power reaching one bin for a given reference power."""
    power = reference_power_mw * bin_.pump_fraction
    if bin_.pass_id == 2:
        power *= PASS2_POWER_FACTOR
    return power


def bin_squeezing(bin_: MuxBin, reference_power_mw: float) -> float:
    """Squeezing amplitude of one bin at the given reference power."""
    c = calibrate_coupling(bin_.source.p_seed_mw)
    return squeezing_from_power(c, bin_pump_power_mw(bin_, reference_power_mw)).xi


def _bin_trigger_prob(bin_: MuxBin, xi: float) -> float:
    _, _, p_total = pass2_trigger_split(
        xi, bin_.source.eta_i, bin_.source.back_reflection_fraction
    )
    return p_total


def mux_trigger_prob(topology: MuxTopology, reference_power_mw: float) -> float:
    """P(at least one bin heralds in a clock cycle)."""
    miss = 1.0
    for bin_ in topology.bins:
        xi = bin_squeezing(bin_, reference_power_mw)
        miss *= 1.0 - _bin_trigger_prob(bin_, xi)
    return 1.0 - miss


def mux_coincidence_prob(
    topology: MuxTopology, reference_power_mw: float
) -> float:
    """Priority-nested per-cycle coincidence probability of the MUX output."""
    total = 0.0
    upstream_miss = 1.0
    for bin_ in topology.bins:
        xi = bin_squeezing(bin_, reference_power_mw)
        p_c = pass2_coincidence_prob(bin_.source, xi, eta_s_factor=bin_.eta_sw)
        total += upstream_miss * p_c
        upstream_miss *= 1.0 - _bin_trigger_prob(bin_, xi)
    return total


def mux_accidental_prob(
    topology: MuxTopology, reference_power_mw: float
) -> float:
    """Priority-nested per-cycle accidental probability of the MUX output."""
    total = 0.0
    upstream_miss = 1.0
    for bin_ in topology.bins:
        xi = bin_squeezing(bin_, reference_power_mw)
        p_trig = _bin_trigger_prob(bin_, xi)
        p_s = p_trig_signal(xi, bin_.source.eta_s * bin_.eta_sw)
        total += upstream_miss * p_trig * p_s
        upstream_miss *= 1.0 - p_trig
    return total


def evaluate_mux(
    topology: MuxTopology, reference_power_mw: float
) -> MuxProbabilities:
    """All three per-cycle probabilities of one multiplexed source."""
    return MuxProbabilities(
        p_trig=mux_trigger_prob(topology, reference_power_mw),
        p_coincidence=mux_coincidence_prob(topology, reference_power_mw),
        p_accidental=mux_accidental_prob(topology, reference_power_mw),
    )


def hybrid_combine(
    pass1: MuxProbabilities,
    pass2: MuxProbabilities,
    p_trig_mux1: Optional[float] = None,
) -> MuxProbabilities:
    """Combine the two per-pass MUX evaluations; pass 1 has priority."""
    p1 = pass1.p_trig if p_trig_mux1 is None else p_trig_mux1
    return MuxProbabilities(
        p_trig=1.0 - (1.0 - p1) * (1.0 - pass2.p_trig),
        p_coincidence=pass1.p_coincidence + (1.0 - p1) * pass2.p_coincidence,
        p_accidental=pass1.p_accidental + (1.0 - p1) * pass2.p_accidental,
    )


def saturated_report(
    probs: MuxProbabilities,
    rep_rate_hz: float,
    chain: DeadtimeChain = DeadtimeChain(),
) -> RateReport:
    """Rates with the deadtime chain thinning the accepted-herald stream.

    Coincidences and accidentals only occur on accepted heralds, so they
    are scaled by the same saturation factor as the trigger rate; CAR is
    unchanged.
    """
    r_trig_true = rep_rate_hz * probs.p_trig
    r_trig = detected_from_true(r_trig_true, chain)
    factor = r_trig / r_trig_true if r_trig_true > 0.0 else 1.0
    r_c = rep_rate_hz * probs.p_coincidence * factor
    r_a = rep_rate_hz * probs.p_accidental * factor
    return RateReport(
        r_trig_hz=r_trig,
        r_coincidence_hz=r_c,
        r_accidental_hz=r_a,
        car=(r_c / r_a) if r_a > 0.0 else None,
    )


def simple_mux_single_prob(
    p_trig: float, n_bins: int, p_single: float
) -> float:
    """Simplified N-bin single-photon emission probability per clock cycle."""
    if not 0.0 <= p_trig <= 1.0 or not 0.0 <= p_single <= 1.0:
        raise ValueError("p_trig and p_single must be in [0, 1]")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    return (1.0 - (1.0 - p_trig) ** n_bins) * p_single


def _masked_bin(bin_: MuxBin, loss_mask: LossMask) -> MuxBin:
    if loss_mask is LossMask.ALL_EXCEPT_SWITCH:
        source = SourceParams(
            eta_i=1.0,
            eta_s=1.0,
            p_seed_mw=bin_.source.p_seed_mw,
            back_reflection_fraction=bin_.source.back_reflection_fraction,
        )
        return MuxBin(
            bin_.pass_id, bin_.delay_id, source, bin_.pump_fraction, bin_.eta_sw
        )
    return bin_


def _bin_emission(
    bin_: MuxBin, xi: float, with_switch: bool
) -> Tuple[float, float, float]:
    """(p_trig_total, per-cycle single, per-cycle multi) for one bin."""
    eta_s = bin_.source.eta_s * (bin_.eta_sw if with_switch else 1.0)
    p_correct, p_incorrect, p_total = pass2_trigger_split(
        xi, bin_.source.eta_i, bin_.source.back_reflection_fraction
    )
    single = p_correct * p_single_signal(xi, bin_.source.eta_i, eta_s)
    multi = p_correct * p_multi_signal(xi, bin_.source.eta_i, eta_s)
    if p_incorrect > 0.0:
        single_nt, multi_nt = p_signal_given_no_pair_trigger(
            xi, bin_.source.eta_i, eta_s
        )
        single += p_incorrect * single_nt
        multi += p_incorrect * multi_nt
    return p_total, single, multi


def emission_tradeoff_curve(
    topology: MuxTopology,
    loss_mask: LossMask,
    power_grid: Sequence[float],
) -> Tuple[List[Tuple[float, float]], List[Tuple[float, float]]]:
    """Sweep reference power and extract (p_single, p_multi) per clock cycle.

    Returns (mux_curve, best_single_curve); the best single source is the
    constituent bin with the highest single-photon emission at each power,
    evaluated without the switching network.
    """
    bins = [_masked_bin(b, loss_mask) for b in topology.bins]
    mux_curve: List[Tuple[float, float]] = []
    single_curve: List[Tuple[float, float]] = []
    for power in power_grid:
        mux_single = 0.0
        mux_multi = 0.0
        upstream_miss = 1.0
        best = (0.0, 0.0)
        for bin_ in bins:
            xi = bin_squeezing(bin_, power)
            p_total, single, multi = _bin_emission(bin_, xi, with_switch=True)
            mux_single += upstream_miss * single
            mux_multi += upstream_miss * multi
            upstream_miss *= 1.0 - p_total
            _, s_solo, m_solo = _bin_emission(bin_, xi, with_switch=False)
            if s_solo > best[0]:
                best = (s_solo, m_solo)
        mux_curve.append((mux_single, mux_multi))
        single_curve.append(best)
    return mux_curve, single_curve
