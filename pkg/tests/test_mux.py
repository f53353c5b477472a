"""Priority-nested multiplexing composition against enumeration oracles."""

import numpy as np
import pytest

from muxsim import (
    LossMask,
    MuxBin,
    MuxTopology,
    SourceParams,
    emission_tradeoff_curve,
    evaluate_mux,
    hybrid_combine,
    mux_accidental_prob,
    mux_coincidence_prob,
    mux_trigger_prob,
    p_trig_idler,
    p_trig_signal,
    pass2_coincidence_prob,
    pass2_trigger_split,
    saturated_report,
    simple_mux_single_prob,
)
from muxsim.defaults import default_topology
from muxsim.mux import PASS2_POWER_FACTOR, MuxProbabilities, bin_pump_power_mw, bin_squeezing
from muxsim.saturation import DeadtimeChain


def _make_bin(eta_i, eta_s, p_seed, fraction, eta_sw, pass_id=1, delay_id=0, f=0.0):
    return MuxBin(
        pass_id=pass_id,
        delay_id=delay_id,
        source=SourceParams(eta_i, eta_s, p_seed, f),
        pump_fraction=fraction,
        eta_sw=eta_sw,
    )


def _bin_probs(bin_, reference_power_mw):
    """(p_trig_total, p_coincidence, p_signal_click) for one bin."""
    xi = bin_squeezing(bin_, reference_power_mw)
    _, _, p_total = pass2_trigger_split(
        xi, bin_.source.eta_i, bin_.source.back_reflection_fraction
    )
    p_c = pass2_coincidence_prob(bin_.source, xi, eta_s_factor=bin_.eta_sw)
    p_s = p_trig_signal(xi, bin_.source.eta_s * bin_.eta_sw)
    return p_total, p_c, p_s


def _enumerate_mux(bins, reference_power_mw):
    """Sum over all 2^N herald patterns; first heralding bin wins the cycle."""
    per_bin = [_bin_probs(b, reference_power_mw) for b in bins]
    p_trig = p_c = p_a = 0.0
    n = len(bins)
    for pattern in range(1, 2**n):
        weight = 1.0
        first = None
        for k in range(n):
            hit = (pattern >> k) & 1
            weight *= per_bin[k][0] if hit else 1.0 - per_bin[k][0]
            if hit and first is None:
                first = k
        p_trig += weight
        p_trig_k, p_c_k, p_s_k = per_bin[first]
        p_c += weight * p_c_k / p_trig_k
        p_a += weight * p_s_k
    return p_trig, p_c, p_a


# --- identities -----------------------------------------------------------------

def test_single_bin_identities():
    bin_ = _make_bin(0.2, 0.05, 5.0, 0.8, 0.7, f=0.3, pass_id=2)
    topo = MuxTopology((bin_,))
    power = 6.0
    p_trig, p_c, p_s = _bin_probs(bin_, power)
    assert mux_trigger_prob(topo, power) == pytest.approx(p_trig, rel=1e-12)
    assert mux_coincidence_prob(topo, power) == pytest.approx(p_c, rel=1e-12)
    assert mux_accidental_prob(topo, power) == pytest.approx(p_trig * p_s, rel=1e-12)


def test_zero_power_gives_zero():
    probs = evaluate_mux(default_topology(), 0.0)
    assert probs.p_trig == 0.0
    assert probs.p_coincidence == 0.0
    assert probs.p_accidental == 0.0
    assert probs.car is None


def test_four_equal_bins_trigger_expansion():
    # p per bin = 1.902e-3 at the seed power; MUX of four gives ~7.585e-3
    bins = tuple(
        _make_bin(0.015, 0.0019, 5.2, 1.0 / 4.0, 1.0, delay_id=d) for d in range(4)
    )
    topo = MuxTopology(bins)
    power = 4.0 * 5.2  # each bin then runs at its seed power
    p = p_trig_idler(bin_squeezing(bins[0], power), 0.015)
    assert p == pytest.approx(1.902e-3, rel=1e-3)
    assert mux_trigger_prob(topo, power) == pytest.approx(
        1.0 - (1.0 - p) ** 4, rel=1e-12
    )
    assert mux_trigger_prob(topo, power) == pytest.approx(7.585e-3, rel=1e-3)


def test_nesting_matches_enumeration_oracle():
    rng = np.random.default_rng(21)
    for pass_id, f in ((1, 0.0), (2, 0.3)):
        bins = tuple(
            _make_bin(
                rng.uniform(0.01, 0.4),
                rng.uniform(0.001, 0.1),
                rng.uniform(2.0, 10.0),
                rng.uniform(0.05, 0.24),
                rng.uniform(0.3, 1.0),
                pass_id=pass_id,
                delay_id=d,
                f=f,
            )
            for d in range(4)
        )
        topo = MuxTopology(bins)
        power = 12.0
        p_trig, p_c, p_a = _enumerate_mux(bins, power)
        assert mux_trigger_prob(topo, power) == pytest.approx(p_trig, rel=1e-12)
        assert mux_coincidence_prob(topo, power) == pytest.approx(p_c, rel=1e-12)
        assert mux_accidental_prob(topo, power) == pytest.approx(p_a, rel=1e-12)


def test_identical_bins_are_permutation_invariant():
    bins = tuple(_make_bin(0.1, 0.02, 5.0, 0.2, 0.8, delay_id=d) for d in range(4))
    topo = MuxTopology(bins)
    shuffled = MuxTopology(bins[::-1])
    for fn in (mux_trigger_prob, mux_coincidence_prob, mux_accidental_prob):
        assert fn(topo, 9.0) == pytest.approx(fn(shuffled, 9.0), rel=1e-12)


def test_priority_order_matters_for_distinct_bins():
    strong = _make_bin(0.3, 0.08, 5.0, 0.4, 1.0, delay_id=0)
    weak = _make_bin(0.05, 0.01, 5.0, 0.4, 1.0, delay_id=1)
    ab = MuxTopology((strong, weak))
    ba = MuxTopology((weak, strong))
    assert mux_trigger_prob(ab, 8.0) == pytest.approx(
        mux_trigger_prob(ba, 8.0), rel=1e-12
    )
    assert mux_coincidence_prob(ab, 8.0) != pytest.approx(
        mux_coincidence_prob(ba, 8.0), rel=1e-9
    )


def test_duplicated_low_priority_term_is_a_different_quantity():
    # Guard against a transcription slip in the 8-bin nested sum that repeats
    # the second-pass delay-1 term in place of the delay-2 and delay-3 terms.
    topo = default_topology()
    power = 10.0
    per_bin = [_bin_probs(b, power) for b in topo.bins]

    def nested(seq):
        total, miss = 0.0, 1.0
        for p_trig, p_c, _ in seq:
            total += miss * p_c
            miss *= 1.0 - p_trig
        return total

    correct = nested(per_bin)
    slipped = nested(per_bin[:6] + [per_bin[5], per_bin[5]])
    assert mux_coincidence_prob(topo, power) == pytest.approx(correct, rel=1e-12)
    assert abs(slipped - correct) > 1e-12 * correct


def test_trigger_probability_bounds():
    rng = np.random.default_rng(33)
    for _ in range(20):
        bins = tuple(
            _make_bin(
                rng.uniform(0.01, 0.9),
                rng.uniform(0.001, 0.5),
                rng.uniform(1.0, 10.0),
                rng.uniform(0.05, 0.24),
                rng.uniform(0.1, 1.0),
                delay_id=d,
            )
            for d in range(4)
        )
        topo = MuxTopology(bins)
        power = rng.uniform(1.0, 30.0)
        ps = [_bin_probs(b, power)[0] for b in bins]
        mux = mux_trigger_prob(topo, power)
        assert max(ps) <= mux + 1e-15
        assert mux <= min(sum(ps), 1.0) + 1e-15


def test_coincidence_monotone_in_switch_transmission():
    power = 10.0
    values = []
    for eta_sw in (0.2, 0.4, 0.6, 0.8, 1.0):
        bins = tuple(
            _make_bin(0.1, 0.02, 5.0, 0.2, eta_sw, delay_id=d) for d in range(4)
        )
        values.append(mux_coincidence_prob(MuxTopology(bins), power))
    assert all(b > a for a, b in zip(values, values[1:]))


# --- hybrid combination -----------------------------------------------------------

def test_hybrid_with_dead_second_pass_is_first_pass():
    p1 = MuxProbabilities(0.01, 1e-5, 1e-7)
    p2 = MuxProbabilities(0.0, 0.0, 0.0)
    combined = hybrid_combine(p1, p2)
    assert combined.p_trig == pytest.approx(p1.p_trig)
    assert combined.p_coincidence == pytest.approx(p1.p_coincidence)
    assert combined.p_accidental == pytest.approx(p1.p_accidental)


def test_hybrid_symmetric_low_probability_expansion():
    p = 1e-4
    probs = MuxProbabilities(p, p * 1e-2, p * 1e-4)
    combined = hybrid_combine(probs, probs)
    assert combined.p_trig == pytest.approx(1.0 - (1.0 - p) ** 2, rel=1e-12)
    assert combined.p_trig == pytest.approx(2.0 * p, rel=2.0 * p)


def test_hybrid_matches_flat_eight_bin_nesting():
    topo = default_topology()
    power = 10.0
    flat = evaluate_mux(topo, power)
    combined = hybrid_combine(
        evaluate_mux(topo.subset(1), power), evaluate_mux(topo.subset(2), power)
    )
    assert combined.p_trig == pytest.approx(flat.p_trig, rel=1e-12)
    assert combined.p_coincidence == pytest.approx(flat.p_coincidence, rel=1e-12)
    assert combined.p_accidental == pytest.approx(flat.p_accidental, rel=1e-12)


def test_pass2_pump_power_is_halved():
    b1 = _make_bin(0.1, 0.01, 5.0, 0.25, 1.0, pass_id=1)
    b2 = _make_bin(0.1, 0.01, 5.0, 0.25, 1.0, pass_id=2)
    assert bin_pump_power_mw(b1, 8.0) == pytest.approx(2.0)
    assert bin_pump_power_mw(b2, 8.0) == pytest.approx(2.0 * PASS2_POWER_FACTOR)


# --- saturation and reports --------------------------------------------------------

def test_saturated_report_preserves_car():
    probs = evaluate_mux(default_topology(), 10.0)
    chain = DeadtimeChain((1e-7, 1e-7, 2e-6))
    plain = saturated_report(probs, 80e6, DeadtimeChain(()))
    saturated = saturated_report(probs, 80e6, chain)
    assert saturated.r_trig_hz < plain.r_trig_hz
    assert saturated.car == pytest.approx(plain.car, rel=1e-12)
    factor = saturated.r_trig_hz / plain.r_trig_hz
    assert saturated.r_coincidence_hz == pytest.approx(
        plain.r_coincidence_hz * factor, rel=1e-12
    )


# --- simplified formula --------------------------------------------------------------

def test_simple_mux_single_prob_examples():
    assert simple_mux_single_prob(0.25, 17, 1.0) == pytest.approx(
        1.0 - 0.75**17, abs=1e-15
    )
    assert simple_mux_single_prob(0.25, 17, 1.0) >= 0.99
    assert simple_mux_single_prob(0.3, 1, 0.5) == pytest.approx(0.15)
    assert simple_mux_single_prob(1.0, 5, 0.4) == pytest.approx(0.4)


def test_simple_mux_single_prob_validation():
    with pytest.raises(ValueError):
        simple_mux_single_prob(1.5, 4, 0.5)
    with pytest.raises(ValueError):
        simple_mux_single_prob(0.5, 0, 0.5)


# --- emission trade-off ----------------------------------------------------------------

def test_lossless_single_source_respects_heralding_bound():
    bin_ = _make_bin(1.0, 1.0, 5.0, 1.0, 1.0)
    topo = MuxTopology((bin_,))
    mux_curve, single_curve = emission_tradeoff_curve(
        topo, LossMask.NONE, np.linspace(0.1, 60.0, 80)
    )
    assert all(p_single <= 0.25 + 1e-12 for p_single, _ in mux_curve)
    assert all(p_single <= 0.25 + 1e-12 for p_single, _ in single_curve)


def test_mux_dominates_best_single_under_lossless_switching():
    bins = tuple(
        _make_bin(0.3, 0.2, 5.0, 0.25, 1.0, delay_id=d) for d in range(4)
    )
    topo = MuxTopology(bins)
    powers = np.linspace(1.0, 40.0, 20)
    mux_curve, single_curve = emission_tradeoff_curve(topo, LossMask.NONE, powers)
    for (mux_s, _), (one_s, _) in zip(mux_curve, single_curve):
        assert mux_s > one_s


def test_loss_mask_all_except_switch_removes_arm_losses():
    bins = tuple(
        _make_bin(0.1, 0.01, 5.0, 0.25, 0.6, delay_id=d) for d in range(4)
    )
    topo = MuxTopology(bins)
    lossy, _ = emission_tradeoff_curve(topo, LossMask.NONE, [10.0])
    masked, _ = emission_tradeoff_curve(topo, LossMask.ALL_EXCEPT_SWITCH, [10.0])
    assert masked[0][0] > lossy[0][0]


# --- validation -------------------------------------------------------------------------

def test_topology_validation():
    bin_ = _make_bin(0.1, 0.01, 5.0, 0.6, 0.8)
    with pytest.raises(ValueError):
        MuxTopology(())
    with pytest.raises(ValueError):
        MuxTopology((bin_, bin_))  # pump fractions sum to 1.2
    with pytest.raises(ValueError):
        MuxTopology((bin_,), rep_rate_hz=0.0)
    topo = MuxTopology((bin_,))
    with pytest.raises(ValueError):
        topo.subset(2)


def test_bin_validation():
    with pytest.raises(ValueError):
        _make_bin(0.1, 0.01, 5.0, 0.5, 0.0)  # eta_sw must be > 0
    with pytest.raises(ValueError):
        _make_bin(0.1, 0.01, 5.0, 1.5, 0.8)
    with pytest.raises(ValueError):
        _make_bin(0.1, 0.01, 5.0, 0.5, 0.8, pass_id=3)
