"""Closed-form per-pulse statistics of one heralded single-photon source.

All detectors are threshold (click / no-click).  The photon-pair number in
one pump pulse follows P(n) = (1 - xi^2) * xi^(2n); losses on the idler and
signal arms are independent binomial thinnings with transmissions eta_i and
eta_s.  The "second pass" variant adds unpaired herald clicks from
back-reflected photons, parameterized by a fraction f of the true
triggering probability.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from scipy.optimize import brentq

from .report import RateReport

# Reference single-pair generation probability used to calibrate the
# pump-power -> squeezing coupling constant.
P_PAIR_REFERENCE = 0.1

# Slack allowed before a negative probability is treated as a formula
# transcription bug rather than round-off.
NEGATIVE_TOL = 1e-12


class FormulaError(ArithmeticError):
    """A closed form evaluated to an impossible (negative) probability."""


@dataclass(frozen=True)
class SqueezingPoint:
    """Squeezing amplitude xi with its pump-power provenance.

    When power and coupling are both given, xi = tanh(c * sqrt(P)) must
    hold to 1e-12.
    """

    xi: float
    power_mw: Optional[float] = None
    coupling_c: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.xi < 1.0:
            raise ValueError(f"xi must be in [0, 1), got {self.xi}")
        if self.power_mw is not None and self.coupling_c is not None:
            expected = math.tanh(self.coupling_c * math.sqrt(self.power_mw))
            if abs(expected - self.xi) > 1e-12:
                raise ValueError(
                    "inconsistent squeezing point: "
                    f"tanh(c*sqrt(P)) = {expected} but xi = {self.xi}"
                )


@dataclass(frozen=True)
class SourceParams:
    """Loss budget and power calibration of one effective source."""

    eta_i: float
    eta_s: float
    p_seed_mw: float
    back_reflection_fraction: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta_i <= 1.0:
            raise ValueError(f"eta_i must be in [0, 1], got {self.eta_i}")
        if not 0.0 <= self.eta_s <= 1.0:
            raise ValueError(f"eta_s must be in [0, 1], got {self.eta_s}")
        if self.p_seed_mw <= 0.0:
            raise ValueError(f"p_seed_mw must be > 0, got {self.p_seed_mw}")
        if self.back_reflection_fraction < 0.0:
            raise ValueError("back_reflection_fraction must be >= 0")


@dataclass(frozen=True)
class EmissionProbs:
    """Per-pulse trigger and heralded-emission probabilities."""

    p_trig_idler: float
    p_single_signal: float
    p_multi_signal: float
    p_trig_signal: float

    def __post_init__(self):
        for name in (
            "p_trig_idler",
            "p_single_signal",
            "p_multi_signal",
            "p_trig_signal",
        ):
            v = getattr(self, name)
            if not -NEGATIVE_TOL <= v <= 1.0 + NEGATIVE_TOL:
                raise ValueError(f"{name} = {v} outside [0, 1]")
        if self.p_single_signal + self.p_multi_signal > 1.0 + NEGATIVE_TOL:
            raise ValueError("p_single + p_multi exceeds 1")


def seed_squeezing() -> float:
    """Squeezing amplitude at which the single-pair probability is 0.1.

    Root of (1 - xi^2) * xi^2 = 0.1 on (0, 1/sqrt(2)), found numerically
    (solver-limited precision rather than a hard-coded constant).
    """
    return brentq(
        lambda x: (1.0 - x * x) * x * x - P_PAIR_REFERENCE,
        1e-6,
        1.0 / math.sqrt(2.0) - 1e-12,
        xtol=1e-14,
        rtol=8.9e-16,
    )


def calibrate_coupling(p_seed_mw: float) -> float:
    """Coupling constant c (mW^-1/2) such that xi(p_seed_mw) = xi_seed."""
    if p_seed_mw <= 0.0:
        raise ValueError(f"p_seed_mw must be > 0, got {p_seed_mw}")
    return math.atanh(seed_squeezing()) / math.sqrt(p_seed_mw)


def squeezing_from_power(c: float, p_mw: float) -> SqueezingPoint:
    """Squeezing amplitude xi = tanh(c * sqrt(P)) for pump power P in mW."""
    if c <= 0.0:
        raise ValueError(f"coupling constant must be > 0, got {c}")
    if p_mw < 0.0:
        raise ValueError(f"power must be >= 0, got {p_mw}")
    return SqueezingPoint(
        xi=math.tanh(c * math.sqrt(p_mw)), power_mw=p_mw, coupling_c=c
    )


def _check_domain(xi: float, *etas: float) -> None:
    if not 0.0 <= xi < 1.0:
        raise ValueError(f"xi must be in [0, 1), got {xi}")
    for eta in etas:
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"transmission must be in [0, 1], got {eta}")


def p_trig_idler(xi: float, eta_i: float) -> float:
    """Probability that the idler (herald) arm clicks in one pulse."""
    _check_domain(xi, eta_i)
    s = xi * xi
    return s * eta_i / (1.0 - s * (1.0 - eta_i))


def p_trig_signal(xi: float, eta_s: float) -> float:
    """Unconditional signal-arm click probability (same form as the idler)."""
    return p_trig_idler(xi, eta_s)


def p_single_signal(xi: float, eta_i: float, eta_s: float) -> float:
    """P(exactly one signal photon is delivered | herald clicked)."""
    _check_domain(xi, eta_i, eta_s)
    s = xi * xi
    a = 1.0 - eta_i
    b = 1.0 - eta_s
    num = (1.0 - s * s * b * b * a) * (1.0 - s * a)
    den = (1.0 - s * b) ** 2 * (1.0 - s * a * b) ** 2
    return (1.0 - s) * eta_s * num / den


def p_both_click(xi: float, eta_i: float, eta_s: float) -> float:
    """Joint probability that idler and signal arms both click in one pulse."""
    _check_domain(xi, eta_i, eta_s)
    s = xi * xi
    a = 1.0 - eta_i
    b = 1.0 - eta_s
    return (1.0 - s) * s * (
        1.0 / (1.0 - s)
        + a * b / (1.0 - s * a * b)
        - a / (1.0 - s * a)
        - b / (1.0 - s * b)
    )


def _clamp_probability(value: float, what: str) -> float:
    if value < -NEGATIVE_TOL:
        raise FormulaError(f"{what} evaluated to {value} < 0")
    return max(value, 0.0)


def p_multi_signal(xi: float, eta_i: float, eta_s: float) -> float:
    """P(two or more signal photons are delivered | herald clicked)."""
    _check_domain(xi, eta_i, eta_s)
    s = xi * xi
    if s == 0.0:
        return 0.0
    if eta_i == 0.0:
        # Limit of the conditional as eta_i -> 0 (herald never clicks).
        b = 1.0 - eta_s
        total = 1.0 - b * (1.0 - s) ** 2 / (1.0 - s * b) ** 2
        return _clamp_probability(
            total - p_single_signal(xi, eta_i, eta_s), "p_multi_signal"
        )
    value = p_both_click(xi, eta_i, eta_s) / p_trig_idler(xi, eta_i)
    return _clamp_probability(
        value - p_single_signal(xi, eta_i, eta_s), "p_multi_signal"
    )


def emission_probs(xi: float, eta_i: float, eta_s: float) -> EmissionProbs:
    """Bundle the four per-pulse probabilities for one source."""
    return EmissionProbs(
        p_trig_idler=p_trig_idler(xi, eta_i),
        p_single_signal=p_single_signal(xi, eta_i, eta_s),
        p_multi_signal=p_multi_signal(xi, eta_i, eta_s),
        p_trig_signal=p_trig_signal(xi, eta_s),
    )


def pass2_trigger_split(
    xi: float, eta_i: float, f: float
) -> Tuple[float, float, float]:
    """(p_correct, p_incorrect, p_total) herald probabilities with
    back-reflection fraction f.

    The "correct" branch collapses algebraically to the true trigger
    probability; the "incorrect" branch is an unpaired back-reflection
    click with no true pair click.
    """
    if f < 0.0:
        raise ValueError(f"back-reflection fraction must be >= 0, got {f}")
    p_true = p_trig_idler(xi, eta_i)
    p_back = f * p_true
    if p_back > 1.0:
        raise ValueError(
            f"f * p_trig = {p_back} exceeds 1; not a valid probability"
        )
    p_correct = p_true
    p_incorrect = p_back * (1.0 - p_true)
    return p_correct, p_incorrect, p_correct + p_incorrect


def p_signal_given_no_pair_trigger(
    xi: float, eta_i: float, eta_s: float
) -> Tuple[float, float]:
    """(p_single, p_multi) on the signal arm given the herald did NOT click."""
    _check_domain(xi, eta_i, eta_s)
    s = xi * xi
    a = 1.0 - eta_i
    b = 1.0 - eta_s
    p_single_nt = (1.0 - s * a) * eta_s * a * s / (1.0 - s * a * b) ** 2
    total_nt = (1.0 - s * a) * s * (
        a / (1.0 - s * a) - a * b / (1.0 - s * a * b)
    )
    p_multi_nt = _clamp_probability(
        total_nt - p_single_nt, "p_multi given no trigger"
    )
    return p_single_nt, p_multi_nt


def pass2_coincidence_prob(
    source: SourceParams, xi: float, eta_s_factor: float = 1.0
) -> float:
    """Per-pulse coincidence probability with back-reflected herald clicks.

    ``eta_s_factor`` scales the signal transmission (switch-network path
    loss); with f = 0 this reduces to the first-pass coincidence form.
    """
    eta_s = source.eta_s * eta_s_factor
    p_correct, p_incorrect, _ = pass2_trigger_split(
        xi, source.eta_i, source.back_reflection_fraction
    )
    heralded = p_single_signal(xi, source.eta_i, eta_s) + p_multi_signal(
        xi, source.eta_i, eta_s
    )
    single_nt, multi_nt = p_signal_given_no_pair_trigger(
        xi, source.eta_i, eta_s
    )
    return p_correct * heralded + p_incorrect * (single_nt + multi_nt)


def back_reflection_from_contamination(
    contamination: float, p_true: float
) -> float:
    """Fraction f that produces the given share of unpaired herald counts.

    ``contamination`` is p_incorrect / p_total of the idler counts.
    """
    if not 0.0 <= contamination < 1.0:
        raise ValueError("contamination must be in [0, 1)")
    if not 0.0 < p_true < 1.0:
        raise ValueError("p_true must be in (0, 1)")
    # contamination = f(1-p) / (1 + f(1-p))  =>  f(1-p) = c / (1-c)
    return contamination / ((1.0 - contamination) * (1.0 - p_true))


def rates(
    source: SourceParams, p_mw: float, rep_rate_hz: float
) -> RateReport:
    """Trigger, coincidence and accidental rates of one source at power p_mw."""
    if rep_rate_hz <= 0.0:
        raise ValueError(f"rep_rate_hz must be > 0, got {rep_rate_hz}")
    c = calibrate_coupling(source.p_seed_mw)
    xi = squeezing_from_power(c, p_mw).xi
    _, _, p_total = pass2_trigger_split(
        xi, source.eta_i, source.back_reflection_fraction
    )
    p_c = pass2_coincidence_prob(source, xi)
    p_a = p_total * p_trig_signal(xi, source.eta_s)
    r_c = rep_rate_hz * p_c
    r_a = rep_rate_hz * p_a
    return RateReport(
        r_trig_hz=rep_rate_hz * p_total,
        r_coincidence_hz=r_c,
        r_accidental_hz=r_a,
        car=(r_c / r_a) if r_a > 0.0 else None,
    )
