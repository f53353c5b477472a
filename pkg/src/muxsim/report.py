"""Rate summaries shared by the analytic models and the event simulator."""

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class RateReport:
    """Trigger / coincidence / accidental rates in Hz, plus CAR.

    Standard errors are populated only for Monte Carlo derived reports;
    analytic reports leave them as None.  ``car`` is None when the
    accidental rate is zero (CAR undefined).
    """

    r_trig_hz: float
    r_coincidence_hz: float
    r_accidental_hz: float
    car: Optional[float]
    r_trig_err_hz: Optional[float] = None
    r_coincidence_err_hz: Optional[float] = None
    r_accidental_err_hz: Optional[float] = None
    car_err: Optional[float] = None

    def __post_init__(self):
        for name in ("r_trig_hz", "r_coincidence_hz", "r_accidental_hz"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
