"""Gaussian spectrum fitting and pairwise indistinguishability bounds.

Measured spectra are intensity spectra; the spectral amplitude is taken
as the square root of the fitted Gaussian intensity, so the pairwise
overlap gamma is an upper bound on indistinguishability.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


class SpectrumFitError(ValueError):
    """The spectrum cannot support a Gaussian fit."""


@dataclass(frozen=True)
class SpectrumModel:
    """Gaussian intensity spectrum: amplitude * exp(-(x-center)^2/(2 sigma^2))."""

    center_nm: float
    fwhm_nm: float
    amplitude: float

    def __post_init__(self):
        if self.fwhm_nm <= 0.0:
            raise ValueError(f"fwhm_nm must be > 0, got {self.fwhm_nm}")

    @property
    def sigma_nm(self) -> float:
        return self.fwhm_nm * FWHM_TO_SIGMA

    def intensity(self, wavelength_nm: np.ndarray) -> np.ndarray:
        dx = np.asarray(wavelength_nm, dtype=float) - self.center_nm
        return self.amplitude * np.exp(-dx * dx / (2.0 * self.sigma_nm**2))


def _initial_guess(wl: np.ndarray, counts: np.ndarray) -> Tuple[float, float, float]:
    """Log-parabola fit around the peak region."""
    peak = counts.max()
    region = (counts > 0.2 * peak) & (counts > 0.0)
    if region.sum() < 3:
        region = counts > 0.0
    x, y = wl[region], np.log(counts[region])
    coeffs = np.polyfit(x, y, 2)
    if coeffs[0] >= 0.0:
        raise SpectrumFitError("data has no concave peak; cannot fit a Gaussian")
    sigma = math.sqrt(-1.0 / (2.0 * coeffs[0]))
    center = -coeffs[1] / (2.0 * coeffs[0])
    amp = math.exp(coeffs[2] - coeffs[1] ** 2 / (4.0 * coeffs[0]))
    return center, sigma, amp


def fit_gaussian(
    samples: Sequence[Tuple[float, float]]
) -> Tuple[SpectrumModel, float]:
    """Least-squares Gaussian fit of (wavelength_nm, counts) samples.

    Returns the fitted model and the residual norm.  The linearized
    initial guess is refined by a derivative-free simplex search.
    """
    data = np.asarray(samples, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise SpectrumFitError("samples must be (wavelength_nm, counts) pairs")
    wl, counts = data[:, 0], data[:, 1]
    if np.unique(wl).size < 4:
        raise SpectrumFitError("need at least 4 distinct wavelengths")
    if np.any(counts < 0.0):
        raise SpectrumFitError("counts must be >= 0")
    if np.allclose(counts, counts[0]):
        raise SpectrumFitError("constant counts; nothing to fit")

    center0, sigma0, amp0 = _initial_guess(wl, counts)

    def sse(params: np.ndarray) -> float:
        center, log_sigma, log_amp = params
        sigma = math.exp(log_sigma)
        model = math.exp(log_amp) * np.exp(
            -((wl - center) ** 2) / (2.0 * sigma * sigma)
        )
        return float(np.sum((model - counts) ** 2))

    x0 = np.array([center0, math.log(sigma0), math.log(max(amp0, 1e-300))])
    result = minimize(
        sse, x0, method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-24, "maxiter": 5000},
    )
    center, log_sigma, log_amp = result.x
    model = SpectrumModel(
        center_nm=float(center),
        fwhm_nm=float(math.exp(log_sigma) / FWHM_TO_SIGMA),
        amplitude=float(math.exp(log_amp)),
    )
    residual_norm = math.sqrt(sse(result.x))
    return model, residual_norm


def overlap_gamma(a: SpectrumModel, b: SpectrumModel) -> float:
    """Squared overlap of the normalized spectral amplitudes of two models.

    With amplitudes taken as sqrt of Gaussian intensities of std sigma:
    gamma = [2 s_a s_b / (s_a^2 + s_b^2)] * exp(-delta^2 / (2 (s_a^2 + s_b^2))).
    """
    sa, sb = a.sigma_nm, b.sigma_nm
    delta = a.center_nm - b.center_nm
    ssum = sa * sa + sb * sb
    return 2.0 * sa * sb / ssum * math.exp(-delta * delta / (2.0 * ssum))


def indistinguishability_table(models: Sequence[SpectrumModel]) -> np.ndarray:
    """Symmetric gamma matrix with unit diagonal."""
    if len(models) < 2:
        raise ValueError("need at least two models")
    n = len(models)
    table = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            table[i, j] = table[j, i] = overlap_gamma(models[i], models[j])
    return table
