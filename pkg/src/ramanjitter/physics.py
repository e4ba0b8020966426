"""Fiber parameters, dimensionless scaling and the phonon response model.

The propagation equation is written in soliton units: time in units of the
pulse scale ``t0``, distance in units of the dispersion length
``x0 = t0**2 / |k''|``, field amplitude normalized so that a fundamental
soliton has unit amplitude and ``n_bar`` photons per unit of the
dimensionless photon-number functional.

The delayed nonlinear response is modelled as a causal sum of damped
oscillators (Lorentzian lines in the frequency domain),

    ``h(tau) = theta(tau) * sum_j F_j (W_j^2 + d_j^2)/W_j exp(-d_j tau) sin(W_j tau)``

normalized to unit area so that the zero-delay limit reproduces the plain
Kerr term.  The phonon gain profile ``alpha_R(Omega)`` is the dissipative
(odd, imaginary) part of the same oscillator response; the fluorescence

    ``F(Omega) = 0.5 * (n_th(Omega) + 0.5) * alpha_R(Omega)``

is the spectral density that shapes the multiplicative phase noise.  It is
finite at ``Omega = 0`` because the thermal pole cancels the linear zero of
the gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as _c_light
from scipy.constants import hbar as _hbar
from scipy.constants import k as _k_boltzmann


class PhysicsError(ValueError):
    """Raised for unphysical configuration values."""


@dataclass(frozen=True)
class LorentzianComponent:
    """One damped-oscillator line of the phonon response.

    Widths and centers are physical angular frequencies in rad/s; they are
    nondimensionalized by the pulse scale ``t0`` of the owning model.
    """

    strength: float
    delta_rad_per_s: float
    omega_rad_per_s: float

    def __post_init__(self) -> None:
        if not self.delta_rad_per_s > 0:
            raise PhysicsError(f"Lorentzian width must be > 0, got {self.delta_rad_per_s}")
        if not self.omega_rad_per_s > 0:
            raise PhysicsError(f"Lorentzian center must be > 0, got {self.omega_rad_per_s}")


#: Single-line response reproducing the measured 13.2-THz-band phonon peak
#: (center 75.4e12 rad/s ~ 12 THz) reasonably well at low frequencies.
DEFAULT_LORENTZIAN = LorentzianComponent(
    strength=0.7263, delta_rad_per_s=20.0e12, omega_rad_per_s=75.4e12
)


@dataclass(frozen=True)
class RamanModel:
    """Phonon response: Lorentzian lines plus a reservoir temperature."""

    components: tuple[LorentzianComponent, ...]
    temperature: float
    t0: float

    def __post_init__(self) -> None:
        if len(self.components) == 0:
            raise PhysicsError("RamanModel needs at least one Lorentzian component")
        if self.temperature < 0:
            raise PhysicsError(f"temperature must be >= 0 K, got {self.temperature}")
        if not self.t0 > 0:
            raise PhysicsError(f"t0 must be positive, got {self.t0}")

    @property
    def strengths(self) -> np.ndarray:
        return np.array([comp.strength for comp in self.components])

    @property
    def widths(self) -> np.ndarray:
        """Dimensionless line widths ``delta_j * t0``."""
        return np.array([comp.delta_rad_per_s * self.t0 for comp in self.components])

    @property
    def centers(self) -> np.ndarray:
        """Dimensionless line centers ``Omega_j * t0``."""
        return np.array([comp.omega_rad_per_s * self.t0 for comp in self.components])

    @property
    def max_center(self) -> float:
        return float(np.max(self.centers))


def default_raman_model(t0: float, temperature: float = 300.0) -> RamanModel:
    """Single-Lorentzian model at the given pulse scale and temperature."""
    return RamanModel((DEFAULT_LORENTZIAN,), temperature, t0)


@dataclass(frozen=True)
class FiberConfig:
    """Physical fiber and pulse parameters (SI units).

    ``dispersion_sign`` is +1 in the anomalous regime (``k2 < 0``, bright
    solitons) and -1 in the normal regime (``k2 > 0``, dark solitons).
    """

    t0: float
    k2: float
    mode_area: float
    n2_kerr: float
    carrier_wavelength: float
    gain_per_meter: float
    temperature: float
    dispersion_sign: int

    def __post_init__(self) -> None:
        if not self.t0 > 0:
            raise PhysicsError(f"t0 must be positive, got {self.t0}")
        if self.k2 == 0:
            raise PhysicsError("k2 must be nonzero")
        if not (self.mode_area > 0 and self.n2_kerr > 0 and self.carrier_wavelength > 0):
            raise PhysicsError("mode_area, n2_kerr and carrier_wavelength must be positive")
        if self.gain_per_meter < 0:
            raise PhysicsError(f"gain_per_meter must be >= 0, got {self.gain_per_meter}")
        if self.temperature < 0:
            raise PhysicsError(f"temperature must be >= 0 K, got {self.temperature}")
        if self.dispersion_sign not in (+1, -1):
            raise PhysicsError(f"dispersion_sign must be +1 or -1, got {self.dispersion_sign}")
        if self.dispersion_sign == +1 and self.k2 > 0:
            raise PhysicsError("anomalous dispersion (+1) requires k2 < 0")
        if self.dispersion_sign == -1 and self.k2 < 0:
            raise PhysicsError("normal dispersion (-1) requires k2 > 0")

    @property
    def omega0(self) -> float:
        """Carrier angular frequency ``2 pi c / lambda0``."""
        return 2.0 * np.pi * _c_light / self.carrier_wavelength


@dataclass(frozen=True)
class Scales:
    """Derived dimensionless scales of a fiber configuration."""

    x0: float
    n_bar: float
    alpha_g: float


def derive_scales(config: FiberConfig) -> Scales:
    """Dispersion length, photon-number scale and dimensionless gain.

    ``x0 = t0^2/|k2|``; ``n_bar = |k2| A c / (n2 hbar omega0^2 t0)``;
    ``alpha_g = G x0`` with the loss balanced against the gain.
    """
    x0 = config.t0**2 / abs(config.k2)
    n_bar = (
        abs(config.k2)
        * config.mode_area
        * _c_light
        / (config.n2_kerr * _hbar * config.omega0**2 * config.t0)
    )
    alpha_g = config.gain_per_meter * x0
    return Scales(x0=x0, n_bar=n_bar, alpha_g=alpha_g)


def thermal_occupation(omega, model: RamanModel):
    """Bose occupation of the phonon mode at dimensionless frequency omega.

    Diverges at omega = 0; callers needing the DC noise level should use
    :func:`fluorescence`, which is finite there.
    """
    omega = np.asarray(omega, dtype=float)
    if np.any(omega == 0.0):
        raise PhysicsError("thermal_occupation has a pole at Omega = 0")
    if model.temperature == 0.0:
        return np.zeros_like(omega) if omega.ndim else 0.0
    x = _hbar * np.abs(omega) / (_k_boltzmann * model.temperature * model.t0)
    n_th = 1.0 / np.expm1(np.minimum(x, 700.0))
    return n_th if omega.ndim else float(n_th)


def raman_gain(omega, model: RamanModel):
    """Phonon gain profile ``alpha_R(Omega)``, even in Omega, linear zero at DC."""
    omega = np.asarray(omega, dtype=float)
    absw = np.abs(omega)[..., np.newaxis]
    f_j = model.strengths
    d_j = model.widths
    w_j = model.centers
    denom = (w_j**2 + d_j**2 - absw**2) ** 2 + 4.0 * d_j**2 * absw**2
    gain = np.sum(4.0 * f_j * w_j * d_j**2 * absw / denom, axis=-1)
    return gain if omega.ndim else float(gain)


def raman_gain_slope(model: RamanModel) -> float:
    """``lim_{Omega->0} alpha_R(Omega)/Omega = sum_j 4 F_j W_j d_j^2/(W_j^2+d_j^2)^2``."""
    f_j = model.strengths
    d_j = model.widths
    w_j = model.centers
    return float(np.sum(4.0 * f_j * w_j * d_j**2 / (w_j**2 + d_j**2) ** 2))


def fluorescence_dc(model: RamanModel) -> float:
    """Closed-form DC fluorescence ``F(0)``.

    The thermal pole ``n_th ~ kB T t0 / (hbar Omega)`` cancels the linear
    zero of the gain, leaving
    ``F(0) = (kB T t0 / 2 hbar) * d(alpha_R)/dOmega|_0``, which is
    independent of ``t0``.
    """
    kt = _k_boltzmann * model.temperature * model.t0 / _hbar
    return 0.5 * kt * raman_gain_slope(model)


def fluorescence(omega, model: RamanModel):
    """Noise spectral density ``F(Omega) = 0.5 (n_th + 0.5) alpha_R``.

    Finite and smooth at Omega = 0 where it evaluates to
    :func:`fluorescence_dc`.
    """
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    omega = np.atleast_1d(omega)
    out = np.empty_like(omega)
    small = np.abs(omega) < 1e-9
    if np.any(~small):
        w = omega[~small]
        out[~small] = 0.5 * (thermal_occupation(w, model) + 0.5) * raman_gain(w, model)
    if np.any(small):
        # Taylor limit: thermal part -> F(0); spontaneous part -> alpha_R/4 -> 0.
        out[small] = fluorescence_dc(model)
    return float(out[0]) if scalar else out


def raman_response_transfer(omega, model: RamanModel):
    """Complex transfer function ``H(Omega)`` of the normalized response kernel.

    Defined as ``integral h(tau) exp(+i Omega tau) dtau`` under the package
    transform convention, with ``H(0) = 1`` exactly (unit-area kernel).
    """
    omega = np.asarray(omega, dtype=float)[..., np.newaxis]
    f_j = model.strengths
    d_j = model.widths
    w_j = model.centers
    h_j = f_j * (w_j**2 + d_j**2) / ((w_j**2 + d_j**2 - omega**2) - 2j * d_j * omega)
    return np.sum(h_j, axis=-1) / np.sum(f_j)


def _check_band(model: RamanModel, grid) -> None:
    if grid.nyquist < model.max_center:
        raise PhysicsError(
            f"grid Nyquist frequency {grid.nyquist:.2f} does not resolve the "
            f"largest response line at {model.max_center:.2f}"
        )


def raman_response_kernel(model: RamanModel, grid) -> np.ndarray:
    """Band-limited sampling of the causal response kernel ``h(tau)``.

    Synthesized from the exact transfer function on the grid frequencies, so
    the discrete area ``sum h dtau`` equals ``H(0) = 1`` exactly and the
    kernel matches the convolution applied by the propagation step.  Causal
    up to the ringing of the band limit.
    """
    _check_band(model, grid)
    transfer = raman_response_transfer(grid.frequencies, model)
    phased = transfer * np.exp(1j * grid.frequencies * grid.tau_max)
    return np.fft.fft(phased).real / (grid.n_points * grid.dtau)


def fluorescence_time_kernel(model: RamanModel, grid) -> np.ndarray:
    """Correlation kernel ``F_tilde(tau)``, the inverse transform of F(Omega).

    Normalized so that a flat spectrum gives a discrete delta ``F(0)/dtau``
    at tau = 0 and ``sum F_tilde dtau = F(0)``.
    """
    _check_band(model, grid)
    spectrum = fluorescence(grid.frequencies, model)
    phased = spectrum * np.exp(1j * grid.frequencies * grid.tau_max)
    return np.fft.fft(phased).real / (grid.n_points * grid.dtau)
