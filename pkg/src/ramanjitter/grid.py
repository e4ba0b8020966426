"""Uniform temporal lattice, spectral transforms and the complex field container.

All numerics in this package live on a periodic, uniformly sampled window
``tau in [-tau_max, tau_max)`` of ``n_points`` samples (a power of two, so
FFTs stay fast and frequencies pair up as +/- twins).

Transform convention
--------------------
The forward transform is

    ``phi_tilde(Omega) = (1/sqrt(2*pi)) * integral phi(tau) exp(+i Omega tau) dtau``

so a time-domain component ``exp(-i Omega0 tau)`` appears in the bin at
``Omega = +Omega0``.  Spectra are returned in FFT bin order, matching
``TimeGrid.frequencies``.  Parseval's identity holds in the discretized
form ``sum |phi|^2 dtau == sum |phi_tilde|^2 dOmega`` to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised for inconsistent grid or field construction."""


@dataclass(frozen=True)
class TimeGrid:
    """Periodic time grid spanning ``[-tau_max, tau_max)``.

    Parameters
    ----------
    n_points : int
        Number of samples; must be a positive power of two.
    tau_max : float
        Half-width of the window in dimensionless time.
    """

    n_points: int
    tau_max: float
    tau: np.ndarray = field(init=False, repr=False, compare=False)
    frequencies: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.n_points
        if n <= 0 or (n & (n - 1)) != 0:
            raise GridError(f"n_points must be a positive power of two, got {n}")
        if not self.tau_max > 0:
            raise GridError(f"tau_max must be positive, got {self.tau_max}")
        tau = -self.tau_max + self.dtau * np.arange(n)
        omega = 2.0 * np.pi * np.fft.fftfreq(n, d=self.dtau)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "frequencies", omega)

    @property
    def dtau(self) -> float:
        """Sample spacing; ``dtau * n_points == 2 * tau_max`` exactly."""
        return 2.0 * self.tau_max / self.n_points

    @property
    def domega(self) -> float:
        """Frequency bin spacing ``2*pi / (2*tau_max)``."""
        return np.pi / self.tau_max

    @property
    def nyquist(self) -> float:
        """Largest resolvable angular frequency ``pi / dtau``."""
        return np.pi / self.dtau


@dataclass
class ComplexField:
    """Sampled complex envelope ``phi(tau)`` at propagation coordinate zeta."""

    grid: TimeGrid
    values: np.ndarray
    zeta: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n_points,):
            raise GridError(
                f"field has {self.values.shape} values for a "
                f"{self.grid.n_points}-point grid"
            )

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), self.zeta)


@dataclass
class SpectralField:
    """Spectrum ``phi_tilde(Omega)`` in FFT bin order (see module docstring)."""

    grid: TimeGrid
    values: np.ndarray
    zeta: float = 0.0


def forward_transform(field_: ComplexField) -> SpectralField:
    """Continuum-normalized spectrum of a sampled field.

    The returned values approximate
    ``(1/sqrt(2*pi)) * integral phi(tau) exp(+i Omega tau) dtau`` at the grid
    frequencies, including the phase factor that accounts for the window
    starting at ``-tau_max``.
    """
    g = field_.grid
    raw = np.fft.ifft(field_.values) * (g.n_points * g.dtau / np.sqrt(2.0 * np.pi))
    phase = np.exp(-1j * g.frequencies * g.tau_max)
    return SpectralField(g, raw * phase, field_.zeta)


def inverse_transform(spec: SpectralField) -> ComplexField:
    """Invert :func:`forward_transform`; round-trips to 1e-12 relative."""
    g = spec.grid
    phase = np.exp(1j * g.frequencies * g.tau_max)
    values = np.fft.fft(spec.values * phase) * (np.sqrt(2.0 * np.pi) / (g.n_points * g.dtau))
    return ComplexField(g, values, spec.zeta)


def photon_number(field_: ComplexField) -> float:
    """Dimensionless photon-number functional ``sum |phi_k|^2 dtau``.

    Multiply by the photon-number scale ``n_bar`` to get actual photons.
    """
    return float(np.sum(np.abs(field_.values) ** 2) * field_.grid.dtau)


def spectral_density(field_: ComplexField) -> np.ndarray:
    """``|phi_tilde(Omega)|^2`` at the grid frequencies (FFT order)."""
    return np.abs(forward_transform(field_).values) ** 2


def field_momentum(field_: ComplexField) -> float:
    """Momentum functional ``Im integral phi* d(phi)/dtau dtau``."""
    g = field_.grid
    # d/dtau maps to -i*Omega under this convention; evaluate spectrally.
    spec = np.fft.ifft(field_.values)
    dphi = np.fft.fft(-1j * g.frequencies * spec)
    return float(np.sum(np.imag(np.conj(field_.values) * dphi)) * g.dtau)
