"""Stochastic inputs: initial vacuum noise, gain/loss noise and phonon noise.

Discretization rule: a delta-correlated source ``delta(tau - tau')
delta(zeta - zeta')`` becomes an independent Gaussian per grid point and
step with variance ``1/(dtau * dzeta)`` per unit spectral density, so every
sampled *increment* (source times dzeta) has variance proportional to
``dzeta / dtau``.

Streams are seeded per trajectory through a counter-style key derived from
the master seed, which makes ensembles reproducible regardless of scheduling
and lets matched coarse/fine integrations share one underlying noise source:
an increment over ``dzeta`` is by construction the sum of the increments of
its sub-steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TimeGrid
from .physics import PhysicsError, RamanModel, fluorescence


class NoiseError(ValueError):
    """Raised for inconsistent noise configuration."""


@dataclass(frozen=True)
class NoiseSettings:
    """Toggles and scales for the three noise sources."""

    n_bar: float
    alpha_g: float = 0.0
    alpha_a: float = 0.0
    enable_vacuum: bool = True
    enable_gain: bool = False
    enable_raman: bool = False
    raman: RamanModel | None = None
    master_seed: int = 0

    def __post_init__(self) -> None:
        if not self.n_bar > 0:
            raise NoiseError(f"n_bar must be positive, got {self.n_bar}")
        if self.alpha_g < 0 or self.alpha_a < 0:
            raise NoiseError("gain and loss coefficients must be >= 0")
        if self.enable_gain and self.alpha_g != self.alpha_a:
            raise NoiseError(
                "balanced configuration requires alpha_g == alpha_a "
                f"(got {self.alpha_g} and {self.alpha_a})"
            )
        if self.enable_raman and self.raman is None:
            raise NoiseError("Raman noise enabled but no RamanModel given")


def derive_trajectory_seed(
    master_seed: int, trajectory_index: int, family: int = 0
) -> np.random.SeedSequence:
    """Independent, reproducible seed for one trajectory.

    Injective in ``trajectory_index`` for a fixed master seed; the same
    arguments always produce a bit-identical stream.  ``family`` separates
    run families (e.g. the per-source decomposition runs) drawn from one
    master seed.
    """
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(family, trajectory_index))


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def sample_initial_vacuum(grid: TimeGrid, n_bar: float, rng) -> np.ndarray:
    """Initial Wigner vacuum fluctuation, complex Gaussian per point.

    Per-point variance of ``|dphi|^2`` is ``1/(2 n_bar dtau)``, split equally
    between independent real and imaginary quadratures.
    """
    if not n_bar > 0:
        raise NoiseError(f"n_bar must be positive, got {n_bar}")
    rng = _rng_from(rng)
    sigma = np.sqrt(1.0 / (4.0 * n_bar * grid.dtau))
    draws = rng.standard_normal((2, grid.n_points))
    return sigma * (draws[0] + 1j * draws[1])


def sample_gain_noise(grid: TimeGrid, settings: NoiseSettings, dzeta: float, rng) -> np.ndarray:
    """Additive gain/loss noise increment ``Gamma * dzeta`` for one step.

    Complex white noise; per-point variance
    ``(alpha_g + alpha_a) * dzeta / (2 n_bar dtau)``.
    """
    if not dzeta > 0:
        raise NoiseError(f"dzeta must be positive, got {dzeta}")
    rng = _rng_from(rng)
    var = (settings.alpha_g + settings.alpha_a) * dzeta / (2.0 * settings.n_bar * grid.dtau)
    sigma = np.sqrt(var / 2.0)
    draws = rng.standard_normal((2, grid.n_points))
    return sigma * (draws[0] + 1j * draws[1])


def _raman_filter(grid: TimeGrid, settings: NoiseSettings) -> np.ndarray:
    """sqrt of the fluorescence on the non-negative rfft frequencies."""
    model = settings.raman
    if grid.nyquist < model.max_center:
        raise PhysicsError(
            f"grid Nyquist frequency {grid.nyquist:.2f} does not resolve the "
            f"phonon band up to {model.max_center:.2f}"
        )
    omega_r = 2.0 * np.pi * np.fft.rfftfreq(grid.n_points, d=grid.dtau)
    spectrum = fluorescence(omega_r, model)
    if np.any(spectrum < 0):
        raise NoiseError("fluorescence is negative on the grid (model misconfiguration)")
    return np.sqrt(spectrum)


def sample_raman_noise(grid: TimeGrid, settings: NoiseSettings, dzeta: float, rng) -> np.ndarray:
    """Real phonon-noise increment ``Gamma_R * dzeta`` for one step.

    Colored in tau with power spectral density ``2 F(Omega) / n_bar`` per
    unit zeta, white in zeta.  Synthesized by filtering white noise with
    ``sqrt(F)`` in the spectral domain.
    """
    if not dzeta > 0:
        raise NoiseError(f"dzeta must be positive, got {dzeta}")
    rng = _rng_from(rng)
    white = rng.standard_normal(grid.n_points)
    return _shape_raman(white, _raman_filter(grid, settings), grid, settings, dzeta)


def _shape_raman(
    white: np.ndarray,
    sqrt_f: np.ndarray,
    grid: TimeGrid,
    settings: NoiseSettings,
    dzeta: float,
) -> np.ndarray:
    scale = np.sqrt(2.0 * dzeta / (settings.n_bar * grid.dtau))
    return scale * np.fft.irfft(sqrt_f * np.fft.rfft(white, axis=-1), n=grid.n_points, axis=-1)


class NoiseStream:
    """Per-trajectory noise source consumed step by step by the integrator.

    Produces increments at a base step ``dzeta_base``; an increment over
    ``k`` base steps is the exact sum of ``k`` consecutive base increments,
    which is what step-doubling error control relies on.
    """

    def __init__(
        self,
        grid: TimeGrid,
        settings: NoiseSettings,
        dzeta_base: float,
        seed,
    ) -> None:
        if not dzeta_base > 0:
            raise NoiseError(f"dzeta_base must be positive, got {dzeta_base}")
        self.grid = grid
        self.settings = settings
        self.dzeta_base = dzeta_base
        self.rng = _rng_from(seed)
        self._gain_sigma = 0.0
        if settings.enable_gain:
            var = (settings.alpha_g + settings.alpha_a) * dzeta_base / (
                2.0 * settings.n_bar * grid.dtau
            )
            self._gain_sigma = np.sqrt(var / 2.0)
        self._sqrt_f = _raman_filter(grid, settings) if settings.enable_raman else None

    def initial_vacuum(self) -> np.ndarray:
        """Vacuum perturbation for the initial condition (zeros if disabled)."""
        if not self.settings.enable_vacuum:
            return np.zeros(self.grid.n_points, dtype=np.complex128)
        return sample_initial_vacuum(self.grid, self.settings.n_bar, self.rng)

    def _gain_base(self) -> np.ndarray:
        draws = self.rng.standard_normal((2, self.grid.n_points))
        return self._gain_sigma * (draws[0] + 1j * draws[1])

    def _raman_base(self) -> np.ndarray:
        white = self.rng.standard_normal(self.grid.n_points)
        return _shape_raman(
            white, self._sqrt_f, self.grid, self.settings, self.dzeta_base
        )

    def increments(self, n_base: int = 1) -> tuple[np.ndarray | None, np.ndarray | None]:
        """Noise increments for a step spanning ``n_base`` base steps.

        Returns ``(gain_increment, raman_increment)``; entries are None when
        the corresponding source is disabled.
        """
        gain = None
        raman = None
        for _ in range(n_base):
            if self.settings.enable_gain:
                g = self._gain_base()
                gain = g if gain is None else gain + g
            if self.settings.enable_raman:
                r = self._raman_base()
                raman = r if raman is None else raman + r
        return gain, raman
