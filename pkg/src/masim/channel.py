"""Field-response multipath channel as a function of continuous antenna positions.

Every transmit antenna ``t`` (a 2-vector in meters, local to its transmitter's
region) sees the channel

    h(t) = sum_l tau_l * exp(-i * (2 pi / lambda) * t . p_l)

with one wave vector ``p_l = [sin(theta) cos(phi), cos(theta)]`` per path.
The transmit field-response vector uses the opposite sign, so that
``h(t) = g(t)^H tau``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PathAngles:
    """Elevation ``theta`` and azimuth ``phi`` of one path, both in [0, pi]."""

    theta: float
    phi: float

    def __post_init__(self):
        for name in ("theta", "phi"):
            value = getattr(self, name)
            if not (0.0 <= value <= np.pi):
                raise ValueError(f"{name}={value!r} outside [0, pi]")


def wave_vector(angles: PathAngles) -> np.ndarray:
    return wave_vectors(np.array([angles.theta]), np.array([angles.phi]))[0]


def wave_vectors(theta, phi) -> np.ndarray:
    """Vectorized wave vectors; output has shape ``theta.shape + (2,)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any((theta < 0) | (theta > np.pi)) or np.any((phi < 0) | (phi > np.pi)):
        raise ValueError("path angles must lie in [0, pi]")
    return np.stack([np.sin(theta) * np.cos(phi), np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class PathSet:
    """Paths of one transmitter-user link.

    Attributes
    ----------
    theta, phi : ndarray, shape (L,)
        Path angles in radians.
    responses : ndarray, shape (L,), complex
        Complex path responses (diagonal of the path-response matrix).
    """

    theta: np.ndarray
    phi: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        tau = np.atleast_1d(np.asarray(self.responses, dtype=complex))
        if not (theta.shape == phi.shape == tau.shape) or theta.ndim != 1:
            raise ValueError("theta, phi and responses must be 1-D of equal length")
        if theta.size < 1:
            raise ValueError("a link needs at least one path")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "responses", tau)
        object.__setattr__(self, "_p", wave_vectors(theta, phi))

    @property
    def L(self) -> int:
        return self.theta.size

    @property
    def wave_vectors(self) -> np.ndarray:
        return self._p


def _wavenumber(wavelength: float) -> float:
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    return 2.0 * np.pi / wavelength


def field_response_vector(t, paths: PathSet, wavelength: float) -> np.ndarray:
    """Transmit FRV of an antenna at ``t``: entries ``exp(+i k t.p_l)``."""
    k = _wavenumber(wavelength)
    return np.exp(1j * k * (paths.wave_vectors @ np.asarray(t, dtype=float)))


def channel_coefficient(t, paths: PathSet, wavelength: float) -> complex:
    k = _wavenumber(wavelength)
    phase = paths.wave_vectors @ np.asarray(t, dtype=float)
    return complex(np.sum(paths.responses * np.exp(-1j * k * phase)))


def channel_vector(T, paths: PathSet, wavelength: float) -> np.ndarray:
    """Channel of every antenna in ``T`` (shape (N, 2)) over one link."""
    k = _wavenumber(wavelength)
    phase = np.asarray(T, dtype=float) @ paths.wave_vectors.T  # (N, L)
    return np.exp(-1j * k * phase) @ paths.responses


@dataclass(frozen=True)
class ChannelState:
    """All K x K channel vectors; ``H[k, j]`` is h_kj (transmitter j -> user k)."""

    H: np.ndarray
    wavelength: float

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[2]

    def h(self, k: int, j: int) -> np.ndarray:
        return self.H[k, j]


def channel_state(positions, scenario) -> ChannelState:
    """Evaluate every link at the given antenna positions.

    ``positions`` has shape (K, N, 2) in meters; ``scenario`` supplies the
    stacked wave vectors (K, K, L, 2) and responses (K, K, L).
    """
    T = np.asarray(positions, dtype=float)
    P = scenario.wave_vector_array
    tau = scenario.response_array
    K = P.shape[0]
    if T.ndim != 3 or T.shape[0] != K or T.shape[2] != 2:
        raise ValueError(f"positions must have shape (K={K}, N, 2), got {T.shape}")
    k = _wavenumber(scenario.wavelength)
    # phase[k, j, n, l] = t_{j,n} . p_{kj,l}
    phase = np.einsum("jnd,kjld->kjnl", T, P)
    H = np.einsum("kjnl,kjl->kjn", np.exp(-1j * k * phase), tau)
    return ChannelState(H=H, wavelength=scenario.wavelength)
