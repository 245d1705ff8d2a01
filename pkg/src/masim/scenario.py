"""Random problem instances and fixed-antenna layouts.

Sampling order (all draws come from one ``numpy.random.Generator`` built on
PCG64 with the config seed, so instances are identical across platforms):

1. for each transmitter ``j``: ``S`` angle pairs from ``rng.random((S, 2))``;
2. for each user ``k``, then each transmitter ``j``: the pool indices
   (``rng.choice(S, L, replace=L > S)``) followed by ``L`` complex Gaussian
   path responses from ``rng.standard_normal((L, 2))``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .channel import PathAngles, PathSet

DEFAULT_WAVELENGTH = 0.1


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(watts):
    return 10.0 * np.log10(np.asarray(watts, dtype=float) * 1000.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Parameters of one K-pair MISO interference network instance.

    ``A`` is the side of each square transmit region in wavelengths; ``D`` is
    the minimum antenna spacing in meters (``None`` means half a wavelength).
    ``gamma_min`` and ``sigma2`` are linear and may be scalars (shared by all
    users) or length-K lists.
    """

    K: int = 2
    N: int = 4
    L: int = 10
    A: float = 4.0
    D: float | None = None
    S: int = 10
    gamma_min: float | list = 10.0
    sigma2: float | list = 1e-11
    d_kk: float = 50.0
    d_kj: float = 80.0
    beta0: float = 1e-4
    alpha0: float = 2.8
    seed: int = 0
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        for name in ("K", "N", "L", "S"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not (self.A >= 0 and math.isfinite(self.A)):
            raise ValueError("A must be finite and >= 0")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.D is not None and not self.D > 0:
            raise ValueError("D must be positive")
        for name in ("d_kk", "d_kj", "beta0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.alpha0 >= 0:
            raise ValueError("alpha0 must be >= 0")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        for name in ("gamma_min", "sigma2"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if arr.ndim != 1 or arr.size not in (1, self.K):
                raise ValueError(f"{name} must be a scalar or a length-K list")
            if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
                raise ValueError(f"{name} entries must be positive")
            if isinstance(getattr(self, name), (list, tuple, np.ndarray)):
                object.__setattr__(self, name, [float(x) for x in arr])

    @property
    def gamma(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.gamma_min, dtype=float), (self.K,)).copy()

    @property
    def noise(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.sigma2, dtype=float), (self.K,)).copy()

    @property
    def region_side(self) -> float:
        """Region side length in meters."""
        return self.A * self.wavelength

    @property
    def min_spacing(self) -> float:
        return self.wavelength / 2 if self.D is None else float(self.D)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown ScenarioConfig keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    paths: tuple  # paths[k][j] -> PathSet
    pools: tuple = field(default=(), repr=False)  # pools[j] -> (theta, phi) arrays

    @property
    def K(self) -> int:
        return self.config.K

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def wavelength(self) -> float:
        return self.config.wavelength

    @property
    def gamma(self) -> np.ndarray:
        return self.config.gamma

    @property
    def noise(self) -> np.ndarray:
        return self.config.noise

    @cached_property
    def wave_vector_array(self) -> np.ndarray:
        """Stacked wave vectors, shape (K, K, L, 2)."""
        return np.array([[p.wave_vectors for p in row] for row in self.paths])

    @cached_property
    def response_array(self) -> np.ndarray:
        """Stacked path responses, shape (K, K, L)."""
        return np.array([[p.responses for p in row] for row in self.paths])

    def digest(self) -> str:
        h = hashlib.sha256(self.config.to_json().encode())
        h.update(np.ascontiguousarray(self.wave_vector_array).tobytes())
        h.update(np.ascontiguousarray(self.response_array).tobytes())
        return h.hexdigest()[:16]


def sample_angle_pair(u1, u2):
    """Inverse-CDF map of uniforms to (theta, phi) with density sin(theta)/(2 pi).

    Works elementwise on arrays; scalar inputs return a :class:`PathAngles`.
    """
    theta = np.arccos(np.clip(1.0 - 2.0 * np.asarray(u1, dtype=float), -1.0, 1.0))
    phi = np.pi * np.asarray(u2, dtype=float)
    if theta.ndim == 0:
        return PathAngles(float(theta), float(phi))
    return theta, phi


def expected_gain(d: float, beta0: float, alpha0: float) -> float:
    if not d > 0:
        raise ValueError("distance must be positive")
    return beta0 * d ** (-alpha0)


def sample_path_responses(L: int, gain: float, rng: np.random.Generator) -> np.ndarray:
    """``L`` i.i.d. CN(0, gain / L) path responses."""
    z = rng.standard_normal((L, 2))
    return math.sqrt(gain / (2.0 * L)) * (z[:, 0] + 1j * z[:, 1])


def build_scenario(config: ScenarioConfig) -> Scenario:
    rng = np.random.default_rng(config.seed)
    K, L, S = config.K, config.L, config.S
    pools = []
    for _ in range(K):
        u = rng.random((S, 2))
        pools.append(sample_angle_pair(u[:, 0], u[:, 1]))
    paths = []
    for k in range(K):
        row = []
        for j in range(K):
            idx = rng.choice(S, size=L, replace=L > S)
            d = config.d_kk if k == j else config.d_kj
            tau = sample_path_responses(L, expected_gain(d, config.beta0, config.alpha0), rng)
            theta, phi = pools[j]
            row.append(PathSet(theta[idx], phi[idx], tau))
        paths.append(tuple(row))
    return Scenario(config=config, paths=tuple(paths), pools=tuple(pools))


def fpa_layout(N: int, wavelength: float, side: float, spacing: float | None = None) -> np.ndarray:
    """Row-major uniform planar grid of ``N`` antennas centered in ``[0, side]^2``.

    ``side`` is in meters. The grid has ``ceil(sqrt(N))`` rows and
    ``ceil(N / rows)`` columns at ``spacing`` (half a wavelength by default).
    For ``side == 0`` the grid is centered on the origin and not checked
    against the region, since such regions are treated as immovable.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    s = wavelength / 2 if spacing is None else spacing
    rows = math.ceil(math.sqrt(N))
    cols = math.ceil(N / rows)
    if side > 0 and (rows - 1) * s > side * (1 + 1e-12):
        raise ValueError(
            f"{rows}x{cols} grid at spacing {s:g} m does not fit a {side:g} m region"
        )
    r, c = np.divmod(np.arange(N), cols)
    x = (c - (cols - 1) / 2) * s + side / 2
    y = (r - (rows - 1) / 2) * s + side / 2
    return np.column_stack([x, y])
