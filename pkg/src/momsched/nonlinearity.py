"""Channel nonlinearities applied to transmitted gradients.

All maps act elementwise on floats or arrays.  ``Identity``, ``LogQuantizer``
and ``Saturation`` are odd, sign-preserving and sector-bound; the uniform
quantizer has a dead zone around zero and is kept only as a baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np


class NotSectorBoundError(ValueError):
    pass


def round_half_away(v):
    """Round to nearest integer, ties away from zero (odd by construction)."""
    return np.copysign(np.floor(np.abs(v) + 0.5), v)


@dataclass(frozen=True)
class Identity:
    def apply(self, u):
        return u

    def sector_bounds(self) -> tuple[float, float]:
        return 1.0, 1.0


@dataclass(frozen=True)
class LogQuantizer:
    """``sgn(u) exp(rho * round(log|u| / rho))``, with ``g(0) = 0``."""

    rho: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"quantization level must be positive, got {self.rho}")

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        mag = np.abs(u)
        with np.errstate(divide="ignore"):
            level = round_half_away(np.log(mag) / self.rho)
        out = np.copysign(np.exp(self.rho * level), u)
        out = np.where(mag == 0.0, 0.0 * u, out)
        return out if out.ndim else float(out)

    def sector_bounds(self) -> tuple[float, float]:
        # |log g - log u| <= rho/2
        return math.exp(-self.rho / 2.0), math.exp(self.rho / 2.0)


@dataclass(frozen=True)
class Saturation:
    """Leaky clip: slope 1 up to ``limit``, slope ``slope_floor`` beyond."""

    limit: float
    slope_floor: float = 0.05

    def __post_init__(self):
        if not self.limit > 0:
            raise ValueError(f"limit must be positive, got {self.limit}")
        if not 0.0 < self.slope_floor <= 1.0:
            raise ValueError(f"slope_floor must lie in (0, 1], got {self.slope_floor}")

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        mag = np.abs(u)
        out = np.copysign(np.minimum(mag, self.limit)
                          + self.slope_floor * np.maximum(mag - self.limit, 0.0), u)
        return out if out.ndim else float(out)

    def sector_bounds(self) -> tuple[float, float]:
        return self.slope_floor, 1.0


@dataclass(frozen=True)
class UniformQuantizer:
    """``delta * round(u / delta)``; zero on ``|u| < delta/2``."""

    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"quantization level must be positive, got {self.delta}")

    def apply(self, u):
        out = self.delta * round_half_away(np.asarray(u, dtype=float) / self.delta)
        return out if out.ndim else float(out)

    def sector_bounds(self) -> tuple[float, float]:
        raise NotSectorBoundError("uniform quantizer maps a neighbourhood of 0 to 0")


SectorMap = Union[Identity, LogQuantizer, Saturation, UniformQuantizer]


def apply(map: SectorMap, u):
    return map.apply(u)


def sector_bounds(map: SectorMap) -> tuple[float, float]:
    """``(kappa, K)`` with ``kappa <= g(u)/u <= K`` for every ``u != 0``."""
    return map.sector_bounds()


def is_sector_bound(map: SectorMap) -> bool:
    return not isinstance(map, UniformQuantizer)


_NAMES = {
    "identity": Identity,
    "log": LogQuantizer,
    "saturation": Saturation,
    "uniform": UniformQuantizer,
}


def from_spec(kind: str, param: float | None = None, slope_floor: float | None = None) -> SectorMap:
    """Build a map from its config name: identity | log | saturation | uniform."""
    try:
        cls = _NAMES[kind]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {kind!r}; expected one of {sorted(_NAMES)}") from None
    if cls is Identity:
        return Identity()
    if param is None:
        raise ValueError(f"nonlinearity {kind!r} needs a 'param'")
    if cls is Saturation and slope_floor is not None:
        return Saturation(float(param), float(slope_floor))
    return cls(float(param))


def to_spec(map: SectorMap) -> dict:
    if isinstance(map, Identity):
        return {"type": "identity"}
    if isinstance(map, LogQuantizer):
        return {"type": "log", "param": map.rho}
    if isinstance(map, Saturation):
        return {"type": "saturation", "param": map.limit, "slope_floor": map.slope_floor}
    return {"type": "uniform", "param": map.delta}
