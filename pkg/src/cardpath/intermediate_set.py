"""Points with a reliable countable coordinate and a seeded continuous image.

A point carries a real-valued countable coordinate n whose integer part
names its unit set, plus an optional realized image r.  Realization draws
r once from an explicit distribution; repeated draws with the same
(point, distribution, seed) triple replay identically.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import AlreadyRealized, InvalidDistribution

_DENSITY_TOL = 1e-9
_CDF_NODES = 20001


@dataclass(frozen=True)
class IntermediatePoint:
    """Countable coordinate n, optional continuous image, optional event time."""

    n: float
    image: Optional[float] = None
    realized_at: Optional[float] = None

    def __post_init__(self):
        if not math.isfinite(self.n):
            raise ValueError("countable coordinate must be finite")


@dataclass(frozen=True)
class UnitSet:
    """All points sharing one integer countable coordinate."""

    index: int
    members: tuple[IntermediatePoint, ...]

    def __post_init__(self):
        for pt in self.members:
            if unit_set_of(pt) != self.index:
                raise ValueError(
                    f"member with n={pt.n} does not belong to unit set {self.index}"
                )


class MappingDistribution:
    """Distribution of the continuous image over a bounded support.

    Use the constructors `uniform`, `point_mass`, or `from_density`.  The
    density must be nonnegative and integrate to one over [lo, hi] within
    1e-9; `point_mass` is the degenerate limit and is handled exactly.
    """

    def __init__(self, lo: float, hi: float,
                 density: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 atom: Optional[float] = None):
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidDistribution("support endpoints must be finite")
        self.lo = float(lo)
        self.hi = float(hi)
        self.atom = atom
        self.density = density
        if atom is not None:
            if not (lo <= atom <= hi):
                raise InvalidDistribution("atom lies outside the support")
            self._cdf_grid = None
            return
        if hi <= lo:
            raise InvalidDistribution("support must satisfy lo < hi")
        if density is None:
            raise InvalidDistribution("density callable required")
        xs = np.linspace(self.lo, self.hi, _CDF_NODES)
        vals = np.asarray(density(xs), dtype=float)
        if vals.shape != xs.shape:
            raise InvalidDistribution("density must map arrays to arrays of the same shape")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0):
            raise InvalidDistribution("density must be finite and nonnegative")
        total, _ = integrate.quad(lambda r: float(density(np.asarray([r]))[0]),
                                  self.lo, self.hi, limit=200)
        if abs(total - 1.0) > _DENSITY_TOL:
            raise InvalidDistribution(
                f"density integrates to {total!r}, not 1 within {_DENSITY_TOL}"
            )
        cdf = integrate.cumulative_trapezoid(vals, xs, initial=0.0)
        cdf /= cdf[-1]
        self._xs = xs
        self._cdf_grid = cdf

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "MappingDistribution":
        span = hi - lo
        if span <= 0:
            raise InvalidDistribution("support must satisfy lo < hi")
        return cls(lo, hi, density=lambda r: np.full_like(np.asarray(r, float), 1.0 / span))

    @classmethod
    def point_mass(cls, r: float) -> "MappingDistribution":
        return cls(r, r, atom=r)

    @classmethod
    def from_density(cls, lo: float, hi: float,
                     density: Callable[[np.ndarray], np.ndarray]) -> "MappingDistribution":
        return cls(lo, hi, density=density)

    def sample(self, rng: np.random.Generator, size: Optional[int] = None):
        """Inverse-CDF draw(s); scalar when size is None."""
        if self.atom is not None:
            if size is None:
                return self.atom
            return np.full(size, self.atom)
        u = rng.random(size=size)
        return np.interp(u, self._cdf_grid, self._xs)


def _seed_sequence_for(point: IntermediatePoint, seed: int) -> np.random.SeedSequence:
    # Fold the countable coordinate into the entropy via its IEEE bit
    # pattern, so distinct points with the same seed draw independently
    # while replays are exact.
    n_bits = int(np.float64(point.n).view(np.uint64))
    return np.random.SeedSequence(entropy=[int(seed) & ((1 << 64) - 1), n_bits])


def realize_mapping(point: IntermediatePoint, dist: MappingDistribution,
                    seed: int, t: Optional[float] = None) -> IntermediatePoint:
    """Draw the continuous image of a point, once.

    Deterministic: the same (point, dist, seed) triple always yields the
    same image.  Raises AlreadyRealized if the image is already set.
    """
    if point.image is not None:
        raise AlreadyRealized(f"point n={point.n} already has image {point.image}")
    rng = np.random.default_rng(_seed_sequence_for(point, seed))
    r = float(dist.sample(rng))
    return dataclasses.replace(point, image=r, realized_at=t)


def realize_population(points, dist: MappingDistribution, seed: int):
    """Realize many points under one seed; order-independent per point."""
    return [realize_mapping(pt, dist, seed) for pt in points]


def unit_set_of(point: IntermediatePoint) -> int:
    """Unit-set index: floor of the countable coordinate."""
    return math.floor(point.n)


def collect_unit_sets(points) -> dict[int, UnitSet]:
    """Partition a finite population into unit sets keyed by index."""
    buckets: dict[int, list[IntermediatePoint]] = {}
    for pt in points:
        buckets.setdefault(unit_set_of(pt), []).append(pt)
    return {idx: UnitSet(idx, tuple(members)) for idx, members in sorted(buckets.items())}
