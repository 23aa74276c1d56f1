"""Time partitions, spatial grids, lattice paths, and the discretized action.

The action uses the midpoint rule on each step:

    S = sum_i [ m/2 * ((r_i - r_{i-1}) / eps)^2 - V((r_i + r_{i-1})/2, t_{i-1/2}) ] * eps

with eps = (t_b - t_a)/k and t_{i-1/2} = t_a + (i - 1/2)*eps.  A path whose
midpoint potential is +inf gets a nonfinite action; path-sum consumers
treat such paths as carrying zero weight.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .amplitude import Amplitude, WaveSample, born_probability, phase_from_count
from .errors import GridMismatch, NonpositiveUnit, ZeroDenominator


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of (t_a, t_b) into k steps."""

    t_a: float
    t_b: float
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if not self.t_b > self.t_a:
            raise ValueError("t_b must exceed t_a")

    @property
    def epsilon(self) -> float:
        return (self.t_b - self.t_a) / self.k

    @property
    def duration(self) -> float:
        return self.t_b - self.t_a

    def times(self) -> np.ndarray:
        return self.t_a + self.epsilon * np.arange(self.k + 1)

    def midpoint_times(self) -> np.ndarray:
        """t_{i-1/2} for i = 1..k, where the step potential is evaluated."""
        return self.t_a + (np.arange(1, self.k + 1) - 0.5) * self.epsilon


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform spatial grid with sites points from lo to hi inclusive."""

    lo: float
    hi: float
    sites: int

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError("sites must be at least 2")
        if not self.hi > self.lo:
            raise ValueError("hi must exceed lo")

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / (self.sites - 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.sites)

    def nearest_index(self, r: float) -> int:
        j = int(round((r - self.lo) / self.dx))
        return min(max(j, 0), self.sites - 1)


@dataclass(frozen=True)
class LatticePath:
    """Site sequence r_0..r_k aligned with a TimeGrid."""

    sites: tuple[float, ...]

    def __post_init__(self):
        if len(self.sites) < 2:
            raise ValueError("a path needs at least two sites")

    @property
    def k(self) -> int:
        return len(self.sites) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.sites, dtype=float)


@dataclass(frozen=True)
class LagrangianSpec:
    """Mass plus potential V(r, t); derivative optional, else finite differences."""

    mass: float
    potential: Callable[[np.ndarray, float], np.ndarray]
    label: str = ""
    potential_deriv: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    time_dependent: bool = False

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    def v(self, r, t):
        return np.asarray(self.potential(np.asarray(r, dtype=float), t), dtype=float)

    def v_prime(self, r, t):
        if self.potential_deriv is not None:
            return np.asarray(self.potential_deriv(np.asarray(r, dtype=float), t), dtype=float)
        r = np.asarray(r, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(r))
        return (self.v(r + h, t) - self.v(r - h, t)) / (2.0 * h)


def free_particle(mass: float = 1.0) -> LagrangianSpec:
    return LagrangianSpec(mass=mass, potential=lambda r, t: np.zeros_like(r),
                          potential_deriv=lambda r, t: np.zeros_like(r),
                          label="free")


def harmonic_oscillator(mass: float = 1.0, omega: float = 1.0) -> LagrangianSpec:
    return LagrangianSpec(mass=mass,
                          potential=lambda r, t: 0.5 * mass * omega ** 2 * r * r,
                          potential_deriv=lambda r, t: mass * omega ** 2 * r,
                          label=f"harmonic(omega={omega:g})")


def linear_potential(mass: float = 1.0, g: float = 1.0) -> LagrangianSpec:
    return LagrangianSpec(mass=mass,
                          potential=lambda r, t: g * r,
                          potential_deriv=lambda r, t: np.full_like(r, g),
                          label=f"linear(g={g:g})")


@dataclass(frozen=True)
class PathAmplitude:
    """Per-path amplitude: winding m = S/h times a modulus ratio."""

    winding: float
    modulus_ratio: float
    value: Amplitude


def discretized_action(path: LatticePath, grid: TimeGrid, lag: LagrangianSpec) -> float:
    """Midpoint-rule action of one lattice path."""
    r = path.as_array()
    if r.size != grid.k + 1:
        raise GridMismatch(f"path has {r.size} sites but grid has k={grid.k}")
    eps = grid.epsilon
    dr = np.diff(r)
    kinetic = 0.5 * lag.mass * (dr / eps) ** 2
    mids = 0.5 * (r[1:] + r[:-1])
    if lag.time_dependent:
        tmids = grid.midpoint_times()
        pot = np.array([float(lag.v(m, t)) for m, t in zip(mids, tmids)])
    else:
        pot = lag.v(mids, grid.t_a)
    return float(np.sum((kinetic - pot) * eps))


def winding_of(S: float, h: float) -> float:
    """Winding m = S/h; the phase downstream is 2*pi*m."""
    if h <= 0:
        raise NonpositiveUnit(f"h={h} must be positive")
    return S / h


def transition_ratio(prev: WaveSample, next: WaveSample) -> float:
    """P(next)/P(prev); the phase factor drops out of the modulus."""
    p_prev = born_probability(phase_from_count(prev))
    if p_prev == 0.0:
        raise ZeroDenominator("conditioning sample has zero probability")
    p_next = born_probability(phase_from_count(next))
    return p_next / p_prev


def path_probability_product(samples: Sequence[WaveSample]) -> float:
    """Product of successive transition ratios along a sample path.

    Telescopes to (A_k/A_0)^2 up to floating rounding; windings never enter.
    """
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    prod = 1.0
    for prev, next in zip(samples[:-1], samples[1:]):
        prod *= transition_ratio(prev, next)
    return prod


def path_amplitude(path: LatticePath, grid: TimeGrid, lag: LagrangianSpec,
                   h: float, modulus_ratio: float) -> PathAmplitude:
    """Amplitude carried by one path: modulus_ratio * e^(2*pi*i*S/h)."""
    S = discretized_action(path, grid, lag)
    m = winding_of(S, h)
    value = phase_from_count(WaveSample(modulus_ratio, m))
    return PathAmplitude(winding=m, modulus_ratio=modulus_ratio, value=value)


def path_to_csv(path: LatticePath, grid: TimeGrid) -> str:
    """CSV rows t_i, r_i with 17 significant digits."""
    if len(path.sites) != grid.k + 1:
        raise GridMismatch("path and grid lengths differ")
    buf = io.StringIO()
    buf.write("t,r\n")
    for t, r in zip(grid.times(), path.sites):
        buf.write(f"{t:.17g},{r:.17g}\n")
    return buf.getvalue()
