"""Stationary lattice paths and the small-hbar concentration of the path sum.

The concentration diagnostic uses the forward-backward slice decomposition:
with psi_i = T^i w_a and chi_j = T^j conj(w_b) (T is the symmetric one-step
kernel matrix), the pointwise product

    beta_i(x) = psi_i(x) * chi_{k-i}(x) * dx

sums to the full kernel value K at every slice i.  beta_i is the net
amplitude routed through site x at slice i, so

    f_i = sum_{|x - c_i| <= delta} |beta_i(x)| / sum_x |beta_i(x)|

is a genuine fraction in [0, 1] of the slice's amplitude mass lying inside
the tube of half-width delta around the classical position c_i.  The scan
reports the mean of f_i over interior slices; as hbar shrinks (equivalently
as the action in hbar units m = S_cl / (2 pi hbar) grows) the fraction
rises toward 1.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError, NoConvergence
from .lattice import (LagrangianSpec, LatticePath, SpaceGrid, TimeGrid,
                      discretized_action)
from .propagator import (PropagatorConfig, apply_step, convergence_recipe,
                         gaussian_window, step_matrix)


def _step_potential_derivs(lag: LagrangianSpec, mids: np.ndarray,
                           tmids: np.ndarray) -> np.ndarray:
    if lag.time_dependent:
        return np.array([float(lag.v_prime(mids[i], tmids[i]))
                         for i in range(mids.size)])
    return np.asarray(lag.v_prime(mids, tmids[0]), dtype=float)


def action_gradient(path: LatticePath, lag: LagrangianSpec,
                    grid: TimeGrid) -> np.ndarray:
    """Analytic gradient of the midpoint-rule action at the interior sites."""
    r = path.as_array()
    if r.size != grid.k + 1:
        raise ValueError("path length does not match the time grid")
    eps = grid.epsilon
    mids = 0.5 * (r[1:] + r[:-1])
    vp = _step_potential_derivs(lag, mids, grid.midpoint_times())
    kin = lag.mass * (2.0 * r[1:-1] - r[:-2] - r[2:]) / eps
    return kin - 0.5 * eps * (vp[:-1] + vp[1:])


def finite_difference_action_gradient(path: LatticePath, lag: LagrangianSpec,
                                      grid: TimeGrid, dx: float) -> np.ndarray:
    """Central-difference action gradient, step 1e-6 * dx per interior site."""
    h = 1e-6 * dx
    r = path.as_array()
    out = np.empty(grid.k - 1)
    for j in range(1, grid.k):
        rp = r.copy()
        rp[j] += h
        rm = r.copy()
        rm[j] -= h
        sp = discretized_action(LatticePath(tuple(rp)), grid, lag)
        sm = discretized_action(LatticePath(tuple(rm)), grid, lag)
        out[j - 1] = (sp - sm) / (2.0 * h)
    return out


def _second_derivs(lag: LagrangianSpec, mids: np.ndarray,
                   tmids: np.ndarray) -> np.ndarray:
    h = 1e-6 * np.maximum(1.0, np.abs(mids))
    if lag.time_dependent:
        return np.array([
            float((lag.v_prime(mids[i] + h[i], tmids[i])
                   - lag.v_prime(mids[i] - h[i], tmids[i])) / (2.0 * h[i]))
            for i in range(mids.size)])
    t = tmids[0]
    return (np.asarray(lag.v_prime(mids + h, t), dtype=float)
            - np.asarray(lag.v_prime(mids - h, t), dtype=float)) / (2.0 * h)


def classical_path(lag: LagrangianSpec, grid: TimeGrid, a: float, b: float,
                   tol: float = 1e-10, max_iter: int = 200) -> LatticePath:
    """Stationary point of the lattice action with pinned endpoints.

    Damped Newton iteration on the interior sites; the Hessian of the
    midpoint-rule action is tridiagonal, so each step is a banded solve.
    Starts from the straight line and stops when the max-norm of the
    gradient falls below tol.
    """
    k = grid.k
    if k == 1:
        return LatticePath((float(a), float(b)))
    eps = grid.epsilon
    tmids = grid.midpoint_times()
    r = np.linspace(a, b, k + 1)
    for _ in range(max_iter):
        g = action_gradient(LatticePath(tuple(r)), lag, grid)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= tol:
            return LatticePath(tuple(r))
        mids = 0.5 * (r[1:] + r[:-1])
        vpp = _second_derivs(lag, mids, tmids)
        diag = 2.0 * lag.mass / eps - 0.25 * eps * (vpp[:-1] + vpp[1:])
        off = -lag.mass / eps - 0.25 * eps * vpp[1:-1]
        ab = np.zeros((3, k - 1))
        ab[1] = diag
        if k > 2:
            ab[0, 1:] = off
            ab[2, :-1] = off
        step = solve_banded((1, 1), ab, -g)
        alpha = 1.0
        while alpha > 1e-6:
            trial = r.copy()
            trial[1:-1] += alpha * step
            gt = action_gradient(LatticePath(tuple(trial)), lag, grid)
            if float(np.max(np.abs(gt))) < gnorm:
                r = trial
                break
            alpha *= 0.5
        else:
            raise NoConvergence("Newton step failed to reduce the action gradient")
    raise NoConvergence(f"gradient still above {tol:g} after {max_iter} iterations")


@dataclass(frozen=True)
class ConcentrationScan:
    """Tube-mass fractions of the pinned path sum across an hbar sweep.

    m_scale is the classical action in units of 2*pi*hbar (the number of
    full phase turns along the stationary path); mass_fraction entries are
    guaranteed fractions in [0, 1].
    """

    hbar_values: tuple
    delta: float
    mass_fraction: tuple
    classical_path: LatticePath
    m_scale: tuple
    argmax_offset: tuple
    dx_values: tuple
    runtime_ms: tuple

    def __post_init__(self):
        for f in self.mass_fraction:
            if not (-1e-9 <= f <= 1.0 + 1e-9):
                raise ValueError(f"mass fraction {f} outside [0, 1]")

    def to_csv(self) -> str:
        lines = ["hbar,m_scale,mass_fraction,runtime_ms"]
        for h, m, f, rt in zip(self.hbar_values, self.m_scale,
                               self.mass_fraction, self.runtime_ms):
            lines.append(f"{h:.17g},{m:.17g},{f:.17g},{rt:.17g}")
        return "\n".join(lines) + "\n"


def slice_tube_fractions(cfg: PropagatorConfig, delta: float,
                         centers: Sequence[float], source_width: float,
                         phase_free: bool = False) -> np.ndarray:
    """Per-slice tube fractions f_1 .. f_{k-1} of the windowed path sum.

    centers must hold the k+1 slice positions of the reference path.
    Time-independent potentials only (one matrix, reused forward and
    backward).
    """
    if cfg.lag.time_dependent:
        raise ValueError("slice fractions need a time-independent potential")
    k = cfg.grid.k
    if k < 2:
        raise ValueError("need at least one interior slice")
    if len(centers) != k + 1:
        raise ValueError("centers must have k + 1 entries")
    x = cfg.space.points()
    dx = cfg.space.dx
    p = cfg.lag.mass * (cfg.b - cfg.a) / cfg.grid.duration
    wa = gaussian_window(x, cfg.a, source_width, p, cfg.hbar)
    wb = gaussian_window(x, cfg.b, source_width, p, cfg.hbar)
    if phase_free:
        wa, wb = np.abs(wa), np.abs(wb)
    Tm = step_matrix(cfg, 1, phase_free=phase_free)
    fwd = [wa.astype(complex)]
    for _ in range(k):
        fwd.append(apply_step(Tm, fwd[-1]))
    bwd = [np.conj(wb).astype(complex)]
    for _ in range(k):
        bwd.append(apply_step(Tm, bwd[-1]))
    fracs = np.empty(k - 1)
    for i in range(1, k):
        beta = np.abs(fwd[i] * bwd[k - i]) * dx
        total = float(beta.sum())
        inside = float(beta[np.abs(x - centers[i]) <= delta].sum())
        fracs[i - 1] = inside / total if total > 0 else 0.0
    return fracs


def packet_argmax_offset(cfg: PropagatorConfig, target: float) -> float:
    """Distance (in grid units of length) from the propagated packet's
    peak-probability site to the target position.

    The initial packet is a Gaussian of width sqrt(hbar*T/(2*mass)) at a,
    boosted by the classical momentum mass*(b-a)/T.
    """
    x = cfg.space.points()
    sigma = math.sqrt(cfg.hbar * cfg.grid.duration / (2.0 * cfg.lag.mass))
    p = cfg.lag.mass * (cfg.b - cfg.a) / cfg.grid.duration
    psi = gaussian_window(x, cfg.a, sigma, p, cfg.hbar)
    Tm = step_matrix(cfg, 1)
    for i in range(1, cfg.grid.k + 1):
        if cfg.lag.time_dependent and i > 1:
            Tm = step_matrix(cfg, i)
        psi = apply_step(Tm, psi)
    amax = int(np.argmax(np.abs(psi) ** 2))
    return abs(float(x[amax]) - target)


def worker_cap(n_jobs: int) -> int:
    """Thread count for parallel sweeps, capped by CARDPATH_THREADS."""
    cap = min(4, os.cpu_count() or 1, max(n_jobs, 1))
    env = os.environ.get("CARDPATH_THREADS")
    if env is not None:
        try:
            requested = int(env)
        except ValueError:
            raise ConfigError(f"CARDPATH_THREADS must be an integer, got {env!r}")
        if requested < 1:
            raise ConfigError("CARDPATH_THREADS must be at least 1")
        cap = min(requested, max(n_jobs, 1))
    return cap


def concentration_scan(lag: LagrangianSpec, t_total: float, a: float, b: float,
                       hbar_values: Sequence[float], delta: float,
                       k: int = 16,
                       space: Optional[SpaceGrid] = None,
                       source_width: Optional[float] = None,
                       phase_free: bool = False) -> ConcentrationScan:
    """Sweep hbar and record how sharply the path sum hugs the classical path.

    For each hbar the grid and window come from `convergence_recipe` (the
    alias-safe site count changes with hbar), unless an explicit space and
    source_width pin them.  Per-hbar runs are independent and execute on a
    small thread pool; see `worker_cap`.
    """
    grid = TimeGrid(0.0, t_total, k)
    cl = classical_path(lag, grid, a, b)
    centers = cl.as_array()
    s_cl = discretized_action(cl, grid, lag)
    hbars = tuple(float(h) for h in hbar_values)

    def one(hbar: float):
        t0 = time.perf_counter()
        if space is None:
            _, sp, sw = convergence_recipe(lag, hbar, t_total, a, b, k=k)
        else:
            sp = space
            sw = source_width
            if sw is None:
                raise ValueError("source_width is required with an explicit space grid")
        cfg = PropagatorConfig(grid=grid, space=sp, lag=lag, hbar=hbar, a=a, b=b)
        frac = float(np.mean(slice_tube_fractions(cfg, delta, centers, sw,
                                                  phase_free=phase_free)))
        off = packet_argmax_offset(cfg, b)
        dt = (time.perf_counter() - t0) * 1e3
        return frac, off, sp.dx, dt

    with ThreadPoolExecutor(max_workers=worker_cap(len(hbars))) as ex:
        rows = list(ex.map(one, hbars))
    return ConcentrationScan(
        hbar_values=hbars, delta=delta,
        mass_fraction=tuple(r[0] for r in rows),
        classical_path=cl,
        m_scale=tuple(s_cl / (2.0 * math.pi * h) for h in hbars),
        argmax_offset=tuple(r[1] for r in rows),
        dx_values=tuple(r[2] for r in rows),
        runtime_ms=tuple(r[3] for r in rows))
