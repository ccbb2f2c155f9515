"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Numerical kernels shared by every channel and measure in the toolkit.

CAPABILITIES:
1. Adaptive Gauss-Kronrod quadrature on finite intervals (scalar and
   vector-valued integrands).
2. Semi-infinite integrals whose integrand carries a Gaussian damping factor
   (truncated where the Gaussian has fallen below 1e-12 of its peak).
3. Fixed-grid RK4 evolution, accepted only once halving the internal step
   stops changing the output.
4. Bounded refinement of a single local extremum.
5. RateFunction: a decay rate with its running integral cached on a grid.

CONFIGURATION:
- QuadConfig / OdeConfig carry every tolerance; nothing here reads the
  environment. All functions are pure and safe to call from worker threads.
--------------------------------------------------------------------------------
"""

import math
import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, optimize

# Gaussian weight below which the k-integrals are truncated
GAUSSIAN_CUTOFF = 1e-12


class ConvergenceError(RuntimeError):
    """A numerical kernel could not reach its tolerance."""

    def __init__(self, message, estimate=None, error=None, previous=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.previous = previous


# --- CONFIGURATION OBJECTS ---

@dataclass(frozen=True)
class QuadConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_depth: int = 500  # maximum number of subintervals

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError(f"Quadrature tolerances must be positive (abs_tol={self.abs_tol}, rel_tol={self.rel_tol})")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")

    def halved(self) -> "QuadConfig":
        return replace(self, abs_tol=self.abs_tol / 2, rel_tol=self.rel_tol / 2)


@dataclass(frozen=True)
class OdeConfig:
    step: float = 0.05
    tolerance: float = 1e-8
    max_halvings: int = 6

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"ODE step must be positive, got {self.step}")
        if not self.tolerance > 0:
            raise ValueError(f"ODE tolerance must be positive, got {self.tolerance}")
        if self.max_halvings < 1:
            raise ValueError(f"max_halvings must be >= 1, got {self.max_halvings}")


# --- QUADRATURE ---

def _quad_target(cfg: QuadConfig, value: float) -> float:
    return max(cfg.abs_tol, cfg.rel_tol * abs(value))


def quad_adaptive(f: Callable[[float], float], a: float, b: float, cfg: QuadConfig = QuadConfig()) -> float:
    """
    Integrate a scalar function over [a, b] with adaptive Gauss-Kronrod subdivision.

    Raises ConvergenceError (with the best estimate and its error bound) when
    the subdivision limit is hit before the tolerance is met.
    """
    if a > b:
        raise ValueError(f"Integration bounds out of order: a={a} > b={b}")
    if a == b:
        return 0.0

    out = integrate.quad(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                         limit=cfg.max_depth, full_output=1)
    value, abserr = float(out[0]), float(out[1])
    if len(out) > 3:
        # Roundoff warnings with a tiny error bound are accepted as converged
        if not math.isfinite(value) or abserr > 10 * _quad_target(cfg, value):
            raise ConvergenceError(
                f"quad on [{a:.6g}, {b:.6g}] did not converge: {str(out[3]).strip()}",
                estimate=value, error=abserr)
        logging.debug(f"[quad] accepted [{a:.6g}, {b:.6g}] with warning, err={abserr:.2e}")
    return value


def quad_adaptive_vec(f: Callable[[float], np.ndarray], a: float, b: float,
                      cfg: QuadConfig = QuadConfig()) -> np.ndarray:
    """Vector-valued counterpart of quad_adaptive; the max-norm of the error drives subdivision."""
    if a > b:
        raise ValueError(f"Integration bounds out of order: a={a} > b={b}")

    value, err, info = integrate.quad_vec(f, a, b, epsabs=cfg.abs_tol, epsrel=cfg.rel_tol,
                                          norm="max", limit=max(cfg.max_depth, 50), full_output=True)
    value = np.asarray(value)
    scale = float(np.max(np.abs(value))) if value.size else 0.0
    if info.status != 0:
        if not np.all(np.isfinite(value)) or err > 10 * _quad_target(cfg, scale):
            raise ConvergenceError(
                f"quad_vec on [{a:.6g}, {b:.6g}] did not converge: {info.message}",
                estimate=value, error=err)
        logging.debug(f"[quad_vec] accepted with status {info.status}, err={err:.2e}")
    return value


def gaussian_cutoff(sigma_scale: float) -> float:
    """k_max beyond which exp(-k^2 sigma^2 / 2) < GAUSSIAN_CUTOFF."""
    if not sigma_scale > 0:
        raise ValueError(f"sigma_scale must be positive, got {sigma_scale}")
    return math.sqrt(-2.0 * math.log(GAUSSIAN_CUTOFF)) / sigma_scale


def quad_gaussian_damped(f: Callable, sigma_scale: float, cfg: QuadConfig = QuadConfig(),
                         vectorized: bool = False):
    """
    Integrate f over [0, inf) for integrands carrying a factor exp(-k^2 sigma^2 / 2).

    Args:
        f: integrand in k (scalar, or array-valued when vectorized=True)
        sigma_scale: the Gaussian width parameter sigma
        cfg: tolerances for the finite-interval quadrature
        vectorized: integrate an array-valued f with quad_adaptive_vec

    Returns:
        float, or ndarray when vectorized
    """
    k_max = gaussian_cutoff(sigma_scale)
    if vectorized:
        return quad_adaptive_vec(f, 0.0, k_max, cfg)
    return quad_adaptive(f, 0.0, k_max, cfg)


# --- ODE EVOLUTION ---

def _validate_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("Time grid must be a non-empty 1-D array")
    if grid[0] != 0.0:
        raise ValueError(f"Time grid must start at 0, got {grid[0]}")
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise ValueError("Time grid must be strictly increasing")
    return grid


def _rk4_pass(rhs, y0: np.ndarray, grid: np.ndarray, base_step: float, level: int) -> np.ndarray:
    y = np.array(y0, copy=True)
    out = np.empty((grid.size,) + y.shape, dtype=y.dtype)
    out[0] = y
    for i in range(1, grid.size):
        t0, t1 = grid[i - 1], grid[i]
        n_sub = max(1, int(math.ceil((t1 - t0) / base_step - 1e-9))) * (2 ** level)
        h = (t1 - t0) / n_sub
        t = t0
        for _ in range(n_sub):
            k1 = rhs(t, y)
            k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out[i] = y
    return out


def ode_evolve(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, grid,
               cfg: OdeConfig = OdeConfig()) -> np.ndarray:
    """
    Classical RK4 on a fixed grid with step-halving verification.

    The internal step is the largest step <= cfg.step that divides each grid
    interval evenly; the result is accepted once halving it changes every
    output entry by less than cfg.tolerance (max-norm).

    Returns:
        Array of shape (len(grid),) + y0.shape
    """
    grid = _validate_grid(grid)
    y0 = np.asarray(y0)
    if not np.issubdtype(y0.dtype, np.inexact):
        y0 = y0.astype(float)

    coarse = _rk4_pass(rhs, y0, grid, cfg.step, 0)
    change = float("inf")
    for level in range(1, cfg.max_halvings + 1):
        fine = _rk4_pass(rhs, y0, grid, cfg.step, level)
        change = float(np.max(np.abs(fine - coarse))) if fine.size else 0.0
        if change < cfg.tolerance:
            logging.debug(f"[rk4] converged after {level} halving(s), change={change:.2e}")
            return fine
        coarse = fine
    raise ConvergenceError(
        f"RK4 did not settle after {cfg.max_halvings} halvings (last change {change:.3e})",
        estimate=fine, previous=coarse, error=change)


# --- EXTREMUM REFINEMENT ---

def _classify_extremum(f, lo: float, hi: float) -> str:
    points = np.linspace(lo, hi, 11)
    values = np.array([f(t) for t in points])
    i_max, i_min = int(np.argmax(values)), int(np.argmin(values))
    interior_max = 0 < i_max < points.size - 1
    interior_min = 0 < i_min < points.size - 1
    if interior_max and not interior_min:
        return "max"
    if interior_min and not interior_max:
        return "min"
    if interior_max and interior_min:
        edge = 0.5 * (values[0] + values[-1])
        return "max" if values[i_max] - edge >= edge - values[i_min] else "min"
    raise ConvergenceError(f"No interior extremum in bracket ({lo:.6g}, {hi:.6g}); samples are monotone",
                           estimate=(lo, hi))


def refine_extremum(f: Callable[[float], float], bracket: Tuple[float, float], tol: float = 1e-10,
                    kind: str = "auto") -> Tuple[float, float]:
    """
    Locate the single local extremum of f inside bracket to width tol.

    kind is "min", "max" or "auto" (decided from 11 evenly spaced samples).
    Runs scipy's bounded Brent search in place of a plain golden-section
    search: golden-section steps plus parabolic acceleration, never leaving
    the bracket, and stopping at width tol.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError(f"Bracket must satisfy lo < hi, got ({lo}, {hi})")
    if kind == "auto":
        kind = _classify_extremum(f, lo, hi)
    if kind not in ("min", "max"):
        raise ValueError(f"kind must be 'min', 'max' or 'auto', got {kind!r}")

    sign = -1.0 if kind == "max" else 1.0
    res = optimize.minimize_scalar(lambda t: sign * f(t), bounds=(lo, hi), method="bounded",
                                   options={"xatol": tol, "maxiter": 500})
    if not res.success:
        raise ConvergenceError(f"Extremum refinement in ({lo:.6g}, {hi:.6g}) failed: {res.message}",
                               estimate=float(res.x), error=hi - lo)
    t_star = float(res.x)
    return t_star, float(f(t_star))


# --- RATE FUNCTIONS ---

class RateFunction:
    """
    A decay rate gamma(t) together with its running integral, cached on a grid.

    On-grid lookups of the cumulative integral are O(1); off-grid points add
    one quadrature over the remainder past the nearest grid point below (or
    call `cumulative_fn` when an exact cumulative is available).
    """

    def __init__(self, rate: Callable[[float], float], grid, cfg: QuadConfig = QuadConfig(),
                 name: str = "rate", cumulative: Optional[np.ndarray] = None,
                 cumulative_fn: Optional[Callable[[float], float]] = None):
        self.rate = rate
        self.name = name
        self.grid = _validate_grid(grid)
        self.cfg = cfg
        self.cumulative_fn = cumulative_fn

        if cumulative is None:
            pieces = [quad_adaptive(rate, a, b, cfg) for a, b in zip(self.grid[:-1], self.grid[1:])]
            cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
        cumulative = np.asarray(cumulative, dtype=float)
        if cumulative.shape != self.grid.shape:
            raise ValueError(f"cumulative has shape {cumulative.shape}, grid has {self.grid.shape}")
        self._cumulative = cumulative
        self._cumulative.setflags(write=False)

    def __call__(self, t: float) -> float:
        return self.rate(t)

    @property
    def cumulative_on_grid(self) -> np.ndarray:
        return self._cumulative

    def cumulative(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"t must be >= 0, got {t}")
        i = int(np.searchsorted(self.grid, t, side="right")) - 1
        if self.grid[i] == t:
            return float(self._cumulative[i])
        if self.cumulative_fn is not None:
            return float(self.cumulative_fn(t))
        return float(self._cumulative[i] + quad_adaptive(self.rate, float(self.grid[i]), float(t), self.cfg))
