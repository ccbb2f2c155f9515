"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Ohmic-family pure dephasing: the time-dependent rate, the coherence factor
r(t), the Kraus family, independent n-qubit dynamics and the exact propagator
for two qubits in a common dephasing bath.

NOTES:
- The qubit frequency omega_0 generates a local unitary common to every
  compared state; it changes neither trace distances nor entropies and is
  only recorded.
- The common bath also imprints a diagonal phase depending on the collective
  sigma_z eigenvalue. It is a unitary applied identically to every input, so
  it is omitted for the same reason.
--------------------------------------------------------------------------------
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy import special

from channels import LocalKrausEvolution, MaskEvolution, apply_local_kraus
from numerics import QuadConfig, RateFunction, quad_adaptive
from quantum_core import DensityMatrix, apply_system_mask

# Largest accepted |Lambda(T) - Lambda(T/2)|; above it the run logs a warning
STATIONARY_TOL = 1e-6


@dataclass(frozen=True)
class DephasingParams:
    s: float = 3.0
    eta: float = 2.0
    omega_c: float = 1.0
    omega_0: float = 1.0  # recorded only

    def __post_init__(self):
        for field_name in ("s", "eta", "omega_c"):
            value = getattr(self, field_name)
            if not value > 0:
                raise ValueError(f"DephasingParams.{field_name} must be positive, got {value}")

    def default_horizon(self) -> float:
        return 40.0 / self.omega_c


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"t must be >= 0, got {t}")


def dephasing_rate(t, p: DephasingParams):
    """gamma(t) = eta wc (1 + (wc t)^2)^(-s/2) Gamma(s) sin(s arctan(wc t)); accepts arrays."""
    _check_time(t)
    x = p.omega_c * np.asarray(t, dtype=float)
    rate = p.eta * p.omega_c * (1.0 + x ** 2) ** (-p.s / 2.0) * special.gamma(p.s) * np.sin(p.s * np.arctan(x))
    return float(rate) if rate.ndim == 0 else rate


@lru_cache(maxsize=32)
def _cached_rates(p: DephasingParams, grid_key: tuple, cfg: QuadConfig) -> RateFunction:
    return RateFunction(lambda t: dephasing_rate(t, p), np.array(grid_key), cfg, name="pd-gamma")


def dephasing_rate_function(p: DephasingParams, grid, cfg: QuadConfig = QuadConfig()) -> RateFunction:
    """RateFunction for gamma(t) with Lambda(t) cached on `grid` (shared across callers)."""
    return _cached_rates(p, tuple(float(t) for t in grid), cfg)


def decoherence_exponent(t: float, p: DephasingParams, rates: Optional[RateFunction] = None,
                         cfg: QuadConfig = QuadConfig()) -> float:
    """Lambda(t) = integral of gamma over [0, t]."""
    _check_time(t)
    if rates is not None:
        return rates.cumulative(float(t))
    return quad_adaptive(lambda u: dephasing_rate(u, p), 0.0, float(t), cfg)


def dephasing_factor(t: float, p: DephasingParams, rates: Optional[RateFunction] = None,
                     cfg: QuadConfig = QuadConfig()) -> float:
    """r(t) = exp(-Lambda(t))."""
    return math.exp(-decoherence_exponent(t, p, rates, cfg))


def kraus_from_factor(r) -> np.ndarray:
    """Dephasing Kraus pair {diag(1, r), diag(0, sqrt(1 - r^2))}; r may be an array."""
    r = np.asarray(r, dtype=float)
    kraus = np.zeros(r.shape + (2, 2, 2), dtype=complex)
    kraus[..., 0, 0, 0] = 1.0
    kraus[..., 0, 1, 1] = r
    kraus[..., 1, 1, 1] = np.sqrt(np.clip(1.0 - r ** 2, 0.0, None))
    return kraus


def pd_kraus(t: float, p: DephasingParams, rates: Optional[RateFunction] = None) -> List[np.ndarray]:
    kraus = kraus_from_factor(dephasing_factor(t, p, rates))
    return [kraus[0], kraus[1]]


def pd_apply_independent(rho_sa: DensityMatrix, n_system_qubits: int, t: float,
                         p: DephasingParams) -> DensityMatrix:
    return apply_local_kraus(rho_sa, n_system_qubits, np.array(pd_kraus(t, p)))


# --- COMMON BATH (TWO QUBITS) ---

def collective_sz_eigenvalues(n_qubits: int = 2) -> np.ndarray:
    """Eigenvalue of sum_n sigma_z^(n) for each computational basis index."""
    bits = (np.arange(2 ** n_qubits)[:, None] >> np.arange(n_qubits)[::-1]) & 1
    return (2 * bits - 1).sum(axis=1)


def common_dephasing_weights() -> np.ndarray:
    mu = collective_sz_eigenvalues(2)
    return ((mu[:, None] - mu[None, :]) / 2.0) ** 2


def common_dephasing_mask(r) -> np.ndarray:
    """r^(((mu - mu')/2)^2) for each pair of two-qubit basis states; r may be an array."""
    r = np.asarray(r, dtype=float)
    return r[..., None, None] ** common_dephasing_weights()


def pd_apply_common(rho: DensityMatrix, t: float, p: DephasingParams) -> DensityMatrix:
    if len(rho.subsystem_dims) < 2 or rho.subsystem_dims[:2] != (2, 2):
        raise ValueError(f"Common dephasing needs two system qubits first, got dims {rho.subsystem_dims}")
    mask = common_dephasing_mask(dephasing_factor(t, p))
    out = apply_system_mask(rho.entries[np.newaxis].copy(), mask[np.newaxis], 2)[0]
    return DensityMatrix(out, rho.subsystem_dims)


# --- CHANNEL EVOLUTIONS ---

def lambda_drift(rates: RateFunction, horizon: float) -> float:
    """|Lambda(T) - Lambda(T/2)|, the stationarity check on the decoherence exponent."""
    return abs(rates.cumulative(float(horizon)) - rates.cumulative(float(horizon) / 2.0))


def _grid_factors(p: DephasingParams, times, cfg: QuadConfig):
    rates = dephasing_rate_function(p, times, cfg)
    drift = lambda_drift(rates, times[-1])
    if drift > STATIONARY_TOL:
        logging.warning(f"[pd] ⚠️ Lambda not stationary at T={float(times[-1]):.6g}: "
                        f"|Lambda(T) - Lambda(T/2)| = {drift:.2e} > {STATIONARY_TOL:g}")
    return rates, np.exp(-rates.cumulative_on_grid), drift


class IndependentDephasing(LocalKrausEvolution):
    def __init__(self, p: DephasingParams, n_qubits: int, times, cfg: QuadConfig = QuadConfig()):
        self.params = p
        self.rates, self.factors, self.lambda_drift = _grid_factors(p, times, cfg)
        super().__init__("pd/independent", n_qubits, times, kraus_from_factor(self.factors),
                         lambda t: kraus_from_factor(dephasing_factor(t, p, self.rates)))


class CommonDephasing(MaskEvolution):
    def __init__(self, p: DephasingParams, times, cfg: QuadConfig = QuadConfig()):
        self.params = p
        self.rates, self.factors, self.lambda_drift = _grid_factors(p, times, cfg)
        super().__init__("pd/common", 2, times, common_dephasing_mask(self.factors),
                         lambda t: common_dephasing_mask(dephasing_factor(t, p, self.rates)))
