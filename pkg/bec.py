"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Impurity atoms in double-well sites immersed in a Bose-Einstein condensate.

CAPABILITIES:
1. BecParams: laboratory inputs (nm, m^-3, Bohr radii) converted once into
   SI couplings and the dimensionless quantities used by the k-integrals.
2. gamma1(t), gamma2(t): the local and cross dephasing rates as Gaussian-damped
   k-integrals; their time integrals Gamma1(t), Gamma2(t) in closed form inside
   the k-integral, evaluated for a whole grid with one vector quadrature.
3. Two-qubit master equation with collective sum/difference dissipators,
   integrated with RK4, and its exact element-wise solution.
4. Independent limit (large separation): per-atom dephasing with
   r_BEC(t) = exp(-2 Gamma1(t)) for any number of atoms.

CONFIGURATION:
- Internally k is measured in units of 1/sigma (q = k sigma); time in
  seconds; rates in s^-1.
- BEC_QUAD is the default tolerance set: the k-integrand oscillates
  hundreds of times over the Gaussian window at millisecond horizons.
--------------------------------------------------------------------------------
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from channels import LocalKrausEvolution, MaskEvolution, apply_local_kraus
from dephasing import kraus_from_factor
from numerics import OdeConfig, QuadConfig, RateFunction, ode_evolve, quad_gaussian_damped
from quantum_core import DensityMatrix, IDENTITY_2, SIGMA_Z

# --- PHYSICAL CONSTANTS (SI) ---
HBAR = 1.054571817e-34
BOHR_RADIUS = 5.29177210903e-11
ATOMIC_MASS_UNIT = 1.66053906660e-27
RB87_MASS_U = 86.909
NA23_MASS_U = 22.990
RB_SCATTERING_A0 = 99.0

BEC_QUAD = QuadConfig(abs_tol=1e-12, rel_tol=1e-9, max_depth=4000)
TIME_BLOCK = 256
BEC_ODE_STEP = 5e-7


@dataclass(frozen=True)
class BecParams:
    lattice_wavelength: float = 600e-9
    sigma: float = 45e-9
    D: float = 600e-9
    n0: float = 1e20
    a_E: float = 0.5 * RB_SCATTERING_A0 * BOHR_RADIUS
    a_SE: float = 55.0 * BOHR_RADIUS
    m_E: float = RB87_MASS_U * ATOMIC_MASS_UNIT
    m_S: float = NA23_MASS_U * ATOMIC_MASS_UNIT

    def __post_init__(self):
        for field_name in ("lattice_wavelength", "sigma", "D", "n0", "a_E", "a_SE", "m_E", "m_S"):
            value = getattr(self, field_name)
            if not value > 0:
                raise ValueError(f"BecParams.{field_name} must be positive, got {value}")

    @classmethod
    def from_lab_units(cls, sigma_nm: float = 45.0, D_nm: float = 600.0, n0: float = 1e20,
                       a_E_over_aRb: float = 0.5, a_SE_a0: float = 55.0,
                       lattice_wavelength_nm: float = 600.0, distance_reading: str = "D") -> "BecParams":
        """
        distance_reading "D" takes D_nm as the D entering gamma2; "2D" takes it
        as the full separation 2D.
        """
        if distance_reading not in ("D", "2D"):
            raise ValueError(f"distance_reading must be 'D' or '2D', got {distance_reading!r}")
        D = D_nm * 1e-9 if distance_reading == "D" else 0.5 * D_nm * 1e-9
        return cls(lattice_wavelength=lattice_wavelength_nm * 1e-9, sigma=sigma_nm * 1e-9, D=D, n0=n0,
                   a_E=a_E_over_aRb * RB_SCATTERING_A0 * BOHR_RADIUS, a_SE=a_SE_a0 * BOHR_RADIUS)

    # --- derived quantities ---

    @property
    def L(self) -> float:
        return self.lattice_wavelength / 4.0

    @property
    def m_SE(self) -> float:
        return self.m_S * self.m_E / (self.m_S + self.m_E)

    @property
    def g_E(self) -> float:
        return 4.0 * math.pi * HBAR ** 2 * self.a_E / self.m_E

    @property
    def g_SE(self) -> float:
        return 2.0 * math.pi * HBAR ** 2 * self.a_SE / self.m_SE

    @property
    def energy_scale(self) -> float:
        """epsilon_k at k = 1/sigma (J)."""
        return HBAR ** 2 / (2.0 * self.m_E * self.sigma ** 2)

    @property
    def mu_ratio(self) -> float:
        """2 g_E n0 in units of energy_scale."""
        return 2.0 * self.g_E * self.n0 / self.energy_scale

    @property
    def frequency_scale(self) -> float:
        return self.energy_scale / HBAR

    @property
    def rate_prefactor(self) -> float:
        """g_SE^2 n0 / (hbar pi^2), with k -> q / sigma absorbed (s^-1)."""
        return self.g_SE ** 2 * self.n0 / (HBAR * math.pi ** 2 * self.sigma ** 3 * self.energy_scale)

    def check_common_geometry(self, tol: float = 1e-9):
        if 2.0 * self.D < 8.0 * self.L * (1.0 - tol):
            raise ValueError(f"Common geometry needs 2D >= 8L: 2D = {2e9 * self.D:.1f} nm, "
                             f"8L = {8e9 * self.L:.1f} nm")

    def default_horizon(self) -> float:
        return 1e-3

    def describe(self) -> dict:
        return {"sigma_nm": self.sigma * 1e9, "D_nm": self.D * 1e9, "L_nm": self.L * 1e9,
                "n0": self.n0, "rate_prefactor": self.rate_prefactor, "mu_ratio": self.mu_ratio}


# --- k-INTEGRANDS ---

def _sinc(y):
    return np.sinc(np.asarray(y) / np.pi)


def geometric_factor(q, p: BecParams, which: int):
    """1 - sinc(2kL) for the local rate; the three-sinc combination for the cross rate."""
    q = np.asarray(q, dtype=float)
    L, D, s = p.L, p.D, p.sigma
    if which == 1:
        return 1.0 - _sinc(2.0 * q * L / s)
    return _sinc(2.0 * q * (D + L) / s) + _sinc(2.0 * q * (D - L) / s) - 2.0 * _sinc(2.0 * q * D / s)


def bogoliubov_frequency(q, p: BecParams):
    """E_k / hbar at k = q / sigma (s^-1)."""
    q = np.asarray(q, dtype=float)
    return p.frequency_scale * q * np.sqrt(q * q + p.mu_ratio)


def _weight(q, p: BecParams, which: int):
    scale = p.rate_prefactor if which == 1 else 0.5 * p.rate_prefactor
    return scale * q * q * np.exp(-q * q / 2.0) * geometric_factor(q, p, which) / (q * q + p.mu_ratio)


def rate_integrand(q: float, t: float, p: BecParams, which: int = 1) -> float:
    """Integrand of gamma_which(t) in q; sin x cos x written as sin(2x)/2."""
    return float(_weight(q, p, which) * 0.5 * math.sin(float(bogoliubov_frequency(q, p)) * t))


def exponent_integrand(q: float, times: np.ndarray, p: BecParams, which: int = 1) -> np.ndarray:
    """Integrand of Gamma_which(t) for every t in `times`: weight (1 - cos wt) / (2 w)."""
    w = float(bogoliubov_frequency(q, p))
    if w == 0.0:
        return np.zeros_like(times)
    return float(_weight(q, p, which)) * (1.0 - np.cos(w * times)) / (2.0 * w)


def _check_time(t):
    if np.any(np.asarray(t) < 0):
        raise ValueError(f"t must be >= 0, got {t}")


def bec_gamma1(t: float, p: BecParams, cfg: QuadConfig = BEC_QUAD) -> float:
    _check_time(t)
    if t == 0:
        return 0.0
    return quad_gaussian_damped(lambda q: rate_integrand(q, t, p, 1), 1.0, cfg)


def bec_gamma2(t: float, p: BecParams, cfg: QuadConfig = BEC_QUAD) -> float:
    _check_time(t)
    if t == 0:
        return 0.0
    return quad_gaussian_damped(lambda q: rate_integrand(q, t, p, 2), 1.0, cfg)


def bec_exponents(times, p: BecParams, which: int = 1, cfg: QuadConfig = BEC_QUAD) -> np.ndarray:
    """Gamma_which(t) = integral of gamma_which over [0, t], for every t in `times`."""
    times = np.asarray(times, dtype=float)
    _check_time(times)
    out = np.empty_like(times)
    # later blocks oscillate faster in q; blocks keep quad_vec memory bounded
    for start in range(0, times.size, TIME_BLOCK):
        block = times[start:start + TIME_BLOCK]
        out[start:start + TIME_BLOCK] = quad_gaussian_damped(
            lambda q: exponent_integrand(q, block, p, which), 1.0, cfg, vectorized=True)
    return out


def bec_exponent(t: float, p: BecParams, which: int = 1, cfg: QuadConfig = BEC_QUAD) -> float:
    return float(bec_exponents(np.array([float(t)]), p, which, cfg)[0])


@lru_cache(maxsize=16)
def _cached_rates(p: BecParams, grid_key: tuple, which: int, cfg: QuadConfig) -> RateFunction:
    grid = np.array(grid_key)
    rate = bec_gamma1 if which == 1 else bec_gamma2
    logging.info(f"[bec] 🚀 Gamma{which} on {grid.size} grid points (sigma={p.sigma * 1e9:.1f} nm)")
    return RateFunction(lambda t: rate(t, p, cfg), grid, cfg, name=f"bec-gamma{which}",
                        cumulative=bec_exponents(grid, p, which, cfg),
                        cumulative_fn=lambda t: bec_exponent(t, p, which, cfg))


def bec_rate_function(p: BecParams, grid, which: int = 1, cfg: QuadConfig = BEC_QUAD) -> RateFunction:
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which}")
    return _cached_rates(p, tuple(float(t) for t in grid), which, cfg)


def bec_single_qubit_factor(t: float, p: BecParams, rates: Optional[RateFunction] = None) -> float:
    """r_BEC(t) = exp(-2 Gamma1(t))."""
    _check_time(t)
    exponent = rates.cumulative(float(t)) if rates is not None else bec_exponent(t, p, 1)
    return math.exp(-2.0 * exponent)


def bec_apply_independent(rho_sa: DensityMatrix, n_system_qubits: int, t: float, p: BecParams) -> DensityMatrix:
    return apply_local_kraus(rho_sa, n_system_qubits, kraus_from_factor(bec_single_qubit_factor(t, p)))


# --- TWO-ATOM MASTER EQUATION ---

def _collective_operators(ancilla_dim: int):
    z1 = np.kron(np.kron(SIGMA_Z, IDENTITY_2), np.eye(ancilla_dim))
    z2 = np.kron(np.kron(IDENTITY_2, SIGMA_Z), np.eye(ancilla_dim))
    return z1 - z2, z1 + z2


def _dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    sq = op @ op
    return op @ rho @ op - 0.5 * (sq @ rho + rho @ sq)


def bec_evolve_two_qubit(rho_sa0: DensityMatrix, grid, p: BecParams,
                         ode_cfg: OdeConfig = OdeConfig(step=BEC_ODE_STEP), quad_cfg: QuadConfig = BEC_QUAD,
                         correlated: bool = True):
    """
    Integrate the two-atom master equation (ancilla untouched) with RK4.

    correlated=False drops gamma2 (the large-separation limit).
    Returns the (T, d, d) trajectory.
    """
    d = rho_sa0.dim
    if d % 4 != 0:
        raise ValueError(f"State of dim {d} cannot carry two system atoms")
    diff_op, sum_op = _collective_operators(d // 4)

    @lru_cache(maxsize=None)
    def rates(t: float):
        g1 = bec_gamma1(t, p, quad_cfg)
        g2 = bec_gamma2(t, p, quad_cfg) if correlated else 0.0
        return g1, g2

    def rhs(t, rho):
        g1, g2 = rates(float(t))
        return 0.5 * (g1 - g2) * _dissipator(diff_op, rho) + 0.5 * (g1 + g2) * _dissipator(sum_op, rho)

    return ode_evolve(rhs, rho_sa0.entries, grid, ode_cfg)


def _spin_labels():
    """(m, s) = (z1 - z2, z1 + z2) for each two-atom basis index, |down> = -1."""
    z = np.array([-1.0, 1.0])
    z1, z2 = np.repeat(z, 2), np.tile(z, 2)
    return z1 - z2, z1 + z2


def common_bec_mask(exp1, exp2) -> np.ndarray:
    """Exact propagator exp(-1/2 [(G1 - G2)/2 dm^2 + (G1 + G2)/2 ds^2]) per element; inputs may be arrays."""
    exp1 = np.asarray(exp1, dtype=float)[..., None, None]
    exp2 = np.asarray(exp2, dtype=float)[..., None, None]
    m, s = _spin_labels()
    dm2 = (m[:, None] - m[None, :]) ** 2
    ds2 = (s[:, None] - s[None, :]) ** 2
    return np.exp(-0.5 * (0.5 * (exp1 - exp2) * dm2 + 0.5 * (exp1 + exp2) * ds2))


class IndependentBec(LocalKrausEvolution):
    def __init__(self, p: BecParams, n_qubits: int, times, cfg: QuadConfig = BEC_QUAD):
        self.params = p
        self.rates = bec_rate_function(p, times, 1, cfg)
        factors = np.exp(-2.0 * self.rates.cumulative_on_grid)
        super().__init__("bec/independent", n_qubits, times, kraus_from_factor(factors),
                         lambda t: kraus_from_factor(bec_single_qubit_factor(t, p, self.rates)))


class CommonBec(MaskEvolution):
    def __init__(self, p: BecParams, times, cfg: QuadConfig = BEC_QUAD):
        p.check_common_geometry()
        self.params = p
        self.rates1 = bec_rate_function(p, times, 1, cfg)
        self.rates2 = bec_rate_function(p, times, 2, cfg)
        super().__init__("bec/common", 2, times,
                         common_bec_mask(self.rates1.cumulative_on_grid, self.rates2.cumulative_on_grid),
                         lambda t: common_bec_mask(self.rates1.cumulative(t), self.rates2.cumulative(t)))
