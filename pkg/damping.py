"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Damped Jaynes-Cummings amplitude damping (Lorentzian bath at zero temperature).

CAPABILITIES:
1. Decay amplitude c(t) and damping parameter p(t) = c(t)^2 in the strong,
   weak and critical coupling regimes.
2. Kraus family and the independent n-qubit map.
3. Common bath for two qubits: the Lorentzian environment is replaced by a
   single leaky pseudomode, and the qubits+mode master equation is solved
   exactly (constant generator) into per-time system transfer maps.

CONFIGURATION:
- Time unit is 1/gamma0 in every default; the resonant interaction picture
  is used throughout, so omega_0 is recorded only.
- Pseudomode Fock cutoff defaults to 6 and is verified at every grid point.
--------------------------------------------------------------------------------
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import List, Tuple

import numpy as np
from scipy import linalg

from channels import LocalKrausEvolution, SuperopEvolution, apply_local_kraus
from numerics import ConvergenceError
from quantum_core import DensityMatrix, IDENTITY_2, SIGMA_MINUS, apply_system_superop

# Top Fock level population above which the truncation is rejected
FOCK_TOP_LIMIT = 1e-6
TRACE_LIMIT = 1e-8


class FockTruncationError(ConvergenceError):
    """The pseudomode leaked into its highest retained Fock level."""


@dataclass(frozen=True)
class DampingParams:
    gamma0: float = 1.0
    lam: float = 0.1
    omega_0: float = 1.0  # recorded only

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ValueError(f"DampingParams.gamma0 must be positive, got {self.gamma0}")
        if not self.lam > 0:
            raise ValueError(f"DampingParams.lam must be positive, got {self.lam}")

    @property
    def regime(self) -> str:
        gap = self.lam - 2.0 * self.gamma0
        if abs(gap) <= 1e-12 * max(self.lam, 2.0 * self.gamma0):
            return "critical"
        return "strong" if gap < 0 else "weak"

    @property
    def d(self) -> float:
        """|d| with d = sqrt(2 gamma0 lam - lam^2); imaginary in the weak regime."""
        return math.sqrt(abs(2.0 * self.gamma0 * self.lam - self.lam ** 2))

    @property
    def coupling(self) -> float:
        """Qubit-pseudomode coupling g reproducing the Lorentzian p(t)."""
        return math.sqrt(self.gamma0 * self.lam / 2.0)

    def default_horizon(self) -> float:
        return 15.0 / min(self.lam, self.gamma0)

    def first_zero(self) -> float:
        """First root of p(t); strong coupling only."""
        if self.regime != "strong":
            raise ValueError(f"p(t) has no zero in the {self.regime} regime")
        return (2.0 / self.d) * (math.pi - math.atan(self.d / self.lam))


def damping_amplitude(t, p: DampingParams):
    """Signed excited-state amplitude c(t); p(t) = c(t)^2. Accepts arrays."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError(f"t must be >= 0, got {t}")
    lam = p.lam
    regime = p.regime
    if regime == "critical":
        c = np.exp(-lam * t / 2.0) * (1.0 + lam * t / 2.0)
    elif regime == "strong":
        d = p.d
        c = np.exp(-lam * t / 2.0) * (np.cos(d * t / 2.0) + (lam / d) * np.sin(d * t / 2.0))
    else:
        d = p.d
        # cosh/sinh written as two decaying exponentials
        c = 0.5 * ((1.0 + lam / d) * np.exp((d - lam) * t / 2.0)
                   + (1.0 - lam / d) * np.exp(-(d + lam) * t / 2.0))
    return float(c) if c.ndim == 0 else c


def damping_parameter(t, p: DampingParams):
    c = damping_amplitude(t, p)
    return c * c


def kraus_from_parameter(prob) -> np.ndarray:
    """{diag(1, sqrt p), sqrt(1 - p) |0><1|}; prob may be an array."""
    prob = np.clip(np.asarray(prob, dtype=float), 0.0, 1.0)
    kraus = np.zeros(prob.shape + (2, 2, 2), dtype=complex)
    kraus[..., 0, 0, 0] = 1.0
    kraus[..., 0, 1, 1] = np.sqrt(prob)
    kraus[..., 1, 0, 1] = np.sqrt(1.0 - prob)
    return kraus


def ad_kraus(t: float, p: DampingParams) -> List[np.ndarray]:
    kraus = kraus_from_parameter(damping_parameter(t, p))
    return [kraus[0], kraus[1]]


def ad_apply_independent(rho_sa: DensityMatrix, n_system_qubits: int, t: float,
                         p: DampingParams) -> DensityMatrix:
    return apply_local_kraus(rho_sa, n_system_qubits, np.array(ad_kraus(t, p)))


class IndependentDamping(LocalKrausEvolution):
    def __init__(self, p: DampingParams, n_qubits: int, times):
        self.params = p
        super().__init__("ad/independent", n_qubits, times,
                         kraus_from_parameter(damping_parameter(np.asarray(times), p)),
                         lambda t: kraus_from_parameter(damping_parameter(t, p)))
        logging.debug(f"[{self.name}] regime={p.regime}, d={p.d:.6f}")


# --- PSEUDOMODE (COMMON BATH) ---

def _embed_qubit(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    factors = [IDENTITY_2] * n_qubits
    factors[qubit] = op
    return reduce(np.kron, factors)


def pseudomode_operators(n_qubits: int, n_fock: int) -> Tuple[np.ndarray, np.ndarray]:
    """(H / g, a) on qubits (x) mode, the mode factor last."""
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), k=1).astype(complex)
    ds = 2 ** n_qubits
    h = np.zeros((ds * n_fock, ds * n_fock), dtype=complex)
    for q in range(n_qubits):
        lower = _embed_qubit(SIGMA_MINUS, q, n_qubits)
        h += np.kron(lower.conj().T, a) + np.kron(lower, a.conj().T)
    return h, np.kron(np.eye(ds, dtype=complex), a)


@lru_cache(maxsize=16)
def pseudomode_liouvillian(p: DampingParams, n_qubits: int, n_fock: int) -> np.ndarray:
    """
    Row-major vectorized generator: vec(A X B) = (A (x) B^T) vec(X).

    The mode field decays at rate lam, i.e. the collapse operator is
    sqrt(2 lam) a; this reproduces c'' + lam c' + g^2 c = 0.
    """
    h, a = pseudomode_operators(n_qubits, n_fock)
    h = p.coupling * h
    dim = h.shape[0]
    eye = np.eye(dim, dtype=complex)
    rate = 2.0 * p.lam
    ada = a.conj().T @ a
    gen = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    gen += rate * (np.kron(a, a.conj()) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada.T))
    gen.setflags(write=False)
    return gen


def _matrix_units(n_qubits: int, n_fock: int) -> np.ndarray:
    """Columns vec(E_kl (x) |0><0|), ordered k * ds + l."""
    ds = 2 ** n_qubits
    dim = ds * n_fock
    units = np.zeros((dim * dim, ds * ds), dtype=complex)
    for k in range(ds):
        for l in range(ds):
            units[(k * n_fock) * dim + l * n_fock, k * ds + l] = 1.0
    return units


def _reduce_units(columns: np.ndarray, n_qubits: int, n_fock: int) -> Tuple[np.ndarray, float, float]:
    """
    Evolved unit columns -> system superoperator S[i, j, k, l], together with the
    largest top-Fock population and trace deviation over the diagonal units.
    """
    ds = 2 ** n_qubits
    blocks = columns.T.reshape(ds, ds, ds, n_fock, ds, n_fock)
    superop = np.einsum("klimjm->ijkl", blocks)
    diag_units = blocks[np.arange(ds), np.arange(ds)]
    top = np.einsum("kii->k", diag_units[:, :, n_fock - 1, :, n_fock - 1]).real
    traces = np.einsum("kimim->k", diag_units)
    return superop, float(np.max(np.abs(top))), float(np.max(np.abs(traces - 1.0)))


def _check_pseudomode(top: float, trace_dev: float, n_fock: int, t: float):
    if top >= FOCK_TOP_LIMIT:
        raise FockTruncationError(
            f"Pseudomode level {n_fock - 1} holds population {top:.3e} at t={t:.6g}; raise fock_cutoff",
            estimate=top)
    if trace_dev > TRACE_LIMIT:
        raise ConvergenceError(f"Pseudomode evolution lost trace ({trace_dev:.3e}) at t={t:.6g}",
                               error=trace_dev)


def pseudomode_transfer_superops(grid, p: DampingParams, n_fock: int = 6,
                                 n_qubits: int = 2) -> np.ndarray:
    """
    System transfer maps on `grid` for qubits sharing one pseudomode that starts
    in vacuum. Returns a (T, ds, ds, ds, ds) stack.
    """
    if n_fock < 3:
        raise ValueError(f"n_fock must be >= 3, got {n_fock}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] < 0 or not np.all(np.diff(grid) > 0):
        raise ValueError("Pseudomode grid must be non-negative and strictly increasing")

    gen = pseudomode_liouvillian(p, n_qubits, n_fock)
    state = _matrix_units(n_qubits, n_fock)
    ds = 2 ** n_qubits
    out = np.empty((grid.size, ds, ds, ds, ds), dtype=complex)
    propagators = {}
    worst_top, worst_dev = 0.0, 0.0
    previous = 0.0
    for i, t in enumerate(grid):
        dt = float(t - previous)
        if dt > 0:
            key = round(dt, 12)
            if key not in propagators:
                propagators[key] = linalg.expm(gen * dt)
            state = propagators[key] @ state
        out[i], top, dev = _reduce_units(state, n_qubits, n_fock)
        _check_pseudomode(top, dev, n_fock, float(t))
        worst_top, worst_dev = max(worst_top, top), max(worst_dev, dev)
        previous = float(t)
    logging.info(f"[ad/common] ✅ pseudomode maps on {grid.size} points "
                 f"(n_fock={n_fock}, top level {worst_top:.1e}, trace dev {worst_dev:.1e})")
    return out


def pseudomode_superop_at(t: float, p: DampingParams, n_fock: int = 6, n_qubits: int = 2) -> np.ndarray:
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    gen = pseudomode_liouvillian(p, n_qubits, n_fock)
    columns = linalg.expm(gen * float(t)) @ _matrix_units(n_qubits, n_fock)
    superop, top, dev = _reduce_units(columns, n_qubits, n_fock)
    _check_pseudomode(top, dev, n_fock, float(t))
    return superop


def pseudomode_common_ad(rho_sa0: DensityMatrix, grid, p: DampingParams, n_fock: int = 6,
                         n_system_qubits: int = 2) -> List[DensityMatrix]:
    """
    Evolve qubits (+ any ancilla) coupled to one shared Lorentzian bath.

    The pseudomode is traced out at every grid point; the ancilla is untouched.
    """
    op = rho_sa0.entries
    if op.shape[0] % (2 ** n_system_qubits) != 0:
        raise ValueError(f"State of dim {op.shape[0]} cannot carry {n_system_qubits} system qubit(s)")
    superops = pseudomode_transfer_superops(grid, p, n_fock, n_system_qubits)
    stack = np.broadcast_to(op, (superops.shape[0],) + op.shape).copy()
    evolved = apply_system_superop(stack, superops, n_system_qubits)
    return [DensityMatrix(state, rho_sa0.subsystem_dims) for state in evolved]


class PseudomodeEvolution(SuperopEvolution):
    def __init__(self, p: DampingParams, times, n_fock: int = 6, n_qubits: int = 2):
        self.params = p
        self.n_fock = n_fock
        super().__init__("ad/common", n_qubits, times,
                         pseudomode_transfer_superops(times, p, n_fock, n_qubits),
                         lambda t: pseudomode_superop_at(t, p, n_fock, n_qubits))

    def describe(self):
        info = super().describe()
        info["fock_cutoff"] = self.n_fock
        return info
