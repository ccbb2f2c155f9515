"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Time-parametrized quantum channels acting on the system factor of a joint
system+ancilla state.

CAPABILITIES:
1. ChannelEvolution: common engine interface. A channel owns its working
   time grid, evolves any joint state over that grid in memory-bounded
   chunks, and evaluates single off-grid times for endpoint refinement.
2. LocalKrausEvolution: independent environments, one single-qubit Kraus
   family applied to every system qubit.
3. MaskEvolution: element-wise propagators (collective dephasing models).
4. SuperopEvolution: a full system superoperator per grid time (pseudomode).

The concrete physical channels live in dephasing.py, damping.py and bec.py.
--------------------------------------------------------------------------------
"""

import logging
from abc import ABC, abstractmethod
from typing import Callable, Dict, Iterator, Tuple

import numpy as np

from quantum_core import (
    DensityMatrix,
    apply_qubit_superop,
    apply_system_mask,
    apply_system_superop,
    superop_from_kraus,
)

# Upper bound on complex entries held per evolved chunk
CHUNK_ENTRIES = 2 ** 22


def _as_operator(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


class ChannelEvolution(ABC):
    """
    Base class for all channels.

    Subclasses provide per-time "maps" (whatever data their apply step needs)
    on the grid and at arbitrary times, and the apply step itself.
    """

    def __init__(self, name: str, n_qubits: int, times):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or times.size < 3:
            raise ValueError(f"[{name}] time grid needs at least 3 samples")
        if times[0] < 0 or not np.all(np.diff(times) > 0):
            raise ValueError(f"[{name}] time grid must be non-negative and strictly increasing")
        if n_qubits < 1:
            raise ValueError(f"[{name}] n_qubits must be >= 1, got {n_qubits}")
        self.name = name
        self.n_qubits = int(n_qubits)
        self.times = times
        self.times.setflags(write=False)

    @property
    def system_dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    # --- subclass hooks ---

    @abstractmethod
    def maps_on_grid(self, index: slice):
        """Per-time map data for grid points times[index]."""

    @abstractmethod
    def map_at(self, t: float):
        """Map data for a single time, with a leading axis of length 1."""

    @abstractmethod
    def apply_maps(self, stack: np.ndarray, maps) -> np.ndarray:
        """Apply per-time maps to a (T, d, d) stack of joint operators."""

    # --- engine ---

    def _check_operator(self, op: np.ndarray) -> int:
        d = op.shape[-1]
        if op.ndim != 2 or op.shape[0] != d or d % self.system_dim != 0:
            raise ValueError(f"[{self.name}] operator of shape {op.shape} does not carry "
                             f"{self.n_qubits} system qubit(s) plus an ancilla factor")
        return d

    def evolve(self, rho, chunk: int = 0) -> Iterator[Tuple[slice, np.ndarray]]:
        """
        Yield (index, states) over the grid; states has shape (len(index), d, d).

        Works for any operator (not only states), since every channel is linear.
        """
        op = _as_operator(rho)
        d = self._check_operator(op)
        size = self.times.size
        if chunk <= 0:
            chunk = max(1, CHUNK_ENTRIES // (d * d))
        for start in range(0, size, chunk):
            index = slice(start, min(size, start + chunk))
            stack = np.broadcast_to(op, (index.stop - start, d, d)).copy()
            yield index, self.apply_maps(stack, self.maps_on_grid(index))

    def evolve_all(self, rho) -> np.ndarray:
        """Full (T, d, d) trajectory; intended for small dimensions."""
        return np.concatenate([states for _, states in self.evolve(rho)], axis=0)

    def state_at(self, rho, t: float) -> np.ndarray:
        op = _as_operator(rho)
        self._check_operator(op)
        return self.apply_maps(op[np.newaxis].copy(), self.map_at(float(t)))[0]

    def describe(self) -> Dict[str, object]:
        return {"channel": self.name, "n_qubits": self.n_qubits,
                "horizon": self.horizon, "samples": int(self.times.size)}


class LocalKrausEvolution(ChannelEvolution):
    """
    Independent environments: the same single-qubit Kraus family on every
    system qubit. Applying the local map qubit by qubit equals the sum over
    all 2^n Kraus words.
    """

    def __init__(self, name: str, n_qubits: int, times, kraus_on_grid: np.ndarray,
                 kraus_at: Callable[[float], np.ndarray]):
        super().__init__(name, n_qubits, times)
        kraus_on_grid = np.asarray(kraus_on_grid, dtype=complex)
        if kraus_on_grid.shape[0] != self.times.size or kraus_on_grid.shape[-2:] != (2, 2):
            raise ValueError(f"[{name}] Kraus stack shape {kraus_on_grid.shape} does not match the grid")
        self._kraus = kraus_on_grid
        self._superops = superop_from_kraus(kraus_on_grid)
        self._kraus_at = kraus_at
        completeness = np.einsum("tmki,tmkj->tij", kraus_on_grid.conj(), kraus_on_grid) - np.eye(2)
        worst = float(np.max(np.abs(completeness)))
        if worst > 1e-12:
            logging.warning(f"[{name}] Kraus completeness deviates by {worst:.2e}")

    def maps_on_grid(self, index: slice):
        return self._superops[index]

    def map_at(self, t: float):
        return superop_from_kraus(np.asarray(self._kraus_at(t), dtype=complex))[np.newaxis]

    def apply_maps(self, stack: np.ndarray, maps) -> np.ndarray:
        for qubit in range(self.n_qubits):
            stack = apply_qubit_superop(stack, maps, qubit, self.n_qubits)
        return stack

    def kraus_on_grid(self, index: slice) -> np.ndarray:
        return self._kraus[index]

    def kraus_at(self, t: float) -> np.ndarray:
        return np.asarray(self._kraus_at(t), dtype=complex)[np.newaxis]

    def kraus_words(self, kraus: np.ndarray) -> np.ndarray:
        """(T, m, 2, 2) single-qubit Kraus stack -> (T, m^n, 2^n, 2^n) word operators."""
        words = kraus
        for _ in range(self.n_qubits - 1):
            T, w, a, _ = words.shape
            m = kraus.shape[1]
            words = np.einsum("twij,tmkl->twmikjl", words, kraus).reshape(T, w * m, a * 2, a * 2)
        return words


class MaskEvolution(ChannelEvolution):
    """Element-wise propagators: rho_ij(t) = M_ij(t) rho_ij(0) on the system indices."""

    def __init__(self, name: str, n_qubits: int, times, mask_on_grid: np.ndarray,
                 mask_at: Callable[[float], np.ndarray]):
        super().__init__(name, n_qubits, times)
        mask_on_grid = np.asarray(mask_on_grid)
        ds = self.system_dim
        if mask_on_grid.shape != (self.times.size, ds, ds):
            raise ValueError(f"[{name}] mask stack shape {mask_on_grid.shape} does not match the grid")
        self._masks = mask_on_grid
        self._mask_at = mask_at

    def maps_on_grid(self, index: slice):
        return self._masks[index]

    def map_at(self, t: float):
        return np.asarray(self._mask_at(t))[np.newaxis]

    def apply_maps(self, stack: np.ndarray, maps) -> np.ndarray:
        return apply_system_mask(stack, maps, self.n_qubits)


class SuperopEvolution(ChannelEvolution):
    """A full system superoperator S[i, j, k, l] per grid time."""

    def __init__(self, name: str, n_qubits: int, times, superops_on_grid: np.ndarray,
                 superop_at: Callable[[float], np.ndarray]):
        super().__init__(name, n_qubits, times)
        ds = self.system_dim
        superops_on_grid = np.asarray(superops_on_grid, dtype=complex)
        if superops_on_grid.shape != (self.times.size, ds, ds, ds, ds):
            raise ValueError(f"[{name}] superoperator stack shape {superops_on_grid.shape} does not match the grid")
        self._superops = superops_on_grid
        self._superop_at = superop_at

    def maps_on_grid(self, index: slice):
        return self._superops[index]

    def map_at(self, t: float):
        return np.asarray(self._superop_at(t), dtype=complex)[np.newaxis]

    def apply_maps(self, stack: np.ndarray, maps) -> np.ndarray:
        return apply_system_superop(stack, maps, self.n_qubits)


def apply_local_kraus(rho_sa: DensityMatrix, n_system_qubits: int, kraus: np.ndarray) -> DensityMatrix:
    """Apply one single-qubit Kraus set (m, 2, 2) to each of the first n system qubits."""
    op = rho_sa.entries
    if op.shape[0] % (2 ** n_system_qubits) != 0 or len(rho_sa.subsystem_dims) < n_system_qubits:
        raise ValueError(f"State of dim {op.shape[0]} cannot carry {n_system_qubits} system qubit(s)")
    superop = superop_from_kraus(np.asarray(kraus, dtype=complex))[np.newaxis]
    stack = op[np.newaxis].copy()
    for qubit in range(n_system_qubits):
        stack = apply_qubit_superop(stack, superop, qubit, n_system_qubits)
    return DensityMatrix(stack[0], rho_sa.subsystem_dims)
