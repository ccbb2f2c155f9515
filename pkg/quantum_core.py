"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
Density-matrix algebra and the information-theoretic primitives used by both
non-Markovianity measures.

CAPABILITIES:
1. DensityMatrix / PureState carriers with explicit subsystem dimensions.
2. Kronecker products, partial traces, purification.
3. Von Neumann entropy (bits), trace distance, quantum mutual information.
4. Stack operations: the same primitives over (T, d, d) arrays of states,
   plus local superoperator and element-wise mask application, used by the
   channel layer to evolve whole time grids at once.

CONVENTIONS:
- Basis index 0 is the ground state |down>, index 1 the excited state |up>;
  sigma_z = |up><up| - |down><down|.
- Subsystem order is system qubits first, ancilla last.
- Eigenvalues in [-1e-9, 0) are clamped to zero; anything lower is a
  PositivityError.
--------------------------------------------------------------------------------
"""

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from scipy.stats import unitary_group

EIGENVALUE_CLAMP = 1e-9
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-12


class PositivityError(ValueError):
    """A state violated positivity (or another density-matrix invariant)."""


# --- SINGLE-QUBIT CONSTANTS ---

KET_DOWN = np.array([1.0, 0.0], dtype=complex)
KET_UP = np.array([0.0, 1.0], dtype=complex)
KET_PLUS = (KET_DOWN + KET_UP) / math.sqrt(2)
KET_MINUS = (KET_DOWN - KET_UP) / math.sqrt(2)
KET_PLUS_I = (KET_DOWN + 1j * KET_UP) / math.sqrt(2)
KET_MINUS_I = (KET_DOWN - 1j * KET_UP) / math.sqrt(2)

IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_Z = np.outer(KET_UP, KET_UP.conj()) - np.outer(KET_DOWN, KET_DOWN.conj())
SIGMA_PLUS = np.outer(KET_UP, KET_DOWN.conj())
SIGMA_MINUS = np.outer(KET_DOWN, KET_UP.conj())


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# --- STATE CARRIERS ---

@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray
    subsystem_dims: Tuple[int, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"Density matrix must be square, got shape {entries.shape}")
        dims = tuple(int(d) for d in self.subsystem_dims)
        if int(np.prod(dims)) != entries.shape[0]:
            raise ValueError(f"subsystem_dims {dims} do not multiply to dim {entries.shape[0]}")
        if not _is_power_of_two(entries.shape[0]):
            raise ValueError(f"Dimension must be a power of 2, got {entries.shape[0]}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "subsystem_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_array(cls, entries, subsystem_dims: Optional[Sequence[int]] = None,
                   validate: bool = True, tol: float = TRACE_TOL) -> "DensityMatrix":
        entries = np.asarray(entries, dtype=complex)
        if subsystem_dims is None:
            n = int(round(math.log2(entries.shape[0])))
            subsystem_dims = (2,) * n
        rho = cls(entries, tuple(subsystem_dims))
        if validate:
            rho.validate(herm_tol=tol, trace_tol=tol)
        return rho

    @classmethod
    def diagonal(cls, probabilities: Sequence[float], subsystem_dims: Optional[Sequence[int]] = None) -> "DensityMatrix":
        return cls.from_array(np.diag(np.asarray(probabilities, dtype=complex)), subsystem_dims)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        d = 2 ** n_qubits
        return cls(np.eye(d, dtype=complex) / d, (2,) * n_qubits)

    @classmethod
    def from_bloch(cls, x: float, y: float, z: float) -> "DensityMatrix":
        """Single-qubit state with Bloch vector (x, y, z); z > 0 favours |up>."""
        entries = 0.5 * np.array([[1 - z, x + 1j * y], [x - 1j * y, 1 + z]], dtype=complex)
        return cls.from_array(entries, (2,))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def validate(self, clamp: float = EIGENVALUE_CLAMP, herm_tol: float = HERMITIAN_TOL,
                 trace_tol: float = TRACE_TOL) -> None:
        herm_err = float(np.max(np.abs(self.entries - self.entries.conj().T)))
        if herm_err > herm_tol:
            raise PositivityError(f"State is not Hermitian (max deviation {herm_err:.3e})")
        trace = complex(np.trace(self.entries))
        if abs(trace - 1.0) > trace_tol:
            raise PositivityError(f"State trace is {trace.real:.12f}, expected 1")
        lowest = float(np.min(self.eigenvalues()))
        if lowest < -clamp:
            raise PositivityError(f"Smallest eigenvalue {lowest:.3e} below -{clamp:g}")


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray
    subsystem_dims: Tuple[int, ...]

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        dims = tuple(int(d) for d in self.subsystem_dims)
        if int(np.prod(dims)) != amps.size:
            raise ValueError(f"subsystem_dims {dims} do not multiply to dim {amps.size}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"PureState must have unit norm, got {norm:.15f}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "subsystem_dims", dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def from_vector(cls, vector, subsystem_dims: Optional[Sequence[int]] = None) -> "PureState":
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        vector = vector / np.linalg.norm(vector)
        if subsystem_dims is None:
            subsystem_dims = (2,) * int(round(math.log2(vector.size)))
        return cls(vector, tuple(subsystem_dims))

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.subsystem_dims)


# --- ALGEBRA ---

def tensor(*operands):
    """
    Kronecker product in the given order (system qubits first, ancilla last).

    DensityMatrix / PureState operands combine into the same type with
    concatenated subsystem dimensions; anything else is treated as a plain
    operator array.
    """
    if not operands:
        raise ValueError("tensor() needs at least one operand")
    if all(isinstance(op, DensityMatrix) for op in operands):
        entries = reduce(np.kron, [op.entries for op in operands])
        dims = sum((op.subsystem_dims for op in operands), ())
        return DensityMatrix(entries, dims)
    if all(isinstance(op, PureState) for op in operands):
        amps = reduce(np.kron, [op.amplitudes for op in operands])
        dims = sum((op.subsystem_dims for op in operands), ())
        return PureState(amps, dims)
    return reduce(np.kron, [np.asarray(op) for op in operands])


def partial_trace_stack(stack: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Partial trace over the last two axes of `stack`, keeping subsystems `keep`."""
    dims = tuple(int(d) for d in dims)
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise ValueError(f"Invalid keep set {keep} for {n} subsystems")
    stack = np.asarray(stack)
    lead = stack.shape[:-2]
    nl = len(lead)
    t = stack.reshape(lead + dims + dims)
    current = n
    for i in reversed([i for i in range(n) if i not in keep]):
        t = np.trace(t, axis1=nl + i, axis2=nl + current + i)
        current -= 1
    d_keep = int(np.prod([dims[i] for i in keep]))
    return t.reshape(lead + (d_keep, d_keep))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(int(k) for k in keep))
    reduced = partial_trace_stack(rho.entries, rho.subsystem_dims, keep)
    return DensityMatrix(reduced, tuple(rho.subsystem_dims[i] for i in keep))


def entropy_from_eigenvalues(eigenvalues: np.ndarray, clamp: float = EIGENVALUE_CLAMP) -> np.ndarray:
    """Shannon entropy in bits over the last axis, with the 0 log 0 = 0 convention."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    lowest = float(np.min(eigenvalues)) if eigenvalues.size else 0.0
    if lowest < -clamp:
        raise PositivityError(f"Eigenvalue {lowest:.3e} below the clamping window -{clamp:g}")
    clipped = np.clip(eigenvalues, 0.0, None)
    return special.entr(clipped).sum(axis=-1) / math.log(2.0)


def entropy_stack(stack: np.ndarray, clamp: float = EIGENVALUE_CLAMP) -> np.ndarray:
    return entropy_from_eigenvalues(np.linalg.eigvalsh(stack), clamp)


def von_neumann_entropy(rho, clamp: float = EIGENVALUE_CLAMP) -> float:
    entries = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(entropy_stack(entries, clamp))


def trace_norm_stack(stack: np.ndarray) -> np.ndarray:
    """Trace norm of each Hermitian matrix in the stack."""
    return np.sum(np.abs(np.linalg.eigvalsh(stack)), axis=-1)


def trace_distance(rho1, rho2) -> float:
    a = rho1.entries if isinstance(rho1, DensityMatrix) else np.asarray(rho1)
    b = rho2.entries if isinstance(rho2, DensityMatrix) else np.asarray(rho2)
    if a.shape != b.shape:
        raise ValueError(f"Dimension mismatch in trace_distance: {a.shape} vs {b.shape}")
    return float(min(1.0, 0.5 * trace_norm_stack(a - b)))


def mutual_information_stack(stack: np.ndarray, dims: Sequence[int], system: Iterable[int],
                             clamp: float = EIGENVALUE_CLAMP) -> np.ndarray:
    dims = tuple(dims)
    system = sorted(set(system))
    ancilla = [i for i in range(len(dims)) if i not in system]
    if not system or not ancilla:
        raise ValueError(f"Cut {system} does not split subsystems {dims} into two parts")
    s_sys = entropy_stack(partial_trace_stack(stack, dims, system), clamp)
    s_anc = entropy_stack(partial_trace_stack(stack, dims, ancilla), clamp)
    s_joint = entropy_stack(stack, clamp)
    return s_sys + s_anc - s_joint


def mutual_information(rho_sa: DensityMatrix, cut: Iterable[int]) -> float:
    """I(s:a) = S(rho_s) + S(rho_a) - S(rho_sa), with `cut` the system subsystem indices."""
    return float(mutual_information_stack(rho_sa.entries, rho_sa.subsystem_dims, cut))


def purify(rho: DensityMatrix) -> PureState:
    """
    |psi> = sum_i sqrt(lambda_i) |v_i>|i> on system (x) ancilla, ancilla dim = system dim.
    """
    evals, evecs = np.linalg.eigh(rho.entries)
    if float(np.min(evals)) < -EIGENVALUE_CLAMP:
        raise PositivityError(f"Cannot purify: eigenvalue {float(np.min(evals)):.3e}")
    weights = np.sqrt(np.clip(evals, 0.0, None))
    amplitudes = (evecs * weights[np.newaxis, :]).reshape(-1)
    amplitudes = amplitudes / np.linalg.norm(amplitudes)
    return PureState(amplitudes, rho.subsystem_dims + (rho.dim,))


# --- RANDOM STATES ---

def random_pure_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vec / np.linalg.norm(vec)


def random_orthogonal_pair(dim: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Two orthonormal vectors from complex Gaussians (Gram-Schmidt on the second)."""
    first = random_pure_state(dim, rng)
    second = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    second = second - first * np.vdot(first, second)
    return first, second / np.linalg.norm(second)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


# --- STACK OPERATIONS ---

def superop_from_kraus(kraus: np.ndarray) -> np.ndarray:
    """
    Kraus stack (..., m, 2, 2) -> superoperator (..., 2, 2, 2, 2) with
    out[i, j] = sum_kl S[i, j, k, l] in[k, l].
    """
    kraus = np.asarray(kraus, dtype=complex)
    return np.einsum("...mik,...mjl->...ijkl", kraus, kraus.conj())


def apply_qubit_superop(stack: np.ndarray, superop: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """
    Apply a per-time single-qubit superoperator (T, 2, 2, 2, 2) to qubit
    `qubit` of a (T, d, d) stack whose trailing factor (d / 2**n) is ancilla.
    """
    T, d = stack.shape[0], stack.shape[-1]
    da = d // (2 ** n_qubits)
    if da * 2 ** n_qubits != d:
        raise ValueError(f"Joint dimension {d} is not a multiple of 2^{n_qubits}")
    x = stack.reshape((T,) + (2,) * n_qubits + (da,) + (2,) * n_qubits + (da,))
    row, col = 1 + qubit, 2 + n_qubits + qubit
    moved = np.moveaxis(x, (row, col), (-2, -1))
    shape = moved.shape
    mixed = moved.reshape(T, -1, 4) @ superop.reshape(T, 4, 4).transpose(0, 2, 1)
    y = np.moveaxis(mixed.reshape(shape), (-2, -1), (row, col))
    return y.reshape(stack.shape)


def apply_system_superop(stack: np.ndarray, superop: np.ndarray, n_qubits: int) -> np.ndarray:
    """Apply a per-time system superoperator (T, ds, ds, ds, ds) to a (T, d, d) stack."""
    T, d = stack.shape[0], stack.shape[-1]
    ds = 2 ** n_qubits
    da = d // ds
    x = stack.reshape(T, ds, da, ds, da)
    y = np.einsum("tijkl,tkalb->tiajb", superop, x)
    return y.reshape(stack.shape)


def apply_system_mask(stack: np.ndarray, mask: np.ndarray, n_qubits: int) -> np.ndarray:
    """Multiply system matrix elements by a per-time mask (T, ds, ds); ancilla untouched."""
    T, d = stack.shape[0], stack.shape[-1]
    ds = 2 ** n_qubits
    da = d // ds
    x = stack.reshape(T, ds, da, ds, da) * mask[:, :, np.newaxis, :, np.newaxis]
    return x.reshape(stack.shape)
