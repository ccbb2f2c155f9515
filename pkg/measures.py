"""
--------------------------------------------------------------------------------
SYSTEM ROLE:
The two non-Markovianity measures and their state-space searches.

CAPABILITIES:
1. rising_sum: total increase of a sampled signal over its rising runs, with
   optional extremum refinement of every run endpoint.
2. LFS (mutual information): system+ancilla trajectories from a purified
   initial state (or, for Kraus channels, from the environment entropy),
   single-state values, optimization over initial states, and the
   fixed-input variant N0 (GHZ or fully maximally entangled).
3. BLP (trace distance): pair trajectories (the difference operator is
   evolved once), single-pair values, and the staged pair search:
   structured families, seeded random pure pairs, optional mixed pairs,
   derivative-free polish.
4. Coherence trajectory of one qubit (recoherence plots).

CONCURRENCY:
- Candidates are evaluated with parallel_map (thread pool, input order kept).
  Random candidate k draws from default_rng([seed, k]), so the outcome does
  not depend on scheduling. Ties keep the first candidate in search order.
--------------------------------------------------------------------------------
"""

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from channels import ChannelEvolution, LocalKrausEvolution
from numerics import ConvergenceError, refine_extremum
from quantum_core import (
    KET_DOWN,
    KET_MINUS,
    KET_MINUS_I,
    KET_PLUS,
    KET_PLUS_I,
    KET_UP,
    DensityMatrix,
    PureState,
    entropy_stack,
    mutual_information_stack,
    partial_trace_stack,
    purify,
    random_orthogonal_pair,
    trace_norm_stack,
    von_neumann_entropy,
)

EPS_RISE = 1e-12
TIE_TOL = 1e-12
MAX_QUBITS = 4
ENV_CHUNK = 256

LFS_MODES = ("single-qubit-full", "diagonal-product", "diagonal-joint")
BLP_MODES = ("pair-structured", "pair-random")
SEARCH_MODES = ("auto",) + LFS_MODES + BLP_MODES


# --- DATA CARRIERS ---

@dataclass
class Trajectory:
    times: np.ndarray
    values: np.ndarray
    # off-grid evaluation, used for endpoint refinement
    sampler: Optional[Callable[[float], float]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError(f"Trajectory times {self.times.shape} and values {self.values.shape} differ")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("Trajectory times must be strictly increasing")


@dataclass
class MeasureResult:
    measure: str
    value: float
    intervals: List[Tuple[float, float, float]]
    argmax_state: Dict[str, object]
    config_hash: str = ""
    evaluations: int = 1
    wall_time: float = 0.0
    seed: Optional[int] = None
    trajectory: Optional[Trajectory] = field(default=None, repr=False, compare=False)
    # optimizing state(s) as DensityMatrix objects
    argmax_payload: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        total = sum(rise for _, _, rise in self.intervals)
        if self.value < 0 or abs(self.value - total) > 1e-12:
            raise ValueError(f"MeasureResult value {self.value} inconsistent with interval rises {total}")

    def intervals_as_dicts(self) -> List[Dict[str, float]]:
        return [{"a": a, "b": b, "rise": rise} for a, b, rise in self.intervals]


@dataclass(frozen=True)
class SearchConfig:
    mode: str = "auto"
    grid_step: float = 0.05
    random_samples: int = 10000
    seed: int = 7
    refine_iterations: int = 200
    mixed_pairs: bool = False
    workers: int = 4

    def __post_init__(self):
        if self.mode not in SEARCH_MODES:
            raise ValueError(f"search mode must be one of {SEARCH_MODES}, got {self.mode!r}")
        if not 0 < self.grid_step <= 0.5:
            raise ValueError(f"grid_step must lie in (0, 0.5], got {self.grid_step}")
        if self.random_samples < 0:
            raise ValueError(f"random_samples must be >= 0, got {self.random_samples}")
        if self.refine_iterations < 0:
            raise ValueError(f"refine_iterations must be >= 0, got {self.refine_iterations}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def parallel_map(fn: Callable, items: Sequence, workers: int = 1, name: str = "nmk") -> list:
    """Map preserving input order; threads are named `<name>_<k>`."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix=name) as executor:
        return list(executor.map(fn, items))


# --- RISING RUNS ---

def _refine_endpoint(sampler, times, index, kind, sampled, tol):
    lo, hi = float(times[index - 1]), float(times[index + 1])
    try:
        t_star, v_star = refine_extremum(sampler, (lo, hi), tol=tol, kind=kind)
    except ConvergenceError as e:
        logging.debug(f"[rising_sum] endpoint refinement skipped near t={times[index]:.6g}: {e}")
        return float(times[index]), sampled
    better = v_star < sampled if kind == "min" else v_star > sampled
    return (t_star, v_star) if better else (float(times[index]), sampled)


def rising_sum(traj: Trajectory, refine: bool = False, eps_rise: float = EPS_RISE,
               tol: float = 1e-10) -> Tuple[float, List[Tuple[float, float, float]]]:
    """
    Sum of v(b_i) - v(a_i) over the maximal runs where successive differences exceed eps_rise.

    With refine (and a sampler on the trajectory), interior run endpoints are
    moved to the refined local minimum / maximum.
    """
    times, values = traj.times, traj.values
    if times.size < 3:
        raise ValueError(f"rising_sum needs at least 3 samples, got {times.size}")
    rising = np.diff(values) > eps_rise
    last = times.size - 1
    sampler = traj.sampler if refine else None

    intervals = []
    i = 0
    while i < rising.size:
        if not rising[i]:
            i += 1
            continue
        j = i
        while j < rising.size and rising[j]:
            j += 1
        # run covers samples i..j
        a, va = float(times[i]), float(values[i])
        b, vb = float(times[j]), float(values[j])
        if sampler is not None:
            if 0 < i:
                a, va = _refine_endpoint(sampler, times, i, "min", va, tol)
            if j < last:
                b, vb = _refine_endpoint(sampler, times, j, "max", vb, tol)
        if vb > va:
            intervals.append((a, b, vb - va))
        i = j

    value = float(sum(rise for _, _, rise in intervals))
    return value, intervals


# --- STATE HELPERS ---

def _as_density(rho, n_qubits: int) -> DensityMatrix:
    if isinstance(rho, PureState):
        rho = rho.density()
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix.from_array(rho)
    if rho.dim != 2 ** n_qubits:
        raise ValueError(f"Initial state of dim {rho.dim} does not match {n_qubits} system qubit(s)")
    return rho


def describe_state(rho: DensityMatrix) -> Dict[str, object]:
    entries = rho.entries
    info: Dict[str, object] = {
        "kind": "density",
        "rho11": round(float(entries[0, 0].real), 12),
        "diagonal": [round(float(x), 12) for x in np.diag(entries).real],
    }
    if rho.dim == 2:
        info["rho12"] = [round(float(entries[0, 1].real), 12), round(float(entries[0, 1].imag), 12)]
    return info


def _vector_repr(vec: np.ndarray) -> List[List[float]]:
    return [[round(float(z.real), 12), round(float(z.imag), 12)] for z in vec]


def _custom_grid(channel: ChannelEvolution, grid) -> Optional[np.ndarray]:
    if grid is None:
        return None
    grid = np.asarray(grid, dtype=float)
    if grid.shape == channel.times.shape and np.array_equal(grid, channel.times):
        return None
    return grid


# --- LFS ---

def _mi_trajectory(channel: ChannelEvolution, joint: np.ndarray, ds: int, da: int, grid=None) -> Trajectory:
    dims = (ds, da)

    def mi(states):
        return mutual_information_stack(states, dims, [0])

    def sampler(t):
        return float(mi(channel.state_at(joint, t)[np.newaxis])[0])

    custom = _custom_grid(channel, grid)
    if custom is not None:
        return Trajectory(custom, [sampler(t) for t in custom], sampler)
    values = np.empty(channel.times.size)
    for index, states in channel.evolve(joint):
        values[index] = mi(states)
    return Trajectory(channel.times, values, sampler)


def _environment_trajectory(channel: LocalKrausEvolution, rho: DensityMatrix, grid=None) -> Trajectory:
    """I(t) = S(rho_s(0)) + S(rho_s(t)) - S(rho_e(t)), rho_e built from Kraus words."""
    s0 = von_neumann_entropy(rho)
    op = rho.entries

    def values_for(kraus):
        words = channel.kraus_words(kraus)
        env = np.einsum("twij,jk,tvik->twv", words, op, words.conj())
        system = np.einsum("twij,jk,twlk->til", words, op, words.conj())
        return s0 + entropy_stack(system) - entropy_stack(env)

    def sampler(t):
        return float(values_for(channel.kraus_at(t))[0])

    custom = _custom_grid(channel, grid)
    if custom is not None:
        return Trajectory(custom, [sampler(t) for t in custom], sampler)
    size = channel.times.size
    values = np.empty(size)
    for start in range(0, size, ENV_CHUNK):
        index = slice(start, min(size, start + ENV_CHUNK))
        values[index] = values_for(channel.kraus_on_grid(index))
    return Trajectory(channel.times, values, sampler)


def lfs_trajectory(channel: ChannelEvolution, rho_s0, grid=None, route: str = "ancilla") -> Trajectory:
    """Mutual information between the evolving system and a purifying ancilla."""
    rho = _as_density(rho_s0, channel.n_qubits)
    if route == "environment":
        if not isinstance(channel, LocalKrausEvolution):
            raise ValueError(f"[{channel.name}] the environment route needs a Kraus channel")
        return _environment_trajectory(channel, rho, grid)
    if route != "ancilla":
        raise ValueError(f"route must be 'ancilla' or 'environment', got {route!r}")
    joint = purify(rho).density().entries
    return _mi_trajectory(channel, joint, channel.system_dim, channel.system_dim, grid)


def _result_from_trajectory(measure: str, traj: Trajectory, refine: bool, argmax: Dict[str, object],
                            evaluations: int = 1, seed: Optional[int] = None, started: float = 0.0,
                            payload: Optional[tuple] = None) -> MeasureResult:
    value, intervals = rising_sum(traj, refine=refine)
    wall = time.perf_counter() - started if started else 0.0
    return MeasureResult(measure, value, intervals, argmax, evaluations=evaluations, wall_time=wall,
                         seed=seed, trajectory=traj, argmax_payload=payload)


def lfs_value(channel: ChannelEvolution, rho_s0, grid=None, refine: bool = True,
              route: str = "ancilla") -> MeasureResult:
    started = time.perf_counter()
    rho = _as_density(rho_s0, channel.n_qubits)
    traj = lfs_trajectory(channel, rho, grid, route)
    return _result_from_trajectory("lfs", traj, refine, describe_state(rho), started=started, payload=(rho,))


def _lfs_sampled(channel, rho, grid, route) -> float:
    return rising_sum(lfs_trajectory(channel, rho, grid, route))[0]


def _pick_first_best(values: Sequence[float]) -> int:
    """Index of the first candidate within TIE_TOL of the maximum."""
    values = np.asarray(values, dtype=float)
    return int(np.flatnonzero(values >= values.max() - TIE_TOL)[0])


def single_qubit_state(rho11: float, re: float, im: float) -> DensityMatrix:
    entries = np.array([[rho11, re + 1j * im], [re - 1j * im, 1.0 - rho11]], dtype=complex)
    return DensityMatrix.from_array(entries, (2,), validate=False)


def _project_single(x) -> Tuple[float, float, float]:
    rho11 = float(np.clip(x[0], 0.0, 1.0))
    radius = math.sqrt(rho11 * (1.0 - rho11))
    re, im = float(x[1]), float(x[2])
    norm = math.hypot(re, im)
    if norm > radius:
        scale = radius / norm if norm > 0 else 0.0
        re, im = re * scale, im * scale
    return rho11, re, im


def _unit_grid(step: float) -> np.ndarray:
    count = int(round(1.0 / step))
    return np.round(np.linspace(0.0, 1.0, count + 1), 12)


def _single_qubit_candidates(step: float) -> List[Tuple[float, float, float]]:
    axis = np.round(np.arange(-0.5, 0.5 + step / 2, step), 12)
    candidates = []
    for rho11 in _unit_grid(step):
        bound = rho11 * (1.0 - rho11) + 1e-12
        for re in axis:
            for im in axis:
                if re * re + im * im <= bound:
                    candidates.append((float(rho11), float(re), float(im)))
    return candidates


def _simplex_candidates(dim: int, step: float) -> List[Tuple[float, ...]]:
    count = int(round(1.0 / step))
    out = []
    for head in itertools.product(range(count + 1), repeat=dim - 1):
        rest = count - sum(head)
        if rest >= 0:
            out.append(tuple(k / count for k in head) + (rest / count,))
    return out


def _product_diagonal(q: float, n_qubits: int) -> DensityMatrix:
    single = np.array([q, 1.0 - q])
    probs = single
    for _ in range(n_qubits - 1):
        probs = np.kron(probs, single)
    return DensityMatrix(np.diag(probs).astype(complex), (2,) * n_qubits)


def _joint_diagonal(probs) -> DensityMatrix:
    probs = np.abs(np.asarray(probs, dtype=float))
    probs = probs / probs.sum()
    n = int(round(math.log2(probs.size)))
    return DensityMatrix(np.diag(probs).astype(complex), (2,) * n)


def resolve_lfs_mode(channel: ChannelEvolution, search: SearchConfig) -> str:
    mode = search.mode
    if mode == "auto":
        if channel.n_qubits == 1:
            return "single-qubit-full"
        return "diagonal-joint" if channel.name.endswith("/common") else "diagonal-product"
    if mode not in LFS_MODES:
        raise ValueError(f"search mode {mode!r} is not an LFS mode")
    if mode == "single-qubit-full" and channel.n_qubits != 1:
        raise ValueError(f"single-qubit-full needs one qubit, channel has {channel.n_qubits}")
    if mode == "diagonal-joint" and channel.n_qubits > 2:
        raise ValueError(f"diagonal-joint is limited to two qubits, channel has {channel.n_qubits}")
    return mode


def lfs_optimize(channel: ChannelEvolution, search: SearchConfig = SearchConfig(), grid=None,
                 route: str = "ancilla") -> MeasureResult:
    """Maximize the LFS value over the initial states admitted by the search mode."""
    started = time.perf_counter()
    mode = resolve_lfs_mode(channel, search)
    n = channel.n_qubits
    tag = f"{channel.name}-lfs"

    if mode == "single-qubit-full":
        candidates = _single_qubit_candidates(search.grid_step)
        build = lambda c: single_qubit_state(*_project_single(c))
    elif mode == "diagonal-product":
        candidates = [(float(q),) for q in _unit_grid(search.grid_step)]
        build = lambda c: _product_diagonal(c[0], n)
    else:
        candidates = _simplex_candidates(2 ** n, search.grid_step)
        build = _joint_diagonal

    logging.info(f"[{tag}] 🚀 {mode}: {len(candidates)} candidates on {search.workers} worker(s)")
    scores = parallel_map(lambda c: _lfs_sampled(channel, build(c), grid, route), candidates,
                          search.workers, tag)
    evaluations = len(candidates)
    best = _pick_first_best(scores)
    best_params, best_score = candidates[best], scores[best]

    if search.refine_iterations > 0:
        if mode == "diagonal-product":
            q0 = best_params[0]
            lo, hi = max(0.0, q0 - search.grid_step), min(1.0, q0 + search.grid_step)
            try:
                q_star, v_star = refine_extremum(lambda q: _lfs_sampled(channel, build((q,)), grid, route),
                                                 (lo, hi), tol=1e-4, kind="max")
                if v_star > best_score + TIE_TOL:
                    best_params, best_score = (q_star,), v_star
            except ConvergenceError as e:
                logging.debug(f"[{tag}] polish skipped: {e}")
        else:
            counter = {"n": 0}

            def objective(x):
                counter["n"] += 1
                return -_lfs_sampled(channel, build(x), grid, route)

            res = optimize.minimize(objective, np.array(best_params, dtype=float), method="Nelder-Mead",
                                    options={"maxiter": search.refine_iterations, "xatol": 1e-4, "fatol": 1e-12})
            evaluations += counter["n"]
            if -res.fun > best_score + TIE_TOL:
                polished = _project_single(res.x) if mode == "single-qubit-full" else tuple(res.x)
                best_params, best_score = polished, -res.fun

    rho = build(best_params)
    result = _result_from_trajectory("lfs", lfs_trajectory(channel, rho, grid, route), True,
                                     describe_state(rho), evaluations=evaluations, started=started,
                                     payload=(rho,))
    result.argmax_state["search_mode"] = mode
    logging.info(f"[{tag}] ✅ N = {result.value:.6g} at rho11 = {result.argmax_state['rho11']:.4f}")
    return result


def entangled_input(n_qubits: int, choice: str) -> np.ndarray:
    """Joint system+ancilla pure state (ancilla dim 2^n) as a density operator."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must lie in 1..{MAX_QUBITS}, got {n_qubits}")
    ds = 2 ** n_qubits
    psi = np.zeros(ds * ds, dtype=complex)
    if choice == "ghz":
        psi[0] = psi[-1] = 1.0 / math.sqrt(2.0)
    elif choice == "full-maxent":
        psi[np.arange(ds) * ds + np.arange(ds)] = 1.0 / math.sqrt(ds)
    else:
        raise ValueError(f"entangled_choice must be 'ghz' or 'full-maxent', got {choice!r}")
    return np.outer(psi, psi.conj())


def lfs_n0(channel: ChannelEvolution, n_qubits: int, entangled_choice: str = "ghz", grid=None,
           refine: bool = True) -> MeasureResult:
    """LFS rising sum for one fixed maximally entangled system+ancilla input."""
    started = time.perf_counter()
    if n_qubits != channel.n_qubits:
        raise ValueError(f"n_qubits={n_qubits} does not match channel with {channel.n_qubits} qubit(s)")
    joint = entangled_input(n_qubits, entangled_choice)
    ds = channel.system_dim
    traj = _mi_trajectory(channel, joint, ds, ds, grid)
    return _result_from_trajectory("lfs0", traj, refine, {"kind": "entangled", "choice": entangled_choice},
                                   started=started)


# --- BLP ---

def blp_trajectory(channel: ChannelEvolution, rho1_0, rho2_0, grid=None) -> Trajectory:
    """Trace distance of the evolved pair; the channel acts once on rho1 - rho2."""
    r1 = _as_density(rho1_0, channel.n_qubits)
    r2 = _as_density(rho2_0, channel.n_qubits)
    delta = r1.entries - r2.entries

    def distance(stack):
        return np.minimum(1.0, 0.5 * trace_norm_stack(stack))

    def sampler(t):
        return float(distance(channel.state_at(delta, t)[np.newaxis])[0])

    custom = _custom_grid(channel, grid)
    if custom is not None:
        return Trajectory(custom, [sampler(t) for t in custom], sampler)
    values = np.empty(channel.times.size)
    for index, states in channel.evolve(delta):
        values[index] = distance(states)
    return Trajectory(channel.times, values, sampler)


def blp_value(channel: ChannelEvolution, rho1_0, rho2_0, grid=None, refine: bool = True,
              label: str = "custom") -> MeasureResult:
    started = time.perf_counter()
    traj = blp_trajectory(channel, rho1_0, rho2_0, grid)
    argmax = {"kind": "pair", "label": label}
    payload = (_as_density(rho1_0, channel.n_qubits), _as_density(rho2_0, channel.n_qubits))
    return _result_from_trajectory("blp", traj, refine, argmax, started=started, payload=payload)


def _kron(*kets) -> np.ndarray:
    out = kets[0]
    for ket in kets[1:]:
        out = np.kron(out, ket)
    return out


def structured_pairs(n_qubits: int) -> List[Tuple[str, np.ndarray, np.ndarray]]:
    """Named orthogonal pure pairs, in search order."""
    if n_qubits == 1:
        return [
            ("|+>,|->", KET_PLUS, KET_MINUS),
            ("|+i>,|-i>", KET_PLUS_I, KET_MINUS_I),
            ("|down>,|up>", KET_DOWN, KET_UP),
        ]
    if n_qubits != 2:
        raise ValueError(f"Structured BLP pairs exist for 1 or 2 qubits, got {n_qubits}")
    d, u, p, m = KET_DOWN, KET_UP, KET_PLUS, KET_MINUS
    r2 = math.sqrt(2.0)
    psi_p, psi_m = (_kron(d, u) + _kron(u, d)) / r2, (_kron(d, u) - _kron(u, d)) / r2
    phi_p, phi_m = (_kron(d, d) + _kron(u, u)) / r2, (_kron(d, d) - _kron(u, u)) / r2
    pairs = [
        ("|down+>,|down->", _kron(d, p), _kron(d, m)),
        ("|up+>,|up->", _kron(u, p), _kron(u, m)),
        ("|+down>,|-down>", _kron(p, d), _kron(m, d)),
        ("|+up>,|-up>", _kron(p, u), _kron(m, u)),
        ("|down+i>,|down-i>", _kron(d, KET_PLUS_I), _kron(d, KET_MINUS_I)),
        ("|++>,|-->", _kron(p, p), _kron(m, m)),
        ("|+->,|-+>", _kron(p, m), _kron(m, p)),
        ("psi+,psi-", psi_p, psi_m),
        ("phi+,phi-", phi_p, phi_m),
        ("phi+,psi+", phi_p, psi_p),
        ("phi-,psi-", phi_m, psi_m),
    ]
    basis = [("|down down>", _kron(d, d)), ("|down up>", _kron(d, u)),
             ("|up down>", _kron(u, d)), ("|up up>", _kron(u, u))]
    for (la, ka), (lb, kb) in itertools.combinations(basis, 2):
        pairs.append((f"{la},{lb}", ka, kb))
    return pairs


def _fibonacci_directions(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def mixed_pairs(radii=(0.5, 0.75), count: int = 32) -> List[Tuple[str, DensityMatrix, DensityMatrix]]:
    """Single-qubit mixed pairs with Bloch vectors +/- r n."""
    pairs = []
    for r in radii:
        for x, y, z in _fibonacci_directions(count):
            pairs.append((f"bloch r={r} n=({x:.3f},{y:.3f},{z:.3f})",
                          DensityMatrix.from_bloch(r * x, r * y, r * z),
                          DensityMatrix.from_bloch(-r * x, -r * y, -r * z)))
    return pairs


def _pure(vec: np.ndarray) -> DensityMatrix:
    return PureState.from_vector(vec).density()


def _random_pair(seed: int, index: int, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    return random_orthogonal_pair(dim, np.random.default_rng([seed, index]))


def _pair_from_params(x: np.ndarray, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    v1 = x[:dim] + 1j * x[dim:2 * dim]
    v2 = x[2 * dim:3 * dim] + 1j * x[3 * dim:]
    v1 = v1 / np.linalg.norm(v1)
    v2 = v2 - v1 * np.vdot(v1, v2)
    return v1, v2 / np.linalg.norm(v2)


def blp_optimize(channel: ChannelEvolution, search: SearchConfig = SearchConfig(), grid=None) -> MeasureResult:
    """Maximize the BLP rising sum over state pairs (structured, random, polish)."""
    started = time.perf_counter()
    n = channel.n_qubits
    if n > 2:
        raise ValueError(f"BLP search is limited to two qubits, channel has {n}")
    mode = "pair-random" if search.mode == "auto" else search.mode
    if mode not in BLP_MODES:
        raise ValueError(f"search mode {mode!r} is not a BLP mode")
    dim = channel.system_dim
    tag = f"{channel.name}-blp"

    def score(rho1, rho2):
        return rising_sum(blp_trajectory(channel, rho1, rho2, grid))[0]

    # stage 1: structured families
    structured = structured_pairs(n)
    values = parallel_map(lambda item: score(_pure(item[1]), _pure(item[2])), structured, search.workers, tag)
    evaluations = len(structured)
    k = _pick_first_best(values)
    best_value = values[k]
    best = {"kind": "pair", "label": structured[k][0], "source": "structured",
            "vectors": (structured[k][1], structured[k][2])}
    logging.info(f"[{tag}] structured best {best['label']} -> {best_value:.6g}")

    # stage 2: random pure pairs, then optional mixed pairs
    if mode == "pair-random" and search.random_samples > 0:
        indices = range(search.random_samples)
        values = parallel_map(lambda i: score(*map(_pure, _random_pair(search.seed, i, dim))),
                              indices, search.workers, tag)
        evaluations += search.random_samples
        k = _pick_first_best(values)
        if values[k] > best_value + TIE_TOL:
            best_value = values[k]
            best = {"kind": "pair", "label": f"random #{k}", "source": "random",
                    "vectors": _random_pair(search.seed, k, dim)}
            logging.info(f"[{tag}] random pair #{k} improves to {best_value:.6g}")

    if search.mixed_pairs and n == 1:
        mixed = mixed_pairs()
        values = parallel_map(lambda item: score(item[1], item[2]), mixed, search.workers, tag)
        evaluations += len(mixed)
        k = _pick_first_best(values)
        if values[k] > best_value + TIE_TOL:
            best_value = values[k]
            best = {"kind": "pair", "label": mixed[k][0], "source": "mixed", "states": mixed[k][1:]}

    # stage 3: polish a pure optimum
    if search.refine_iterations > 0 and "vectors" in best:
        v1, v2 = best["vectors"]
        x0 = np.concatenate([v1.real, v1.imag, v2.real, v2.imag])
        counter = {"n": 0}

        def objective(x):
            counter["n"] += 1
            a, b = _pair_from_params(x, dim)
            return -score(_pure(a), _pure(b))

        res = optimize.minimize(objective, x0, method="Nelder-Mead",
                                options={"maxiter": search.refine_iterations, "xatol": 1e-6, "fatol": 1e-12})
        evaluations += counter["n"]
        if -res.fun > best_value + TIE_TOL:
            best_value = -res.fun
            best = {"kind": "pair", "label": f"polished {best['label']}", "source": "polish",
                    "vectors": _pair_from_params(res.x, dim)}

    if "vectors" in best:
        rho1, rho2 = (_pure(v) for v in best["vectors"])
    else:
        rho1, rho2 = best["states"]
    traj = blp_trajectory(channel, rho1, rho2, grid)
    argmax = {"kind": "pair", "label": best["label"], "source": best["source"]}
    if "vectors" in best:
        argmax["state1"], argmax["state2"] = (_vector_repr(v) for v in best["vectors"])
    result = _result_from_trajectory("blp", traj, True, argmax, evaluations=evaluations,
                                     seed=search.seed, started=started, payload=(rho1, rho2))
    logging.info(f"[{tag}] ✅ BLP = {result.value:.6g} for {best['label']} ({evaluations} evaluations)")
    return result


# --- OBSERVABLES ---

def coherence_trajectory(channel: ChannelEvolution, rho_s0, qubit: int = 0, grid=None) -> Trajectory:
    """|rho_01(t)| of one system qubit."""
    rho = _as_density(rho_s0, channel.n_qubits)
    dims = (2,) * channel.n_qubits

    def coherence(stack):
        return np.abs(partial_trace_stack(stack, dims, [qubit])[:, 0, 1])

    def sampler(t):
        return float(coherence(channel.state_at(rho.entries, t)[np.newaxis])[0])

    custom = _custom_grid(channel, grid)
    if custom is not None:
        return Trajectory(custom, [sampler(t) for t in custom], sampler)
    values = np.empty(channel.times.size)
    for index, states in channel.evolve(rho.entries):
        values[index] = coherence(states)
    return Trajectory(channel.times, values, sampler)
