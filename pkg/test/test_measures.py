"""
Measure tests: rising-run sums, BLP and LFS against closed forms, the
environment-entropy route, additivity over independent qubits and the
search drivers on small candidate sets.

Usage:
    python test/test_measures.py
    pytest test/test_measures.py
"""

import math
import os
import sys
import threading

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from damping import DampingParams, IndependentDamping, damping_parameter, kraus_from_parameter
from dephasing import DephasingParams, IndependentDephasing, kraus_from_factor
from measures import (
    MeasureResult,
    SearchConfig,
    Trajectory,
    blp_optimize,
    blp_trajectory,
    blp_value,
    coherence_trajectory,
    entangled_input,
    lfs_n0,
    lfs_optimize,
    lfs_trajectory,
    lfs_value,
    parallel_map,
    rising_sum,
    structured_pairs,
)
from numerics import QuadConfig
from quantum_core import (
    KET_DOWN,
    KET_MINUS,
    KET_PLUS,
    DensityMatrix,
    PureState,
    random_density_matrix,
    tensor,
)

PD = DephasingParams()
AD = DampingParams()


def exponent_s3(t: float, p: DephasingParams) -> float:
    x2 = (p.omega_c * t) ** 2
    return p.eta * (1.0 - (1.0 - x2) / (1.0 + x2) ** 2)


def plus_minus():
    return PureState.from_vector(KET_PLUS).density(), PureState.from_vector(KET_MINUS).density()


def test_rising_sum_on_samples():
    """Maximal rising runs are summed run by run"""
    print("\n🧪 Test 1: rising sum on sampled values")
    traj = Trajectory(np.arange(5.0), [0.0, 1.0, 0.5, 2.0, 1.0])
    value, intervals = rising_sum(traj)
    assert abs(value - 2.5) < 1e-15, f"Expected 2.5, got {value}"
    assert intervals == [(0.0, 1.0, 1.0), (2.0, 3.0, 1.5)], f"Unexpected intervals {intervals}"

    falling = Trajectory(np.arange(4.0), [3.0, 2.0, 2.0, 1.0])
    assert rising_sum(falling) == (0.0, []), "A non-increasing trajectory has no rises"
    try:
        rising_sum(Trajectory([0.0, 1.0], [0.0, 1.0]))
        assert False, "Fewer than 3 samples should raise"
    except ValueError:
        pass
    print("   ✅ rising sum passed")


def test_rising_sum_refines_interior_endpoints():
    """-cos on a coarse grid: refined extrema recover the exact total rise of 4"""
    print("\n🧪 Test 2: endpoint refinement")
    times = np.linspace(0.0, 3.0 * math.pi, 8)
    traj = Trajectory(times, -np.cos(times), lambda t: -math.cos(t))
    coarse, _ = rising_sum(traj)
    refined, intervals = rising_sum(traj, refine=True)
    assert coarse < 4.0 - 1e-3, f"Coarse sum {coarse} should miss the extrema"
    assert abs(refined - 4.0) < 1e-9, f"Refined sum {refined}, expected 4"
    assert abs(intervals[0][1] - math.pi) < 1e-4 and abs(intervals[1][0] - 2 * math.pi) < 1e-4, \
        f"Refined endpoints {intervals}"
    print("   ✅ refinement passed")


def test_measure_result_consistency():
    """A result whose value disagrees with its interval rises is rejected"""
    print("\n🧪 Test 3: MeasureResult validation")
    MeasureResult("blp", 0.5, [(0.0, 1.0, 0.5)], {})
    try:
        MeasureResult("blp", 0.7, [(0.0, 1.0, 0.5)], {})
        assert False, "Inconsistent value should raise"
    except ValueError:
        pass
    for kwargs in ({"mode": "nope"}, {"grid_step": 0.0}, {"random_samples": -1}, {"workers": 0}):
        try:
            SearchConfig(**kwargs)
            assert False, f"SearchConfig({kwargs}) should raise"
        except ValueError:
            pass
    print("   ✅ validation passed")


def test_blp_dephasing_closed_form():
    """Single-qubit dephasing BLP for |+>,|-> is r(T) - exp(-9 eta / 8)"""
    print("\n🧪 Test 4: BLP for pure dephasing")
    times = np.linspace(0.0, 40.0, 4001)
    channel = IndependentDephasing(PD, 1, times)
    result = blp_value(channel, *plus_minus())
    expected = math.exp(-exponent_s3(40.0, PD)) - math.exp(-9.0 * PD.eta / 8.0)
    assert abs(result.value - expected) < 1e-8, f"BLP {result.value}, expected {expected}"
    assert len(result.intervals) == 1 and abs(result.intervals[0][0] - math.sqrt(3.0)) < 1e-4, \
        f"Rise must start at the recoherence point, got {result.intervals}"
    # the stated rate gives about 0.030 at eta = 2
    assert abs(result.value - 0.0298) < 2e-4, f"Unexpected dephasing BLP {result.value}"
    print(f"   ✅ BLP = {result.value:.6f} passed")


def test_blp_damping_closed_form():
    """Single-qubit damping BLP for |+>,|-> sums the maxima exp(-lambda pi k / d) of |c(t)|"""
    print("\n🧪 Test 5: BLP for amplitude damping")
    times = np.linspace(0.0, AD.default_horizon(), 6001)
    channel = IndependentDamping(AD, 1, times)
    result = blp_value(channel, *plus_minus())
    k_max = int(times[-1] * AD.d / (2.0 * math.pi))
    expected = sum(math.exp(-AD.lam * math.pi * k / AD.d) for k in range(1, k_max + 1))
    assert abs(result.value - expected) < 1e-6, f"BLP {result.value}, expected {expected}"
    assert abs(result.value - 0.9463) / 0.9463 < 0.01, f"Damping BLP {result.value} off the reference"
    print(f"   ✅ BLP = {result.value:.6f} passed")


def test_spectator_embedding():
    """Adding an idle |down> qubit leaves the independent-bath BLP unchanged"""
    print("\n🧪 Test 6: spectator-qubit embedding")
    times = np.linspace(0.0, 40.0, 801)
    single = blp_value(IndependentDephasing(PD, 1, times), *plus_minus())
    down = PureState.from_vector(KET_DOWN).density()
    plus, minus = plus_minus()
    pair = blp_value(IndependentDephasing(PD, 2, times), tensor(down, plus), tensor(down, minus))
    assert abs(single.value - pair.value) < 1e-10, f"{single.value} vs {pair.value}"
    print("   ✅ spectator embedding passed")


def test_environment_route_matches_ancilla_route():
    """Both LFS routes give the same mutual-information trajectory"""
    print("\n🧪 Test 7: environment-entropy route")
    rng = np.random.default_rng(13)
    for channel in (IndependentDephasing(PD, 1, np.linspace(0.0, 20.0, 201)),
                    IndependentDamping(AD, 2, np.linspace(0.0, 20.0, 201))):
        rho = DensityMatrix.from_array(random_density_matrix(channel.system_dim, rng))
        ancilla = lfs_trajectory(channel, rho)
        environment = lfs_trajectory(channel, rho, route="environment")
        gap = float(np.max(np.abs(ancilla.values - environment.values)))
        assert gap < 1e-9, f"[{channel.name}] routes differ by {gap:.2e}"
    print("   ✅ routes agree")


def test_lfs_additivity_over_independent_qubits():
    """Product diagonal inputs on n independent baths give n times the single-qubit value"""
    print("\n🧪 Test 8: LFS additivity")
    times = np.linspace(0.0, 40.0, 801)
    q = 0.4
    one = lfs_value(IndependentDamping(AD, 1, times), DensityMatrix.diagonal([q, 1 - q]))
    for n in (2, 3):
        probs = np.array([q, 1 - q])
        joint = probs
        for _ in range(n - 1):
            joint = np.kron(joint, probs)
        many = lfs_value(IndependentDamping(AD, n, times), DensityMatrix.diagonal(joint))
        assert abs(many.value - n * one.value) < 1e-6 * n * one.value, f"n={n}: {many.value} vs {n * one.value}"
    print("   ✅ additivity passed")


def test_n0_matches_maximally_mixed_lfs():
    """For one qubit the GHZ input is the purification of I/2; N0 never exceeds the optimum"""
    print("\n🧪 Test 9: N0 versus LFS")
    times = np.linspace(0.0, 40.0, 801)
    channel = IndependentDephasing(PD, 1, times)
    n0 = lfs_n0(channel, 1, "ghz")
    mixed = lfs_value(channel, DensityMatrix.maximally_mixed(1))
    assert abs(n0.value - mixed.value) < 1e-9, f"{n0.value} vs {mixed.value}"
    best = lfs_optimize(channel, SearchConfig(mode="diagonal-product", grid_step=0.1, workers=1))
    assert n0.value <= best.value + 1e-9, f"N0 {n0.value} exceeds optimum {best.value}"
    assert abs(best.argmax_state["rho11"] - 0.5) < 0.02, f"argmax rho11 {best.argmax_state['rho11']}"

    ghz = entangled_input(2, "ghz")
    full = entangled_input(2, "full-maxent")
    assert abs(np.trace(ghz) - 1) < 1e-12 and abs(np.trace(full) - 1) < 1e-12, "Inputs must be normalized"
    try:
        lfs_n0(channel, 2, "ghz")
        assert False, "Qubit-count mismatch should raise"
    except ValueError:
        pass
    print("   ✅ N0 checks passed")


def test_weak_coupling_has_no_backflow():
    """lambda >= 2 gamma0 damping and ohmic (s = 1) dephasing: both measures vanish"""
    print("\n🧪 Test 10: weak coupling and ohmic dephasing")
    weak = DampingParams(lam=3.0)
    channel = IndependentDamping(weak, 1, np.linspace(0.0, weak.default_horizon(), 1001))
    blp = blp_value(channel, *plus_minus())
    lfs = lfs_value(channel, DensityMatrix.maximally_mixed(1))
    assert blp.value < 1e-9 and lfs.value < 1e-9, f"BLP {blp.value}, LFS {lfs.value}"
    ohmic = DephasingParams(s=1.0)
    markovian = IndependentDephasing(ohmic, 1, np.linspace(0.0, 40.0, 801))
    assert lfs_value(markovian, DensityMatrix.maximally_mixed(1)).value < 1e-9, "Ohmic dephasing must show no backflow"
    assert blp_value(markovian, *plus_minus()).value < 1e-9, "Ohmic dephasing BLP must vanish"
    print("   ✅ weak coupling passed")


def test_blp_structured_search():
    """Structured-only search returns the first optimal named pair"""
    print("\n🧪 Test 11: structured BLP search")
    times = np.linspace(0.0, 40.0, 801)
    channel = IndependentDephasing(PD, 1, times)
    search = SearchConfig(mode="pair-structured", refine_iterations=0, workers=2)
    result = blp_optimize(channel, search)
    assert result.argmax_state["label"] == "|+>,|->", f"Got {result.argmax_state['label']}"
    assert result.evaluations == 3, f"Expected 3 evaluations, got {result.evaluations}"
    assert structured_pairs(2)[0][0] == "|down+>,|down->", "Spectator pair must lead the two-qubit list"
    try:
        blp_optimize(IndependentDephasing(PD, 3, times), search)
        assert False, "Three-qubit BLP search should raise"
    except ValueError:
        pass
    print("   ✅ structured search passed")


def test_coherence_trajectory():
    """|rho_01| of |+> under dephasing is r(t) / 2"""
    print("\n🧪 Test 12: coherence trajectory")
    times = np.linspace(0.0, 10.0, 101)
    plus, _ = plus_minus()
    traj = coherence_trajectory(IndependentDephasing(PD, 1, times), plus)
    expected = 0.5 * np.exp(-np.array([exponent_s3(t, PD) for t in times]))
    assert np.allclose(traj.values, expected, atol=1e-9), "Coherence trajectory deviates"
    pair = blp_trajectory(IndependentDephasing(PD, 1, times), *plus_minus())
    assert np.allclose(pair.values, 2.0 * traj.values, atol=1e-12), "Trace distance of |+>,|-> must be twice the coherence"
    print("   ✅ coherence trajectory passed")


def test_parallel_map_order_and_threads():
    """Results keep input order; worker threads carry the given name prefix"""
    print("\n🧪 Test 13: parallel map")
    names = set()

    def work(x):
        names.add(threading.current_thread().name)
        return x * x

    assert parallel_map(work, range(50), workers=4, name="pd-blp") == [x * x for x in range(50)], "Order lost"
    assert all(name.startswith("pd-blp") for name in names), f"Thread names {names}"
    print("   ✅ parallel map passed")


def test_values_survive_grid_and_tolerance_halving():
    """Halving the grid spacing or the quadrature tolerances moves the measures by less than 1e-6"""
    print("\n🧪 Test 14: grid and tolerance halving")
    coarse = blp_value(IndependentDephasing(PD, 1, np.linspace(0.0, 40.0, 2001)), *plus_minus()).value
    fine = blp_value(IndependentDephasing(PD, 1, np.linspace(0.0, 40.0, 4001)), *plus_minus()).value
    tight = blp_value(IndependentDephasing(PD, 1, np.linspace(0.0, 40.0, 2001), QuadConfig().halved()),
                      *plus_minus()).value
    assert abs(coarse - fine) < 1e-6, f"PD BLP grid halving: {coarse} vs {fine}"
    assert abs(coarse - tight) < 1e-6, f"PD BLP tolerance halving: {coarse} vs {tight}"

    horizon = AD.default_horizon()
    for measure in ("blp", "lfs"):
        values = []
        for samples in (3001, 6001):
            channel = IndependentDamping(AD, 1, np.linspace(0.0, horizon, samples))
            if measure == "blp":
                values.append(blp_value(channel, *plus_minus()).value)
            else:
                values.append(lfs_value(channel, DensityMatrix.maximally_mixed(1)).value)
        assert abs(values[0] - values[1]) < 1e-6, f"AD {measure} grid halving: {values}"
    print("   ✅ halving passed")


def _bits(eigenvalues: np.ndarray) -> float:
    ev = np.clip(eigenvalues, 0.0, None)
    ev = ev[ev > 1e-300]
    return float(-np.sum(ev * np.log2(ev)))


def _dense_mutual_information(kraus: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """MI of a purified two-qubit diagonal state under K (x) K, built as 16 x 16 operators."""
    psi = np.zeros(16)
    for i, w in enumerate(probs):
        psi[i * 4 + i] = math.sqrt(w)
    joint0 = np.outer(psi, psi)
    out = []
    for family in kraus:
        joint = np.zeros((16, 16), dtype=complex)
        for a in family:
            for b in family:
                word = np.kron(np.kron(a, b), np.eye(4))
                joint += word @ joint0 @ word.conj().T
        blocks = joint.reshape(4, 4, 4, 4)
        system = np.einsum("iaja->ij", blocks)
        ancilla = np.einsum("aiaj->ij", blocks)
        out.append(_bits(np.linalg.eigvalsh(system)) + _bits(np.linalg.eigvalsh(ancilla))
                   - _bits(np.linalg.eigvalsh(joint)))
    return np.array(out)


def test_two_qubit_lfs_matches_dense_operators():
    """Two independent qubits: the LFS trajectory equals MI from explicit 16 x 16 Kraus products"""
    print("\n🧪 Test 15: dense two-qubit oracle")
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    times = np.linspace(0.0, 20.0, 41)
    pd_channel = IndependentDephasing(PD, 2, times)
    ad_channel = IndependentDamping(AD, 2, times)
    cases = [
        (pd_channel, kraus_from_factor(pd_channel.factors)),
        (ad_channel, kraus_from_parameter(damping_parameter(times, AD))),
    ]
    for channel, kraus in cases:
        traj = lfs_trajectory(channel, DensityMatrix.diagonal(probs))
        dense = _dense_mutual_information(kraus, probs)
        gap = float(np.max(np.abs(traj.values - dense)))
        assert gap < 1e-10, f"[{channel.name}] trajectory differs from the dense oracle by {gap:.2e}"
    print("   ✅ dense oracle passed")


def test_damping_n0_sequence():
    """GHZ-input N0 on independent damping baths: drop from one to two qubits, then growth"""
    print("\n🧪 Test 16: amplitude-damping N0 sequence")
    times = np.linspace(0.0, AD.default_horizon(), 6000)
    n0 = [lfs_n0(IndependentDamping(AD, n, times), n, "ghz").value for n in (1, 2, 3)]
    assert abs(n0[1] - 0.4972250528092) < 1e-8, f"N0(2) = {n0[1]}"
    assert abs(n0[0] - 0.833) < 2e-3, f"N0(1) = {n0[0]}"
    assert abs(n0[2] - 0.519) < 2e-3, f"N0(3) = {n0[2]}"
    assert n0[0] > n0[1] < n0[2], f"Unexpected N0 shape {n0}"
    print(f"   ✅ N0 sequence {[round(v, 4) for v in n0]} passed")


def run_all_tests():
    """Run all tests"""
    print("=" * 80)
    print("🧪 Running Measure Tests")
    print("=" * 80)

    tests = [
        test_rising_sum_on_samples,
        test_rising_sum_refines_interior_endpoints,
        test_measure_result_consistency,
        test_blp_dephasing_closed_form,
        test_blp_damping_closed_form,
        test_spectator_embedding,
        test_environment_route_matches_ancilla_route,
        test_lfs_additivity_over_independent_qubits,
        test_n0_matches_maximally_mixed_lfs,
        test_weak_coupling_has_no_backflow,
        test_blp_structured_search,
        test_coherence_trajectory,
        test_parallel_map_order_and_threads,
        test_values_survive_grid_and_tolerance_halving,
        test_two_qubit_lfs_matches_dense_operators,
        test_damping_n0_sequence,
    ]
    failed = []
    for test in tests:
        try:
            test()
        except AssertionError as e:
            print(f"   ❌ FAILED: {e}")
            failed.append(test.__name__)

    print("\n" + "=" * 80)
    print(f"   Total: {len(tests) - len(failed)}/{len(tests)} tests passed")
    if failed:
        print(f"   ⚠️  Failed: {', '.join(failed)}")
    return not failed


if __name__ == "__main__":
    success = run_all_tests()
    sys.exit(0 if success else 1)
