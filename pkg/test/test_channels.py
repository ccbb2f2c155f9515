"""
Channel engine tests: grid validation, chunked evolution, off-grid evaluation
and the Kraus-word expansion behind the environment-entropy route.

Usage:
    python test/test_channels.py
    pytest test/test_channels.py
"""

import os
import sys

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bec import BecParams, CommonBec, IndependentBec
from channels import LocalKrausEvolution, MaskEvolution, SuperopEvolution, apply_local_kraus
from damping import DampingParams, IndependentDamping, PseudomodeEvolution, damping_parameter, kraus_from_parameter
from dephasing import CommonDephasing, DephasingParams, IndependentDephasing
from quantum_core import DensityMatrix, random_density_matrix, trace_norm_stack

AD = DampingParams()
PD = DephasingParams()


def _joint_state(n_system: int, seed: int) -> DensityMatrix:
    """Random system + one-qubit-ancilla state."""
    rng = np.random.default_rng(seed)
    return DensityMatrix.from_array(random_density_matrix(2 ** (n_system + 1), rng))


def test_grid_validation():
    """Short, unsorted or negative grids and bad stacks are rejected"""
    print("\n🧪 Test 1: grid validation")
    good = np.linspace(0.0, 1.0, 5)
    kraus = kraus_from_parameter(damping_parameter(good, AD))
    for times in ([0.0, 1.0], [0.0, 2.0, 1.0], [-1.0, 0.0, 1.0]):
        try:
            LocalKrausEvolution("bad", 1, times, kraus[:len(times)], lambda t: kraus[0])
            assert False, f"Grid {times} should raise"
        except ValueError:
            pass
    try:
        LocalKrausEvolution("bad", 0, good, kraus, lambda t: kraus[0])
        assert False, "n_qubits=0 should raise"
    except ValueError:
        pass
    try:
        LocalKrausEvolution("bad", 1, good, kraus[:3], lambda t: kraus[0])
        assert False, "Kraus stack of the wrong length should raise"
    except ValueError:
        pass
    try:
        MaskEvolution("bad", 2, good, np.ones((5, 2, 2)), lambda t: np.ones((2, 2)))
        assert False, "Mask of the wrong dimension should raise"
    except ValueError:
        pass
    try:
        SuperopEvolution("bad", 1, good, np.zeros((4, 2, 2, 2, 2)), lambda t: np.zeros((2, 2, 2, 2)))
        assert False, "Superoperator stack of the wrong length should raise"
    except ValueError:
        pass
    print("   ✅ grid validation passed")


def test_chunked_evolution_matches_full():
    """Any chunk size reproduces the one-shot trajectory"""
    print("\n🧪 Test 2: chunked evolution")
    times = np.linspace(0.0, 20.0, 53)
    channel = IndependentDamping(AD, 2, times)
    rho = _joint_state(2, 3)
    full = channel.evolve_all(rho)
    assert full.shape == (53, 8, 8), f"Unexpected trajectory shape {full.shape}"
    pieces = np.empty_like(full)
    seen = 0
    for index, states in channel.evolve(rho, chunk=7):
        pieces[index] = states
        seen += states.shape[0]
    assert seen == 53, f"Chunks covered {seen} of 53 grid points"
    assert np.allclose(pieces, full, atol=1e-14), "Chunked evolution deviates"
    print("   ✅ chunked evolution passed")


def test_state_at_matches_grid():
    """Off-grid evaluation at a grid time returns the grid state"""
    print("\n🧪 Test 3: off-grid evaluation")
    times = np.linspace(0.0, 20.0, 41)
    channel = IndependentDamping(AD, 1, times)
    rho = _joint_state(1, 5)
    full = channel.evolve_all(rho)
    for k in (0, 13, 40):
        single = channel.state_at(rho, times[k])
        assert np.allclose(single, full[k], atol=1e-12), f"state_at deviates at grid index {k}"
    try:
        channel.state_at(np.eye(3) / 3, 1.0)
        assert False, "A 3x3 operator cannot carry a system qubit"
    except ValueError:
        pass
    print("   ✅ off-grid evaluation passed")


def test_kraus_words_reproduce_local_map():
    """Summing all 2^n Kraus words equals applying the local map qubit by qubit"""
    print("\n🧪 Test 4: Kraus words")
    times = np.linspace(0.0, 10.0, 11)
    channel = IndependentDamping(AD, 2, times)
    rho = _joint_state(2, 9)
    via_maps = channel.evolve_all(rho)

    words = channel.kraus_words(channel.kraus_on_grid(slice(None)))
    assert words.shape == (11, 4, 4, 4), f"Unexpected word stack {words.shape}"
    lifted = np.einsum("twij,kl->twikjl", words, np.eye(2)).reshape(11, 4, 8, 8)
    via_words = np.einsum("twij,jk,twlk->til", lifted, rho.entries, lifted.conj())
    assert np.allclose(via_words, via_maps, atol=1e-12), "Kraus-word sum deviates from the local map"
    print("   ✅ Kraus words passed")


def test_apply_local_kraus_matches_channel():
    """The one-off helper agrees with the channel at an off-grid time"""
    print("\n🧪 Test 5: apply_local_kraus")
    times = np.linspace(0.0, 10.0, 21)
    channel = IndependentDamping(AD, 2, times)
    rho = _joint_state(2, 12)
    t = 3.77
    by_helper = apply_local_kraus(rho, 2, channel.kraus_at(t)[0])
    assert np.allclose(by_helper.entries, channel.state_at(rho, t), atol=1e-12), "Helper deviates from channel"
    assert abs(np.trace(by_helper.entries) - 1.0) < 1e-12, "Trace must be preserved"
    print("   ✅ apply_local_kraus passed")


def test_ancilla_marginal_is_untouched():
    """The channel acts on the system factor only"""
    print("\n🧪 Test 6: ancilla marginal")
    times = np.linspace(0.0, 30.0, 31)
    channel = IndependentDamping(AD, 1, times)
    rho = _joint_state(1, 21).entries
    states = channel.evolve_all(rho)
    ancilla0 = np.einsum("iaib->ab", rho.reshape(2, 2, 2, 2))
    ancilla_t = np.einsum("tiaib->tab", states.reshape(-1, 2, 2, 2, 2))
    assert np.allclose(ancilla_t, ancilla0, atol=1e-13), "Ancilla marginal moved"
    assert channel.describe() == {"channel": "ad/independent", "n_qubits": 1, "horizon": 30.0, "samples": 31}, \
        f"Unexpected describe() {channel.describe()}"
    print("   ✅ ancilla marginal passed")


def _all_channels():
    bec = BecParams.from_lab_units()
    return [
        IndependentDephasing(PD, 1, np.linspace(0.0, 10.0, 21)),
        CommonDephasing(PD, np.linspace(0.0, 10.0, 21)),
        IndependentDamping(AD, 1, np.linspace(0.0, 30.0, 21)),
        PseudomodeEvolution(AD, np.linspace(0.0, 30.0, 21)),
        IndependentBec(bec, 1, np.linspace(0.0, 2e-5, 21)),
        CommonBec(bec, np.linspace(0.0, 2e-5, 21)),
    ]


def test_every_channel_is_cptp_and_contractive():
    """Choi states stay positive with unit trace, and trace distances never grow"""
    print("\n🧪 Test 7: complete positivity and contractivity")
    for channel in _all_channels():
        ds = channel.system_dim
        choi = np.eye(ds * ds)[:, np.arange(ds) * ds + np.arange(ds)].sum(axis=1) / np.sqrt(ds)
        states = channel.evolve_all(np.outer(choi, choi))
        lowest = float(np.min(np.linalg.eigvalsh(states)))
        assert lowest > -1e-10, f"[{channel.name}] Choi eigenvalue {lowest:.2e}"
        traces = np.abs(np.trace(states, axis1=1, axis2=2) - 1.0)
        assert float(np.max(traces)) < 1e-10, f"[{channel.name}] trace drifts by {np.max(traces):.2e}"

        rng = np.random.default_rng(59)
        worst = -np.inf
        for _ in range(200):
            delta = random_density_matrix(ds, rng) - random_density_matrix(ds, rng)
            start = 0.5 * float(trace_norm_stack(delta))
            distances = 0.5 * trace_norm_stack(channel.evolve_all(delta))
            worst = max(worst, float(np.max(distances)) - start)
        assert worst <= 1e-10, f"[{channel.name}] trace distance grew by {worst:.2e}"
    print("   ✅ CPTP and contractivity passed for all six channels")


def run_all_tests():
    """Run all tests"""
    print("=" * 80)
    print("🧪 Running Channel Engine Tests")
    print("=" * 80)

    tests = [
        test_grid_validation,
        test_chunked_evolution_matches_full,
        test_state_at_matches_grid,
        test_kraus_words_reproduce_local_map,
        test_apply_local_kraus_matches_channel,
        test_ancilla_marginal_is_untouched,
        test_every_channel_is_cptp_and_contractive,
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
