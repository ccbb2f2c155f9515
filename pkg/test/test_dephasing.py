"""
Pure dephasing tests: closed-form decoherence exponent for s = 3, Kraus
completeness, the common-bath propagator structure and the horizon drift.

Usage:
    python test/test_dephasing.py
    pytest test/test_dephasing.py
"""

import logging
import math
import os
import sys

import numpy as np

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from dephasing import (
    STATIONARY_TOL,
    CommonDephasing,
    DephasingParams,
    IndependentDephasing,
    collective_sz_eigenvalues,
    common_dephasing_mask,
    decoherence_exponent,
    dephasing_factor,
    dephasing_rate,
    kraus_from_factor,
    pd_apply_common,
    pd_apply_independent,
)
from quantum_core import KET_PLUS, DensityMatrix, PureState, random_density_matrix, tensor


def exponent_s3(t: float, p: DephasingParams) -> float:
    """Lambda(t) for s = 3 in closed form."""
    x2 = (p.omega_c * t) ** 2
    return p.eta * (1.0 - (1.0 - x2) / (1.0 + x2) ** 2)


def test_exponent_closed_form():
    """Quadrature of gamma matches the s = 3 closed form"""
    print("\n🧪 Test 1: decoherence exponent for s = 3")
    for p in (DephasingParams(), DephasingParams(eta=1.0, omega_c=2.0)):
        for t in (0.0, 0.3, 1.0, math.sqrt(3.0) / p.omega_c, 7.5, 40.0):
            got = decoherence_exponent(t, p)
            assert abs(got - exponent_s3(t, p)) < 1e-9, f"{p} t={t}: {got} vs {exponent_s3(t, p)}"
    # maximum 9 eta / 8 at omega_c t = sqrt(3), where the rate changes sign
    p = DephasingParams()
    t_peak = math.sqrt(3.0)
    assert abs(decoherence_exponent(t_peak, p) - 9.0 * p.eta / 8.0) < 1e-9, "Peak of Lambda must be 9 eta / 8"
    assert abs(dephasing_rate(t_peak, p)) < 1e-12, "Rate must vanish at the peak"
    assert dephasing_rate(t_peak + 0.1, p) < 0, "Rate must turn negative past the peak"
    print("   ✅ closed form passed")


def test_rate_validation():
    """Negative times and non-positive parameters are rejected"""
    print("\n🧪 Test 2: argument validation")
    try:
        dephasing_rate(-1.0, DephasingParams())
        assert False, "Negative t should raise"
    except ValueError:
        pass
    for kwargs in ({"s": 0.0}, {"eta": -1.0}, {"omega_c": 0.0}):
        try:
            DephasingParams(**kwargs)
            assert False, f"DephasingParams({kwargs}) should raise"
        except ValueError:
            pass
    rates = dephasing_rate(np.array([0.0, 1.0, 2.0]), DephasingParams())
    assert rates.shape == (3,) and rates[0] == 0.0, "Vectorized rate must keep shape and vanish at 0"
    print("   ✅ validation passed")


def test_kraus_completeness():
    """sum K^dag K = I for every coherence factor"""
    print("\n🧪 Test 3: Kraus completeness")
    r = np.linspace(0.0, 1.0, 11)
    kraus = kraus_from_factor(r)
    completeness = np.einsum("tmki,tmkj->tij", kraus.conj(), kraus)
    assert np.allclose(completeness, np.eye(2), atol=1e-14), "Dephasing Kraus set is not complete"
    print("   ✅ completeness passed")


def test_independent_channel_factors():
    """Grid factors equal exp(-Lambda) and the coherence of |+> follows them"""
    print("\n🧪 Test 4: independent dephasing channel")
    p = DephasingParams()
    times = np.linspace(0.0, 40.0, 801)
    channel = IndependentDephasing(p, 1, times)
    expected = np.exp(-np.array([exponent_s3(t, p) for t in times]))
    assert np.max(np.abs(channel.factors - expected)) < 1e-9, "Grid factors deviate from closed form"

    plus = PureState.from_vector(KET_PLUS).density()
    states = channel.evolve_all(plus)
    assert np.allclose(np.abs(states[:, 0, 1]), 0.5 * expected, atol=1e-9), "Coherence must scale by r(t)"
    assert np.allclose(states[:, 0, 0].real, 0.5, atol=1e-14), "Populations must be conserved"

    off_grid = pd_apply_independent(plus, 1, 3.3, p)
    assert abs(off_grid.entries[0, 1] - 0.5 * math.exp(-exponent_s3(3.3, p))) < 1e-9, "Off-grid map deviates"
    print("   ✅ independent channel passed")


def test_common_mask_structure():
    """Decoherence-free element is invariant; the extreme element scales as r^4"""
    print("\n🧪 Test 5: common-bath propagator")
    assert collective_sz_eigenvalues(2).tolist() == [-2, 0, 0, 2], "Collective sigma_z spectrum is wrong"
    r = np.array([1.0, 0.8, 0.35, 0.01])
    mask = common_dephasing_mask(r)
    assert np.allclose(mask[:, 1, 2], 1.0, atol=1e-10), "DFS element must be invariant"
    assert np.allclose(mask[:, 0, 3], r ** 4, atol=1e-8), "Delta mu = 4 element must scale as r^4"
    assert np.allclose(mask[:, 0, 1], r, atol=1e-14), "Delta mu = 2 element must scale as r"
    assert np.allclose(np.diagonal(mask, axis1=1, axis2=2), 1.0), "Populations must be conserved"
    print("   ✅ common mask passed")


def test_common_channel_keeps_states_physical():
    """Common dephasing of a random two-qubit state (with ancilla) stays a density matrix"""
    print("\n🧪 Test 6: common dephasing on joint states")
    p = DephasingParams()
    times = np.linspace(0.0, 10.0, 201)
    channel = CommonDephasing(p, times)
    rng = np.random.default_rng(8)
    joint = DensityMatrix.from_array(random_density_matrix(8, rng))
    for _, states in channel.evolve(joint):
        for state in states:
            DensityMatrix.from_array(state, (2, 2, 2))  # raises on any violated invariant

    single = tensor(PureState.from_vector(KET_PLUS).density(), PureState.from_vector(KET_PLUS).density())
    out = pd_apply_common(single, 2.0, p)
    r = dephasing_factor(2.0, p)
    assert abs(out.entries[0, 3] - 0.25 * r ** 4) < 1e-9, "pd_apply_common deviates from the mask"
    assert abs(out.entries[1, 2] - 0.25) < 1e-12, "pd_apply_common must leave the DFS element alone"
    print("   ✅ common channel passed")


def test_horizon_drift_is_small():
    """Lambda(40) differs from Lambda(20) only at the 1e-3 level"""
    print("\n🧪 Test 7: horizon drift")
    p = DephasingParams()
    drift = abs(exponent_s3(40.0, p) - exponent_s3(20.0, p))
    assert 1e-3 < drift < 1e-2, f"Unexpected drift {drift}"
    print(f"   ✅ drift {drift:.2e} passed")


class _RecordingHandler(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


def test_short_horizon_logs_stationarity_warning():
    """A horizon where Lambda(T) - Lambda(T/2) is still large reports the drift and logs a warning"""
    print("\n🧪 Test 8: stationarity warning")
    p = DephasingParams()
    handler = _RecordingHandler()
    root = logging.getLogger()
    root.addHandler(handler)
    previous = root.level
    root.setLevel(logging.WARNING)
    try:
        short = IndependentDephasing(p, 1, np.linspace(0.0, 5.0, 101))
        expected = abs(exponent_s3(5.0, p) - exponent_s3(2.5, p))
        assert abs(short.lambda_drift - expected) < 1e-8, f"drift {short.lambda_drift}, expected {expected}"
        assert expected > STATIONARY_TOL, "T = 5 must be far from stationary"
        assert any("not stationary" in m for m in handler.messages), f"No warning logged: {handler.messages}"

        handler.messages.clear()
        default = CommonDephasing(p, np.linspace(0.0, p.default_horizon(), 801))
        expected = abs(exponent_s3(40.0, p) - exponent_s3(20.0, p))
        assert abs(default.lambda_drift - expected) < 1e-8, f"drift {default.lambda_drift}, expected {expected}"
        assert any("not stationary" in m for m in handler.messages), "Default horizon drift must be reported"
    finally:
        root.removeHandler(handler)
        root.setLevel(previous)
    print(f"   ✅ stationarity warning passed (default drift {default.lambda_drift:.2e})")


def run_all_tests():
    """Run all tests"""
    print("=" * 80)
    print("🧪 Running Dephasing Tests")
    print("=" * 80)

    tests = [
        test_exponent_closed_form,
        test_rate_validation,
        test_kraus_completeness,
        test_independent_channel_factors,
        test_common_mask_structure,
        test_common_channel_keeps_states_physical,
        test_horizon_drift_is_small,
        test_short_horizon_logs_stationarity_warning,
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
