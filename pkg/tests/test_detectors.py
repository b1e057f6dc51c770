import numpy as np
import pytest

from conftest import real_instance
from qamsdr import detectors as det
from qamsdr.model import Instance, symbols_to_bits
from qamsdr.relaxations import SdrPoint, build, extract_point


def test_simple_rounding():
    inst = real_instance(2, 1, 2, 10.0, 0)
    d = det.simple_rounding(SdrPoint(np.eye(2), inst.s_true), inst)
    assert np.array_equal(d.s_hat, inst.s_true)
    d = det.simple_rounding(SdrPoint(np.eye(2), np.array([2.9, -1.1])), inst)
    assert d.s_hat.tolist() == [3, -1]
    assert d.objective == pytest.approx(inst.ml_objective(d.s_hat))


def test_noiseless_bc_end_to_end():
    inst = real_instance(4, 3, 2, np.inf, 5)
    relax = build("bc", inst)
    d = det.simple_rounding(extract_point(relax.solve(), relax), inst)
    assert np.array_equal(d.s_hat, inst.s_true)


def test_va_rounding_i():
    inst = real_instance(2, 2, 3, 10.0, 1)
    assert np.array_equal(det.va_rounding_i(symbols_to_bits(inst.s_true, 3), inst).s_hat, inst.s_true)
    one = Instance(np.eye(1), np.zeros(1), np.ones(1), 2)
    assert det.va_rounding_i([0.1, -0.2], one).s_hat.tolist() == [-1]
    assert det.va_rounding_i([0.0, 0.0], one).s_hat.tolist() == [3]


def test_va_rounding_ii():
    inst = real_instance(2, 2, 2, 10.0, 2)
    assert np.array_equal(det.va_rounding_ii(symbols_to_bits(inst.s_true, 2), inst).s_hat, inst.s_true)
    one = Instance(np.eye(1), np.zeros(1), np.ones(1), 2)
    assert det.va_rounding_ii([0.4, 0.9], one).s_hat.tolist() == [3]
    with pytest.raises(ValueError):
        det.va_rounding_ii([0.4], one)


@pytest.mark.parametrize("seed", range(3))
def test_va_rounding_ii_matches_simple_rounding_of_extracted_point(seed):
    inst = real_instance(3, 3, 2, 8.0, seed)
    relax = build("va", inst)
    pt = extract_point(relax.solve(), relax)
    assert np.array_equal(det.va_rounding_ii(pt.aux.b_vec, inst).s_hat, det.simple_rounding(pt, inst).s_hat)


def test_randomized_rounding_degenerate_cases():
    inst = real_instance(3, 2, 2, 10.0, 3)
    s = np.array([0.7, -2.2, 1.4, 3.3])
    pt = SdrPoint(np.outer(s, s), s)
    assert np.array_equal(det.gaussian_randomized_rounding(pt, inst, 50, seed=1).s_hat, det.dec(s, 2))
    pt = SdrPoint(np.outer(s, s) + np.eye(4), s)
    assert np.array_equal(det.gaussian_randomized_rounding(pt, inst, 0, seed=1).s_hat, det.dec(s, 2))
    with pytest.raises(ValueError):
        det.gaussian_randomized_rounding(SdrPoint(np.outer(s, s) - np.eye(4), s), inst, 10, seed=0)


def test_randomized_rounding_deterministic_and_no_worse():
    for seed in range(5):
        inst = real_instance(3, 3, 2, 5.0, 50 + seed)
        relax = build("bc", inst)
        pt = extract_point(relax.solve(), relax)
        a = det.gaussian_randomized_rounding(pt, inst, 100, seed=seed)
        b = det.gaussian_randomized_rounding(pt, inst, 100, seed=seed)
        assert np.array_equal(a.s_hat, b.s_hat)
        assert a.objective <= det.simple_rounding(pt, inst).objective


def test_zf():
    inst = Instance(np.eye(2), np.array([2.6, -0.4]), np.array([3.0, -1.0]), 2)
    assert det.zf_detect(inst).s_hat.tolist() == [3, -1]
    noiseless = real_instance(3, 2, 3, np.inf, 4)
    assert np.array_equal(det.zf_detect(noiseless).s_hat, noiseless.s_true)
    with pytest.raises(det.RankDeficient):
        det.zf_detect(Instance(np.ones((2, 2)), np.zeros(2), np.ones(2), 2))


def test_ml_exhaustive_examples():
    inst = Instance(np.eye(2), np.array([2.6, -0.4]), np.array([3.0, -1.0]), 2)
    assert det.ml_exhaustive(inst).s_hat.tolist() == [3, -1]
    noiseless = real_instance(2, 2, 2, np.inf, 9)
    d = det.ml_exhaustive(noiseless)
    assert np.array_equal(d.s_hat, noiseless.s_true) and d.objective == pytest.approx(0.0, abs=1e-20)
    with pytest.raises(det.EnumerationTooLarge):
        det.ml_exhaustive(real_instance(4, 4, 3, 10.0, 0))


def test_ml_ties_lexicographic():
    # a zero channel makes every candidate tie
    inst = Instance(np.zeros((2, 2)), np.zeros(2), np.ones(2), 2)
    assert det.ml_exhaustive(inst).s_hat.tolist() == [-3, -3]


def test_ml_chunked_matches_single_pass():
    inst = real_instance(2, 2, 2, 10.0, 6)
    assert np.array_equal(det.ml_exhaustive(inst, chunk=7).s_hat, det.ml_exhaustive(inst).s_hat)


@pytest.mark.parametrize("m,n,q,seed", [(2, 2, 2, 0), (4, 4, 2, 1), (2, 2, 3, 2), (3, 2, 3, 3), (4, 4, 2, 4)])
def test_sphere_decoder_matches_enumeration(m, n, q, seed):
    inst = real_instance(m, n, q, 8.0, seed)
    a, b = det.ml_exhaustive(inst), det.sphere_decode(inst)
    assert np.array_equal(a.s_hat, b.s_hat)
    assert a.objective == pytest.approx(b.objective)


def test_sphere_decoder_tiny_radius_falls_back():
    inst = real_instance(2, 2, 2, 5.0, 0)
    d = det.sphere_decode(inst, radius2=1e-30)
    assert d.method == "zf"


def test_symbol_error_count():
    s = np.array([1.0, 3.0, -1.0, -3.0])
    assert det.symbol_error_count(s, s) == (0, 0)
    t = s.copy()
    t[0] = -1
    assert det.symbol_error_count(t, s) == (1, 1)
    t[2] = 1
    assert det.symbol_error_count(t, s) == (1, 1)
    t[1] = 1
    assert det.symbol_error_count(t, s) == (2, 1)
    with pytest.raises(ValueError):
        det.symbol_error_count(s[:3], s[:3])


def test_ml_dominates_all_detectors():
    for seed in range(4):
        inst = real_instance(3, 3, 2, 4.0, 70 + seed)
        ml = det.ml_exhaustive(inst).objective
        relax = build("bc", inst)
        sol = relax.solve()
        pt = extract_point(sol, relax)
        assert sol.objective <= ml + 1e-7 * (1 + ml)
        for d in (det.simple_rounding(pt, inst), det.zf_detect(inst),
                  det.gaussian_randomized_rounding(pt, inst, 20, seed=0)):
            assert ml <= d.objective + 1e-12
