import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qamsdr.model import (ComplexInstance, Constellation, bits_to_symbols, complex_to_real, dec, dump_instance,
                          enumerate_symbols, generate_instance, levels, load_instance, noise_variance,
                          symbols_to_bits, va_weight_matrix)


def test_levels_and_energy():
    assert levels(2).tolist() == [-3, -1, 1, 3]
    assert levels(3).tolist() == [-7, -5, -3, -1, 1, 3, 5, 7]
    for q in range(1, 6):
        c = Constellation(q)
        assert c.per_dim_energy == pytest.approx(np.mean(c.levels ** 2))
    assert Constellation(2).symbol_energy == 10


def test_complex_to_real_identity_channel():
    ci = ComplexInstance(np.array([[1 + 0j]]), np.array([1 + 3j]), np.array([1 + 3j]), 2)
    inst = complex_to_real(ci)
    assert inst.h.tolist() == [[1, 0], [0, 1]]
    assert inst.s_true.tolist() == [1, 3]
    assert inst.y.tolist() == [1, 3]


def test_complex_to_real_rotation():
    # a zero imaginary part is not a QAM level, so use 1 + 1j
    ci = ComplexInstance(np.array([[1j]]), np.array([-1 + 1j]), np.array([1 + 1j]), 2)
    inst = complex_to_real(ci)
    assert inst.h.tolist() == [[0, -1], [1, 0]]
    assert (inst.h @ inst.s_true).tolist() == inst.y.tolist() == [-1, 1]


def test_complex_to_real_residual_and_norms():
    ci = generate_instance(2, 2, 2, 10.0, 7)
    inst = complex_to_real(ci)
    r_c = np.linalg.norm(ci.y_tilde - ci.h_tilde @ ci.s_tilde)
    assert np.linalg.norm(inst.y - inst.h @ inst.s_true) == pytest.approx(r_c, abs=1e-12)
    assert np.linalg.norm(inst.y) == pytest.approx(np.linalg.norm(ci.y_tilde))
    assert np.linalg.norm(inst.s_true) == pytest.approx(np.linalg.norm(ci.s_tilde))
    n, m = ci.n_tilde, ci.m_tilde
    assert np.array_equal(inst.h[:m, :n], inst.h[m:, n:])
    assert np.array_equal(inst.h[:m, n:], -inst.h[m:, :n])


def test_invalid_symbols_rejected():
    with pytest.raises(ValueError):
        ComplexInstance(np.eye(1), np.zeros(1), np.array([2 + 1j]), 2)


def test_generate_noiseless_and_deterministic():
    ci = generate_instance(3, 2, 2, np.inf, 1)
    assert np.array_equal(ci.y_tilde, ci.h_tilde @ ci.s_tilde)
    a, b = generate_instance(3, 2, 3, 12.0, 99), generate_instance(3, 2, 3, 12.0, 99)
    assert dump_instance(a) == dump_instance(b)


def test_noise_variance_empirical():
    sigma2 = noise_variance(2, 30.0)
    assert sigma2 == pytest.approx(10 / 1000)
    acc = 0.0
    draws = 10_000
    for k in range(draws):
        ci = generate_instance(2, 2, 2, 30.0, k)
        v = ci.y_tilde - ci.h_tilde @ ci.s_tilde
        acc += np.sum(np.abs(v) ** 2) / ci.m_tilde
    assert abs(acc / draws / sigma2 - 1) < 0.05


def test_dec_examples():
    assert dec([-1.2, 0.4], 2).tolist() == [-1, 1]
    assert dec([100], 2).tolist() == [3]
    assert dec([2.0], 2).tolist() == [1]
    assert dec([-2.0, 0.0, 4.0], 3).tolist() == [-1, 1, 3]


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-40, 40)), st.integers(1, 5))
def test_dec_idempotent_and_nearest(x, q):
    d = dec(x, q)
    assert np.array_equal(dec(d, q), d)
    lv = levels(q)
    dist = np.abs(x[:, None] - lv[None, :]).min(axis=1)
    assert np.allclose(np.abs(x - d), dist)


def test_weight_matrix():
    assert va_weight_matrix(1, 2).tolist() == [[1, 2]]
    assert np.array_equal(va_weight_matrix(2, 1), np.eye(2))
    assert va_weight_matrix(1, 3).tolist() == [[1, 2, 4]]


def test_bits_to_symbols_examples():
    assert bits_to_symbols([1, 1], 1, 2).tolist() == [3]
    assert bits_to_symbols([-1, 1], 1, 2).tolist() == [1]
    with pytest.raises(ValueError):
        bits_to_symbols([1, 1, 1], 1, 2)
    out = {bits_to_symbols(list(b), 1, 3)[0] for b in itertools.product([-1, 1], repeat=3)}
    assert out == set(levels(3).tolist())


@pytest.mark.parametrize("q", [1, 2, 3, 4])
@pytest.mark.parametrize("n", [1, 2])
def test_bit_round_trip_exhaustive(q, n):
    for s in enumerate_symbols(n, q):
        b = symbols_to_bits(s, q)
        assert set(np.unique(b)) <= {-1.0, 1.0}
        assert np.array_equal(bits_to_symbols(b, n, q), s)


def test_enumeration_order():
    e = enumerate_symbols(2, 1)
    assert e.tolist() == [[-1, -1], [-1, 1], [1, -1], [1, 1]]


def test_instance_file_round_trip():
    ci = generate_instance(3, 2, 2, 15.0, 4)
    back = load_instance(dump_instance(ci))
    assert np.array_equal(back.h_tilde, ci.h_tilde)
    assert np.array_equal(back.y_tilde, ci.y_tilde)
    assert np.array_equal(back.s_tilde, ci.s_tilde)
    assert back.noise_var == ci.noise_var


def test_instance_file_errors():
    with pytest.raises(json.JSONDecodeError) as e:
        load_instance('{\n "q": 2,\n oops}')
    assert e.value.lineno == 3
    d = json.loads(dump_instance(generate_instance(2, 2, 2, 10.0, 0)))
    d["m_tilde"] = 3
    with pytest.raises(ValueError):
        load_instance(json.dumps(d))
