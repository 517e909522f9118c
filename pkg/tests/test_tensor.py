import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotsig.free_lie import LogCoordinates, build_hall_basis, log_coords_to_tensor, tensor_to_log_coords
from carnotsig.tensor import (
    TruncatedTensor,
    tensor_exp,
    tensor_inverse,
    tensor_log,
    tensor_mul,
    tensor_word_coeff,
    word_index,
)

from conftest import dict_exp, dict_log, dict_mul, dict_to_tensor, random_tensor, word_dict


def e(i, d=2, N=2):
    return TruncatedTensor.letter(i, d, N)


def one(d=2, N=2):
    return TruncatedTensor.unit(d, N)


def test_product_of_one_letter_elements():
    got = tensor_mul(one() + e(1), one() + e(2))
    want = TruncatedTensor.from_words({(): 1, (1,): 1, (2,): 1, (1, 2): 1}, 2, 2)
    assert got.allclose(want, atol=0)


@pytest.mark.parametrize("d,N", [(2, 3), (3, 2), (2, 5)])
def test_product_matches_word_convolution(rng, d, N):
    a, b = random_tensor(rng, d, N), random_tensor(rng, d, N)
    want = dict_to_tensor(dict_mul(word_dict(a), word_dict(b), N), d, N)
    assert tensor_mul(a, b).allclose(want, atol=1e-13)


def test_unit_is_neutral(rng):
    a = random_tensor(rng, 3, 3)
    assert tensor_mul(a, one(3, 3)).allclose(a, atol=0)
    assert tensor_mul(one(3, 3), a).allclose(a, atol=0)


@pytest.mark.parametrize("d,N", [(2, 4), (3, 3)])
def test_associativity_against_triple_convolution(rng, d, N):
    a, b, c = (random_tensor(rng, d, N) for _ in range(3))
    left = tensor_mul(tensor_mul(a, b), c)
    right = tensor_mul(a, tensor_mul(b, c))
    oracle = dict_to_tensor(dict_mul(dict_mul(word_dict(a), word_dict(b), N), word_dict(c), N), d, N)
    assert left.allclose(right, atol=1e-12)
    assert left.allclose(oracle, atol=1e-12)


def test_mismatched_shapes_raise():
    with pytest.raises(ValueError):
        tensor_mul(one(2, 2), one(2, 3))
    with pytest.raises(ValueError):
        tensor_mul(one(2, 2), one(3, 2))


def test_exp_single_letter():
    want = TruncatedTensor.from_words({(): 1, (1,): 1, (1, 1): 0.5}, 2, 2)
    assert tensor_exp(e(1)).allclose(want, atol=0)
    assert tensor_exp(TruncatedTensor.zero(2, 2)).allclose(one(), atol=0)


def test_exp_matches_series_oracle():
    z = e(1, 2, 3) + e(2, 2, 3)
    want = dict_to_tensor(dict_exp(word_dict(z), 3), 2, 3)
    assert tensor_exp(z).allclose(want, atol=1e-14)


def test_exp_rejects_scalar_part():
    with pytest.raises(ValueError):
        tensor_exp(one())


def test_log_mercator_series():
    got = tensor_log(one(2, 3) + e(1, 2, 3))
    want = TruncatedTensor.from_words({(1,): 1, (1, 1): -0.5, (1, 1, 1): 1 / 3}, 2, 3)
    assert got.allclose(want, atol=1e-15)
    assert tensor_log(one()).allclose(TruncatedTensor.zero(2, 2), atol=0)


def test_log_matches_series_oracle(rng):
    x = random_tensor(rng, 2, 4, scalar=1.0)
    want = dict_to_tensor(dict_log(word_dict(x), 4), 2, 4)
    assert tensor_log(x).allclose(want, atol=1e-12)


def test_log_rejects_non_unit_scalar():
    with pytest.raises(ValueError):
        tensor_log(TruncatedTensor.zero(2, 2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 3), N=st.integers(1, 4))
def test_exp_log_inverse_pair(seed, d, N):
    rng = np.random.default_rng(seed)
    z = random_tensor(rng, d, N, scalar=0.0)
    assert tensor_log(tensor_exp(z)).allclose(z, atol=1e-12)
    x = random_tensor(rng, d, N, scalar=1.0)
    assert tensor_exp(tensor_log(x)).allclose(x, atol=1e-12)


def test_inverse(rng):
    assert tensor_inverse(one()).allclose(one(), atol=0)
    assert tensor_inverse(tensor_exp(e(1))).allclose(tensor_exp(-e(1)), atol=1e-15)
    for _ in range(10):
        x = tensor_exp(random_tensor(rng, 3, 3, scalar=0.0))
        y = tensor_inverse(x)
        assert tensor_mul(x, y).allclose(one(3, 3), atol=1e-12)
        assert tensor_mul(y, x).allclose(one(3, 3), atol=1e-12)


def test_word_coefficients_of_two_segment_product():
    x = tensor_mul(tensor_exp(e(1)), tensor_exp(e(2)))
    assert tensor_word_coeff(one(), ()) == 1.0
    assert tensor_word_coeff(x, (1, 2)) == 1.0
    assert tensor_word_coeff(x, (2, 1)) == 0.0


def test_word_coefficient_errors():
    with pytest.raises(ValueError):
        tensor_word_coeff(one(), (1, 2, 1))
    with pytest.raises(ValueError):
        tensor_word_coeff(one(), (3,))
    assert word_index((2, 1), 2) == 2


def test_log_of_grouplike_product_is_lie(rng):
    basis = build_hall_basis(2, 4)
    for _ in range(10):
        x = tensor_exp(log_coords_to_tensor(LogCoordinates(basis, rng.uniform(-1, 1, basis.n))))
        y = tensor_exp(log_coords_to_tensor(LogCoordinates(basis, rng.uniform(-1, 1, basis.n))))
        z = tensor_log(tensor_mul(x, y))
        back = log_coords_to_tensor(tensor_to_log_coords(z, basis))
        assert back.allclose(z, atol=1e-10)


def test_invalid_construction():
    with pytest.raises(ValueError):
        TruncatedTensor(2, 2, (np.ones(1), np.ones(2)))
    with pytest.raises(ValueError):
        TruncatedTensor(2, 1, (np.ones(1), np.array([np.nan, 0.0])))
