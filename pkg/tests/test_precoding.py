import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mbhts.errors import InvalidConfigurationError, SingularChannelError
from mbhts.precoding import (coupling_matrix, make_precoder, normalize_columns,
                             read_coupling_csv, rzf_precoder, write_coupling_csv, zf_precoder)


def random_channel(seed, N=7, K=7):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(N, K)) + 1j * rng.normal(size=(N, K))


def test_zf_orthogonal_columns_are_matched_filters():
    H = np.diag([2.0, 0.5, 3.0]).astype(complex)
    W = zf_precoder(H).W
    assert np.allclose(W, np.eye(3))


@pytest.mark.parametrize("seed", range(5))
def test_zf_nulls_interference(seed):
    H = random_channel(seed)
    mu = coupling_matrix(H, zf_precoder(H))
    leak = (mu - np.diag(np.diag(mu))) / np.diag(mu)[:, None]
    assert leak.max() <= 1e-10


def test_zf_hand_inverse_2x2():
    H = np.array([[1.0, 0.5], [0.0, 1.0]])
    # Gram [[1, .5], [.5, 1.25]] has determinant 1, inverse [[1.25, -.5], [-.5, 1]]
    W_raw = H @ np.array([[1.25, -0.5], [-0.5, 1.0]])
    assert np.allclose(W_raw, [[1.0, 0.0], [-0.5, 1.0]])
    assert H[:, 0] @ W_raw[:, 1] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(zf_precoder(H).W, normalize_columns(W_raw))


def test_zf_rank_deficient_raises():
    H = np.ones((4, 2), dtype=complex)
    with pytest.raises(SingularChannelError) as info:
        zf_precoder(H)
    assert info.value.condition_number > 1e12


@pytest.mark.parametrize("method", ["zf", "rzf"])
def test_unit_norm_columns(method):
    W = make_precoder(method, random_channel(3), 1.0, 217.3).W
    assert np.allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-12)


def test_rzf_tends_to_zf():
    H = random_channel(7)
    W_zf = zf_precoder(H).W
    W_rzf = rzf_precoder(H, 1.0, 1e12).W
    overlap = np.abs(np.sum(W_zf.conj() * W_rzf, axis=0))
    assert np.allclose(overlap, 1.0, atol=1e-6)


def test_rzf_single_user_is_matched_filter():
    h = random_channel(1, N=4, K=1)
    W = rzf_precoder(h, 1.0, 10.0).W
    assert np.allclose(W[:, 0], h[:, 0] / np.linalg.norm(h))


def test_rzf_regularizer_value():
    # Loading K*sigma^2/Pmax with the default budget.
    assert 7 * 1.0 / 217.3 == pytest.approx(0.03222, abs=1e-5)
    H = random_channel(2)
    gram = H.conj().T @ H + (7 / 217.3) * np.eye(7)
    expected = normalize_columns(H @ np.linalg.inv(gram))
    assert np.allclose(rzf_precoder(H, 1.0, 217.3).W, expected)


def test_rzf_rejects_bad_budget():
    with pytest.raises(InvalidConfigurationError):
        rzf_precoder(random_channel(0), 1.0, 0.0)


def test_unknown_method():
    with pytest.raises(InvalidConfigurationError):
        make_precoder("mmse", random_channel(0))


def test_coupling_orthogonal_is_zero():
    H = np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex)
    W = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    mu = coupling_matrix(H, W)
    assert mu[0, 0] == 0.0 and mu[1, 1] == 0.0


def test_coupling_matched_filter_gives_norm_squared():
    h = random_channel(4, N=5, K=1)
    mu = coupling_matrix(h, h / np.linalg.norm(h))
    assert mu[0, 0] == pytest.approx(np.linalg.norm(h) ** 2, rel=1e-12)


def test_coupling_against_explicit_real_arithmetic():
    H = random_channel(5, N=3, K=3)
    W = random_channel(6, N=3, K=3)
    mu = coupling_matrix(H, W)
    for k in range(3):
        for l in range(3):
            re = sum(H[n, k].real * W[n, l].real + H[n, k].imag * W[n, l].imag for n in range(3))
            im = sum(H[n, k].real * W[n, l].imag - H[n, k].imag * W[n, l].real for n in range(3))
            assert mu[k, l] == pytest.approx(re * re + im * im, rel=1e-12)


def test_coupling_shape_mismatch():
    with pytest.raises(InvalidConfigurationError):
        coupling_matrix(np.ones((3, 2)), np.ones((3, 3)))


@given(arrays(np.float64, (4, 3), elements=st.floats(0.1, 10)))
def test_normalization_idempotent(W):
    once = normalize_columns(W)
    assert np.allclose(normalize_columns(once), once, atol=1e-15)


@given(st.floats(0, 2 * np.pi), st.integers(0, 1000), st.sampled_from(["zf", "rzf"]))
def test_coupling_invariant_to_global_phase(theta, seed, method):
    H = random_channel(seed, N=4, K=3)
    mu = coupling_matrix(H, make_precoder(method, H, 1.0, 50.0))
    H2 = H * np.exp(1j * theta)
    mu2 = coupling_matrix(H2, make_precoder(method, H2, 1.0, 50.0))
    assert np.allclose(mu, mu2, rtol=1e-9, atol=1e-12 * mu.max())


def test_coupling_csv_round_trip(tmp_path):
    H = random_channel(8)
    mu = coupling_matrix(H, rzf_precoder(H, 1.0, 217.3))
    path = tmp_path / "mu.csv"
    write_coupling_csv(mu, path)
    assert np.array_equal(read_coupling_csv(path), mu)


def test_coupling_csv_missing_entry(tmp_path):
    path = tmp_path / "mu.csv"
    path.write_text("k,l,mu\n0,0,1.0\n1,1,1.0\n0,1,0.1\n")
    with pytest.raises(InvalidConfigurationError):
        read_coupling_csv(path)
