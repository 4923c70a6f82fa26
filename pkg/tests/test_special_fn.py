import math

import mpmath
import numpy as np
import pytest

from discevo import special_fn as sf


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.0, 10.0, 50.0, 300.0, 700.0])
def test_bessel_i_matches_mpmath(x):
    logs, sign = sf.log_bessel_i_array(200, x)
    for n in (0, 1, 5, 30, 100, 200):
        ref = mpmath.besseli(n, x)
        assert sign[n] == 1.0
        assert logs[n] == pytest.approx(float(mpmath.log(ref)), abs=1e-12 * max(1.0, abs(float(mpmath.log(ref)))))


@pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 10.0, 45.0])
def test_bessel_j_matches_mpmath(x):
    J = sf.bessel_j_array(80, x)
    for n in (0, 1, 2, 7, 40, 80):
        assert J[n] == pytest.approx(float(mpmath.besselj(n, x)), rel=1e-11, abs=1e-15)


def test_quoted_values():
    assert sf.bessel_i(0, 2.0) == pytest.approx(2.279585302336067, rel=1e-14)
    assert sf.bessel_i(1, 2.0) == pytest.approx(1.5906368546373291, rel=1e-14)
    assert sf.bessel_j(0, 1.0) == pytest.approx(0.7651976865579666, rel=1e-14)


@pytest.mark.parametrize("x", [0.5, 1, 2, 4, 10])
def test_generating_identities(x):
    I = sf.bessel_i_array(80, x)
    J = sf.bessel_j_array(80, x)
    assert abs(math.exp(x) - I[0] - 2 * math.fsum(I[1:])) <= 1e-12 * math.exp(x)
    assert abs(1 - J[0] - 2 * math.fsum(J[2::2])) <= 1e-12


def test_negative_argument_parity():
    Ip = sf.bessel_i_array(10, 3.0)
    Im = sf.bessel_i_array(10, -3.0)
    np.testing.assert_allclose(Im, Ip * (-1.0) ** np.arange(11), rtol=1e-15)
    Jp = sf.bessel_j_array(10, 3.0)
    Jm = sf.bessel_j_array(10, -3.0)
    np.testing.assert_allclose(Jm, Jp * (-1.0) ** np.arange(11), rtol=1e-15)


def test_zero_argument():
    assert sf.bessel_i(0, 0.0) == 1.0
    assert sf.bessel_i(3, 0.0) == 0.0
    logs, _ = sf.log_bessel_j_array(3, 0.0)
    assert logs[1] == -np.inf


def test_range_guard():
    with pytest.raises(OverflowError):
        sf.bessel_i(0, 701.0)
    with pytest.raises(ValueError):
        sf.bessel_i_array(-1, 1.0)


def test_deep_tail_stays_finite_in_log_domain():
    logs, _ = sf.log_bessel_i_array(400, 0.5)
    assert np.all(np.isfinite(logs))
    assert logs[400] < -2000


def test_series_oracles_agree_with_mpmath():
    assert sf.bessel_i_series(3, 2.0) == pytest.approx(float(mpmath.besseli(3, 2.0)), rel=1e-14)
    assert sf.bessel_j_series(2, -1.5) == pytest.approx(float(mpmath.besselj(2, -1.5)), rel=1e-13)


def test_envelopes():
    k = np.arange(1.0, 6.0)
    got = sf.log_envelope_values(k, 2.0, 0.5, eps=1.0, C=3.0)
    ref = np.log(3.0 * np.e ** k * 3.0 ** (-k) * k ** (-k) * 2.0 ** k * 0.5 ** k)
    np.testing.assert_allclose(got, ref, rtol=1e-13)
    q = np.arange(1.0, 6.0)
    ref = np.log(q ** -0.5 * (np.e * 1.5 / (2 * q)) ** q)
    np.testing.assert_allclose(sf.model_envelope_values(q, 1.5), ref, rtol=1e-13)
    assert sf.log_envelope(3, 1.0, 1.0).value == pytest.approx(math.exp(3 * (1 - math.log(2) - math.log(3))))
    with pytest.raises(ValueError):
        sf.log_envelope_values(0, 1.0, 1.0)


def test_log_magnitude_roundtrip():
    z = -2.5 + 1j
    lm = sf.LogMagnitude.from_value(z)
    assert lm.value == pytest.approx(z)
    assert sf.LogMagnitude.from_value(0).is_zero
