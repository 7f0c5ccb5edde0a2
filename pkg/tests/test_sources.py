import numpy as np
import pytest

from mwphoton import sources
from mwphoton.sources import (
    KAPPA_MAX, SHAPES, Kappa, kappa_of_t, make_wavepacket,
)

_trapz = getattr(np, "trapezoid", None) or np.trapz


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("gamma_ph,t_ph", [(0.8, 4.0), (1.0, 0.0), (2.5, -1.0)])
def test_wavepacket_normalization(shape, gamma_ph, t_ph):
    wp = make_wavepacket(shape, gamma_ph, t_ph)
    t = np.linspace(wp.support[0], wp.support[1], 200001)
    norm = _trapz(np.abs(wp.xi(t)) ** 2, t)
    assert norm == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("shape", SHAPES)
def test_remaining_norm_matches_numerical_tail(shape):
    wp = make_wavepacket(shape, 1.3, 2.0)
    t = np.linspace(wp.support[0], wp.support[1], 400001)
    xi2 = np.abs(wp.xi(t)) ** 2
    # cumulative tail from the right
    dt = t[1] - t[0]
    tail = np.concatenate([((np.cumsum(xi2[::-1]) - 0.5 * xi2[::-1]) * dt)[::-1][1:], [0.0]])
    for frac in (0.1, 0.35, 0.6, 0.9):
        idx = int(frac * (len(t) - 1))
        assert wp.remaining_norm(t[idx]) == pytest.approx(tail[idx], abs=2e-4)


def test_wavepacket_zero_outside_support():
    wp = make_wavepacket("rising_exponential", 1.0, 0.0)
    assert wp.xi(0.5) == 0.0  # after the cutoff
    assert wp.xi(wp.support[0] - 1.0) == 0.0
    wp2 = make_wavepacket("decaying_exponential", 1.0, 0.0)
    assert wp2.xi(-0.5) == 0.0  # before emission starts


def test_rising_exponential_peaks_at_cutoff():
    wp = make_wavepacket("rising_exponential", 1.0, 3.0)
    t = np.linspace(-10, 3.0, 1000)
    xi = wp.xi(t)
    assert np.argmax(xi) == len(t) - 1
    # e^{gamma (t - tph)/2} sqrt(gamma) at t = tph
    assert xi[-1] == pytest.approx(1.0, abs=1e-12)


def test_make_wavepacket_rejects_bad_args():
    with pytest.raises(ValueError):
        make_wavepacket("square", 1.0, 0.0)
    with pytest.raises(ValueError):
        make_wavepacket("gaussian", -1.0, 0.0)


def test_kappa_emits_the_wavepacket_flux():
    """kappa(t) * remaining_norm(t) must equal the emitted flux |xi|^2.

    This is the defining property of the modulation: an initially full cavity
    with decay kappa(t) has photon flux kappa(t) n(t) with n(t) equal to the
    remaining norm.
    """
    for shape in SHAPES:
        wp = make_wavepacket(shape, 0.8, 4.0)
        kap = kappa_of_t(wp)
        t = np.linspace(wp.support[0], wp.support[1] - 1e-3, 997)
        flux = kap(t) * wp.remaining_norm(t)
        xi2 = np.abs(wp.xi(t)) ** 2
        keep = kap(t) < 0.99 * KAPPA_MAX  # skip the capped sliver
        np.testing.assert_allclose(flux[keep], xi2[keep], atol=1e-10)


def test_kappa_decaying_exponential_is_constant():
    # a decaying exponential comes from a cavity at fixed rate gamma_ph
    wp = make_wavepacket("decaying_exponential", 1.7, 0.0)
    kap = kappa_of_t(wp)
    t = np.linspace(0.05, 8.0, 50)
    np.testing.assert_allclose(kap(t), 1.7, rtol=1e-9)


def test_kappa_capped_and_zero_after_support():
    wp = make_wavepacket("rising_exponential", 1.0, 0.0)
    kap = kappa_of_t(wp)
    assert np.all(kap(np.linspace(-30, 5, 300)) <= KAPPA_MAX + 1e-9)
    # once the photon is gone the cavity is empty and the rate is off
    assert kap(1.0) == 0.0


def test_kappa_key_groups_equal_modulations():
    a = kappa_of_t(make_wavepacket("gaussian", 0.8, 4.0))
    b = kappa_of_t(make_wavepacket("gaussian", 0.8, 4.0))
    c = kappa_of_t(make_wavepacket("gaussian", 0.9, 4.0))
    assert a.key == b.key and a.key != c.key


def test_gaussian_xi_closed_form():
    wp = make_wavepacket("gaussian", 0.8, 4.0)
    t = np.array([3.0, 4.0, 5.5])
    want = (0.8 ** 2 / (2 * np.pi)) ** 0.25 * np.exp(-0.8 ** 2 * (t - 4.0) ** 2 / 4.0)
    np.testing.assert_allclose(wp.xi(t), want, rtol=1e-12)
