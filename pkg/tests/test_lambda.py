import numpy as np
import pytest
import scipy.constants

from mwphoton import sources
from mwphoton.lambda_scatter import (
    GEOMETRIES, LambdaConfig, efficiency_scan, scatter_efficiency,
    scatter_efficiency_pde_oracle, washboard_potential,
)

PHI0 = scipy.constants.physical_constants["mag. flux quantum"][0]


def long_photon():
    # quasi-monochromatic: bandwidth well below every linewidth in play
    return sources.make_wavepacket("gaussian", 0.05, 60.0)


def v_for_gamma_r(gamma_r, v_g=1.0):
    return np.sqrt(gamma_r * v_g / 2.0)


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def test_config_rates_and_validation():
    cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(3.0), v_g=1.0)
    assert cfg.gamma_r == pytest.approx(3.0)
    assert cfg.geometry in GEOMETRIES
    with pytest.raises(ValueError):
        LambdaConfig(gamma=-0.1, V=1.0)
    with pytest.raises(ValueError):
        LambdaConfig(gamma=1.0, V=1.0, geometry="ring")
    with pytest.raises(ValueError):
        LambdaConfig(gamma=1.0, V=1.0, v_g=0.0)


def test_trivial_configurations_scatter_nothing():
    wp = long_photon()
    off = LambdaConfig(gamma=1.0, V=0.0)
    assert scatter_efficiency(off, wp) == 0.0
    no_decay = LambdaConfig(gamma=0.0, V=0.7)
    assert scatter_efficiency(no_decay, wp) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# long-photon limits (quasi-static closed forms)
# ---------------------------------------------------------------------------

def test_open_line_long_photon_limit():
    """P_g -> 2 Gamma Gamma_r / (Gamma + Gamma_r)^2, maximum 1/2 at matching."""
    wp = long_photon()
    for gr in (0.5, 1.0, 2.0):
        cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(gr), geometry="open_line")
        want = 2.0 * gr / (1.0 + gr) ** 2
        assert scatter_efficiency(cfg, wp) == pytest.approx(want, abs=2e-3)


def test_mirror_long_photon_limit():
    """P_g -> 4 Gamma Gamma_r / (Gamma + Gamma_r)^2, reaching 1 at matching."""
    wp = long_photon()
    for gr in (0.5, 1.0, 3.0):
        cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(gr), geometry="mirror")
        want = 4.0 * gr / (1.0 + gr) ** 2
        assert scatter_efficiency(cfg, wp) == pytest.approx(want, abs=2e-3)


def test_detuned_long_photon_lorentzian():
    wp = long_photon()
    for det in (0.0, 0.5, 1.5):
        cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(1.0),
                           geometry="open_line", detuning=det)
        want = 0.5 / (det ** 2 + 1.0)  # Gamma(Gamma_r/2)/(Delta^2 + kappa^2/4)
        assert scatter_efficiency(cfg, wp) == pytest.approx(want, abs=3e-3)


def test_matching_is_the_optimum():
    wp = long_photon()
    vals = []
    for gr in (0.25, 1.0, 4.0):
        cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(gr), geometry="mirror")
        vals.append(scatter_efficiency(cfg, wp))
    assert vals[1] > vals[0] and vals[1] > vals[2]


def test_capture_curve_monotone_and_bounded():
    wp = sources.make_wavepacket("gaussian", 1.0, 3.0)
    cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(1.0), geometry="mirror")
    pg, ts, curve = scatter_efficiency(cfg, wp, return_curve=True)
    assert np.all(np.diff(curve) > -1e-12)
    assert 0.0 <= pg <= 1.0
    assert curve[-1] <= pg + 1e-9  # the tail estimate only adds mass


# ---------------------------------------------------------------------------
# field-resolved oracle
# ---------------------------------------------------------------------------

def test_reduced_ode_matches_field_pde():
    wp = sources.make_wavepacket("gaussian", 2.0, 1.5)
    for geometry in GEOMETRIES:
        cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(1.3), geometry=geometry)
        ode = scatter_efficiency(cfg, wp)
        pde = scatter_efficiency_pde_oracle(cfg, wp, nx=600)
        assert ode == pytest.approx(pde, rel=0.02), geometry


def test_pde_oracle_refuses_unresolved_grids():
    wp = sources.make_wavepacket("gaussian", 2.0, 1.5)
    cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(1.0), geometry="mirror")
    with pytest.raises(RuntimeError):
        scatter_efficiency_pde_oracle(cfg, wp, nx=16)


def test_pde_oracle_norm_bookkeeping():
    wp = sources.make_wavepacket("gaussian", 2.0, 1.5)
    cfg = LambdaConfig(gamma=1.0, V=v_for_gamma_r(1.0), geometry="open_line")
    _, details = scatter_efficiency_pde_oracle(cfg, wp, nx=400,
                                               return_details=True)
    assert np.max(np.abs(details["norm_error"])) < 1e-6


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

def test_efficiency_scan_finds_matched_coupling():
    wp = long_photon()
    cfg = LambdaConfig(gamma=1.0, V=0.1, geometry="mirror")
    res = efficiency_scan(cfg, wp, {"V": [v_for_gamma_r(g) for g in
                                          (0.25, 0.5, 1.0, 2.0, 4.0)]})
    assert res.table.shape == (5,)
    assert res.best_value == pytest.approx(1.0, abs=2e-3)
    assert res.best_point["V"] == pytest.approx(v_for_gamma_r(1.0))
    assert res.best_value == pytest.approx(res.table.max())


def test_open_line_scan_never_beats_one_half():
    wp = long_photon()
    cfg = LambdaConfig(gamma=1.0, V=0.1, geometry="open_line")
    res = efficiency_scan(cfg, wp, {
        "V": [v_for_gamma_r(g) for g in (0.5, 1.0, 2.0)],
        "detuning": [0.0, 0.4],
    })
    assert res.table.shape == (3, 2)
    assert res.best_value <= 0.52
    assert res.best_point["detuning"] == 0.0


def test_efficiency_scan_rejects_unknown_axes():
    wp = long_photon()
    cfg = LambdaConfig(gamma=1.0, V=0.5)
    with pytest.raises((KeyError, ValueError)):
        efficiency_scan(cfg, wp, {"coupling": [1.0]})


# ---------------------------------------------------------------------------
# junction potential
# ---------------------------------------------------------------------------

def test_washboard_shape_and_tilt():
    ic = 2.0e-6
    u0 = washboard_potential(0.0, ic, 0.0)
    assert u0 == pytest.approx(-ic * PHI0 / (2 * np.pi))
    # one full winding drops the potential by exactly 2 pi I_b
    ib = 0.3 * ic * PHI0 / (2 * np.pi)
    drop = washboard_potential(2 * np.pi, ic, ib) - washboard_potential(0.0, ic, ib)
    assert drop == pytest.approx(-2 * np.pi * ib)


def test_washboard_overtilt_removes_minima():
    ic = 1.0e-6
    crit = ic * PHI0 / (2 * np.pi)
    delta = np.linspace(-8.0, 8.0, 4001)
    tilted = washboard_potential(delta, ic, 1.05 * crit)
    assert np.all(np.diff(tilted) < 0.0)
    trapped = washboard_potential(delta, ic, 0.5 * crit)
    assert np.any(np.diff(trapped) > 0.0)


def test_washboard_validates_and_broadcasts():
    with pytest.raises(ValueError):
        washboard_potential(0.0, -1.0, 0.0)
    vals = washboard_potential(np.array([0.0, np.pi]), 1.0, 0.0)
    assert vals.shape == (2,)
    assert vals[1] > vals[0]
