"""Single-photon temporal wavepackets and the tunable source-cavity decay rate.

The control photon is modeled as the output of a small source cavity whose
decay rate ``kappa(t)`` is modulated so the emitted field has a prescribed
temporal amplitude ``xi(t)`` with ``int |xi|^2 dt = 1``.  The modulation is
read as an amplitude relation (the only dimensionally consistent form),

    sqrt(kappa(t)) = |xi(t)| / sqrt(int_t^inf |xi(s)|^2 ds),

which reproduces the constant-rate identity kappa = Gamma for the decaying
exponential xi(t) = sqrt(Gamma) e^{-Gamma t/2} Theta(t).  The remaining-norm
integral is evaluated in closed form for every built-in shape.

All rates are in units of the reference relaxation rate Gamma01; times in
units of 1/Gamma01.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

GAUSSIAN = "gaussian"
RISING_EXPONENTIAL = "rising_exponential"
DECAYING_EXPONENTIAL = "decaying_exponential"
SHAPES = (GAUSSIAN, RISING_EXPONENTIAL, DECAYING_EXPONENTIAL)

# Cap on the modulated decay rate once the remaining norm underflows.  Past
# the support the emission amplitude is identically zero, so the cap only
# matters in the last sliver of a rising exponential where kappa ~ 1/(T-t).
KAPPA_MAX = 1.0e4
NORM_FLOOR = 1.0e-12


def gaussian_xi(gamma_ph: float, t_ph: float):
    """Gaussian amplitude xi(t) = (G^2/2pi)^{1/4} exp(-G^2 (t-T)^2 / 4)."""
    if gamma_ph <= 0:
        raise ValueError("gamma_ph must be positive")
    peak = (gamma_ph**2 / (2.0 * np.pi)) ** 0.25

    def xi(t):
        t = np.asarray(t, dtype=float)
        return peak * np.exp(-(gamma_ph**2) * (t - t_ph) ** 2 / 4.0)

    return xi


def rising_exponential_xi(gamma_ph: float, t_ph: float):
    """Rising exponential truncated at its peak.

    xi(t) = sqrt(G) e^{G (t - T)/2} for t <= T, zero afterwards.  The
    growing-exponent form is only normalizable with this truncation; the
    analytic integral of |xi|^2 over t <= T is exactly 1.
    """
    if gamma_ph <= 0:
        raise ValueError("gamma_ph must be positive")
    root = np.sqrt(gamma_ph)

    def xi(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore"):
            val = root * np.exp(gamma_ph * (t - t_ph) / 2.0)
        return np.where(t <= t_ph, val, 0.0)

    return xi


def decaying_exponential_xi(gamma_ph: float, t_ph: float):
    """Decaying exponential xi(t) = sqrt(G) e^{-G (t - T)/2} Theta(t - T)."""
    if gamma_ph <= 0:
        raise ValueError("gamma_ph must be positive")
    root = np.sqrt(gamma_ph)

    def xi(t):
        t = np.asarray(t, dtype=float)
        val = root * np.exp(-gamma_ph * (t - t_ph) / 2.0)
        return np.where(t >= t_ph, val, 0.0)

    return xi


_XI_FACTORIES = {
    GAUSSIAN: gaussian_xi,
    RISING_EXPONENTIAL: rising_exponential_xi,
    DECAYING_EXPONENTIAL: decaying_exponential_xi,
}


@dataclass(frozen=True)
class Wavepacket:
    """A normalized single-photon temporal mode.

    ``support`` is the finite window used for numerical integration; the
    truncated mass outside it is below 1e-8 for every built-in shape, so the
    normalization invariant int |xi|^2 dt = 1 holds within 1e-6 over the
    declared support.
    """

    shape: str
    gamma_ph: float
    t_ph: float
    support: tuple

    def xi(self, t):
        """Amplitude, clipped to zero outside the declared support."""
        t = np.asarray(t, dtype=float)
        raw = _XI_FACTORIES[self.shape](self.gamma_ph, self.t_ph)(t)
        inside = (t >= self.support[0]) & (t <= self.support[1])
        return np.where(inside, raw, 0.0)

    def remaining_norm(self, t):
        """Closed-form tail integral int_t^inf |xi(s)|^2 ds of the ideal shape."""
        t = np.asarray(t, dtype=float)
        g, tp = self.gamma_ph, self.t_ph
        if self.shape == GAUSSIAN:
            return 0.5 * erfc((t - tp) * g / np.sqrt(2.0))
        if self.shape == RISING_EXPONENTIAL:
            return np.where(t <= tp, -np.expm1(np.minimum(g * (t - tp), 0.0)), 0.0)
        if self.shape == DECAYING_EXPONENTIAL:
            return np.where(t >= tp, np.exp(-g * np.maximum(t - tp, 0.0)), 1.0)
        raise ValueError(f"unknown wavepacket shape {self.shape!r}")


def make_wavepacket(shape: str, gamma_ph: float, t_ph: float) -> Wavepacket:
    if shape not in SHAPES:
        raise ValueError(f"unknown wavepacket shape {shape!r}; expected one of {SHAPES}")
    if gamma_ph <= 0:
        raise ValueError("gamma_ph must be positive")
    if shape == GAUSSIAN:
        half = 6.0 / gamma_ph
        support = (t_ph - half, t_ph + half)
    elif shape == RISING_EXPONENTIAL:
        support = (t_ph - 20.0 / gamma_ph, t_ph)
    else:
        support = (t_ph, t_ph + 20.0 / gamma_ph)
    return Wavepacket(shape, float(gamma_ph), float(t_ph), support)


class Kappa:
    """Time-dependent source-cavity decay rate for a given wavepacket.

    Calling the object returns kappa(t); ``amplitude`` returns sqrt(kappa(t))
    computed directly from |xi| / sqrt(remaining norm), which is the quantity
    that actually enters the coupling operator sqrt(kappa(t)) a.  Because the
    numerator uses the support-truncated amplitude, kappa drops to zero once
    the photon has fully left the cavity instead of sitting at the cap; the
    cavity is empty by then, so the value is irrelevant to the dynamics but a
    capped rate would needlessly stiffen the integrators.
    """

    def __init__(self, wavepacket: Wavepacket):
        self.wavepacket = wavepacket
        # grouping key so equal modulations compile to one envelope group
        self.key = (wavepacket.shape, wavepacket.gamma_ph, wavepacket.t_ph)

    def amplitude(self, t):
        wp = self.wavepacket
        denom = np.sqrt(np.maximum(wp.remaining_norm(t), NORM_FLOOR))
        amp = np.abs(wp.xi(t)) / denom
        return np.minimum(amp, np.sqrt(KAPPA_MAX))

    def __call__(self, t):
        return self.amplitude(t) ** 2


def kappa_of_t(wp: Wavepacket) -> Kappa:
    """Decay-rate modulation emitting flux |xi(t)|^2 from an initially full cavity."""
    return Kappa(wp)
