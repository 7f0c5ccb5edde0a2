"""Detector statistics from homodyne records: filters, SNR, thresholds, fidelity.

Everything here is a plain reduction over integrated-signal samples
S = int_{t_i}^{t_f} j(t) f(t) dt (discretised as the Ito sum over grid steps).
The two ensembles (control field empty / loaded) give two S distributions;
a threshold turns them into a binary detector whose assignment fidelity is

    F = P(0 | S <= S0T) P(S <= S0T) + P(1 | S >= S1T) P(S >= S1T)

which with empirical conditionals and priors (pi0, pi1) collapses to
pi0 * mean(S0 <= S0T) + pi1 * mean(S1 >= S1T).  A single threshold
(S0T == S1T) is the default; a gap S0T < S1T turns the region in between
into an abstention and F counts neither side there.

The local-oscillator phase convention lives in the propagation layer; for
the configurations shipped here phi = pi/2 aligns the mean n = 1 signal to
positive values, so thresholds read "photon above, vacuum below".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics

__all__ = [
    "FilterSpec",
    "square_filter",
    "matched_filter_template",
    "template_filter",
    "integrate_signal",
    "snr_empirical",
    "fidelity",
    "optimize_threshold",
    "select_window",
    "optimize_window",
    "DetectionSummary",
    "summarize",
]


@dataclass(frozen=True)
class FilterSpec:
    """Linear filter f(t): square window or a matched (template) filter.

    The template of a matched filter is stored on its own time grid and
    interpolated onto record grids; it is normalised so max |f| = 1, which
    leaves SNR and fidelity unchanged (both are scale-invariant) but keeps
    integrated signals comparable across filters.
    """

    kind: str
    window: tuple
    template_times: np.ndarray = field(default=None, repr=False)
    template_values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("square", "matched"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        ti, tf = self.window
        if not tf > ti:
            raise ValueError("filter window must have positive length")
        if self.kind == "matched":
            tv = np.asarray(self.template_values, dtype=float)
            if self.template_times is None or self.template_values is None:
                raise ValueError("matched filter needs a template")
            if not np.all(np.isfinite(tv)):
                raise ValueError("template must be finite")
            peak = np.max(np.abs(tv))
            if not abs(peak - 1.0) < 1e-9:
                raise ValueError("template must be normalised to max |f| = 1")

    def values_on(self, times: np.ndarray) -> np.ndarray:
        """f evaluated at the given step times (zero outside the window)."""
        times = np.asarray(times, dtype=float)
        ti, tf = self.window
        mask = (times >= ti - 1e-12) & (times < tf - 1e-12)
        if self.kind == "square":
            return mask.astype(float)
        vals = np.interp(times, self.template_times, self.template_values,
                         left=0.0, right=0.0)
        return np.where(mask, vals, 0.0)


def square_filter(window) -> FilterSpec:
    return FilterSpec("square", (float(window[0]), float(window[1])))


def template_filter(times, values, window=None) -> FilterSpec:
    """Matched filter from an expected-current curve, peak-normalised.

    Raises if the curve carries no signal at all — a matched filter for a
    dark record is undefined.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1:
        raise ValueError("template times/values must be matching 1-d arrays")
    if window is None:
        window = (float(times[0]), float(times[-1]) + (times[-1] - times[-2]))
    peak = np.max(np.abs(values))
    if not np.isfinite(peak) or peak <= 0.0:
        raise ValueError("template is identically zero; no signal to match")
    return FilterSpec("matched", (float(window[0]), float(window[1])),
                      template_times=times, template_values=values / peak)


def matched_filter_template(gen, meas_op, eta, phi, rho0, grid, window=None,
                            *, rho_ref=None, kept_states=None) -> FilterSpec:
    """Matched filter for a configuration: sqrt(eta) <y>(t) of the n = 1
    deterministic evolution, peak-normalised.

    When the empty-input ensemble is not dark (a probe drive keeps the
    monitored field populated either way), pass its initial state as
    ``rho_ref``: the template then matches the mean *difference* current,
    which is the part of the record that actually discriminates.
    """
    times, curve = dynamics.mean_signal_curve(gen, meas_op, eta, phi, rho0,
                                              grid, kept_states=kept_states)
    if rho_ref is not None:
        _, ref = dynamics.mean_signal_curve(gen, meas_op, eta, phi, rho_ref,
                                            grid, kept_states=kept_states)
        curve = curve - ref
    return template_filter(times, curve, window)


def integrate_signal(rec: dynamics.HomodyneRecord, f: FilterSpec) -> float:
    """S = sum_k j_k f(t_k) dt over the record's step grid."""
    ti, tf = f.window
    lo, hi = rec.times[0], rec.times[-1] + rec.dt
    if ti < lo - 1e-9 or tf > hi + 1e-9:
        raise ValueError(
            f"filter window ({ti}, {tf}) outside record range ({lo}, {hi})")
    vals = f.values_on(rec.times)
    return float(np.sum(vals * rec.j) * rec.dt)


def snr_empirical(samples0, samples1, *, n_boot: int = 200, seed: int = 0):
    """Plug-in SNR = (mean1 - mean0) / sqrt(var1 + var0) with bootstrap stderr.

    Returns (snr, stderr).  The bootstrap resamples both ensembles with a
    fixed-seed generator so repeated calls agree.
    """
    s0 = np.asarray(samples0, dtype=float)
    s1 = np.asarray(samples1, dtype=float)
    if len(s0) < 2 or len(s1) < 2:
        raise ValueError("need at least two samples per ensemble")

    def stat(a, b):
        return (b.mean() - a.mean()) / np.sqrt(b.var(ddof=1) + a.var(ddof=1))

    snr = float(stat(s0, s1))
    rng = np.random.default_rng(seed)
    boots = np.empty(n_boot)
    for i in range(n_boot):
        boots[i] = stat(s0[rng.integers(0, len(s0), len(s0))],
                        s1[rng.integers(0, len(s1), len(s1))])
    return snr, float(boots.std(ddof=1))


def fidelity(samples0, samples1, s0t: float, s1t: float = None,
             priors=(0.5, 0.5)) -> float:
    """Assignment fidelity for thresholds S0T <= S1T under the given priors.

    Counting estimate: pi0 * P(S0 <= S0T) + pi1 * P(S1 >= S1T).  With a
    single threshold (default) every sample is assigned; with a gap the
    samples falling strictly between the thresholds count for neither
    hypothesis.
    """
    if s1t is None:
        s1t = s0t
    if s1t < s0t:
        raise ValueError("thresholds must satisfy S0T <= S1T")
    pi0, pi1 = priors
    if abs(pi0 + pi1 - 1.0) > 1e-9 or pi0 < 0 or pi1 < 0:
        raise ValueError("priors must be nonnegative and sum to 1")
    s0 = np.asarray(samples0, dtype=float)
    s1 = np.asarray(samples1, dtype=float)
    return float(pi0 * np.mean(s0 <= s0t) + pi1 * np.mean(s1 >= s1t))


def optimize_threshold(samples0, samples1, priors=(0.5, 0.5)):
    """Single decision cut maximising empirical fidelity.

    Candidates are the midpoints between consecutive pooled sorted samples
    plus cuts just outside the data; ties resolve to the lowest threshold.
    Returns (S0T, S1T, F*) with S0T == S1T.
    """
    s0 = np.asarray(samples0, dtype=float)
    s1 = np.asarray(samples1, dtype=float)
    if len(s0) == 0 or len(s1) == 0:
        raise ValueError("need samples from both ensembles")
    pooled = np.sort(np.concatenate([s0, s1]))
    span = max(pooled[-1] - pooled[0], 1.0)
    cands = np.concatenate([[pooled[0] - 0.01 * span],
                            0.5 * (pooled[1:] + pooled[:-1]),
                            [pooled[-1] + 0.01 * span]])
    best_f, best_t = -1.0, None
    for th in cands:
        fv = fidelity(s0, s1, th, th, priors)
        if fv > best_f + 1e-12:
            best_f, best_t = fv, float(th)
    return best_t, best_t, best_f


def select_window(candidates, scores):
    """Argmax window with deterministic tie-breaks: shortest, then earliest.

    Scores within 1e-12 (relative) of the best are treated as tied.
    """
    candidates = list(candidates)
    scores = np.asarray(scores, dtype=float)
    if len(candidates) == 0:
        raise ValueError("candidate grid is empty")
    if len(candidates) != len(scores):
        raise ValueError("one score per candidate window required")
    best = np.max(scores)
    tol = 1e-12 * max(1.0, abs(best))
    tied = [w for w, s in zip(candidates, scores) if s >= best - tol]
    tied.sort(key=lambda w: (w[1] - w[0], w[0]))
    return tuple(tied[0])


def optimize_window(gen, meas_op, eta, phi, rho0, grid, candidates, *,
                    kept_states=None):
    """Best square-filter window over a candidate grid, scored analytically.

    One deterministic evolution plus one adjoint sweep per distinct window
    end; returns (window, snr).
    """
    candidates = [tuple(map(float, w)) for w in candidates]
    scores = dynamics.snr_window_scan(gen, meas_op, eta, phi, rho0, grid,
                                      candidates, kept_states=kept_states)
    win = select_window(candidates, scores)
    return win, float(scores[candidates.index(win)])


@dataclass(eq=False)
class DetectionSummary:
    """Everything a detector run reports about its two S ensembles."""

    samples0: np.ndarray
    samples1: np.ndarray
    snr: float
    snr_stderr: float
    s0_threshold: float
    s1_threshold: float
    fidelity: float
    priors: tuple
    n0: int
    n1: int
    config_digest: str = ""


def summarize(samples0, samples1, priors=(0.5, 0.5), *, n_boot: int = 200,
              config_digest: str = "") -> DetectionSummary:
    """SNR (with bootstrap stderr), optimal single threshold, and fidelity."""
    s0 = np.asarray(samples0, dtype=float)
    s1 = np.asarray(samples1, dtype=float)
    snr, err = snr_empirical(s0, s1, n_boot=n_boot)
    s0t, s1t, fstar = optimize_threshold(s0, s1, priors)
    return DetectionSummary(s0, s1, snr, err, s0t, s1t, fstar, tuple(priors),
                            len(s0), len(s1), config_digest)
