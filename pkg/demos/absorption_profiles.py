"""How much of the photon the atom actually absorbs, shape by shape.

A rising exponential matched to the atom's decay rate is the time-reverse
of spontaneous emission, so it loads the atom completely — until the probe
drive starts stealing population into the third level mid-absorption.  A
gaussian of similar bandwidth only manages partial loading.
"""

import numpy as np

from mwphoton import dynamics, slh, sources


def excitation_curve(wp, omega_p, t0, t1):
    net = slh.single_transmon_network(omega_p=omega_p,
                                      kappa=sources.kappa_of_t(wp))
    kept = dynamics.states_with_count_at_most(
        net.layout, slh.control_band_weights(net.layout), 1)
    grid = dynamics.TimeGrid(t0, t1, 1e-3, sample_stride=50)
    me = dynamics.evolve_me(net.generator, net.initial_state(1), grid,
                            kept_states=kept)
    idx = int(np.ravel_multi_index((0, 1), net.layout.dims))
    return me.times, np.array([s[idx, idx].real for s in me.states])


def sketch(times, pops, label, width=64):
    print(f"\n{label}: max P1 = {pops.max():.4f} at t = "
          f"{times[np.argmax(pops)]:.2f}")
    step = max(1, len(times) // 18)
    for k in range(0, len(times), step):
        bar = "#" * int(round(pops[k] * width))
        print(f"  t = {times[k]:7.2f} |{bar}")


rising = sources.make_wavepacket("rising_exponential", 1.0, 6.0)
for omega_p, tag in ((0.0, "rising exponential, probe off"),
                     (0.35, "rising exponential, probe on")):
    ts, p1 = excitation_curve(rising, omega_p, -10.0, 8.0)
    sketch(ts, p1, tag)

gauss = sources.make_wavepacket("gaussian", 1.0, 4.0)
ts, p1 = excitation_curve(gauss, 0.0, -2.0, 10.0)
sketch(ts, p1, "gaussian of matching bandwidth, probe off")
