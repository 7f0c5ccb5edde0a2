"""Why the integration window matters.

The square filter trades signal against accumulated shot noise: open the
window too early and it integrates noise before the photon arrives, close
it too late and the atom has already decayed back.  The scan shares one
forward solve across all candidate windows, so trying a few hundred of
them costs about as much as a single master-equation run.
"""

import numpy as np

from mwphoton import dynamics, slh, sources

wp = sources.make_wavepacket("gaussian", 0.8, 4.0)
net = slh.single_transmon_network(kappa=sources.kappa_of_t(wp))
kept = dynamics.states_with_count_at_most(
    net.layout, slh.control_band_weights(net.layout), 1)
grid = dynamics.TimeGrid(-3.5, 16.0, 1e-3, sample_stride=500)

starts = np.arange(1.0, 6.01, 0.5)
ends = np.arange(5.0, 12.01, 0.5)
windows = [(a, b) for a in starts for b in ends if b > a]
snrs = dynamics.snr_window_scan(net.generator, net.meas_op, 1.0, np.pi / 2,
                                net.initial_state(1), grid, windows,
                                kept_states=kept)

table = {}
for (a, b), s in zip(windows, snrs):
    table[(a, b)] = s

print("square-filter snr by window (rows: start, cols: end)")
print("      " + "".join(f"{e:7.1f}" for e in ends))
for a in starts:
    row = "".join(f"{table.get((a, b), float('nan')):7.3f}"
                  if (a, b) in table else "      -" for b in ends)
    print(f"{a:5.1f} {row}")

k = int(np.argmax(snrs))
a, b = windows[k]
print(f"\nbest window: ({a:.1f}, {b:.1f}) with snr = {snrs[k]:.4f}")
