# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Achievable rates and noise thresholds
#
# How much rate does a bit-metric decoder lose against coded modulation, and
# how much more does max-log-MAP cost? Sample counts here are small so the
# script runs in a minute or two; the acceptance suite uses 1e7.

import numpy as np

from scbicm import ChannelSpec, build_constellation, cm_mutual_info, gmi, i_curve, noise_threshold
from scbicm.channel import sigma_to_ebn0

N = 200_000

# ## The I-curve and its maximizer
#
# For the exact demapper the scaled metric peaks at s = 1. The max-log metric
# is mismatched, so its best scaling drifts away from 1 (slightly above it at
# this noise level).

spec16 = ChannelSpec(build_constellation("16qam"), "awgn", 0.45)
for kind in ("map", "mlm"):
    pts = [i_curve(spec16, kind, s, N, rng=0) for s in (0.6, 0.8, 1.0, 1.2)]
    print(kind, [f"{p.total:.4f}" for p in pts])
    print("  best s:", round(gmi(spec16, kind, N, rng=0).s_opt, 3))

# ## CM against BICM
#
# Gray labeling keeps the BICM loss small. Both numbers are bits per channel use.

for sigma in (0.3, 0.45, 0.7):
    s = spec16.with_sigma(sigma)
    cm = cm_mutual_info(s, N, rng=1)
    bi = gmi(s, "map", N, rng=1)
    print(f"sigma={sigma}: CM {cm.value:.4f}  BICM {bi.value:.4f}  loss {cm.value - bi.value:.4f}")

# ## Noise thresholds at rate 1/2
#
# Each threshold inverts I(sigma)/M = 1/2 on one fixed sample set, so the
# root finder sees a smooth, monotone function.

rows = []
for mod in ("qpsk", "16qam", "64qam"):
    for ch in ("awgn", "rayleigh"):
        th = noise_threshold(ChannelSpec(build_constellation(mod), ch), "map", 0.5, n_samples=N, seed=0)
        rows.append((mod, ch, th.ebn0_db, th.stderr_db))
for r in rows:
    print("{:>6} {:>9}  {:6.3f} dB  (+/- {:.3f})".format(*r))

# The conversion between sigma and Eb/N0 always uses the code rate and M:

print(sigma_to_ebn0(1.0, 0.5, 2), sigma_to_ebn0(np.sqrt(0.5), 0.5, 2))
