# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # Density evolution: flat and coupled
#
# Thresholds of the regular (3,6) ensemble over Gray QPSK, first on its own
# and then coupled into a chain with a known-bit boundary.

import numpy as np

from scbicm import ChannelSpec, DegreeProfile, ScEnsemble, bp_threshold, build_constellation, sc_converges
from scbicm.channel import ebn0_to_sigma
from scbicm.de_flat import DemapperChannel
from scbicm.demapper import DemapperSampler

qpsk = ChannelSpec(build_constellation("qpsk"))
prof = DegreeProfile.regular(3, 6)

# ## Flat threshold
#
# Expect about 1.1 dB; the scalar BI-AWGN value is the same because Gray QPSK
# splits into two independent binary channels.

flat = bp_threshold(prof, qpsk, "map", bracket=(0.8, 1.4), n_samples=500_000)
print(f"flat (3,6): {flat.ebn0_db:.3f} dB after {flat.evaluations} DE runs")

# ## The decoding wave
#
# Below the flat threshold the coupled chain still decodes: the boundary
# positions converge first and the solution travels inward. Printing the
# error profile of the left half every 40 iterations shows the front (the
# chain is symmetric about position 0).

e = ScEnsemble(3, 6, 16, 4)
sampler = DemapperSampler(qpsk.constellation, "awgn", 500_000, seed=0)
ebn0 = 0.95
ch = DemapperChannel(sampler, "map", ebn0_to_sigma(ebn0, e.design_rate, 2))
print(f"design rate {e.design_rate:.4f}, rate loss {e.rate_loss_db():.3f} dB")

from scbicm.de_coupled import sc_de_step, sc_initial_state  # noqa: E402
from scbicm.de_flat import DeSchedule  # noqa: E402

state = sc_initial_state(e, ch)
for it in range(1, 201):
    state = sc_de_step(state, e, ch, DeSchedule())
    if it % 40 == 0:
        pe = state.error_probs()
        print(f"{it:4d}", " ".join(f"{p:.0e}" for p in pe[: e.L + 1]))

# The same run to completion:

res = sc_converges(e, ch)
print(res.success, res.iterations, f"{res.max_error_prob:.1e}")

# ## Longer chains cost less rate
#
# The termination loss falls like 1/L, which is why the table preset uses L = 64.

for L in (8, 16, 32, 64, 128):
    x = ScEnsemble(3, 6, L, 4)
    print(L, round(x.design_rate, 5), round(x.rate_loss_db(), 3))

print(np.round([ScEnsemble(4, 8, 64, 4).design_rate, ScEnsemble(6, 12, 64, 4).design_rate], 5))
