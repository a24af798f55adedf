# ---
# jupyter:
#   jupytext:
#     formats: py:light
#     text_representation:
#       extension: .py
#       format_name: light
# ---

# # BP-GEXIT curves and the area threshold
#
# The BP-GEXIT curve of the flat ensemble, traced in the normalized channel
# entropy alpha, bounds where a coupled chain can decode. This script traces a
# coarse curve for (3,6) over QPSK and reads off the area threshold.

import numpy as np

from scbicm import ChannelSpec, DegreeProfile, EntropyCurve, area_threshold, bp_gexit_curve, build_constellation
from scbicm.channel import sigma_to_ebn0
from scbicm.gexit import CurveSettings

qpsk = ChannelSpec(build_constellation("qpsk"))
settings = CurveSettings(de_samples=300_000, gexit_samples=200_000, entropy_samples=200_000, refine_tol=1e-3)
alphas = np.round(np.arange(0.30, 0.981, 0.04), 2)
curve = bp_gexit_curve(DegreeProfile.regular(3, 6), qpsk, "map", alphas, settings)

for a, g, se in zip(curve.alpha, curve.g, curve.stderr):
    print(f"{a:.4f}  {g:.4f}  {se:.1e}")
print("BP jump at alpha =", curve.metadata["alpha_bp"])

# ## Area threshold
#
# Integrating from alpha = 1 downward until the area equals the design rate
# gives alpha-bar. Converting back to a noise level uses the same entropy
# curve the tracer used.

abar = area_threshold(curve, 0.5)
sigma = EntropyCurve(qpsk.constellation, "awgn", 200_000).sigma_for(abar)
print(f"alpha-bar {abar:.4f}, sigma {sigma:.4f}, Eb/N0 {sigma_to_ebn0(sigma, 0.5, 2):.3f} dB")

# The total area exceeds the rate. The excess is the area between the BP
# curve and the (unknown) MAP curve, so it grows with the BP-to-MAP gap.

print("area", round(curve.area(), 4), "excess", round(curve.area() - 0.5, 4))

# ## Saving curves
#
# The CLI writes the same data with `scbicm gexit --curve-out curve.csv`;
# `scbicm.cli.load_curve` reads it back bit for bit.

from scbicm.cli import emit_curve, load_curve  # noqa: E402

path = emit_curve(curve, "/tmp/gexit_36_qpsk.csv")
assert np.array_equal(load_curve(path).g, curve.g)
