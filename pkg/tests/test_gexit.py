import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import bawgn_gexit

from scbicm.channel import ChannelSpec
from scbicm.constellation import ConfigurationError, build_constellation
from scbicm.density import DeltaKind, LlrDensity, delta_density
from scbicm.gexit import (
    AreaThresholdError,
    CurveSettings,
    ExtrinsicProductDensity,
    GexitCurve,
    GexitEstimator,
    area_threshold,
    bp_gexit_curve,
    gexit_functional,
)


@pytest.fixture(scope="module")
def qpsk_est():
    return GexitEstimator(build_constellation("qpsk"), "awgn", 200_000, seed=1)


def test_delta_extrinsics_are_exact(qpsk_est):
    zero = ExtrinsicProductDensity.uniform(delta_density(DeltaKind.ZERO), 2)
    plus = ExtrinsicProductDensity.uniform(delta_density(DeltaKind.PLUS_INFINITY), 2)
    assert qpsk_est.functional(zero, 0.9) == (1.0, 0.0)
    assert qpsk_est.functional(plus, 0.9) == (0.0, 0.0)


@pytest.mark.parametrize("sigma,mean", [(0.9, 2.0), (1.2, 0.8), (0.7, 5.0)])
def test_qpsk_matches_scalar_oracle(qpsk_est, sigma, mean):
    a = LlrDensity.gaussian(mean)
    keep = a.pmf > 1e-15
    ref = bawgn_gexit(sigma, a.grid.values[keep], a.pmf[keep] / a.pmf[keep].sum())
    est = qpsk_est.functional(ExtrinsicProductDensity.uniform(a, 2), sigma)
    assert abs(est.value - ref) < 4 * est.stderr + 1e-3


def test_better_extrinsic_lowers_g():
    est = GexitEstimator(build_constellation("16qam"), "rayleigh", 50_000, seed=0)
    vals = [est.functional(ExtrinsicProductDensity.uniform(LlrDensity.gaussian(m), 4), 0.6).value for m in (0.5, 2, 6)]
    assert 1 > vals[0] > vals[1] > vals[2] > 0


def test_functional_validation():
    est = GexitEstimator(build_constellation("16qam"), "awgn", 20_000, seed=0)
    with pytest.raises(ConfigurationError):
        est.functional(ExtrinsicProductDensity.uniform(LlrDensity.gaussian(1.0), 2), 0.5)
    with pytest.raises(ConfigurationError):
        GexitEstimator(build_constellation("qpsk"), "awgn", 10)
    spec = ChannelSpec(build_constellation("qpsk"), "awgn", 0.9)
    one = gexit_functional(ExtrinsicProductDensity.uniform(LlrDensity.gaussian(2.0), 2), spec, 20_000, rng=0)
    assert 0.4 < one.value < 0.65


def test_curve_validation_and_round_trip():
    c = GexitCurve([0.2, 0.5, 1.0], [0.0, 0.4, 1.0], [0.0, 0.01, 0.0], metadata={"x": 1})
    assert len(c) == 3 and c.converged.all()
    d = GexitCurve.from_dict(json.loads(c.to_json()))
    assert np.array_equal(d.alpha, c.alpha) and d.metadata == {"x": 1}
    with pytest.raises(ValueError):
        GexitCurve([0.5, 0.2], [0, 0], [0, 0])
    with pytest.raises(ValueError):
        GexitCurve([0.5], [0, 0], [0, 0])


@given(st.floats(0.01, 0.49))
def test_area_threshold_linear_curve(rate):
    # g = alpha: the area over [a, 1] is (1 - a^2) / 2
    a = np.linspace(0, 1, 11)
    c = GexitCurve(a, a, np.zeros_like(a))
    assert area_threshold(c, rate) == pytest.approx(np.sqrt(1 - 2 * rate), abs=1e-12)


def test_area_threshold_step_and_errors():
    c = GexitCurve([0.1, 0.5, 0.5 + 1e-9, 1.0], [0, 0, 1, 1], [0, 0, 0, 0])
    assert area_threshold(c, 0.3) == pytest.approx(0.7)
    assert c.area() == pytest.approx(0.5, abs=1e-8)
    assert c.area(lower=0.8) == pytest.approx(0.2)
    assert area_threshold(c, 0.0) == 1.0
    with pytest.raises(AreaThresholdError):
        area_threshold(c, 0.6)
    with pytest.raises(AreaThresholdError):
        area_threshold(GexitCurve([0.1, 0.9], [0, 1], [0, 0]), 0.1)


def test_bp_gexit_curve_small():
    spec = ChannelSpec(build_constellation("qpsk"))
    from scbicm.density import DegreeProfile

    s = CurveSettings(de_samples=50_000, gexit_samples=50_000, entropy_samples=50_000, refine_tol=5e-3)
    curve = bp_gexit_curve(DegreeProfile.regular(3, 6), spec, "map", [0.35, 0.6, 0.85], s)
    assert curve.alpha[-1] == 1.0 and curve.g[-1] == 1.0
    assert curve.g[0] == 0.0
    assert np.all(np.diff(curve.g) >= -0.02)
    # the BP threshold of (3,6) over BI-AWGN sits near alpha = 0.43
    assert curve.metadata["alpha_bp"] == pytest.approx(0.43, abs=0.02)
    assert 0.5 < curve.area() < 0.56
    with pytest.raises(ConfigurationError):
        bp_gexit_curve(DegreeProfile.regular(3, 6), spec, "map", [0.5, 1.0], s)
