import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import bawgn_entropy

from scbicm.channel import (
    ChannelSpec,
    EntropyCurve,
    Fading,
    SampleBank,
    channel_entropy_alpha,
    ebn0_to_sigma,
    entropy_terms,
    entropy_terms_full,
    sample_output,
    sigma_to_ebn0,
)
from scbicm.constellation import ConfigurationError, build_constellation


@given(
    st.floats(-10, 30),
    st.floats(0.05, 1.0),
    st.sampled_from([2, 4, 6]),
)
def test_ebn0_round_trip(ebn0, rate, m):
    s = ebn0_to_sigma(ebn0, rate, m)
    assert sigma_to_ebn0(s, rate, m) == pytest.approx(ebn0, abs=1e-9)


def test_ebn0_convention():
    # Eb/N0 = 0 dB, R = 1/2, QPSK: one unit of energy per information bit
    assert ebn0_to_sigma(0.0, 0.5, 2) == pytest.approx(1.0)
    assert ebn0_to_sigma(10.0, 1.0, 4) == pytest.approx(np.sqrt(1 / 40))


def test_conversion_rejects_bad_rate():
    with pytest.raises(ConfigurationError):
        ebn0_to_sigma(1.0, 0.0, 2)
    with pytest.raises(ConfigurationError):
        sigma_to_ebn0(1.0, 1.5, 2)


def test_spec_validation_and_parse():
    c = build_constellation("qpsk")
    with pytest.raises(ConfigurationError):
        ChannelSpec(c, "awgn", 0.0)
    assert ChannelSpec(c, "fading").fading is Fading.RAYLEIGH
    with pytest.raises(ConfigurationError):
        Fading.parse("rician")


@pytest.mark.parametrize("fading", ["awgn", "rayleigh"])
def test_sample_output_statistics(fading):
    c = build_constellation("16qam")
    spec = ChannelSpec(c, fading, 0.5)
    rng = np.random.default_rng(1)
    idx = rng.integers(0, c.size, 200_000)
    obs = sample_output(spec, idx, rng)
    z = obs.y - obs.a * c.symbols[idx]
    assert np.var(z.real) == pytest.approx(0.125, rel=0.02)
    assert np.var(z.imag) == pytest.approx(0.125, rel=0.02)
    assert np.mean(np.abs(obs.a) ** 2) == pytest.approx(1.0, rel=0.02)
    if fading == "awgn":
        assert np.all(obs.a == 1)
    single = sample_output(spec, 3, 0)
    assert isinstance(single.y, complex)


def test_sample_bank_is_reproducible_and_block_independent():
    c = build_constellation("qpsk")
    a = list(SampleBank(c, "rayleigh", 150_000, seed=5))
    b = list(SampleBank(c, "rayleigh", 150_000, seed=5))
    assert all(np.array_equal(x.noise, y.noise) for x, y in zip(a, b))
    # a longer bank with the same seed starts with the same blocks
    longer = list(SampleBank(c, "rayleigh", 300_000, seed=5))
    assert np.array_equal(longer[0].symbols, a[0].symbols)
    other = list(SampleBank(c, "rayleigh", 150_000, seed=6))
    assert not np.array_equal(other[0].noise, a[0].noise)


@pytest.mark.parametrize("mod", ["qpsk", "16qam", "64qam"])
@pytest.mark.parametrize("fading", ["awgn", "rayleigh"])
def test_axis_factorization_matches_full_sum(mod, fading):
    c = build_constellation(mod)
    d = next(iter(SampleBank(c, fading, 5000, seed=2)))
    assert np.allclose(entropy_terms(c, d, 0.6), entropy_terms_full(c, d, 0.6), atol=1e-9)


@pytest.mark.parametrize("sigma", [0.6, 0.9, 1.4])
def test_qpsk_entropy_matches_quadrature(sigma):
    c = build_constellation("qpsk")
    est = channel_entropy_alpha(ChannelSpec(c, "awgn", sigma), 200_000, rng=3)
    assert abs(est.value - bawgn_entropy(sigma)) < 4 * est.stderr + 1e-4


def test_entropy_curve_monotone_and_invertible():
    c = build_constellation("16qam")
    curve = EntropyCurve(c, "awgn", 50_000, seed=0)
    sig = np.linspace(0.2, 2.0, 8)
    alphas = [curve.alpha(s) for s in sig]
    assert np.all(np.diff(alphas) > 0)
    assert 0 < alphas[0] < alphas[-1] < 1
    s = curve.sigma_for(0.5)
    assert curve.alpha(s) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(ConfigurationError):
        curve.sigma_for(1.0)
