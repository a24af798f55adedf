import numpy as np
import pytest

from scbicm.channel import ChannelSpec
from scbicm.constellation import ConfigurationError, build_constellation
from scbicm.de_coupled import (
    ScEnsemble,
    ScThreshold,
    sc_bp_threshold,
    sc_converges,
    sc_de_step,
    sc_design_rate,
    sc_initial_state,
)
from scbicm.de_flat import DeSchedule, FixedChannel, de_converges, de_step, initial_state
from scbicm.density import DEFAULT_GRID, DegreeProfile, LlrDensity


def bec(eps):
    p = np.zeros(DEFAULT_GRID.size)
    p[DEFAULT_GRID.zero], p[-1] = eps, 1 - eps
    return FixedChannel([LlrDensity(DEFAULT_GRID, p)])


def socket_rate(dl, dr, L, w, checks_per_pos=200_000, seed=0):
    """Design rate by sampling check sockets: a check is kept when any socket lands in the chain."""
    rng = np.random.default_rng(seed)
    kept = 0.0
    for p in range(-L, L + w):
        src = p - rng.integers(0, w, size=(checks_per_pos, dr))
        kept += np.mean(np.any((src >= -L) & (src <= L), axis=1))
    return 1 - (dl / dr) * kept / (2 * L + 1)


def test_ensemble_validation():
    with pytest.raises(ConfigurationError):
        ScEnsemble(3, 3, 10, 2)
    with pytest.raises(ConfigurationError):
        ScEnsemble(3, 6, 0, 2)
    e = ScEnsemble(3, 6, 16, 4)
    assert e.positions == 33 and e.uncoupled_rate == 0.5


@pytest.mark.parametrize("dl,dr,L,w", [(3, 6, 4, 3), (4, 8, 5, 2), (3, 6, 16, 4)])
def test_design_rate_matches_socket_count(dl, dr, L, w):
    assert sc_design_rate(ScEnsemble(dl, dr, L, w)) == pytest.approx(socket_rate(dl, dr, L, w), abs=2e-3)


def test_design_rate_values():
    e = ScEnsemble(3, 6, 16, 4)
    assert e.design_rate == pytest.approx(0.46042, abs=1e-5)
    assert e.rate_loss_db() == pytest.approx(10 * np.log10(0.5 / e.design_rate))
    assert ScEnsemble(3, 6, 64, 4).design_rate == pytest.approx(0.489875, abs=1e-6)
    # w = 1 leaves the rate of the uncoupled ensemble
    assert ScEnsemble(3, 6, 7, 1).design_rate == pytest.approx(0.5)
    # rate loss vanishes as the chain grows
    assert ScEnsemble(3, 6, 1000, 4).design_rate == pytest.approx(0.5, abs=1e-3)


def test_w1_reduces_to_flat():
    ch = FixedChannel([LlrDensity.gaussian(2 / 0.85**2)])
    e = ScEnsemble(3, 6, 2, 1)
    sched = DeSchedule()
    sc = sc_initial_state(e, ch)
    flat = initial_state(ch)
    prof = DegreeProfile.regular(3, 6)
    for _ in range(5):
        sc = sc_de_step(sc, e, ch, sched)
        flat = de_step(flat, prof, ch, sched)
    for a in sc.chain:
        assert a.allclose(flat.avg, atol=1e-12)


def test_chain_is_mirror_symmetric_and_boundary_helps():
    ch = bec(0.47)
    e = ScEnsemble(3, 6, 6, 3)
    st = sc_initial_state(e, ch)
    for _ in range(10):
        st = sc_de_step(st, e, ch, DeSchedule())
    pe = st.error_probs()
    assert np.allclose(pe, pe[::-1], atol=0)
    assert pe[0] < pe[e.L]


def test_bec_wave_beats_flat_threshold():
    # flat (3,6) fails above 0.4294; the coupled chain decodes at 0.46
    ch = bec(0.46)
    assert not de_converges(DegreeProfile.regular(3, 6), ch).success
    res = sc_converges(ScEnsemble(3, 6, 12, 3), ch)
    assert res.success and res.max_error_prob < 1e-7
    # far above the MAP threshold (about 0.488) even the chain stalls
    assert not sc_converges(ScEnsemble(3, 6, 12, 3), bec(0.52)).success


def test_gap_bookkeeping():
    t = ScThreshold(0.9, 0.95, 0.46, 0.36, 100, 8).with_noise_threshold(0.2)
    assert t.gap_db == pytest.approx(0.7)
    assert t.asympt_gap_db == pytest.approx(0.34)


def test_sc_threshold_smoke():
    spec = ChannelSpec(build_constellation("qpsk"))
    e = ScEnsemble(3, 6, 4, 2)
    th = sc_bp_threshold(e, spec, "map", bracket=(0.5, 2.5), tol_db=0.1, n_samples=20_000, noise_ebn0_db=0.18)
    assert th.design_rate == pytest.approx(e.design_rate)
    assert th.gap_db == pytest.approx(th.ebn0_db - 0.18)
    assert 0.3 < th.ebn0_db < 2.5
