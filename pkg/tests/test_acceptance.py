"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line that is printed after the run.
Criteria 4 and 9 take hours on one core and only run with SCBICM_LONG=1.
"""

import subprocess
import sys
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest
from conftest import ACCEPTANCE

from scbicm.channel import ChannelSpec, EntropyCurve, ebn0_to_sigma, sigma_to_ebn0
from scbicm.constellation import build_constellation
from scbicm.de_coupled import ScEnsemble, sc_bp_threshold
from scbicm.de_flat import DeSchedule, bp_threshold
from scbicm.density import DegreeProfile
from scbicm.gexit import CurveSettings, area_threshold, bp_gexit_curve
from scbicm.gmi import noise_threshold

HERE = Path(__file__).parent

# Frozen oracle values (tests/oracles.py, scalar BI-AWGN with the Gray QPSK
# decomposition): TableDE bisection for the (3,6) BP threshold, and TableDE
# fixed points with quadrature GEXIT for the (3,6) area threshold.
ORACLE_BP_36_DB = 1.1018683819574044  # sigma 0.880859
ORACLE_AREA_36_DB = 0.45717719636828547  # sigma 0.948727

TABLE_I = {
    ("qpsk", "awgn"): 0.17,
    ("16qam", "awgn"): 2.27,
    ("64qam", "awgn"): 4.67,
    ("qpsk", "rayleigh"): 1.83,
    ("16qam", "rayleigh"): 4.11,
    ("64qam", "rayleigh"): 6.62,
}
TABLE_II = {
    ("16qam", "awgn"): 2.29,
    ("64qam", "awgn"): 4.71,
    ("16qam", "rayleigh"): 4.17,
    ("64qam", "rayleigh"): 6.73,
}
GMI_SAMPLES = 10**7
ALPHAS = np.round(np.arange(0.30, 0.981, 0.02), 2)


def report(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, detail


def spec(mod, channel="awgn"):
    return ChannelSpec(build_constellation(mod), channel, 1.0)


@lru_cache(maxsize=None)
def noise_db(mod, channel, kind):
    return noise_threshold(spec(mod, channel), kind, 0.5, "gmi", GMI_SAMPLES, seed=0)


@lru_cache(maxsize=None)
def flat_bp_36_qpsk():
    t = time.perf_counter()
    th = bp_threshold(DegreeProfile.regular(3, 6), spec("qpsk"), "map", bracket=(0.8, 1.4), tol_db=0.005)
    return th, time.perf_counter() - t


@lru_cache(maxsize=None)
def flat_curve(dl, dr, mod, kind="map"):
    return bp_gexit_curve(DegreeProfile.regular(dl, dr), spec(mod), kind, ALPHAS, CurveSettings())


@lru_cache(maxsize=None)
def area_ebn0(dl, dr, mod, kind="map"):
    """Area threshold of a flat ensemble as (Eb/N0 at the design rate, sigma)."""
    curve = flat_curve(dl, dr, mod, kind)
    c = build_constellation(mod)
    rate = 1 - dl / dr
    abar = area_threshold(curve, rate)
    sigma = EntropyCurve(c, "awgn", 10**6, seed=0).sigma_for(abar)
    return sigma_to_ebn0(sigma, rate, c.bits_per_symbol), sigma


def test_criterion_01_gmi_map():
    t = time.perf_counter()
    rows = []
    ok = True
    for (mod, ch), ref in TABLE_I.items():
        th = noise_db(mod, ch, "map")
        good = abs(th.ebn0_db - ref) <= 0.05
        ok &= good
        rows.append(f"{mod}/{ch} {th.ebn0_db:.3f} (ref {ref})")
    elapsed = time.perf_counter() - t
    ok &= elapsed <= 600
    report(1, ok, "; ".join(rows) + f"; {elapsed:.0f} s")


def test_criterion_02_gmi_mlm():
    rows = []
    ok = True
    for (mod, ch), ref in TABLE_II.items():
        th = noise_db(mod, ch, "mlm")
        good = abs(th.ebn0_db - ref) <= 0.05
        ok &= good
        rows.append(f"{mod}/{ch} {th.ebn0_db:.3f} (ref {ref})")
    for ch in ("awgn", "rayleigh"):
        a, b = noise_db("qpsk", ch, "mlm"), noise_db("qpsk", ch, "map")
        same = a.ebn0_db == b.ebn0_db
        ok &= same
        rows.append(f"qpsk/{ch} MLM==MAP {same}")
    report(2, ok, "; ".join(rows))


def test_criterion_03_flat_bp_threshold():
    th, elapsed = flat_bp_36_qpsk()
    ok = abs(th.ebn0_db - 1.11) <= 0.03 and abs(th.ebn0_db - ORACLE_BP_36_DB) <= 0.03 and elapsed <= 300
    report(3, ok, f"{th.ebn0_db:.4f} dB (ref 1.11, oracle {ORACLE_BP_36_DB:.4f}); {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_04_sc_paper_preset():
    cases = [
        ((3, 6), "qpsk", "awgn", "map", 0.57),
        ((4, 8), "64qam", "awgn", "map", 4.87),
        ((6, 12), "16qam", "rayleigh", "mlm", 4.36),
    ]
    rows, ok = [], True
    for (dl, dr), mod, ch, kind, ref in cases:
        nt = noise_db(mod, ch, kind).ebn0_db
        e = ScEnsemble(dl, dr, 64, 4)
        th = sc_bp_threshold(e, spec(mod, ch), kind, bracket=(nt, nt + 0.6), noise_ebn0_db=nt)
        ok &= abs(th.ebn0_db - ref) <= 0.1
        rows.append(f"({dl},{dr},64,4) {mod}/{ch}/{kind} {th.ebn0_db:.3f} (ref {ref}, gap {th.gap_db:.3f})")
    report(4, ok, "; ".join(rows))


def test_criterion_05_threshold_saturation():
    flat, _ = flat_bp_36_qpsk()
    area_db, _ = area_ebn0(3, 6, "qpsk")
    e = ScEnsemble(3, 6, 16, 4)
    sc = sc_bp_threshold(e, spec("qpsk"), "map", bracket=(0.6, 1.2), tol_db=0.01)
    loss = e.rate_loss_db()
    # the same noise level expressed at rate 1/2, comparable with the flat threshold
    sc_half = sc.ebn0_db - loss
    target = area_db + loss
    ok = flat.ebn0_db - sc_half >= 0.4 and abs(sc.ebn0_db - target) <= 0.2
    report(
        5,
        ok,
        f"SC {sc.ebn0_db:.3f} dB at R={e.design_rate:.4f} ({sc_half:.3f} dB at R=1/2); "
        f"flat BP {flat.ebn0_db:.3f}, improvement {flat.ebn0_db - sc_half:.3f}; "
        f"area+loss {target:.3f}, distance {abs(sc.ebn0_db - target):.3f}",
    )


def test_criterion_06_area_threshold():
    db, sigma = area_ebn0(3, 6, "qpsk")
    ok = abs(db - 0.46) <= 0.05 and abs(db - ORACLE_AREA_36_DB) <= 0.05
    report(6, ok, f"{db:.4f} dB, sigma {sigma:.5f} (ref 0.46, oracle {ORACLE_AREA_36_DB:.4f})")


def test_criterion_07_area_theorem():
    rows, ok = [], True
    for mod in ("qpsk", "16qam"):
        for dl, dr in ((3, 6), (4, 8)):
            area = flat_curve(dl, dr, mod).area()
            slack = area - 0.5
            ok &= 0 <= slack < 0.03
            rows.append(f"({dl},{dr}) {mod} area {area:.4f} slack {slack:.4f}")
    report(7, ok, "; ".join(rows))


def test_criterion_08_mlm_crossing():
    area_db, sigma_area = area_ebn0(3, 6, "16qam", "mlm")
    e = ScEnsemble(3, 6, 32, 4)
    loss = e.rate_loss_db()
    # search in Eb/N0 at the SC design rate around the area threshold's noise level
    centre = area_db + loss
    sc = sc_bp_threshold(e, spec("16qam"), "mlm", bracket=(centre - 0.3, centre + 0.3), tol_db=0.01)
    margin = 20 * np.log10(sc.sigma / sigma_area)
    report(
        8,
        margin > 0,
        f"SC sigma {sc.sigma:.5f} vs flat MLM area sigma {sigma_area:.5f}: margin {margin:.3f} dB",
    )


@pytest.mark.slow
def test_criterion_09_bicm_id():
    nt = noise_db("64qam", "awgn", "map").ebn0_db
    e = ScEnsemble(4, 8, 64, 4)
    gaps = {}
    for name, sched in (
        ("non-iterative", DeSchedule(max_iters=10_000, stall_window=200, stall_tol=1e-6)),
        ("id-100", DeSchedule.iterative(100, max_iters=20_000, stall_window=200, stall_tol=1e-6)),
    ):
        th = sc_bp_threshold(e, spec("64qam"), "map", sched, bracket=(nt, nt + 0.5), noise_ebn0_db=nt)
        gaps[name] = th.gap_db
    ok = abs(gaps["non-iterative"] - 0.20) <= 0.05 and abs(gaps["id-100"] - 0.09) <= 0.05
    report(9, ok, f"gap {gaps['non-iterative']:.3f} -> {gaps['id-100']:.3f} dB (ref 0.20 -> 0.09)")


def test_criterion_10_property_suites():
    suites = [
        "tests/test_density.py",
        "tests/test_constellation.py",
        "tests/test_channel.py::test_ebn0_round_trip",
        "tests/test_channel.py::test_sample_bank_is_reproducible_and_block_independent",
        "tests/test_gmi.py::test_noise_threshold_reproducible_and_validated",
        "tests/test_demapper.py::test_sampler_is_deterministic_and_delta_zero_is_no_prior",
    ]
    t = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *suites],
        cwd=HERE.parent,
        capture_output=True,
        text=True,
    )
    elapsed = time.perf_counter() - t
    last = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    report(10, proc.returncode == 0 and elapsed < 120, f"{last}; {elapsed:.0f} s")
