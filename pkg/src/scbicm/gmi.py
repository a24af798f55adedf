"""Achievable rates of BICM: I-curves, generalized mutual information, CM capacity.

All information quantities are in bits. ``I(s; sigma)`` is the sum over bit
levels of ``1 - E log2(1 + exp(-s * L'))`` where ``L'`` is the demapper LLR
multiplied by ``1 - 2 b`` (positive when the decision is right).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channel import (
    LN2,
    ChannelSpec,
    Estimate,
    Fading,
    SampleBank,
    as_generator,
    ebn0_to_sigma,
    entropy_terms,
    sigma_to_ebn0,
)
from .constellation import ConfigurationError, Constellation
from .demapper import DemapperKind, bit_llrs, signed

S_BRACKET = (0.0, 4.0)
S_TOL = 1e-4


@dataclass(frozen=True)
class ICurvePoint:
    s: float
    per_bit: tuple[float, ...]
    total: float
    stderr: tuple[float, ...]
    total_stderr: float


@dataclass(frozen=True)
class GmiResult:
    value: float
    stderr: float
    s_opt: float
    per_bit: tuple[float, ...]


@dataclass(frozen=True)
class NoiseThreshold:
    sigma: float
    ebn0_db: float
    stderr_db: float
    samples: int
    mode: str
    s_opt: float | None


def _log2_1p_exp(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x) / LN2


class SignedLlrs:
    """Sign-adjusted demapper LLRs (no a-priori input) of one sample set at one ``sigma``."""

    def __init__(self, llrs: np.ndarray):
        self.llrs = llrs

    @classmethod
    def compute(cls, c: Constellation, bank: SampleBank, kind, sigma: float) -> "SignedLlrs":
        blocks = [signed(bit_llrs(kind, c, d, sigma), c, d.symbols).astype(np.float32) for d in bank]
        return cls(np.concatenate(blocks))

    def point(self, s: float, rows: slice = slice(None)) -> ICurvePoint:
        lam = self.llrs[rows]
        terms = np.empty(lam.shape)
        step = 1 << 18
        for i in range(0, lam.shape[0], step):
            terms[i : i + step] = 1.0 - _log2_1p_exp(-s * lam[i : i + step].astype(float))
        n = terms.shape[0]
        per_bit = terms.mean(axis=0)
        se = terms.std(axis=0, ddof=1) / np.sqrt(n)
        tot = terms.sum(axis=1)
        return ICurvePoint(
            float(s),
            tuple(map(float, per_bit)),
            float(per_bit.sum()),
            tuple(map(float, se)),
            float(tot.std(ddof=1) / np.sqrt(n)),
        )

    def best_s(self, rows: slice = slice(None)) -> float:
        lam = self.llrs[rows].astype(float)

        def neg_total(s):
            return np.mean(_log2_1p_exp(-s * lam)) * lam.shape[1]

        res = minimize_scalar(neg_total, bounds=S_BRACKET, method="bounded", options={"xatol": S_TOL})
        return float(res.x)

    def gmi(self, search_samples: int = 2 * 10**5) -> GmiResult:
        """Maximize over ``s``; the search runs on the first ``search_samples`` rows.

        Near the optimum ``I(s)`` is flat, so locating ``s`` on a subsample
        changes the value only to second order; the reported value and error
        use every sample.
        """
        s = self.best_s(slice(0, search_samples))
        p = self.point(s)
        return GmiResult(p.total, p.total_stderr, s, p.per_bit)


def _bank(spec: ChannelSpec, n_samples: int, rng) -> SampleBank:
    if n_samples < 10**4:
        raise ConfigurationError("rate estimates need at least 1e4 samples")
    seed = int(as_generator(rng).integers(2**63))
    return SampleBank(spec.constellation, spec.fading, n_samples, seed)


def i_curve(spec: ChannelSpec, kind, s: float, n_samples: int = 10**6, rng=None) -> ICurvePoint:
    """``I(s; sigma)`` with its per-bit terms and standard errors."""
    if s < 0:
        raise ConfigurationError("s must be nonnegative")
    bank = _bank(spec, n_samples, rng)
    return SignedLlrs.compute(spec.constellation, bank, kind, spec.sigma).point(s)


def gmi(spec: ChannelSpec, kind, n_samples: int = 10**7, rng=None) -> GmiResult:
    """``max_s I(s; sigma)`` in bits per channel use."""
    bank = _bank(spec, n_samples, rng)
    return SignedLlrs.compute(spec.constellation, bank, kind, spec.sigma).gmi()


def _cm_on_bank(c: Constellation, bank: SampleBank, sigma: float) -> Estimate:
    v = np.concatenate([entropy_terms(c, d, sigma) for d in bank])
    return Estimate(float(c.bits_per_symbol - v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)))


def cm_mutual_info(spec: ChannelSpec, n_samples: int = 10**7, rng=None) -> Estimate:
    """Coded-modulation mutual information ``I(X; Y | A)`` under uniform input."""
    return _cm_on_bank(spec.constellation, _bank(spec, n_samples, rng), spec.sigma)


class RateCurve:
    """``sigma -> I(sigma) / M`` on a fixed sample set (common random numbers)."""

    def __init__(self, c: Constellation, fading, kind, mode: str, n_samples: int, seed: int):
        if mode not in ("gmi", "cm"):
            raise ConfigurationError(f"mode must be 'gmi' or 'cm', got {mode!r}")
        self.c = c
        self.kind = DemapperKind.parse(kind)
        self.mode = mode
        self.bank = SampleBank(c, Fading.parse(fading), n_samples, seed)
        self.last: dict = {}

    def __call__(self, sigma: float) -> float:
        m = self.c.bits_per_symbol
        if self.mode == "cm":
            est = _cm_on_bank(self.c, self.bank, sigma)
            self.last = {"stderr": est.stderr / m, "s_opt": None}
            return est.value / m
        res = SignedLlrs.compute(self.c, self.bank, self.kind, sigma).gmi()
        self.last = {"stderr": res.stderr / m, "s_opt": res.s_opt}
        return res.value / m


def _solve(curve: RateCurve, rate: float, bits: int, lo: float, hi: float, xtol: float) -> float:
    f = lambda e: curve(ebn0_to_sigma(e, rate, bits)) - rate  # noqa: E731
    flo, fhi = f(lo), f(hi)
    while flo > 0:
        lo -= 1.0
        flo = f(lo)
    while fhi < 0:
        hi += 1.0
        fhi = f(hi)
    return brentq(f, lo, hi, xtol=xtol)


def noise_threshold(
    template: ChannelSpec,
    kind,
    rate: float,
    mode: str = "gmi",
    n_samples: int = 10**7,
    seed=0,
    tol_db: float = 0.005,
) -> NoiseThreshold:
    """Eb/N0 at which ``I(sigma) / M`` equals ``rate``.

    A coarse solve on 1e5 samples brackets the root; the final solve runs on
    ``n_samples`` samples shared across every evaluated noise level.
    """
    if not 0.0 < rate < 1.0:
        raise ConfigurationError(f"rate must lie in (0, 1), got {rate}")
    c = template.constellation
    m = c.bits_per_symbol
    ss = np.random.SeedSequence(seed)
    coarse_seed, fine_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    coarse_n = min(10**5, n_samples)
    coarse = RateCurve(c, template.fading, kind, mode, coarse_n, coarse_seed)
    e0 = _solve(coarse, rate, m, -2.0, 12.0, 0.01)
    fine = RateCurve(c, template.fading, kind, mode, n_samples, fine_seed)
    width = 0.08 if n_samples > coarse_n else 0.02
    e = _solve(fine, rate, m, e0 - width, e0 + width, tol_db)
    # standard error in dB through the local slope of I/M (taken on the coarse set)
    sig = ebn0_to_sigma(e, rate, m)
    fine(sig)
    info = fine.last
    d = 0.05
    slope = (coarse(ebn0_to_sigma(e + d, rate, m)) - coarse(ebn0_to_sigma(e - d, rate, m))) / (2 * d)
    return NoiseThreshold(
        sigma=float(sig),
        ebn0_db=float(sigma_to_ebn0(sig, rate, m)),
        stderr_db=float(info["stderr"] / slope),
        samples=int(n_samples),
        mode=mode,
        s_opt=info["s_opt"],
    )
