"""Bit-level demapping (MAP and max-log-MAP) and the demapper density operators.

LLRs are ``log P(b = 0) / P(b = 1)``. A-priori information enters through
per-bit LLRs; the output for bit ``m`` is extrinsic (bit ``m``'s own prior is
left out).
"""

from __future__ import annotations

import enum
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .channel import (
    ChannelDraws,
    ChannelObservation,
    Fading,
    SampleBank,
    as_generator,
    axis_metrics,
    equalize,
    symbol_metrics,
)
from .constellation import ConfigurationError, Constellation, bit_partition
from .density import DEFAULT_GRID, DeltaKind, Grid, LlrDensity, mix

MIN_SAMPLES = 10**4


class DemapperKind(enum.Enum):
    MAP = "map"
    MLM = "mlm"

    @classmethod
    def parse(cls, value) -> "DemapperKind":
        if isinstance(value, DemapperKind):
            return value
        key = str(value).strip().lower().replace("-", "")
        aliases = {"map": cls.MAP, "mapoptimal": cls.MAP, "mlm": cls.MLM, "maxlogmap": cls.MLM, "maxlog": cls.MLM}
        if key not in aliases:
            raise ConfigurationError(f"unknown demapper {value!r}; expected 'map' or 'mlm'")
        return aliases[key]


def _reduce(kind: DemapperKind, x: np.ndarray, axis: int) -> np.ndarray:
    if kind is DemapperKind.MAP:
        return logsumexp(x, axis=axis)
    return np.max(x, axis=axis)


def log_bit_probs(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(log P(b=0), log P(b=1))`` from LLRs ``v``; exact for ``v = +/-inf``."""
    v = np.asarray(v, dtype=float)
    with np.errstate(over="ignore"):
        return -np.logaddexp(0.0, -v), -np.logaddexp(0.0, v)


def bit_llr(kind, c: Constellation, obs: ChannelObservation, sigma: float, m: int, prior=None) -> float:
    """Extrinsic LLR of bit ``m`` for a single observation, summing over the full constellation."""
    kind = DemapperKind.parse(kind)
    y, a = complex(obs.y), complex(obs.a)
    if not (np.isfinite(y) and np.isfinite(a)):
        raise ValueError("non-finite channel observation")
    part = bit_partition(c, m)
    met = symbol_metrics(c, y, a, sigma)[0]
    if prior is not None:
        v = np.asarray(prior, dtype=float).copy()
        if v.shape != (c.bits_per_symbol,):
            raise ValueError(f"prior must hold {c.bits_per_symbol} LLRs")
        lp0, lp1 = log_bit_probs(v)
        others = [l for l in range(c.bits_per_symbol) if l != m]
        lab = c.labels[:, others]
        met = met + np.where(lab == 0, lp0[others], lp1[others]).sum(axis=1)
    num = _reduce(kind, met[part.zero_set], axis=0)
    den = _reduce(kind, met[part.one_set], axis=0)
    if np.isneginf(num) and np.isneginf(den):
        raise ValueError("prior excludes every symbol")
    return float(num - den)


def bit_llrs_full(kind, c: Constellation, y, a, sigma: float, priors=None) -> np.ndarray:
    """Vectorized full-constellation extrinsic LLRs, shape (n, M)."""
    kind = DemapperKind.parse(kind)
    met = symbol_metrics(c, y, a, sigma)
    n, mbits = met.shape[0], c.bits_per_symbol
    out = np.empty((n, mbits))
    lp = None if priors is None else log_bit_probs(np.asarray(priors, dtype=float))
    for m in range(mbits):
        part = bit_partition(c, m)
        mm = met
        if lp is not None:
            others = [l for l in range(mbits) if l != m]
            lab = c.labels[:, others]  # (S, M-1)
            mm = met + _prior_sum(lab, lp[0][:, others], lp[1][:, others])
        out[:, m] = _reduce(kind, mm[:, part.zero_set], 1) - _reduce(kind, mm[:, part.one_set], 1)
    return out


def _prior_sum(lab: np.ndarray, lp0: np.ndarray, lp1: np.ndarray) -> np.ndarray:
    """``sum_l log P(b_l = lab[s, l])`` for every sample and label row, shape (n, S)."""
    out = np.zeros((lp0.shape[0], lab.shape[0]))
    for j in range(lab.shape[1]):
        out += np.where(lab[None, :, j] == 0, lp0[:, j : j + 1], lp1[:, j : j + 1])
    return out


def axis_bit_llrs(kind, c: Constellation, met: np.ndarray, priors=None) -> np.ndarray:
    """Extrinsic LLRs from per-axis level metrics ``met`` (n, 2, K); shape (n, M).

    Uses the I/Q factorization of square Gray QAM: both the likelihood and the
    prior product split over the two axes, and the other axis cancels in the
    ratio for every bit.
    """
    kind = DemapperKind.parse(kind)
    n = met.shape[0]
    h = c.bits_per_axis
    lab = c.axis_labels  # (K, h)
    out = np.empty((n, c.bits_per_symbol))
    lp = None if priors is None else log_bit_probs(priors)
    for ax in range(2):
        bits = list(c.axis_bits(ax))
        mx = np.ascontiguousarray(met[:, ax, :])
        if kind is DemapperKind.MAP and (lp is None or h == 1):
            out[:, bits] = _axis_lse_diffs(mx, lab)
            continue
        for j, m in enumerate(bits):
            mm = mx
            if lp is not None and h > 1:
                others = [i for i in range(h) if i != j]
                mm = mx + _prior_sum(lab[:, others], lp[0][:, [bits[i] for i in others]], lp[1][:, [bits[i] for i in others]])
            zero = lab[:, j] == 0
            if kind is DemapperKind.MAP:
                out[:, m] = _masked_lse_diff(mm, zero)
            else:
                out[:, m] = mm[:, zero].max(axis=1) - mm[:, ~zero].max(axis=1)
    return out


_TINY = 1e-300


def _axis_lse_diffs(x: np.ndarray, lab: np.ndarray) -> np.ndarray:
    """All per-bit MAP LLRs of one axis from shared level metrics ``x`` (n, K)."""
    e = np.exp(x - x.max(axis=1, keepdims=True))
    s = e @ np.concatenate([lab == 0, lab == 1], axis=1).astype(float)
    np.maximum(s, _TINY, out=s)
    s = np.log(s)
    h = lab.shape[1]
    return s[:, :h] - s[:, h:]


def _masked_lse_diff(x: np.ndarray, zero: np.ndarray) -> np.ndarray:
    """``logsumexp(x[:, zero]) - logsumexp(x[:, ~zero])`` with a single exponential pass.

    Terms are scaled by the row maximum, so one side always sums to at least
    one; the other side is floored at 1e-300 (an LLR of about 690).
    """
    e = np.exp(x - x.max(axis=1, keepdims=True))
    masks = np.stack([zero, ~zero], axis=1).astype(float)
    s = e @ masks
    np.maximum(s, _TINY, out=s)
    return np.log(s[:, 0]) - np.log(s[:, 1])


def bit_llrs(kind, c: Constellation, draws: ChannelDraws, sigma: float, priors=None) -> np.ndarray:
    """Extrinsic LLRs for a block of channel draws, shape (n, M)."""
    r, g, _ = equalize(c, draws, sigma)
    return axis_bit_llrs(kind, c, axis_metrics(c, r, g, sigma), priors)


def signed(llrs: np.ndarray, c: Constellation, symbols: np.ndarray) -> np.ndarray:
    """Flip each LLR by its true bit so the correct decision is positive."""
    return llrs * (1.0 - 2.0 * c.labels[symbols])


def sample_llrs(a: LlrDensity, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws from a density given uniforms ``u``."""
    cdf = np.cumsum(a.pmf)
    idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    return a.grid.values[np.minimum(idx, a.grid.size - 1)]


def _is_delta_zero(a: LlrDensity | None) -> bool:
    return a is None or a.pmf[a.grid.zero] == 1.0


class DemapperSampler:
    """Fixed Monte-Carlo draws for the demapper density operators.

    Symbols, noise, fading and the uniforms used to draw a-priori LLRs are
    generated once, so the estimated densities vary smoothly with ``sigma``
    and with the incoming density.
    """

    def __init__(self, c: Constellation, fading, n_samples: int = 2 * 10**6, seed=0, grid: Grid = DEFAULT_GRID):
        if n_samples < MIN_SAMPLES:
            raise ConfigurationError(f"demapper densities need at least {MIN_SAMPLES} samples")
        self.constellation = c
        self.fading = Fading.parse(fading)
        self.n_samples = int(n_samples)
        self.grid = grid
        self.bank = SampleBank(c, self.fading, n_samples, seed)
        self._uniform_seeds = np.random.SeedSequence([int(np.random.SeedSequence(seed).entropy % 2**63), 7]).spawn(
            len(self.bank._seeds)
        )
        self._uniforms = None
        self._metric_cache: tuple[float, list[np.ndarray]] | None = None

    def _uniform_blocks(self) -> list[np.ndarray]:
        if self._uniforms is None:
            m = self.constellation.bits_per_symbol
            self._uniforms = [
                np.random.default_rng(ss).random((len(d), m)) for ss, d in zip(self._uniform_seeds, self.bank)
            ]
        return self._uniforms

    def _metrics(self, sigma: float) -> list[np.ndarray]:
        if self._metric_cache is not None and self._metric_cache[0] == sigma:
            return self._metric_cache[1]
        c = self.constellation
        mets = []
        for d in self.bank:
            r, g, _ = equalize(c, d, sigma)
            mets.append(axis_metrics(c, r, g, sigma))
        self._metric_cache = (sigma, mets)
        return mets

    def densities(self, kind, sigma: float, incoming: LlrDensity | None = None) -> list[LlrDensity]:
        """Per-bit output densities ``phi_m(incoming; sigma)`` for ``m = 0 .. M-1``."""
        kind = DemapperKind.parse(kind)
        c = self.constellation
        mbits = c.bits_per_symbol
        grid = self.grid if incoming is None else incoming.grid
        counts = np.zeros((mbits, grid.size))
        no_prior = _is_delta_zero(incoming)
        uniforms = None if no_prior else self._uniform_blocks()
        for b, (d, met) in enumerate(zip(self.bank, self._metrics(sigma))):
            priors = None
            if not no_prior:
                v = sample_llrs(incoming, uniforms[b])
                priors = signed(v, c, d.symbols)
            llr = signed(axis_bit_llrs(kind, c, met, priors), c, d.symbols)
            idx = grid.quantize(llr)
            for m in range(mbits):
                counts[m] += np.bincount(idx[:, m], minlength=grid.size)
        return [LlrDensity(grid, row / row.sum()) for row in counts]

    def average(self, kind, sigma: float, incoming: LlrDensity | None = None) -> LlrDensity:
        return mix(self.densities(kind, sigma, incoming))


def demapper_density(kind, c, fading, sigma, m, incoming, n_samples=2 * 10**6, rng=None) -> LlrDensity:
    """``phi_m(incoming; sigma)`` estimated from ``n_samples`` channel uses."""
    if not 0 <= m < c.bits_per_symbol:
        raise IndexError(f"bit index {m} out of range")
    return demapper_densities(kind, c, fading, sigma, incoming, n_samples, rng)[m]


def demapper_densities(kind, c, fading, sigma, incoming, n_samples=2 * 10**6, rng=None) -> list[LlrDensity]:
    seed = as_generator(rng).integers(2**63)
    grid = DEFAULT_GRID if incoming is None else incoming.grid
    return DemapperSampler(c, fading, n_samples, int(seed), grid).densities(kind, sigma, incoming)


def demapper_density_avg(kind, c, fading, sigma, incoming, n_samples=2 * 10**6, rng=None) -> LlrDensity:
    """``phi(incoming; sigma)``, the equal-weight mean of the per-bit operators."""
    return mix(demapper_densities(kind, c, fading, sigma, incoming, n_samples, rng))


def no_prior(grid: Grid = DEFAULT_GRID) -> LlrDensity:
    from .density import delta_density

    return delta_density(DeltaKind.ZERO, grid)


__all__: Sequence[str] = [
    "DemapperKind",
    "DemapperSampler",
    "bit_llr",
    "bit_llrs",
    "bit_llrs_full",
    "axis_bit_llrs",
    "demapper_density",
    "demapper_densities",
    "demapper_density_avg",
    "sample_llrs",
    "signed",
]
