"""The channel ``Y = A X + Z`` and its noise parametrizations.

Noise is circular complex Gaussian with total variance ``sigma**2``; the
fading coefficient ``A`` is 1 (AWGN) or ``CN(0, 1)`` (Rayleigh fast fading,
known at the receiver). Symbols have unit mean energy, so with ``N0 = sigma**2``
and ``Eb = 1 / (R M)`` one gets ``sigma**2 = 1 / (R M Eb/N0)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterator, NamedTuple

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .constellation import ConfigurationError, Constellation

LN2 = np.log(2.0)
BLOCK = 1 << 16


class Fading(enum.Enum):
    NONE = "awgn"
    RAYLEIGH = "rayleigh"

    @classmethod
    def parse(cls, value: "Fading | str | None") -> "Fading":
        if isinstance(value, Fading):
            return value
        if value is None:
            return cls.NONE
        key = str(value).strip().lower()
        for f in cls:
            if f.value == key or f.name.lower() == key:
                return f
        if key in ("fading", "rayleighperfectcsi"):
            return cls.RAYLEIGH
        raise ConfigurationError(f"unknown channel {value!r}; expected 'awgn' or 'rayleigh'")


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    constellation: Constellation
    fading: Fading = Fading.NONE
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "fading", Fading.parse(self.fading))

    def with_sigma(self, sigma: float) -> "ChannelSpec":
        return replace(self, sigma=float(sigma))


@dataclass(frozen=True, eq=False)
class ChannelObservation:
    y: complex | np.ndarray
    a: complex | np.ndarray


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def complex_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` draws of CN(0, 1)."""
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(0.5)


def sample_output(spec: ChannelSpec, symbol_index, rng) -> ChannelObservation:
    """Pass symbol index (or array of indices) through the channel."""
    rng = as_generator(rng)
    idx = np.asarray(symbol_index)
    n = idx.size
    x = spec.constellation.symbols[idx.ravel()]
    if spec.fading is Fading.RAYLEIGH:
        a = complex_normal(rng, n)
    else:
        a = np.ones(n, dtype=complex)
    y = a * x + spec.sigma * complex_normal(rng, n)
    if idx.ndim == 0:
        return ChannelObservation(complex(y[0]), complex(a[0]))
    return ChannelObservation(y.reshape(idx.shape), a.reshape(idx.shape))


# ---------------------------------------------------------------------------
# Eb/N0 conversions


def ebn0_to_sigma(ebn0_db: float, rate: float, bits_per_symbol: int) -> float:
    if not rate > 0 or rate > 1:
        raise ConfigurationError(f"code rate must lie in (0, 1], got {rate}")
    if not bits_per_symbol >= 1:
        raise ConfigurationError(f"bits per symbol must be >= 1, got {bits_per_symbol}")
    return float(1.0 / np.sqrt(rate * bits_per_symbol * 10.0 ** (ebn0_db / 10.0)))


def sigma_to_ebn0(sigma: float, rate: float, bits_per_symbol: int) -> float:
    if not rate > 0 or rate > 1:
        raise ConfigurationError(f"code rate must lie in (0, 1], got {rate}")
    if not bits_per_symbol >= 1:
        raise ConfigurationError(f"bits per symbol must be >= 1, got {bits_per_symbol}")
    return float(-10.0 * np.log10(rate * bits_per_symbol * sigma**2))


# ---------------------------------------------------------------------------
# Monte-Carlo sample sets with common random numbers


@dataclass(frozen=True, eq=False)
class ChannelDraws:
    """Symbols, unit-variance noise and fading for one block of channel uses.

    The noisy output at any ``sigma`` is ``a * x + sigma * z``; evaluating
    several noise levels on the same draws gives common random numbers.
    """

    symbols: np.ndarray
    noise: np.ndarray
    fading: np.ndarray

    def __len__(self) -> int:
        return self.symbols.size

    def outputs(self, c: Constellation, sigma: float) -> np.ndarray:
        return self.fading * c.symbols[self.symbols] + sigma * self.noise


def draw_channel(c: Constellation, fading: Fading, n: int, rng) -> ChannelDraws:
    rng = as_generator(rng)
    symbols = rng.integers(0, c.size, size=n)
    noise = complex_normal(rng, n)
    if Fading.parse(fading) is Fading.RAYLEIGH:
        a = complex_normal(rng, n)
    else:
        a = np.ones(n, dtype=complex)
    return ChannelDraws(symbols, noise, a)


class SampleBank:
    """A reproducible, block-structured stream of channel draws.

    Block ``b`` always comes from the ``b``-th child of ``SeedSequence(seed)``,
    so results do not depend on how blocks are consumed. Small banks are kept
    in memory; large ones are regenerated on every pass.
    """

    cache_limit = 4_000_000

    def __init__(self, c: Constellation, fading, n_samples: int, seed=0, block: int = BLOCK):
        if n_samples < 1:
            raise ConfigurationError("n_samples must be positive")
        self.constellation = c
        self.fading = Fading.parse(fading)
        self.n_samples = int(n_samples)
        self.block = int(block)
        self.seed = seed
        nblocks = -(-self.n_samples // self.block)
        self._seeds = np.random.SeedSequence(seed).spawn(nblocks)
        self._cache: list[ChannelDraws] | None = None
        if self.n_samples <= self.cache_limit:
            self._cache = list(self._generate())

    def _generate(self) -> Iterator[ChannelDraws]:
        left = self.n_samples
        for ss in self._seeds:
            n = min(self.block, left)
            left -= n
            yield draw_channel(self.constellation, self.fading, n, np.random.default_rng(ss))

    def __iter__(self) -> Iterator[ChannelDraws]:
        if self._cache is not None:
            return iter(self._cache)
        return self._generate()

    def child_rng(self, salt: int) -> np.random.Generator:
        """An auxiliary generator independent of the channel draws."""
        ss = np.random.SeedSequence(self._seeds[0].entropy, spawn_key=(10_000 + salt,))
        return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# Per-axis machinery. For square QAM with circular noise and perfect CSI the
# derotated output  conj(a)/|a| * y = |a| x + z'  factorizes over I and Q.


def equalize(c: Constellation, draws: ChannelDraws, sigma: float):
    """Return per-axis observations ``r`` (n, 2), gains ``g`` (n,), true levels (n, 2)."""
    g = np.abs(draws.fading)
    rot = np.conj(draws.fading) / np.where(g > 0, g, 1.0)
    yt = g * c.symbols[draws.symbols] + sigma * rot * draws.noise
    r = np.stack([yt.real, yt.imag], axis=1)
    return r, g, c.level_index[draws.symbols]


def axis_metrics(c: Constellation, r: np.ndarray, g: np.ndarray, sigma: float) -> np.ndarray:
    """Log-likelihoods (up to a constant) of every amplitude level, shape (n, 2, K)."""
    d = r[:, :, None] - g[:, None, None] * c.levels[None, None, :]
    return -(d * d) / sigma**2


def symbol_metrics(c: Constellation, y, a, sigma: float) -> np.ndarray:
    """Full-constellation log-likelihoods ``-|y - a x|^2 / sigma^2``, shape (n, 2^M)."""
    y = np.atleast_1d(y)
    a = np.broadcast_to(np.atleast_1d(a), y.shape)
    d = y[:, None] - a[:, None] * c.symbols[None, :]
    return -(d.real**2 + d.imag**2) / sigma**2


def entropy_terms(c: Constellation, draws: ChannelDraws, sigma: float) -> np.ndarray:
    """Per-sample ``-log2 p(x | y, a)`` under uniform input, in bits."""
    r, g, lvl = equalize(c, draws, sigma)
    met = axis_metrics(c, r, g, sigma)
    true = np.take_along_axis(met, lvl[:, :, None], axis=2)[..., 0]
    return (logsumexp(met, axis=2) - true).sum(axis=1) / LN2


def entropy_terms_full(c: Constellation, draws: ChannelDraws, sigma: float) -> np.ndarray:
    """Same as :func:`entropy_terms`, summing over the whole constellation."""
    y = draws.outputs(c, sigma)
    met = symbol_metrics(c, y, draws.fading, sigma)
    true = met[np.arange(len(draws)), draws.symbols]
    return (logsumexp(met, axis=1) - true) / LN2


def _mean_and_stderr(chunks: list[np.ndarray]) -> Estimate:
    v = np.concatenate(chunks)
    return Estimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)))


class EntropyCurve:
    """Normalized conditional entropy ``alpha(sigma) = H(X|Y) / M`` on fixed draws.

    Because the draws are shared across noise levels, ``alpha`` is a smooth,
    deterministic, increasing function of ``sigma`` and can be inverted by
    root finding.
    """

    def __init__(self, c: Constellation, fading, n_samples: int = 10**6, seed=0):
        self.constellation = c
        self.fading = Fading.parse(fading)
        self.bank = SampleBank(c, self.fading, n_samples, seed)

    def estimate(self, sigma: float) -> Estimate:
        m = self.constellation.bits_per_symbol
        chunks = [entropy_terms(self.constellation, d, sigma) / m for d in self.bank]
        return _mean_and_stderr(chunks)

    def alpha(self, sigma: float) -> float:
        return self.estimate(sigma).value

    def sigma_for(self, alpha: float, rtol: float = 1e-4) -> float:
        if not 0.0 < alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
        lo, hi = 0.05, 1.0
        while self.alpha(lo) > alpha:
            lo /= 2.0
        while self.alpha(hi) < alpha:
            hi *= 2.0
            if hi > 1e6:
                raise ConfigurationError(f"alpha={alpha} is not reachable on these draws")
        f = lambda t: self.alpha(np.exp(t)) - alpha  # noqa: E731
        t = brentq(f, np.log(lo), np.log(hi), xtol=rtol / 4, rtol=1e-12)
        return float(np.exp(t))


def channel_entropy_alpha(spec: ChannelSpec, n_samples: int = 10**6, rng=None) -> Estimate:
    """Monte-Carlo estimate of ``H(X|Y)/M`` (conditioned on fading) with its standard error."""
    if n_samples < 10**4:
        raise ConfigurationError("channel_entropy_alpha needs at least 1e4 samples")
    rng = as_generator(rng)
    c = spec.constellation
    chunks = []
    left = n_samples
    while left > 0:
        n = min(BLOCK, left)
        left -= n
        d = draw_channel(c, spec.fading, n, rng)
        chunks.append(entropy_terms(c, d, spec.sigma) / c.bits_per_symbol)
    return _mean_and_stderr(chunks)


def alpha_to_sigma(template: ChannelSpec, alpha: float, n_samples: int = 10**6, seed=0) -> float:
    """Noise level at which the normalized channel entropy equals ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    curve = EntropyCurve(template.constellation, template.fading, n_samples, seed)
    return curve.sigma_for(alpha)
