"""Quantized LLR densities and the node operations of density evolution.

A density lives on a uniform grid ``k * delta`` for ``|k| <= K`` (so the
largest finite LLR is ``K * delta``) plus two extra cells holding the mass at
``-inf`` and ``+inf``. The weight vector is laid out as::

    [ -inf | -K*delta ... 0 ... +K*delta | +inf ]

Variable-node convolution is an FFT convolution on the grid with overflow
folded into the outermost finite cells. Check-node convolution works in the
``(sign, log coth(|x|/2))`` domain, where the tanh rule becomes addition of
magnitudes and XOR of signs; magnitudes are binned on a uniform grid of step
``Grid.check_step`` and the sign group is handled by the ``p+ +/- p-``
transform.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy.special import ndtr

from .constellation import ConfigurationError


class GridMismatchError(ValueError):
    """Raised when densities on different grids are combined."""


@dataclass(frozen=True)
class Grid:
    half_cells: int = 2048
    llr_max: float = 30.0
    check_step: float = 1e-3

    def __post_init__(self):
        if self.half_cells < 1 or not self.llr_max > 0 or not self.check_step > 0:
            raise ConfigurationError(f"invalid grid {self}")

    @property
    def delta(self) -> float:
        return self.llr_max / self.half_cells

    @property
    def size(self) -> int:
        return 2 * self.half_cells + 3

    @property
    def zero(self) -> int:
        """Index of the LLR-0 cell in the weight vector."""
        return self.half_cells + 1

    @property
    def values(self) -> np.ndarray:
        return _grid_values(self)

    def quantize(self, llrs) -> np.ndarray:
        """Weight-vector indices of ``llrs`` (nearest cell, saturating at +/-llr_max)."""
        x = np.asarray(llrs, dtype=float)
        k = np.rint(np.clip(np.nan_to_num(x, posinf=0.0, neginf=0.0), -self.llr_max, self.llr_max) / self.delta)
        idx = k.astype(np.int64) + self.zero
        idx = np.where(np.isposinf(x), self.size - 1, idx)
        idx = np.where(np.isneginf(x), 0, idx)
        return idx


DEFAULT_GRID = Grid()


@lru_cache(maxsize=16)
def _grid_values(grid: Grid) -> np.ndarray:
    k = grid.half_cells
    v = np.concatenate(([-np.inf], np.arange(-k, k + 1) * grid.delta, [np.inf]))
    v.flags.writeable = False
    return v


def _logcoth_half(x: np.ndarray) -> np.ndarray:
    """``log coth(x/2)`` for ``x > 0``; the map is its own inverse."""
    with np.errstate(divide="ignore", over="ignore"):
        return np.log1p(2.0 / np.expm1(x))


class DeltaKind(enum.Enum):
    PLUS_INFINITY = "+inf"
    ZERO = "0"


@dataclass(frozen=True, eq=False)
class LlrDensity:
    """Probability mass on an LLR grid, conditioned on the all-zero codeword."""

    grid: Grid
    pmf: np.ndarray

    def __post_init__(self):
        p = np.array(self.pmf, dtype=float)
        if p.shape != (self.grid.size,):
            raise ValueError(f"pmf has shape {p.shape}, grid needs ({self.grid.size},)")
        p.flags.writeable = False
        object.__setattr__(self, "pmf", p)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_samples(cls, llrs, grid: Grid = DEFAULT_GRID, weights=None) -> "LlrDensity":
        idx = grid.quantize(np.ravel(llrs))
        w = None if weights is None else np.ravel(weights)
        p = np.bincount(idx, weights=w, minlength=grid.size).astype(float)
        return cls(grid, p / p.sum())

    @classmethod
    def gaussian(cls, mean: float, grid: Grid = DEFAULT_GRID, var: float | None = None) -> "LlrDensity":
        """Discretized ``N(mean, var)`` (``var = 2*mean`` by default, the symmetric case).

        Each cell receives the probability of its rounding interval; tails beyond
        the outermost cells fold into them.
        """
        var = 2.0 * mean if var is None else var
        k = grid.half_cells
        edges = (np.arange(-k, k + 2) - 0.5) * grid.delta
        edges[0], edges[-1] = -np.inf, np.inf
        cdf = ndtr((edges - mean) / np.sqrt(var))
        p = np.zeros(grid.size)
        p[1:-1] = np.diff(cdf)
        return cls(grid, p / p.sum())

    # -- scalar functionals -------------------------------------------------
    @property
    def mass(self) -> float:
        return float(self.pmf.sum())

    def error_prob(self) -> float:
        return error_prob(self)

    def mean(self) -> float:
        v = self.grid.values
        if self.pmf[0] > 0 or self.pmf[-1] > 0:
            return float(np.inf if self.pmf[-1] >= self.pmf[0] else -np.inf)
        return float(np.dot(self.pmf[1:-1], v[1:-1]))

    def entropy(self) -> float:
        """``E[log2(1 + exp(-L))]``, the conditional entropy of a symmetric density."""
        v = self.grid.values
        with np.errstate(over="ignore"):
            h = np.logaddexp(0.0, -v) / np.log(2.0)
        h[-1] = 0.0
        h[0] = np.inf if self.pmf[0] > 0 else 0.0
        return float(np.dot(self.pmf, np.where(self.pmf > 0, h, 0.0)))

    def symmetry_residual(self) -> float:
        """``sum_{x>0} |a(-x) - a(x) e^{-x}|``; zero for a symmetric density."""
        z = self.grid.zero
        k = self.grid.half_cells
        pos = self.pmf[z + 1 : z + k + 1]
        neg = self.pmf[z - 1 : 0 : -1]
        v = self.grid.values[z + 1 : z + k + 1]
        return float(np.abs(neg - pos * np.exp(-v)).sum())

    def allclose(self, other: "LlrDensity", atol: float = 1e-12) -> bool:
        _check_grid(self, other)
        return bool(np.allclose(self.pmf, other.pmf, rtol=0.0, atol=atol))

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "grid": {
                "half_cells": self.grid.half_cells,
                "llr_max": self.grid.llr_max,
                "check_step": self.grid.check_step,
            },
            "pmf": self.pmf.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "LlrDensity":
        return cls(Grid(**d["grid"]), np.asarray(d["pmf"], dtype=float))

    @classmethod
    def from_json(cls, s: str) -> "LlrDensity":
        return cls.from_dict(json.loads(s))


def delta_density(kind: DeltaKind | str, grid: Grid = DEFAULT_GRID) -> LlrDensity:
    """Unit mass at ``+inf`` (perfect knowledge) or at LLR 0 (no knowledge)."""
    kind = DeltaKind(kind.value if isinstance(kind, DeltaKind) else kind)
    p = np.zeros(grid.size)
    p[-1 if kind is DeltaKind.PLUS_INFINITY else grid.zero] = 1.0
    return LlrDensity(grid, p)


def error_prob(a: LlrDensity) -> float:
    """Mass below zero plus half the mass at zero."""
    z = a.grid.zero
    return float(a.pmf[:z].sum() + 0.5 * a.pmf[z])


def mix(densities: Sequence[LlrDensity], weights: Sequence[float] | None = None) -> LlrDensity:
    """Convex combination of densities on a common grid."""
    if len(densities) == 0:
        raise ValueError("nothing to mix")
    grid = densities[0].grid
    for d in densities[1:]:
        if d.grid != grid:
            raise GridMismatchError("cannot mix densities on different grids")
    stack = np.stack([d.pmf for d in densities])
    if weights is None:
        p = stack.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (len(densities),) or (w < 0).any() or not w.sum() > 0:
            raise ValueError("mixture weights must be nonnegative, one per density, with positive sum")
        p = w @ stack / w.sum()
    return LlrDensity(grid, p)


def _check_grid(a: LlrDensity, b: LlrDensity) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def _finish(grid: Grid, p: np.ndarray) -> LlrDensity:
    np.maximum(p, 0.0, out=p)
    return LlrDensity(grid, p / p.sum())


def _is_plus_inf(a: LlrDensity) -> bool:
    return a.pmf[-1] == 1.0


def _is_zero(a: LlrDensity) -> bool:
    return a.pmf[a.grid.zero] == 1.0


# ---------------------------------------------------------------------------
# Variable node: LLR addition


def _fold(grid: Grid, conv: np.ndarray, n: int, out: np.ndarray) -> None:
    """Fold an n-fold sum of finite cells into ``out`` (saturating)."""
    k = grid.half_cells
    lo = n * k - k
    hi = n * k + k
    out[1:-1] += conv[lo : hi + 1]
    out[1] += conv[:lo].sum()
    out[-2] += conv[hi + 1 :].sum()


def _inf_masses(parts) -> tuple[float, float, float]:
    """Masses of (+inf, -inf, conflict) for a sum of independent LLRs.

    ``parts`` yields ``(p_plus, p_minus, p_finite)`` per summand. A sum with
    both infinities is undetermined and goes to LLR 0. The recursion only
    multiplies and adds, so summands without infinite mass give exact zeros.
    """
    fin, plus, minus, conflict = 1.0, 0.0, 0.0, 0.0
    for p, m, t in parts:
        conflict += plus * m + minus * p
        plus, minus = plus * (p + t) + fin * p, minus * (m + t) + fin * m
        fin *= t
    return plus, minus, conflict


def _triple(a: LlrDensity) -> tuple[float, float, float]:
    return float(a.pmf[-1]), float(a.pmf[0]), float(a.pmf[1:-1].sum())


def var_power(a: LlrDensity, n: int) -> LlrDensity:
    """Density of the sum of ``n`` independent LLRs drawn from ``a``."""
    return _var_powers(a, [n])[n]


def _var_powers(a: LlrDensity, ns: Sequence[int]) -> dict[int, LlrDensity]:
    grid = a.grid
    out: dict[int, LlrDensity] = {}
    todo = []
    for n in set(ns):
        if n < 0:
            raise ValueError("power must be nonnegative")
        if n == 0:
            out[0] = delta_density(DeltaKind.ZERO, grid)
        elif n == 1:
            out[1] = a
        elif _is_plus_inf(a) or _is_zero(a):
            out[n] = a
        else:
            todo.append(n)
    if not todo:
        return out
    f = a.pmf[1:-1]
    p_inf, m_inf = a.pmf[-1], a.pmf[0]
    width = 2 * grid.half_cells
    nfft = sfft.next_fast_len(max(todo) * width + 1, real=True)
    spec = sfft.rfft(f, nfft)
    for n in todo:
        conv = sfft.irfft(_cpow(spec, n), nfft)[: n * width + 1]
        p = np.zeros(grid.size)
        _fold(grid, conv, n, p)
        plus, minus, conflict = _inf_masses([(p_inf, m_inf, f.sum())] * n)
        p[-1] += plus
        p[0] += minus
        p[grid.zero] += conflict
        out[n] = _finish(grid, p)
    return out


def var_conv(a: LlrDensity, b: LlrDensity) -> LlrDensity:
    """``a ⊛ b``: density of the sum of independent LLRs."""
    _check_grid(a, b)
    grid = a.grid
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    fa, fb = a.pmf[1:-1], b.pmf[1:-1]
    width = 2 * grid.half_cells
    length = 2 * width + 1
    nfft = sfft.next_fast_len(length, real=True)
    conv = sfft.irfft(sfft.rfft(fa, nfft) * sfft.rfft(fb, nfft), nfft)[:length]
    p = np.zeros(grid.size)
    _fold(grid, conv, 2, p)
    plus, minus, conflict = _inf_masses([_triple(a), _triple(b)])
    p[-1] += plus
    p[0] += minus
    p[grid.zero] += conflict
    return _finish(grid, p)


def var_conv_power(c: LlrDensity, x: LlrDensity, n: int) -> LlrDensity:
    """``c ⊛ x^{⊛n}`` with a single transform round."""
    _check_grid(c, x)
    if n == 0 or _is_zero(x):
        return c
    if _is_zero(c):
        return var_power(x, n)
    grid = c.grid
    fc, fx = c.pmf[1:-1], x.pmf[1:-1]
    width = 2 * grid.half_cells
    length = (n + 1) * width + 1
    nfft = sfft.next_fast_len(length, real=True)
    conv = sfft.irfft(sfft.rfft(fc, nfft) * _cpow(sfft.rfft(fx, nfft), n), nfft)[:length]
    p = np.zeros(grid.size)
    _fold(grid, conv, n + 1, p)
    plus, minus, conflict = _inf_masses([_triple(c)] + [_triple(x)] * n)
    p[-1] += plus
    p[0] += minus
    p[grid.zero] += conflict
    return _finish(grid, p)


# ---------------------------------------------------------------------------
# Check node: tanh rule via the (sign, log coth) domain


@lru_cache(maxsize=16)
def _check_input_bins(grid: Grid) -> tuple[np.ndarray, int]:
    k = grid.half_cells
    mags = np.arange(1, k + 1) * grid.delta
    bins = np.maximum(1, np.rint(_logcoth_half(mags) / grid.check_step)).astype(np.int64)
    bins.flags.writeable = False
    return bins, int(bins.max()) + 1


@lru_cache(maxsize=64)
def _check_output_index(grid: Grid, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Weight-vector targets for magnitude bins ``0..length-1`` with positive / negative sign."""
    k = grid.half_cells
    y = np.arange(length) * grid.check_step
    mag = np.zeros(length, dtype=np.int64)
    mag[1:] = np.minimum(k, np.rint(_logcoth_half(y[1:]) / grid.delta)).astype(np.int64)
    pos = grid.zero + mag
    neg = grid.zero - mag
    pos[0] = grid.size - 1
    neg[0] = 0
    pos.flags.writeable = False
    neg.flags.writeable = False
    return pos, neg


def _to_check_domain(a: LlrDensity) -> tuple[np.ndarray, float]:
    """Return stacked (p_plus + p_minus, p_plus - p_minus) over magnitude bins, and mass at 0."""
    grid = a.grid
    k = grid.half_cells
    bins, ny = _check_input_bins(grid)
    z = grid.zero
    p = a.pmf
    pos = np.bincount(bins, weights=p[z + 1 : z + k + 1], minlength=ny)
    neg = np.bincount(bins, weights=p[z - 1 : 0 : -1], minlength=ny)
    pos[0] += p[-1]
    neg[0] += p[0]
    return np.stack([pos + neg, pos - neg]), float(p[z])


def _cpow(x: np.ndarray, n: int) -> np.ndarray:
    result = None
    base = x
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return np.ones_like(x) if result is None else result


def _from_check_domain(grid: Grid, q: np.ndarray, zero_mass: float) -> LlrDensity:
    length = q.shape[1]
    pos_idx, neg_idx = _check_output_index(grid, length)
    qp = 0.5 * (q[0] + q[1])
    qn = 0.5 * (q[0] - q[1])
    np.maximum(qp, 0.0, out=qp)
    np.maximum(qn, 0.0, out=qn)
    p = np.bincount(pos_idx, weights=qp, minlength=grid.size)
    p += np.bincount(neg_idx, weights=qn, minlength=grid.size)
    p[grid.zero] += zero_mass
    return _finish(grid, p)


def chk_poly(a: LlrDensity, coeffs: dict[int, float]) -> LlrDensity:
    """``sum_n c_n a^{⊞n}`` computed with one forward and one inverse transform."""
    grid = a.grid
    coeffs = {int(n): float(c) for n, c in coeffs.items() if c != 0.0}
    if not coeffs:
        raise ConfigurationError("empty check polynomial")
    total = sum(coeffs.values())
    if _is_plus_inf(a) or _is_zero(a):
        if _is_zero(a):
            w0 = coeffs.get(0, 0.0)
            p = np.zeros(grid.size)
            p[grid.zero] = total - w0
            p[-1] = w0
            return LlrDensity(grid, p / total)
        return a
    if list(coeffs) == [1]:
        return a
    g, e = _to_check_domain(a)
    ny = g.shape[1]
    nmax = max(coeffs)
    length = nmax * (ny - 1) + 1
    nfft = sfft.next_fast_len(length, real=True)
    spec = sfft.rfft(g, nfft, axis=1)
    acc = np.zeros_like(spec)
    zero_mass = 0.0
    for n, c in sorted(coeffs.items()):
        acc += (c / total) * _cpow(spec, n)
        zero_mass += (c / total) * (1.0 - (1.0 - e) ** n)
    q = sfft.irfft(acc, nfft, axis=1)[:, :length]
    # bin 0 holds the infinite magnitudes; set it exactly so FFT roundoff
    # never turns finite inputs into mass at +/-inf
    q[:, 0] = sum((c / total) * g[:, 0] ** n for n, c in coeffs.items())
    return _from_check_domain(grid, q, zero_mass)


def chk_power(a: LlrDensity, n: int) -> LlrDensity:
    """``a^{⊞n}``; ``n = 0`` gives the identity ``Δ_{+inf}``."""
    if n == 0:
        return delta_density(DeltaKind.PLUS_INFINITY, a.grid)
    return chk_poly(a, {n: 1.0})


def chk_conv(a: LlrDensity, b: LlrDensity) -> LlrDensity:
    """``a ⊞ b``: density of ``2 atanh(tanh(x/2) tanh(y/2))``."""
    _check_grid(a, b)
    if _is_plus_inf(a):
        return b
    if _is_plus_inf(b):
        return a
    grid = a.grid
    ga, ea = _to_check_domain(a)
    gb, eb = _to_check_domain(b)
    ny = ga.shape[1]
    length = 2 * (ny - 1) + 1
    nfft = sfft.next_fast_len(length, real=True)
    spec = sfft.rfft(ga, nfft, axis=1) * sfft.rfft(gb, nfft, axis=1)
    q = sfft.irfft(spec, nfft, axis=1)[:, :length]
    q[:, 0] = ga[:, 0] * gb[:, 0]
    return _from_check_domain(grid, q, 1.0 - (1.0 - ea) * (1.0 - eb))


# ---------------------------------------------------------------------------
# Degree profiles


def _coeff_array(coeffs) -> np.ndarray:
    if isinstance(coeffs, dict):
        n = max(coeffs) + 1 if coeffs else 0
        arr = np.zeros(n)
        for d, c in coeffs.items():
            arr[int(d)] = c
    else:
        arr = np.asarray(coeffs, dtype=float)
    return arr


@dataclass(frozen=True, eq=False)
class DegreeProfile:
    """Edge-perspective degree distributions; ``coeffs[i]`` is the weight of degree ``i``."""

    lambda_coeffs: np.ndarray
    rho_coeffs: np.ndarray

    def __post_init__(self):
        for name in ("lambda_coeffs", "rho_coeffs"):
            arr = _coeff_array(getattr(self, name))
            if arr.size == 0 or arr.sum() <= 0 or (arr < 0).any():
                raise ConfigurationError(f"{name} must be a nonempty nonnegative profile")
            if abs(arr.sum() - 1.0) > 1e-9:
                raise ConfigurationError(f"{name} must sum to 1, got {arr.sum()}")
            if arr[0] != 0:
                raise ConfigurationError(f"{name} has weight on degree 0")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def regular(cls, dl: int, dr: int) -> "DegreeProfile":
        return cls({dl: 1.0}, {dr: 1.0})

    @property
    def L_coeffs(self) -> np.ndarray:
        deg = np.arange(self.lambda_coeffs.size)
        w = np.divide(self.lambda_coeffs, deg, out=np.zeros_like(self.lambda_coeffs), where=deg > 0)
        return w / w.sum()

    @property
    def design_rate(self) -> float:
        deg_l = np.arange(1, self.lambda_coeffs.size)
        deg_r = np.arange(1, self.rho_coeffs.size)
        int_l = np.sum(self.lambda_coeffs[1:] / deg_l)
        int_r = np.sum(self.rho_coeffs[1:] / deg_r)
        return float(1.0 - int_r / int_l)

    def describe(self) -> str:
        nz = lambda a: {int(i): float(a[i]) for i in np.flatnonzero(a)}  # noqa: E731
        return f"lambda={nz(self.lambda_coeffs)} rho={nz(self.rho_coeffs)}"


def apply_profile(profile: DegreeProfile, which: str, a: LlrDensity) -> LlrDensity:
    """Apply ``lambda`` (⊛, degree-1 fold), ``rho`` (⊞, degree-1 fold) or ``L`` (⊛, degree fold)."""
    which = which.lower() if which != "L" else "L"
    if which == "lambda":
        terms = {int(i) - 1: float(c) for i, c in enumerate(profile.lambda_coeffs) if c > 0}
        op = "var"
    elif which == "L":
        terms = {int(i): float(c) for i, c in enumerate(profile.L_coeffs) if c > 0}
        op = "var"
    elif which == "rho":
        terms = {int(i) - 1: float(c) for i, c in enumerate(profile.rho_coeffs) if c > 0}
        op = "chk"
    else:
        raise ConfigurationError(f"unknown profile component {which!r}")
    if not terms:
        raise ConfigurationError("empty degree profile")
    if op == "chk":
        return chk_poly(a, terms)
    powers = _var_powers(a, list(terms))
    if len(terms) == 1:
        return powers[next(iter(terms))]
    return mix([powers[n] for n in terms], list(terms.values()))
