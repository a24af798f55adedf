"""GEXIT functionals, BP-GEXIT curves and area thresholds for BICM.

The channel parameter is the normalized entropy ``alpha = H(X|Y) / M``. For a
set of independent per-bit extrinsic LLRs ``V_m`` (drawn from the decoder's
densities) the symbol prior is ``u(x) = prod_m P(B_m = b_m(x) | V_m)`` and

    g = dE[h_u] / dE[h_0],   h_u = log2( sum_x' u(x') p(y|x') / (u(x) p(y|x)) ),

where ``h_0`` uses the uniform prior, so ``E[h_0] / M = alpha``. Both
derivatives are taken in ``sigma`` by central differences on common random
numbers, which makes the ratio the derivative with respect to ``alpha``.
Likelihoods are always those of the true channel; only the extrinsic
densities depend on the demapper used in DE.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

from .channel import (
    LN2,
    ChannelSpec,
    EntropyCurve,
    Estimate,
    Fading,
    SampleBank,
    as_generator,
    axis_metrics,
    equalize,
)
from .constellation import ConfigurationError, Constellation
from .de_coupled import ScEnsemble, ScState, check_side, sc_de_step, sc_initial_state
from .de_flat import DemapperChannel, DeSchedule, DeState, de_fixed_point
from .demapper import DemapperSampler, _prior_sum, log_bit_probs, sample_llrs, signed
from .density import DEFAULT_GRID, DegreeProfile, Grid, LlrDensity, apply_profile, var_power

MIN_SAMPLES = 10**4


@dataclass(frozen=True, eq=False)
class ExtrinsicProductDensity:
    """Independent per-bit extrinsic LLR densities, one per label bit."""

    per_bit: tuple[LlrDensity, ...]

    @classmethod
    def uniform(cls, a: LlrDensity, bits: int) -> "ExtrinsicProductDensity":
        return cls(tuple([a] * bits))

    @property
    def bits(self) -> int:
        return len(self.per_bit)

    def all_at(self, cell: int) -> bool:
        return all(d.pmf[cell] == 1.0 for d in self.per_bit)

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Correct-sign LLRs (positive favors the true bit) from uniforms ``u`` (n, M)."""
        return np.stack([sample_llrs(d, u[:, m]) for m, d in enumerate(self.per_bit)], axis=1)


def _entropy_terms_with_prior(c: Constellation, draws, sigma: float, lu: np.ndarray | None) -> np.ndarray:
    """Per-sample ``h_u`` in bits using the per-axis factorization (``lu`` is (n, 2, K) or None)."""
    r, g, lvl = equalize(c, draws, sigma)
    met = axis_metrics(c, r, g, sigma)
    if lu is not None:
        met = met + lu
    true = np.take_along_axis(met, lvl[:, :, None], axis=2)[..., 0]
    return (logsumexp(met, axis=2) - true).sum(axis=1) / LN2


def _level_log_prior(c: Constellation, actual_llrs: np.ndarray) -> np.ndarray:
    lp0, lp1 = log_bit_probs(actual_llrs)
    out = np.empty((actual_llrs.shape[0], 2, 1 << c.bits_per_axis))
    for ax in range(2):
        bits = list(c.axis_bits(ax))
        out[:, ax, :] = _prior_sum(c.axis_labels, lp0[:, bits], lp1[:, bits])
    return out


class GexitEstimator:
    """Fixed draws (channel and extrinsic uniforms) for GEXIT evaluations."""

    def __init__(self, c: Constellation, fading, n_samples: int = 10**6, seed=0, rel_step: float = 1e-3):
        if n_samples < MIN_SAMPLES:
            raise ConfigurationError(f"GEXIT estimates need at least {MIN_SAMPLES} samples")
        self.constellation = c
        self.fading = Fading.parse(fading)
        self.rel_step = rel_step
        self.bank = SampleBank(c, self.fading, n_samples, seed)
        rng = self.bank.child_rng(1)
        self._uniforms = [rng.random((len(d), c.bits_per_symbol)) for d in self.bank]
        self._h0: dict[float, list[np.ndarray]] = {}

    def _uniform_differences(self, sigma: float) -> list[np.ndarray]:
        if sigma not in self._h0:
            lo, hi = sigma * (1 - self.rel_step), sigma * (1 + self.rel_step)
            c = self.constellation
            self._h0 = {
                sigma: [
                    _entropy_terms_with_prior(c, d, hi, None) - _entropy_terms_with_prior(c, d, lo, None)
                    for d in self.bank
                ]
            }
        return self._h0[sigma]

    def functional(self, ext: ExtrinsicProductDensity, sigma: float) -> Estimate:
        """``G(ext; alpha(sigma))`` with a batch-means standard error."""
        c = self.constellation
        if ext.bits != c.bits_per_symbol:
            raise ConfigurationError("one extrinsic density per label bit is required")
        grid = ext.per_bit[0].grid
        if ext.all_at(grid.zero):
            return Estimate(1.0, 0.0)
        if ext.all_at(grid.size - 1):
            return Estimate(0.0, 0.0)
        lo, hi = sigma * (1 - self.rel_step), sigma * (1 + self.rel_step)
        d0 = self._uniform_differences(sigma)
        nums, dens, sizes = [], [], []
        for d, u, dh0 in zip(self.bank, self._uniforms, d0):
            lu = _level_log_prior(c, signed(ext.sample(u), c, d.symbols))
            dh = _entropy_terms_with_prior(c, d, hi, lu) - _entropy_terms_with_prior(c, d, lo, lu)
            nums.append(dh.mean())
            dens.append(dh0.mean())
            sizes.append(len(d))
        w = np.asarray(sizes, dtype=float)
        nums, dens = np.asarray(nums), np.asarray(dens)
        g = float(np.dot(w, nums) / np.dot(w, dens))
        if len(w) < 2:
            return Estimate(g, float("nan"))
        resid = (nums - g * dens) / np.dot(w, dens) * w.sum()
        se = float(np.sqrt(np.average((resid - np.average(resid, weights=w)) ** 2, weights=w) / (len(w) - 1)))
        return Estimate(g, se)


def gexit_functional(
    ext: ExtrinsicProductDensity, spec: ChannelSpec, n_samples: int = 10**6, rng=None
) -> Estimate:
    """One-shot GEXIT functional at the noise level of ``spec``."""
    seed = int(as_generator(rng).integers(2**63))
    est = GexitEstimator(spec.constellation, spec.fading, n_samples, seed)
    return est.functional(ext, spec.sigma)


@dataclass(frozen=True)
class GexitCurve:
    """Sampled ``(alpha, g)`` pairs with standard errors; ``converged`` flags DE fixed points reached within budget."""

    alpha: np.ndarray
    g: np.ndarray
    stderr: np.ndarray
    converged: np.ndarray = field(default=None)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        g = np.asarray(self.g, dtype=float)
        se = np.asarray(self.stderr, dtype=float)
        conv = np.ones(a.size, dtype=bool) if self.converged is None else np.asarray(self.converged, dtype=bool)
        if not (a.shape == g.shape == se.shape == conv.shape):
            raise ValueError("curve columns must have equal length")
        if a.size and np.any(np.diff(a) <= 0):
            raise ValueError("alphas must be strictly increasing")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "stderr", se)
        object.__setattr__(self, "converged", conv)

    def __len__(self) -> int:
        return self.alpha.size

    def area(self, lower: float = 0.0) -> float:
        """Trapezoid integral of ``g`` over ``[lower, 1]`` (zero below the first sample)."""
        a, g = self.alpha, self.g
        keep = a >= lower
        aa, gg = a[keep], g[keep]
        if aa.size and aa[0] > lower:
            prev = np.flatnonzero(~keep)
            if prev.size:
                j = prev[-1]
                g_low = g[j] + (g[j + 1] - g[j]) * (lower - a[j]) / (a[j + 1] - a[j])
                aa, gg = np.r_[lower, aa], np.r_[g_low, gg]
        return float(trapezoid(gg, aa)) if aa.size > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.tolist(),
            "g": self.g.tolist(),
            "stderr": self.stderr.tolist(),
            "converged": self.converged.tolist(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GexitCurve":
        return cls(
            np.asarray(d["alpha"], dtype=float),
            np.asarray(d["g"], dtype=float),
            np.asarray(d["stderr"], dtype=float),
            np.asarray(d.get("converged", [True] * len(d["alpha"])), dtype=bool),
            dict(d.get("metadata", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class AreaThresholdError(ValueError):
    """The curve does not enclose enough area to reach the requested rate."""


def area_threshold(curve: GexitCurve, design_rate: float) -> float:
    """Largest ``alpha_bar`` with ``integral_{alpha_bar}^1 g = design_rate``.

    Integrates the trapezoid rule from the top of the curve downward and solves
    the quadratic for the crossing inside the first segment that reaches the
    rate (``g`` is linear on each segment).
    """
    if not 0.0 <= design_rate <= 1.0:
        raise ConfigurationError("design rate must lie in [0, 1]")
    if design_rate == 0.0:
        return 1.0
    a, g = curve.alpha, curve.g
    if a.size < 2 or a[-1] < 1.0 - 1e-12:
        raise AreaThresholdError("the curve must extend to alpha = 1")
    acc = 0.0
    for j in range(a.size - 1, 0, -1):
        a0, a1, g0, g1 = a[j - 1], a[j], g[j - 1], g[j]
        seg = 0.5 * (g0 + g1) * (a1 - a0)
        if acc + seg >= design_rate:
            need = design_rate - acc
            # area of [t, a1] with g linear: solve for t
            slope = (g1 - g0) / (a1 - a0)
            # integral_t^{a1} (g1 - slope (a1 - s)) ds = g1 d - slope d^2 / 2,  d = a1 - t
            if abs(slope) < 1e-14:
                d = need / g1
            else:
                disc = g1 * g1 - 2.0 * slope * need
                d = (g1 - np.sqrt(max(disc, 0.0))) / slope
            return float(a1 - d)
        acc += seg
    raise AreaThresholdError(f"curve area {acc:.6f} is below the design rate {design_rate}")


# ---------------------------------------------------------------------------
# BP-GEXIT curves


@dataclass
class CurveSettings:
    de_samples: int = 2 * 10**6
    gexit_samples: int = 10**6
    entropy_samples: int = 10**6
    seed: int = 0
    refine_tol: float = 2e-4
    schedule: DeSchedule = field(default_factory=lambda: DeSchedule(max_iters=5000))
    grid: Grid = DEFAULT_GRID


class _FlatTracer:
    def __init__(self, profile: DegreeProfile, sampler: DemapperSampler, kind, settings: CurveSettings):
        self.profile = profile
        self.sampler = sampler
        self.kind = kind
        self.s = settings

    def fixed_point(self, sigma: float, warm: DeState | None):
        ch = DemapperChannel(self.sampler, self.kind, sigma)
        fp = de_fixed_point(self.profile, ch, self.s.schedule, warm, grid=self.s.grid)
        return fp

    def extrinsic(self, state: DeState, bits: int) -> list[ExtrinsicProductDensity]:
        x = apply_profile(self.profile, "rho", state.avg)
        return [ExtrinsicProductDensity.uniform(apply_profile(self.profile, "L", x), bits)]


class _CoupledTracer:
    def __init__(self, e: ScEnsemble, sampler: DemapperSampler, kind, settings: CurveSettings):
        self.e = e
        self.sampler = sampler
        self.kind = kind
        self.s = settings

    def fixed_point(self, sigma: float, warm: ScState | None):
        ch = DemapperChannel(self.sampler, self.kind, sigma)
        sched = self.s.schedule
        state = sc_initial_state(self.e, ch, self.s.grid) if warm is None else ScState(warm.chain, 0, ())
        prev = state.error_probs().sum()
        for it in range(sched.max_iters):
            pe = state.error_probs()
            if pe.max() < sched.epsilon:
                return _Fp(state, True, True, it)
            if it and abs(prev - pe.sum()) < 1e-10 * self.e.positions:
                return _Fp(state, True, False, it)
            prev = pe.sum()
            state = sc_de_step(state, self.e, ch, sched)
        return _Fp(state, False, False, sched.max_iters)

    def extrinsic(self, state: ScState, bits: int) -> list[ExtrinsicProductDensity]:
        xs = check_side(self.e, state.chain)
        return [ExtrinsicProductDensity.uniform(var_power(x, self.e.dl), bits) for x in xs]


@dataclass
class _Fp:
    state: ScState
    converged: bool
    trivial: bool
    iterations: int


def bp_gexit_curve(
    ensemble: DegreeProfile | ScEnsemble,
    template: ChannelSpec,
    kind,
    alphas: Sequence[float],
    settings: CurveSettings | None = None,
) -> GexitCurve:
    """BP-GEXIT curve on the given alpha grid, swept downward with warm starts.

    Once DE reaches the trivial fixed point the sweep stops (lower alphas are
    exactly zero); the jump is then located by bisection on DE success to
    ``refine_tol`` in alpha. The analytic endpoint ``(1, 1)`` is appended.
    For a coupled chain ``g`` is the mean over positions.
    """
    s = settings or CurveSettings()
    c = template.constellation
    alphas = np.unique(np.asarray(alphas, dtype=float))
    if alphas.size == 0 or alphas[0] <= 0 or alphas[-1] >= 1:
        raise ConfigurationError("alpha grid must be nonempty and inside (0, 1)")
    seeds = np.random.SeedSequence(s.seed).spawn(3)
    seed_of = lambda ss: int(ss.generate_state(1)[0])  # noqa: E731
    ent = EntropyCurve(c, template.fading, s.entropy_samples, seed_of(seeds[0]))
    sampler = DemapperSampler(c, template.fading, s.de_samples, seed_of(seeds[1]), s.grid)
    est = GexitEstimator(c, template.fading, s.gexit_samples, seed_of(seeds[2]))
    if isinstance(ensemble, ScEnsemble):
        tracer = _CoupledTracer(ensemble, sampler, kind, s)
        rate = ensemble.design_rate
    else:
        tracer = _FlatTracer(ensemble, sampler, kind, s)
        rate = ensemble.design_rate

    def evaluate(state, sigma):
        exts = tracer.extrinsic(state, c.bits_per_symbol)
        vals = [est.functional(x, sigma) for x in exts]
        g = float(np.mean([v.value for v in vals]))
        se = float(np.sqrt(np.sum(np.square([v.stderr for v in vals]))) / len(vals))
        return g, se

    pts: dict[float, tuple[float, float, bool]] = {}
    warm = None
    last_nontrivial = None
    first_trivial = None
    for a in alphas[::-1]:
        sigma = ent.sigma_for(a)
        fp = tracer.fixed_point(sigma, warm)
        if fp.trivial:
            first_trivial = a
            break
        g, se = evaluate(fp.state, sigma)
        pts[a] = (g, se, fp.converged)
        warm = fp.state
        last_nontrivial = (a, fp.state)
    if first_trivial is not None:
        for a in alphas[alphas <= first_trivial]:
            pts[a] = (0.0, 0.0, True)
        if last_nontrivial is not None:
            lo, hi = first_trivial, last_nontrivial[0]
            hi_state = last_nontrivial[1]
            while hi - lo > s.refine_tol:
                mid = 0.5 * (lo + hi)
                sigma = ent.sigma_for(mid)
                fp = tracer.fixed_point(sigma, hi_state)
                if fp.trivial:
                    lo = mid
                else:
                    hi, hi_state = mid, fp.state
            sigma = ent.sigma_for(hi)
            fp = tracer.fixed_point(sigma, hi_state)
            g, se = evaluate(fp.state, sigma)
            pts[hi] = (g, se, fp.converged)
            pts[lo] = (0.0, 0.0, True)
    pts[1.0] = (1.0, 0.0, True)
    keys = sorted(pts)
    meta = {
        "ensemble": _describe(ensemble),
        "modulation": c.name,
        "channel": template.fading.value,
        "demapper": str(getattr(kind, "value", kind)),
        "design_rate": rate,
        "alpha_bp": None if first_trivial is None else float(first_trivial if last_nontrivial is None else lo),
    }
    return GexitCurve(
        np.array(keys),
        np.array([pts[k][0] for k in keys]),
        np.array([pts[k][1] for k in keys]),
        np.array([pts[k][2] for k in keys]),
        meta,
    )


def _describe(e) -> str:
    if isinstance(e, ScEnsemble):
        return f"({e.dl},{e.dr},{e.L},{e.w})"
    return e.describe()


__all__ = [
    "AreaThresholdError",
    "CurveSettings",
    "ExtrinsicProductDensity",
    "GexitCurve",
    "GexitEstimator",
    "area_threshold",
    "bp_gexit_curve",
    "gexit_functional",
]
