"""Density evolution for uncoupled LDPC ensembles over BICM channels.

The decoder-side recursion is the usual one; the channel enters through the
per-bit demapper densities ``phi_m``. With non-iterative detection these are
computed once with no a-priori input. With iterative detection (BICM-ID)
they are refreshed every ``period`` iterations from ``L(rho(a))``, the
decoder's extrinsic output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .channel import ChannelSpec, ebn0_to_sigma, sigma_to_ebn0
from .constellation import ConfigurationError
from .demapper import DemapperKind, DemapperSampler
from .density import (
    DEFAULT_GRID,
    DegreeProfile,
    DeltaKind,
    Grid,
    LlrDensity,
    apply_profile,
    delta_density,
    mix,
    var_conv,
)


class ScheduleMode(enum.Enum):
    NON_ITERATIVE = "non-iterative"
    ID = "id"


@dataclass(frozen=True)
class DeSchedule:
    """When the demapper is re-run, and when DE stops."""

    mode: ScheduleMode = ScheduleMode.NON_ITERATIVE
    period: int = 1
    max_iters: int = 2000
    epsilon: float = 1e-7
    stall_window: int = 100
    stall_tol: float = 1e-7

    def __post_init__(self):
        if self.period < 1:
            raise ConfigurationError("the demapper update period must be at least 1")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be positive")

    @classmethod
    def non_iterative(cls, **kw) -> "DeSchedule":
        return cls(ScheduleMode.NON_ITERATIVE, 1, **kw)

    @classmethod
    def iterative(cls, period: int, **kw) -> "DeSchedule":
        return cls(ScheduleMode.ID, period, **kw)

    def refresh_due(self, iteration: int) -> bool:
        """Whether the demapper densities are recomputed before ``iteration``."""
        return self.mode is ScheduleMode.ID and iteration > 0 and iteration % self.period == 0

    def stalled(self, history: Sequence[float]) -> bool:
        """True when the error probability stopped falling over the stall window.

        With iterative detection the window covers two demapper refreshes.
        """
        w = self.stall_window
        if self.mode is ScheduleMode.ID:
            w = max(w, 2 * self.period + 1)
        if len(history) <= w:
            return False
        old, new = history[-1 - w], history[-1]
        return old - new <= self.stall_tol * max(new, self.epsilon)


class BitChannel(Protocol):
    """Anything that maps an incoming a-priori density to per-bit output densities."""

    bits: int

    def densities(self, incoming: LlrDensity | None) -> list[LlrDensity]: ...


class DemapperChannel:
    """``phi_m(.; sigma)`` backed by a fixed Monte-Carlo sample set."""

    def __init__(self, sampler: DemapperSampler, kind, sigma: float):
        self.sampler = sampler
        self.kind = DemapperKind.parse(kind)
        self.sigma = float(sigma)
        self.bits = sampler.constellation.bits_per_symbol
        self._no_prior: list[LlrDensity] | None = None

    def densities(self, incoming: LlrDensity | None) -> list[LlrDensity]:
        if incoming is None or incoming.pmf[incoming.grid.zero] == 1.0:
            if self._no_prior is None:
                self._no_prior = self.sampler.densities(self.kind, self.sigma, None)
            return self._no_prior
        return self.sampler.densities(self.kind, self.sigma, incoming)


class FixedChannel:
    """A channel whose output densities do not depend on a-priori input."""

    def __init__(self, per_bit: Sequence[LlrDensity]):
        self.per_bit = list(per_bit)
        self.bits = len(self.per_bit)

    def densities(self, incoming: LlrDensity | None) -> list[LlrDensity]:
        return self.per_bit


@dataclass(frozen=True)
class DeState:
    per_bit: tuple[LlrDensity, ...]
    avg: LlrDensity
    iteration: int = 0
    channel: tuple[LlrDensity, ...] = field(default=(), repr=False)

    @property
    def error_prob(self) -> float:
        return self.avg.error_prob()


def initial_state(channel: BitChannel, grid: Grid = DEFAULT_GRID) -> DeState:
    """Start from the intrinsic demapper output ``phi_m(Delta_0)``."""
    phis = tuple(channel.densities(delta_density(DeltaKind.ZERO, grid)))
    return DeState(phis, mix(phis), 0, phis)


def de_step(state: DeState, profile: DegreeProfile, channel: BitChannel, schedule: DeSchedule) -> DeState:
    """``a_m <- phi_m(L(rho(a))) ⊛ lambda(rho(a))`` and ``a = mean_m a_m``."""
    x = apply_profile(profile, "rho", state.avg)
    phis = state.channel or tuple(channel.densities(None))
    if schedule.refresh_due(state.iteration + 1):
        phis = tuple(channel.densities(apply_profile(profile, "L", x)))
    lam = apply_profile(profile, "lambda", x)
    per_bit = tuple(var_conv(p, lam) for p in phis)
    return DeState(per_bit, mix(per_bit), state.iteration + 1, phis)


@dataclass(frozen=True)
class DeResult:
    success: bool
    error_prob: float
    iterations: int
    state: DeState = field(repr=False)
    history: tuple[float, ...] = field(default=(), repr=False)


def de_converges(
    profile: DegreeProfile,
    channel: BitChannel,
    schedule: DeSchedule = DeSchedule(),
    state: DeState | None = None,
    grid: Grid = DEFAULT_GRID,
) -> DeResult:
    """Run DE until the average error probability drops below ``epsilon``.

    Fails early when the error probability stalls (a nontrivial fixed point).
    """
    if state is None:
        state = initial_state(channel, grid)
    hist = [state.error_prob]
    while state.iteration < schedule.max_iters:
        if hist[-1] < schedule.epsilon:
            return DeResult(True, hist[-1], state.iteration, state, tuple(hist))
        if schedule.stalled(hist):
            break
        state = de_step(state, profile, channel, schedule)
        hist.append(state.error_prob)
    ok = hist[-1] < schedule.epsilon
    return DeResult(ok, hist[-1], state.iteration, state, tuple(hist))


@dataclass(frozen=True)
class BpThreshold:
    ebn0_db: float
    sigma: float
    rate: float
    iterations_at_threshold: int
    evaluations: int


class ThresholdSearchError(RuntimeError):
    """Raised when DE outcomes are not monotone in the noise level."""


def bisect_threshold(decide, lo: float, hi: float, tol: float) -> tuple[float, int, int]:
    """Smallest Eb/N0 (dB) in ``[lo, hi]`` at which ``decide`` succeeds, by bisection.

    ``decide(ebn0)`` returns ``(success, iterations)``. The bracket is widened
    until ``lo`` fails and ``hi`` succeeds. Returns the upper end of the final
    bracket, the iteration count there, and the number of DE runs.
    """
    runs = 0
    ok_hi, it_hi = decide(hi)
    runs += 1
    while not ok_hi:
        lo, hi = hi, hi + 2.0
        if hi > 40:
            raise ThresholdSearchError("DE does not converge at any tested noise level")
        ok_hi, it_hi = decide(hi)
        runs += 1
    ok_lo, it_lo = decide(lo)
    runs += 1
    while ok_lo:
        hi, it_hi = lo, it_lo
        lo -= 2.0
        if lo < -20:
            raise ThresholdSearchError("DE converges at every tested noise level")
        ok_lo, it_lo = decide(lo)
        runs += 1
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ok, it = decide(mid)
        runs += 1
        if ok:
            hi, it_hi = mid, it
        else:
            lo = mid
    return hi, it_hi, runs


def bp_threshold(
    profile: DegreeProfile,
    template: ChannelSpec,
    kind,
    schedule: DeSchedule = DeSchedule(),
    bracket: tuple[float, float] = (-1.0, 12.0),
    tol_db: float = 0.01,
    n_samples: int = 2 * 10**6,
    seed=0,
    grid: Grid = DEFAULT_GRID,
    rate: float | None = None,
) -> BpThreshold:
    """BP threshold in Eb/N0 (dB, at the design rate unless ``rate`` is given).

    One sample set is reused at every noise level so the success/failure
    decision is monotone along the search.
    """
    c = template.constellation
    rate = profile.design_rate if rate is None else rate
    sampler = DemapperSampler(c, template.fading, n_samples, seed, grid)

    def decide(ebn0):
        ch = DemapperChannel(sampler, kind, ebn0_to_sigma(ebn0, rate, c.bits_per_symbol))
        res = de_converges(profile, ch, schedule, grid=grid)
        return res.success, res.iterations

    e, it, runs = bisect_threshold(decide, *bracket, tol_db)
    sigma = ebn0_to_sigma(e, rate, c.bits_per_symbol)
    return BpThreshold(float(e), float(sigma), float(rate), int(it), runs)


__all__ = [
    "BitChannel",
    "BpThreshold",
    "DeResult",
    "DeSchedule",
    "DeState",
    "DemapperChannel",
    "FixedChannel",
    "ScheduleMode",
    "ThresholdSearchError",
    "bisect_threshold",
    "bp_threshold",
    "de_converges",
    "de_fixed_point",
    "de_step",
    "initial_state",
    "sigma_to_ebn0",
]


@dataclass(frozen=True)
class FixedPoint:
    state: DeState
    converged: bool
    trivial: bool
    iterations: int


def de_fixed_point(
    profile: DegreeProfile,
    channel: BitChannel,
    schedule: DeSchedule = DeSchedule(max_iters=5000),
    state: DeState | None = None,
    tol: float = 1e-10,
    grid: Grid = DEFAULT_GRID,
) -> FixedPoint:
    """Iterate DE to a fixed point, optionally warm-started from ``state``.

    Stops when the error probability is below ``epsilon`` (the trivial fixed
    point) or changes by less than ``tol`` over one iteration (with BICM-ID,
    over one demapper period).
    """
    if state is None:
        state = initial_state(channel, grid)
    else:
        phis = tuple(channel.densities(None))
        state = DeState(state.per_bit, state.avg, 0, phis)
    span = schedule.period if schedule.mode is ScheduleMode.ID else 1
    hist = [state.error_prob]
    start = state.iteration
    while state.iteration - start < schedule.max_iters:
        if hist[-1] < schedule.epsilon:
            return FixedPoint(state, True, True, state.iteration - start)
        if len(hist) > span and abs(hist[-1 - span] - hist[-1]) < tol:
            return FixedPoint(state, True, False, state.iteration - start)
        state = de_step(state, profile, channel, schedule)
        hist.append(state.error_prob)
    return FixedPoint(state, False, hist[-1] < schedule.epsilon, state.iteration - start)
