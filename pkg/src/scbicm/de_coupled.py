"""Spatially-coupled (dl, dr, L, w) ensembles over BICM channels.

Positions run over ``-L .. L``; densities outside the chain are fixed at
``Delta_{+inf}`` (known bits). One coupled iteration is

    y_p = mean_k a_{p-k},   x_i = mean_j rho(y_{i+j}),   a_i = phi(L(x_i)) ⊛ lambda(x_i)

with ``j, k`` in ``0 .. w-1``. The recursion keeps the chain mirror
symmetric (``a_i = a_{-i}``), and only half of it is computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, ebn0_to_sigma
from .constellation import ConfigurationError
from .de_flat import BitChannel, DemapperChannel, DeSchedule, bisect_threshold
from .demapper import DemapperSampler
from .density import (
    DEFAULT_GRID,
    DeltaKind,
    Grid,
    LlrDensity,
    chk_power,
    delta_density,
    mix,
    var_conv_power,
    var_power,
)


@dataclass(frozen=True)
class ScEnsemble:
    dl: int
    dr: int
    L: int
    w: int

    def __post_init__(self):
        if self.dl < 2 or self.dr <= self.dl or self.w < 1 or self.L < 1:
            raise ConfigurationError(f"invalid coupled ensemble {self}; need dl >= 2, dr > dl, w >= 1, L >= 1")

    @property
    def positions(self) -> int:
        return 2 * self.L + 1

    @property
    def uncoupled_rate(self) -> float:
        return 1.0 - self.dl / self.dr

    @property
    def design_rate(self) -> float:
        return sc_design_rate(self)

    def rate_loss_db(self) -> float:
        """Eb/N0 penalty (dB) of the design rate relative to the uncoupled rate."""
        return float(10.0 * np.log10(self.uncoupled_rate / self.design_rate))


def sc_design_rate(e: ScEnsemble) -> float:
    """Design rate of the coupled chain, including the termination loss."""
    i = np.arange(e.w + 1)
    s = np.sum((i / e.w) ** e.dr)
    ratio = e.dl / e.dr
    return float((1.0 - ratio) - ratio * (e.w + 1 - 2 * s) / (2 * e.L + 1))


@dataclass(frozen=True)
class ScState:
    """Average densities ``a_{-L} .. a_L`` and, with BICM-ID, the per-position channel."""

    chain: tuple[LlrDensity, ...]
    iteration: int = 0
    channel: tuple[LlrDensity, ...] = field(default=(), repr=False)

    def error_probs(self) -> np.ndarray:
        return np.array([a.error_prob() for a in self.chain])


def _mirror(half: list, n: int) -> list:
    """Extend the first ``ceil(n/2)`` entries of a mirror-symmetric list to length ``n``."""
    return half + half[: n - len(half)][::-1]


def sc_initial_state(e: ScEnsemble, channel: BitChannel, grid: Grid = DEFAULT_GRID) -> ScState:
    phi = mix(channel.densities(delta_density(DeltaKind.ZERO, grid)))
    return ScState(tuple([phi] * e.positions), 0, tuple([phi] * e.positions))


def check_side(e: ScEnsemble, chain: tuple[LlrDensity, ...]) -> list[LlrDensity]:
    """The densities ``x_i`` entering the variable nodes of every position."""
    n, w = e.positions, e.w
    grid = chain[0].grid
    plus = delta_density(DeltaKind.PLUS_INFINITY, grid)
    ext = [plus] * (w - 1) + list(chain) + [plus] * (w - 1)
    ny = n + w - 1  # y_p for p = -L .. L + w - 1
    half_y = (ny + 1) // 2
    rho_y = []
    for q in range(half_y):
        parts = ext[q : q + w]
        y = parts[0] if w == 1 else mix(parts)
        rho_y.append(chk_power(y, e.dr - 1))
    rho_y = _mirror(rho_y, ny)
    half_x = (n + 1) // 2
    xs = []
    for i in range(half_x):
        parts = rho_y[i : i + w]
        xs.append(parts[0] if w == 1 else mix(parts))
    return _mirror(xs, n)


def sc_de_step(state: ScState, e: ScEnsemble, channel: BitChannel, schedule: DeSchedule) -> ScState:
    """One iteration of the coupled recursion over all positions."""
    n = e.positions
    xs = check_side(e, state.chain)
    half = (n + 1) // 2
    phis = list(state.channel) if state.channel else [mix(channel.densities(None))] * n
    if schedule.refresh_due(state.iteration + 1):
        phis = _mirror([mix(channel.densities(var_power(xs[i], e.dl))) for i in range(half)], n)
    new = [var_conv_power(phis[i], xs[i], e.dl - 1) for i in range(half)]
    return ScState(tuple(_mirror(new, n)), state.iteration + 1, tuple(phis))


@dataclass(frozen=True)
class ScResult:
    success: bool
    max_error_prob: float
    iterations: int
    state: ScState = field(repr=False)


def sc_converges(
    e: ScEnsemble,
    channel: BitChannel,
    schedule: DeSchedule | None = None,
    state: ScState | None = None,
    grid: Grid = DEFAULT_GRID,
) -> ScResult:
    """Run the coupled recursion until every position has error probability below ``epsilon``.

    Stops early when the total error over the chain stops decreasing, which
    happens once the decoding wave has stalled.
    """
    schedule = schedule or DeSchedule(max_iters=10_000, stall_window=200, stall_tol=1e-6)
    if state is None:
        state = sc_initial_state(e, channel, grid)
    pe = state.error_probs()
    totals = [float(pe.sum())]
    while state.iteration < schedule.max_iters:
        if pe.max() < schedule.epsilon:
            return ScResult(True, float(pe.max()), state.iteration, state)
        if schedule.stalled(totals):
            break
        state = sc_de_step(state, e, channel, schedule)
        pe = state.error_probs()
        totals.append(float(pe.sum()))
    return ScResult(bool(pe.max() < schedule.epsilon), float(pe.max()), state.iteration, state)


@dataclass(frozen=True)
class ScThreshold:
    ebn0_db: float
    sigma: float
    design_rate: float
    rate_loss_db: float
    iterations_at_threshold: int
    evaluations: int
    gap_db: float | None = None
    asympt_gap_db: float | None = None

    def with_noise_threshold(self, noise_ebn0_db: float) -> "ScThreshold":
        """Fill in the gap to a noise threshold and the gap without rate loss."""
        gap = self.ebn0_db - noise_ebn0_db
        return ScThreshold(
            self.ebn0_db,
            self.sigma,
            self.design_rate,
            self.rate_loss_db,
            self.iterations_at_threshold,
            self.evaluations,
            gap,
            gap - self.rate_loss_db,
        )


def sc_bp_threshold(
    e: ScEnsemble,
    template: ChannelSpec,
    kind,
    schedule: DeSchedule | None = None,
    bracket: tuple[float, float] = (-1.0, 12.0),
    tol_db: float = 0.01,
    n_samples: int = 2 * 10**6,
    seed=0,
    grid: Grid = DEFAULT_GRID,
    noise_ebn0_db: float | None = None,
) -> ScThreshold:
    """BP threshold of the coupled chain, in Eb/N0 at its design rate."""
    if schedule is None:
        schedule = DeSchedule(max_iters=10_000, stall_window=200, stall_tol=1e-6)
    c = template.constellation
    rate = e.design_rate
    sampler = DemapperSampler(c, template.fading, n_samples, seed, grid)

    def decide(ebn0):
        ch = DemapperChannel(sampler, kind, ebn0_to_sigma(ebn0, rate, c.bits_per_symbol))
        res = sc_converges(e, ch, schedule, grid=grid)
        return res.success, res.iterations

    eb, it, runs = bisect_threshold(decide, *bracket, tol_db)
    out = ScThreshold(
        float(eb), ebn0_to_sigma(eb, rate, c.bits_per_symbol), rate, e.rate_loss_db(), int(it), runs
    )
    return out if noise_ebn0_db is None else out.with_noise_threshold(noise_ebn0_db)
