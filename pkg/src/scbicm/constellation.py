"""Square QAM constellations with per-axis binary-reflected Gray labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConfigurationError(ValueError):
    """Raised for unsupported or inconsistent configuration values."""


_BITS = {"qpsk": 2, "16qam": 4, "64qam": 6}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Constellation:
    """A unit-energy square QAM constellation.

    Symbol ``s`` carries the label whose integer value (bit 0 most significant)
    equals ``s``. Bits ``0 .. M/2-1`` live on the in-phase axis, the rest on
    the quadrature axis.
    """

    name: str
    bits_per_symbol: int
    symbols: np.ndarray
    labels: np.ndarray
    levels: np.ndarray
    axis_labels: np.ndarray
    level_index: np.ndarray

    @property
    def size(self) -> int:
        return 1 << self.bits_per_symbol

    @property
    def bits_per_axis(self) -> int:
        return self.bits_per_symbol // 2

    def axis_bits(self, axis: int) -> range:
        """Bit indices carried by ``axis`` (0 = in-phase, 1 = quadrature)."""
        h = self.bits_per_axis
        return range(axis * h, (axis + 1) * h)

    def __repr__(self) -> str:
        return f"Constellation({self.name!r}, M={self.bits_per_symbol})"


@dataclass(frozen=True, eq=False)
class BitPartition:
    bit_index: int
    zero_set: np.ndarray
    one_set: np.ndarray


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def build_constellation(modulation: str) -> Constellation:
    """Return the Gray-labeled square QAM for ``"qpsk"``, ``"16qam"`` or ``"64qam"``.

    Amplitude levels on each axis are the odd integers ``-(K-1) .. K-1`` scaled
    so the mean symbol energy is one; level ``+(K-1)`` gets the all-zero axis
    label, so bit value 0 maps to the positive half-axis for the sign bit.
    ``level_index[s]`` holds the (in-phase, quadrature) amplitude indices of
    symbol ``s`` into ``levels``.
    """
    key = str(modulation).strip().lower()
    if key not in _BITS:
        raise ConfigurationError(
            f"unsupported modulation {modulation!r}; expected one of {sorted(_BITS)}"
        )
    m = _BITS[key]
    h = m // 2
    k = 1 << h
    amps = np.arange(-(k - 1), k, 2, dtype=float)
    scale = np.sqrt(2.0 * np.mean(amps**2))
    levels = amps / scale

    # axis label of level index i (ascending amplitude)
    axis_codes = np.array([_gray(k - 1 - i) for i in range(k)])
    axis_labels = ((axis_codes[:, None] >> np.arange(h - 1, -1, -1)) & 1).astype(np.uint8)
    level_of_code = np.empty(k, dtype=int)
    level_of_code[axis_codes] = np.arange(k)

    idx = np.arange(1 << m)
    code_i = idx >> h
    code_q = idx & (k - 1)
    symbols = levels[level_of_code[code_i]] + 1j * levels[level_of_code[code_q]]
    labels = ((idx[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.uint8)

    return Constellation(
        name=key,
        bits_per_symbol=m,
        symbols=_frozen(symbols),
        labels=_frozen(labels),
        levels=_frozen(levels),
        axis_labels=_frozen(axis_labels),
        level_index=_frozen(np.stack([level_of_code[code_i], level_of_code[code_q]], axis=1)),
    )


def bit_partition(c: Constellation, m: int) -> BitPartition:
    """Split symbol indices by the value of label bit ``m``."""
    if not 0 <= m < c.bits_per_symbol:
        raise IndexError(f"bit index {m} out of range for M={c.bits_per_symbol}")
    col = c.labels[:, m]
    return BitPartition(
        bit_index=m,
        zero_set=_frozen(np.flatnonzero(col == 0)),
        one_set=_frozen(np.flatnonzero(col == 1)),
    )
