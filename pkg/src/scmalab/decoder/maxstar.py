"""Jacobian logarithm max*(a, b) = log(e^a + e^b) and its approximations."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

LN2 = float(np.log(2.0))
# beyond this argument the correction term is treated as zero (C1(8) < 3.4e-4)
LUT_ARG_MAX = 8.0

MODES = ("exact", "lut", "plain-max")
MODE_ALIASES = {"plain": "plain-max"}


def canonical_mode(mode: str) -> str:
    return MODE_ALIASES.get(mode, mode)


def correction(x):
    """C1(x) = ln(1 + e^-x) for x >= 0."""
    return np.log1p(np.exp(-np.asarray(x, dtype=float)))


def _correction_inverse(v):
    # x such that C1(x) = v, for 0 < v <= ln 2
    return -np.log(np.expm1(v))


class CorrectionLUT:
    """Table approximation of C1 with ``intervals`` quantisation levels.

    The value range (0, ln 2] is split into equal levels; an argument
    returns the midpoint of the level its correction falls in. The level
    is found by comparing the argument against precomputed breakpoints,
    so C1 itself is never evaluated at lookup time. Arguments at or beyond
    ``arg_max`` return 0.
    """

    def __init__(self, intervals: int = 8, arg_max: float = LUT_ARG_MAX):
        if intervals < 1:
            raise ValueError("LUT needs at least one interval")
        self.intervals = int(intervals)
        self.arg_max = float(arg_max)
        step = LN2 / self.intervals
        levels = step * np.arange(self.intervals - 1, 0, -1)
        self.breakpoints = _correction_inverse(levels)  # ascending
        self.values = step * (np.arange(self.intervals) + 0.5)

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        level = self.intervals - 1 - np.searchsorted(self.breakpoints, x, side="right")
        return np.where(x >= self.arg_max, 0.0, self.values[level])


@lru_cache(maxsize=32)
def get_lut(intervals: int) -> CorrectionLUT:
    return CorrectionLUT(intervals)


def max_star(a, b, mode: str = "exact", intervals: int = 8):
    """max(a, b) plus the (possibly tabulated) correction C1(|a - b|)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = np.maximum(a, b)
    mode = canonical_mode(mode)
    if mode == "plain-max":
        return m
    d = np.abs(a - b)
    if mode == "exact":
        return m + correction(d)
    if mode == "lut":
        return m + get_lut(intervals)(d)
    raise ValueError(f"unknown max-star mode {mode!r}")


def max_star_reduce(x, axis, mode: str = "exact", intervals: int = 8):
    """Fold max* over one or more axes, left to right."""
    x = np.asarray(x, dtype=float)
    axes = (axis,) if np.ndim(axis) == 0 else tuple(axis)
    axes = tuple(a % x.ndim for a in axes)
    keep = [a for a in range(x.ndim) if a not in axes]
    x = np.transpose(x, keep + list(axes))
    x = x.reshape(x.shape[: len(keep)] + (-1,))
    mode = canonical_mode(mode)
    if mode == "plain-max":
        return np.max(x, axis=-1)
    if mode == "exact":
        return np.logaddexp.reduce(x, axis=-1)
    if mode == "lut":
        lut = get_lut(intervals)
        acc = x[..., 0]
        for i in range(1, x.shape[-1]):
            v = x[..., i]
            acc = np.maximum(acc, v) + lut(acc - v)
        return acc
    raise ValueError(f"unknown max-star mode {mode!r}")
