"""Error analysis for serially correlated Monte Carlo time series.

Implements blocking analysis: the series is repeatedly coarse-grained by
averaging adjacent pairs, and the naive standard error is tracked per
level.  Once the block length exceeds the correlation time the error
estimate plateaus; the reported error is taken from that plateau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Blocking stops once fewer blocks than this remain; error estimates from
# a handful of blocks are too noisy to be useful.
MIN_BLOCKS = 16


@dataclass(frozen=True)
class BlockingResult:
    mean: float
    stderr: float
    block_length: int
    converged: bool
    levels: tuple  # (block_length, stderr, stderr_uncertainty) per level


def _blocking_levels(series):
    x = np.asarray(series, dtype=float)
    levels = []
    length = 1
    while len(x) >= MIN_BLOCKS:
        n = len(x)
        var = x.var(ddof=1)
        se = np.sqrt(var / n)
        levels.append((length, float(se), float(se / np.sqrt(2.0 * (n - 1)))))
        if n % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
        length *= 2
    return levels


def _pick_plateau(levels):
    """First level whose error agrees with the next two within their bars."""
    for a in range(len(levels)):
        ok = True
        for b in range(a + 1, min(a + 3, len(levels))):
            if levels[b][1] - levels[a][1] > 2.0 * levels[b][2]:
                ok = False
                break
        if ok:
            return a, True
    return len(levels) - 1, False


def reblock(series):
    """Mean and autocorrelation-corrected standard error of a series."""
    x = np.asarray(series, dtype=float)
    if len(x) == 0:
        raise ValueError("empty series")
    mean = float(x.mean())
    if len(x) < 2 * MIN_BLOCKS:
        se = float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
        return BlockingResult(mean, se, 1, False, ())
    levels = _blocking_levels(x)
    pick, converged = _pick_plateau(levels)
    return BlockingResult(
        mean, levels[pick][1], levels[pick][0], converged, tuple(levels)
    )


def reblock_ratio(numerator, denominator):
    """Mean and standard error of sum(num)/sum(den) for correlated series.

    The covariance between numerator and denominator is estimated at the
    block length chosen by blocking the linearized ratio fluctuation.
    """
    num = np.asarray(numerator, dtype=float)
    den = np.asarray(denominator, dtype=float)
    if len(num) != len(den) or len(num) == 0:
        raise ValueError("series must be nonempty and equal length")
    den_sum = den.sum()
    if den_sum == 0.0:
        raise ValueError("denominator sums to zero")
    ratio = float(num.sum() / den_sum)
    # delta-method linearization: fluctuations of (num - r*den)/mean(den)
    linear = (num - ratio * den) / den.mean()
    res = reblock(linear)
    return ratio, res.stderr, res


def combined_sigma(err_a, err_b):
    return float(np.hypot(err_a, err_b))
