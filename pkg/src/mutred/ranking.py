"""Scott-Knott ESD ranking of treatments (strategies) on one indicator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import InputError


class Direction(enum.Enum):
    HIGHER_IS_BETTER = "higher"
    LOWER_IS_BETTER = "lower"


@dataclass(frozen=True)
class RankResult:
    ranks: dict[str, int]
    direction: Direction
    means: dict[str, float]

    @property
    def groups(self) -> list[list[str]]:
        out: dict[int, list[str]] = {}
        for name, r in self.ranks.items():
            out.setdefault(r, []).append(name)
        return [sorted(out[r]) for r in sorted(out)]


def _sample(values, name="sample") -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim != 1 or len(a) < 2:
        raise InputError(f"{name}: need at least 2 values")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name}: values must be finite")
    return a


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Standardized mean difference with the pooled (ddof=1) standard deviation.

    Zero-variance samples give 0 for equal means and a signed infinity
    otherwise.
    """
    a, b = _sample(a, "a"), _sample(b, "b")
    diff = a.mean() - b.mean()
    pooled = math.sqrt(
        ((len(a) - 1) * a.var(ddof=1) + (len(b) - 1) * b.var(ddof=1)) / (len(a) + len(b) - 2)
    )
    if pooled == 0.0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return float(diff / pooled)


def effect_magnitude(d: float) -> str:
    d = abs(d)
    if d < 0.2:
        return "negligible"
    if d < 0.5:
        return "small"
    if d < 0.8:
        return "medium"
    return "large"


def _split(means: np.ndarray, group: list[int], s2: float, dfr: int, alpha: float) -> list[list[int]]:
    """Recursive Scott-Knott partition of an ordered group of treatment indices."""
    g = len(group)
    if g < 2:
        return [group]
    y = means[group]
    grand = y.mean()
    best, cut = -1.0, 1
    for i in range(1, g):
        b = i * (y[:i].mean() - grand) ** 2 + (g - i) * (y[i:].mean() - grand) ** 2
        if b > best:
            best, cut = b, i
    if best <= 0.0:
        return [group]
    sigma2 = (((y - grand) ** 2).sum() + dfr * s2) / (g + dfr)
    if sigma2 > 0.0:
        lam = math.pi / (2 * (math.pi - 2)) * best / sigma2
        critical = stats.chi2.ppf(1 - alpha, g / (math.pi - 2)) if alpha > 0 else math.inf
        if not lam > critical:
            return [group]
    return _split(means, group[:cut], s2, dfr, alpha) + _split(means, group[cut:], s2, dfr, alpha)


def scott_knott_esd(
    samples: Mapping[str, Sequence[float]],
    alpha: float = 0.05,
    d_threshold: float = 0.2,
    direction: Direction | str = Direction.HIGHER_IS_BETTER,
    log1p: bool = False,
) -> RankResult:
    """Rank treatments into statistically distinct, non-negligible groups.

    Treatments are ordered best-first by mean (ties by label) and split
    recursively where the Scott-Knott lambda statistic beats the chi-square
    critical value at ``alpha``.  Adjacent groups whose pooled samples differ
    by ``|d| < d_threshold`` are then merged, smallest effect first.
    """
    direction = Direction(direction)
    if not samples:
        raise InputError("scott_knott_esd needs at least one treatment")
    if not 0 <= alpha < 1:
        raise InputError(f"alpha must lie in [0, 1), got {alpha}")
    names = list(samples)
    data = {n: _sample(samples[n], n) for n in names}
    if log1p:
        if any(np.any(v <= -1) for v in data.values()):
            raise InputError("log1p transform needs values > -1")
        data = {n: np.log1p(v) for n, v in data.items()}
    raw_means = {n: float(np.mean(samples[n])) for n in names}
    sign = -1.0 if direction is Direction.HIGHER_IS_BETTER else 1.0
    order = sorted(names, key=lambda n: (sign * data[n].mean(), n))
    means = np.array([data[n].mean() for n in order])

    sizes = np.array([len(data[n]) for n in order])
    dfr = int(sizes.sum() - len(order))
    ss_within = sum(((data[n] - data[n].mean()) ** 2).sum() for n in order)
    mse = ss_within / dfr if dfr > 0 else 0.0
    r = len(sizes) / np.sum(1.0 / sizes)  # harmonic mean replicate count
    groups = _split(means, list(range(len(order))), mse / r, dfr, alpha)

    groups = [[order[i] for i in grp] for grp in groups]
    while len(groups) > 1:
        effects = [
            abs(cohens_d(np.concatenate([data[n] for n in lo]), np.concatenate([data[n] for n in hi])))
            for lo, hi in zip(groups, groups[1:])
        ]
        i = int(np.argmin(effects))
        if not (effects[i] < d_threshold or math.isinf(d_threshold)):
            break
        groups[i : i + 2] = [groups[i] + groups[i + 1]]

    ranks = {n: rank for rank, grp in enumerate(groups, start=1) for n in grp}
    return RankResult({n: ranks[n] for n in names}, direction, raw_means)
