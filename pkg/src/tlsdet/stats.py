"""Per-patient TLS density and the two-group rank comparison used clinically.

Shapiro-Wilk follows Royston's approximation (Applied Statistics algorithm
AS R94, 1995), valid for 3 <= n <= 5000. Mann-Whitney U is exact by rank
enumeration for small tie-free samples and normal-approximate otherwise.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import EmptySample, GroupTooSmall, TooFewSamples, ZeroArea, ZeroVariance

EXACT_MAX_TOTAL = 16


class Group(enum.Enum):
    INVASION = "Invasion"
    NO_INVASION = "NoInvasion"

    @classmethod
    def parse(cls, text: str) -> "Group":
        key = text.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        for g in cls:
            if g.value.lower() == key:
                return g
        raise ValueError(f"unknown group {text!r}")


class Method(enum.Enum):
    SHAPIRO_WILK = "ShapiroWilk"
    MANN_WHITNEY_EXACT = "MannWhitneyExact"
    MANN_WHITNEY_NORMAL = "MannWhitneyNormalApprox"


class Alternative(enum.Enum):
    TWO_SIDED = "two-sided"
    LESS = "less"
    GREATER = "greater"


def tls_density(tls_count: int, area_mm2: float) -> float:
    """TLS per square millimetre of slide."""
    if not area_mm2 > 0:
        raise ZeroArea("slide area must be positive")
    if tls_count < 0:
        raise ValueError("TLS count must be non-negative")
    return tls_count / area_mm2


@dataclass(frozen=True)
class PatientDensity:
    patient: str
    tls_count: int
    area_mm2: float
    group: Group

    @property
    def density(self) -> float:
        return tls_density(self.tls_count, self.area_mm2)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: Method

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "method": self.method.value}


@dataclass(frozen=True)
class MannWhitneyResult(TestResult):
    u1: float = 0.0
    u2: float = 0.0
    alternative: Alternative = Alternative.TWO_SIDED

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(U1=self.u1, U2=self.u2, alternative=self.alternative.value)
        return d


# --- Shapiro-Wilk -----------------------------------------------------------

_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(coef, x: float) -> float:
    out = 0.0
    for c in reversed(coef):
        out = out * x + c
    return out


@lru_cache(maxsize=64)
def _sw_coefficients(n: int) -> np.ndarray:
    """Royston's approximate weights for the lower half of the order statistics."""
    half = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    i = np.arange(1, half + 1)
    m = -special.ndtri((i - 0.375) / (n + 0.25))
    summ2 = 2.0 * np.sum(m * m)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = np.empty(half)
    a1 = _poly(_C1, rsn) + m[0] / ssumm2
    if n > 5:
        a2 = _poly(_C2, rsn) + m[1] / ssumm2
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
        a[1] = a2
        a[2:] = m[2:] / fac
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
        a[1:] = m[1:] / fac
    a[0] = a1
    return a


def _sw_pvalue(w: float, n: int) -> float:
    if n == 3:
        return float(min(1.0, max(0.0, 6 / math.pi * (math.asin(math.sqrt(w)) - math.pi / 3))))
    w1 = math.log1p(-w) if w < 1 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return 0.0
        y = -math.log(gamma - w1)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        y = w1
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    if y == -math.inf:
        return 1.0
    return float(special.ndtr(-(y - mu) / sigma))


def shapiro_wilk(sample: Iterable[float]) -> TestResult:
    """Shapiro-Wilk W and its p-value for 3 <= n <= 5000 observations."""
    x = np.sort(np.asarray(list(sample), dtype=np.float64))
    n = x.size
    if n < 3:
        raise TooFewSamples("Shapiro-Wilk needs at least 3 observations")
    if n > 5000:
        raise TooFewSamples("Shapiro-Wilk approximation is valid only up to n = 5000")
    if not np.isfinite(x).all():
        raise ValueError("sample contains non-finite values")
    if x[-1] == x[0]:
        raise ZeroVariance("Shapiro-Wilk undefined for a constant sample")
    half = n // 2
    a = _sw_coefficients(n)
    spread = x[::-1][:half] - x[:half]
    centered = x - x.mean()
    ss = float(np.sum(centered * centered))
    w = min(1.0, float(np.dot(a, spread)) ** 2 / ss)
    return TestResult(w, _sw_pvalue(w, n), Method.SHAPIRO_WILK)


# --- Mann-Whitney U ---------------------------------------------------------

@lru_cache(maxsize=None)
def u_distribution(n1: int, n2: int) -> tuple[int, ...]:
    """Number of rank arrangements giving each U in ``0..n1*n2`` under the null.

    Conditions on whether the largest pooled value belongs to x (adding n2 to
    U) or to y.
    """
    if n1 == 0 or n2 == 0:
        return (1,)
    out = [0] * (n1 * n2 + 1)
    for u, c in enumerate(u_distribution(n1 - 1, n2)):
        out[u + n2] += c
    for u, c in enumerate(u_distribution(n1, n2 - 1)):
        out[u] += c
    return tuple(out)


def _rankdata(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="mergesort")
    sv = v[order]
    ranks = np.empty(v.size, dtype=np.float64)
    starts = np.r_[0, np.flatnonzero(np.diff(sv)) + 1]
    ends = np.r_[starts[1:], v.size]
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e + 1)
    return ranks


def _tie_term(v: np.ndarray) -> float:
    _, t = np.unique(v, return_counts=True)
    return float(np.sum(t.astype(np.float64) ** 3 - t))


def mann_whitney_u(x: Sequence[float], y: Sequence[float],
                   alternative: Alternative | str = Alternative.TWO_SIDED,
                   method: str = "auto") -> MannWhitneyResult:
    """Mann-Whitney U test of ``x`` against ``y``.

    ``U1`` counts pairs with ``x > y`` (ties count one half); the reported
    statistic is ``min(U1, U2)``. ``Greater`` tests whether ``x`` tends to be
    larger. With ``method="auto"`` the exact null distribution is used when
    ``len(x) + len(y) <= 16`` and there are no ties; ``"exact"`` forces it
    (ties still fall back), ``"normal"`` forces the tie- and
    continuity-corrected normal approximation.
    """
    alternative = Alternative(alternative) if isinstance(alternative, str) else alternative
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n1, n2 = x.size, y.size
    if n1 == 0 or n2 == 0:
        raise EmptySample("Mann-Whitney needs two non-empty samples")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    pooled = np.concatenate([x, y])
    ranks = _rankdata(pooled)
    u1 = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    u2 = n1 * n2 - u1
    ties = _tie_term(pooled)
    exact = ties == 0 and (method == "exact" or (method == "auto" and n1 + n2 <= EXACT_MAX_TOTAL))
    if exact:
        p = _exact_p(int(round(u1)), n1, n2, alternative)
        kind = Method.MANN_WHITNEY_EXACT
    else:
        p = _normal_p(u1, n1, n2, ties, alternative)
        kind = Method.MANN_WHITNEY_NORMAL
    return MannWhitneyResult(min(u1, u2), p, kind, u1, u2, alternative)


def _exact_p(u1: int, n1: int, n2: int, alternative: Alternative) -> float:
    dist = u_distribution(n1, n2)
    total = math.comb(n1 + n2, n1)
    if alternative is Alternative.GREATER:
        tail = sum(dist[u1:])
    elif alternative is Alternative.LESS:
        tail = sum(dist[: u1 + 1])
    else:
        u = min(u1, n1 * n2 - u1)
        return min(1.0, 2 * sum(dist[: u + 1]) / total)
    return tail / total


def _normal_p(u1: float, n1: int, n2: int, ties: float, alternative: Alternative) -> float:
    n = n1 + n2
    mu = n1 * n2 / 2.0
    var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return 1.0
    sd = math.sqrt(var)
    if alternative is Alternative.TWO_SIDED:
        z = max(abs(u1 - mu) - 0.5, 0.0) / sd
        return float(min(1.0, 2 * special.ndtr(-z)))
    if alternative is Alternative.GREATER:
        return float(special.ndtr(-(u1 - mu - 0.5) / sd))
    return float(special.ndtr((u1 - mu + 0.5) / sd))


# --- cohort comparison ------------------------------------------------------

@dataclass(frozen=True)
class GroupSummary:
    group: Group
    n: int
    median: float
    shapiro: TestResult | None

    def to_dict(self) -> dict:
        sw = None if self.shapiro is None else self.shapiro.to_dict()
        return {"n": self.n, "median": self.median, "shapiro_wilk": sw}


@dataclass(frozen=True)
class GroupComparison:
    groups: dict
    mann_whitney: MannWhitneyResult

    def to_dict(self) -> dict:
        return {
            "groups": {g.value: s.to_dict() for g, s in self.groups.items()},
            "mann_whitney": self.mann_whitney.to_dict(),
        }


def group_compare(patients: Sequence[PatientDensity], min_size: int = 3) -> GroupComparison:
    """Normality check per group, then Mann-Whitney of Invasion against NoInvasion densities."""
    values = {g: [] for g in Group}
    for p in patients:
        values[p.group].append(p.density)
    for g, v in values.items():
        if len(v) < min_size:
            raise GroupTooSmall(f"group {g.value} has {len(v)} patients; need >= {min_size}")
    summaries = {}
    for g, v in values.items():
        arr = np.asarray(v)
        try:
            sw = shapiro_wilk(arr)
        except ZeroVariance:
            sw = None
        summaries[g] = GroupSummary(g, arr.size, float(np.median(arr)), sw)
    mw = mann_whitney_u(values[Group.INVASION], values[Group.NO_INVASION])
    return GroupComparison(summaries, mw)
