"""0-1 test for chaos on a scalar observable.

The observable is projected onto translation coordinates (p, q) for random
frequencies c. Bounded (p, q) means regular motion; diffusive (p, q) means
chaos. The growth rate of their mean-square displacement is measured by the
correlation K_c with the lag, and K is the median over c.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

MIN_SERIES_LENGTH = 100


class Chaos01Class(str, enum.Enum):
    REGULAR = "Regular"
    CHAOTIC = "Chaotic"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class Chaos01Config:
    seed: int
    n_c: int = 100
    c_support: tuple[float, float] = (0.0, 2.0 * math.pi)
    cut_fraction: float = 0.1
    k_chaotic: float = 0.8
    k_regular: float = 0.2

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a seed is required")
        if not 0 < self.k_regular < self.k_chaotic < 1:
            raise ValueError("need 0 < k_regular < k_chaotic < 1")
        if not 0 < self.cut_fraction <= 0.5:
            raise ValueError("cut_fraction must lie in (0, 0.5]")
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        lo, hi = self.c_support
        if not lo < hi:
            raise ValueError("empty c support")

    def draw_c(self) -> np.ndarray:
        """All c values, drawn up front from the seeded stream."""
        lo, hi = self.c_support
        return np.random.default_rng(self.seed).uniform(lo, hi, self.n_c)

    def label(self, k: float) -> Chaos01Class:
        if k > self.k_chaotic:
            return Chaos01Class.CHAOTIC
        if k < self.k_regular:
            return Chaos01Class.REGULAR
        return Chaos01Class.INCONCLUSIVE


@dataclass(frozen=True)
class Chaos01Result:
    k_median: float
    k_per_c: np.ndarray
    label: Chaos01Class


class SeriesTooShortError(ValueError):
    pass


def translation_coords(series, c: float) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(series, dtype=float)
    j = np.arange(1, x.size + 1)
    return np.cumsum(x * np.cos(j * c)), np.cumsum(x * np.sin(j * c))


def n_lags(n: int, cut_fraction: float) -> int:
    return int(math.floor(cut_fraction * n + 1e-9))


def mean_square_displacement(p, q, cut_fraction: float = 0.1) -> np.ndarray:
    """M_n for lags n = 1 .. floor(cut_fraction * N)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("p and q must have equal length")
    ncut = n_lags(p.size, cut_fraction)
    if ncut < 2:
        raise SeriesTooShortError(
            f"series of length {p.size} gives {ncut} lags at cut {cut_fraction}")
    out = np.empty(ncut)
    for n in range(1, ncut + 1):
        dp = p[n:] - p[:-n]
        dq = q[n:] - q[:-n]
        out[n - 1] = np.mean(dp * dp + dq * dq)
    return out


def k_statistic(msd, lags=None) -> float:
    """Pearson correlation between lag and MSD; a flat MSD gives 0."""
    m = np.asarray(msd, dtype=float)
    t = np.arange(1, m.size + 1, dtype=float) if lags is None else np.asarray(lags, dtype=float)
    if m.size < 2 or t.size != m.size:
        raise ValueError("need equal-length lag and MSD vectors of length >= 2")
    if np.ptp(t) == 0:
        raise ValueError("lags have zero variance")
    if np.ptp(m) == 0:
        return 0.0
    tc = t - t.mean()
    mc = m - m.mean()
    k = float(np.dot(tc, mc) / math.sqrt(np.dot(tc, tc) * np.dot(mc, mc)))
    return min(1.0, max(-1.0, k))


@njit(cache=True)
def _k_per_c(x, cs, ncut):
    """Compiled equivalent of k_statistic(mean_square_displacement(...)) per c."""
    n = x.shape[0]
    out = np.empty(cs.shape[0])
    p = np.empty(n)
    q = np.empty(n)
    m = np.empty(ncut)
    tmean = 0.5 * (ncut + 1)
    tvar = 0.0
    for i in range(ncut):
        tvar += (i + 1 - tmean) ** 2
    for ic in range(cs.shape[0]):
        c = cs[ic]
        sp = 0.0
        sq = 0.0
        for j in range(n):
            sp += x[j] * math.cos((j + 1) * c)
            sq += x[j] * math.sin((j + 1) * c)
            p[j] = sp
            q[j] = sq
        for lag in range(1, ncut + 1):
            acc = 0.0
            for j in range(n - lag):
                dp = p[j + lag] - p[j]
                dq = q[j + lag] - q[j]
                acc += dp * dp + dq * dq
            m[lag - 1] = acc / (n - lag)
        mmin = m[0]
        mmax = m[0]
        mmean = 0.0
        for i in range(ncut):
            mmin = min(mmin, m[i])
            mmax = max(mmax, m[i])
            mmean += m[i]
        if mmax == mmin:
            out[ic] = 0.0
            continue
        mmean /= ncut
        cov = 0.0
        mvar = 0.0
        for i in range(ncut):
            cov += (i + 1 - tmean) * (m[i] - mmean)
            mvar += (m[i] - mmean) ** 2
        k = cov / math.sqrt(tvar * mvar)
        out[ic] = min(1.0, max(-1.0, k))
    return out


def k_values(series, cs, cut_fraction: float = 0.1) -> np.ndarray:
    x = np.ascontiguousarray(series, dtype=np.float64)
    ncut = n_lags(x.size, cut_fraction)
    if ncut < 2:
        raise SeriesTooShortError(f"series of length {x.size} is too short")
    return _k_per_c(x, np.ascontiguousarray(cs, dtype=np.float64), ncut)


def classify(series, cfg: Chaos01Config, cs=None) -> Chaos01Result:
    """Run the test with the seeded c draws (or explicit ``cs``)."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < MIN_SERIES_LENGTH:
        raise SeriesTooShortError(
            f"0-1 test needs at least {MIN_SERIES_LENGTH} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    cs = cfg.draw_c() if cs is None else np.asarray(cs, dtype=float)
    kc = k_values(x, cs, cfg.cut_fraction)
    k = float(np.median(kc))
    return Chaos01Result(k, kc, cfg.label(k))
