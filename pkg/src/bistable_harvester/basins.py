"""Basins of attraction over a grid of initial (x0, xdot0) with v0 fixed.

Each cell is integrated, its late voltage Poincare series goes through the
0-1 test, and regular cells are fingerprinted from their steady (x, xdot)
Poincare points. Fingerprints are registered in grid-scan order after all
cells are done, so class ids never depend on the evaluation order or on the
number of worker threads.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .bifurcation import MAX_PERIOD, cluster_periodicity  # noqa: F401
from .chaos01 import Chaos01Class, Chaos01Config, k_values, n_lags
from .integrator import IntegratorConfig, poincare_batch, set_workers, tail_length, OK
from .model import HarvesterParams, equilibria, force_extrema, restoring_force

CHAOTIC = -1
INCONCLUSIVE = -2
DIVERGENT = -3
SPECIAL_LABELS = {CHAOTIC: "chaotic", INCONCLUSIVE: "inconclusive", DIVERGENT: "divergent"}


class Well(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"
    INTERWELL = "InterWell"
    SINGLE = "SingleWell"


class Energy(str, enum.Enum):
    LOW = "Low"
    HIGH = "High"


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float] = (-3.0, 3.0)
    xdot_range: tuple[float, float] = (-3.0, 3.0)
    v0: float = 0.0
    nx: int = 200
    ny: int = 200

    def __post_init__(self):
        if not (self.x_range[0] < self.x_range[1] and self.xdot_range[0] < self.xdot_range[1]):
            raise ValueError("grid ranges must satisfy lo < hi")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 points per axis")

    @property
    def x_values(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.nx)

    @property
    def xdot_values(self) -> np.ndarray:
        return np.linspace(*self.xdot_range, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def initial_states(self) -> np.ndarray:
        """(nx*ny, 3) array in scan order: xdot0 outer, x0 inner."""
        xx, yy = np.meshgrid(self.x_values, self.xdot_values)
        return np.column_stack([xx.ravel(), yy.ravel(), np.full(self.size, self.v0)])


@dataclass(frozen=True)
class AttractorFingerprint:
    period: int
    points: np.ndarray  # (period, 2), sorted by x then xdot
    well: Well
    energy: Energy
    x_span: tuple[float, float] | None = None  # continuous steady x range
    compact: bool = True  # stays within half the center-to-barrier distance

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 2))
        if self.period < 1 or len(self.points) != self.period:
            raise ValueError("canonical point set must have one point per period")


def cluster_points(points, tol: float) -> list[np.ndarray]:
    """Greedy clustering: each point joins the first cluster whose seed lies
    within ``tol`` (Euclidean), otherwise it seeds a new cluster."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    seeds: list[np.ndarray] = []
    members: list[list[int]] = []
    for i, pt in enumerate(pts):
        for k, s in enumerate(seeds):
            if math.dist(pt, s) <= tol:
                members[k].append(i)
                break
        else:
            seeds.append(pt)
            members.append([i])
    return [pts[m] for m in members]


@dataclass(frozen=True)
class WellGeometry:
    """Barrier position and the two well centers used to place orbits.

    In the bistable regime these are the three equilibria. When only one
    equilibrium survives, the barrier is the ghost of the vanished
    saddle-node pair: the force extremum with the smallest |F_r|. The lost
    well's center is undefined there (NaN).
    """
    left: float
    barrier: float
    right: float
    bistable: bool

    @classmethod
    def from_params(cls, params: HarvesterParams) -> "WellGeometry":
        eq = equilibria(params)
        if len(eq) >= 3:
            return cls(eq[0], eq[1], eq[-1], True)
        x1, x2 = force_extrema(params)
        ghost = min((x1, x2), key=lambda x: abs(float(restoring_force(params, x))))
        (e,) = eq
        if e > ghost:
            return cls(math.nan, ghost, e, False)
        return cls(e, ghost, math.nan, False)

    @classmethod
    def from_equilibria(cls, eq) -> "WellGeometry":
        eq = sorted(eq)
        if len(eq) < 3:
            raise ValueError("need three equilibria; use from_params for one")
        return cls(eq[0], eq[1], eq[-1], True)


def fingerprint(tail, wells, tol: float = 1e-2, x_range=None,
                max_period: int = MAX_PERIOD) -> AttractorFingerprint | None:
    """Identify a regular attractor from its steady (x, xdot) Poincare points.

    ``wells`` is a :class:`WellGeometry` or a list of three equilibria.
    ``x_range`` is the (min, max) of x over the continuous steady trajectory;
    it decides well membership when given, since a period-1 inter-well orbit
    leaves a single Poincare point on one side of the barrier. Returns None
    when the tail does not settle on <= ``max_period`` points.
    """
    pts = np.asarray(tail, dtype=float)[:, :2]
    if len(pts) == 0:
        raise ValueError("empty tail")
    clusters = cluster_points(pts, tol)
    if len(clusters) > max_period:
        return None
    centers = np.array([c.mean(axis=0) for c in clusters])
    centers = centers[np.lexsort((centers[:, 1], centers[:, 0]))]
    lo, hi = (pts[:, 0].min(), pts[:, 0].max()) if x_range is None else x_range
    lo = float(min(lo, pts[:, 0].min()))
    hi = float(max(hi, pts[:, 0].max()))
    if not isinstance(wells, WellGeometry):
        eq = sorted(wells)
        if len(eq) < 3:
            return AttractorFingerprint(len(centers), centers, Well.SINGLE, Energy.LOW,
                                        (lo, hi), compact=True)
        wells = WellGeometry.from_equilibria(eq)
    if lo > wells.barrier:
        well, center = Well.RIGHT, wells.right
    elif hi < wells.barrier:
        well, center = Well.LEFT, wells.left
    else:
        return AttractorFingerprint(len(centers), centers, Well.INTERWELL, Energy.HIGH,
                                    (lo, hi), compact=False)
    if math.isnan(center):
        # trajectory sits on the side whose well has vanished
        return AttractorFingerprint(len(centers), centers, Well.SINGLE, Energy.LOW,
                                    (lo, hi), compact=False)
    reach = max(abs(lo - center), abs(hi - center))
    compact = reach <= 0.5 * abs(center - wells.barrier)
    energy = Energy.HIGH if (len(centers) > 1 and not compact) else Energy.LOW
    return AttractorFingerprint(len(centers), centers, well, energy, (lo, hi), compact)


def bottleneck_distance(a, b) -> float:
    """Smallest achievable max distance over one-to-one pairings of a and b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return math.inf
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1))
    if len(a) == 1:
        return float(d[0, 0])
    for thr in np.unique(d):
        adj = csr_matrix((d <= thr).astype(np.int8))
        if np.all(maximum_bipartite_matching(adj, perm_type="column") >= 0):
            return float(thr)
    return float(d.max())  # unreachable: the largest threshold pairs everything


def fingerprints_match(a: AttractorFingerprint, b: AttractorFingerprint, tol: float) -> bool:
    if a.period != b.period:
        return False
    # cheap reject before the exact bottleneck search
    r, c = linear_sum_assignment(
        np.sqrt(((a.points[:, None, :] - b.points[None, :, :]) ** 2).sum(axis=-1)))
    if len(r) and np.max(np.linalg.norm(a.points[r] - b.points[c], axis=1)) <= tol:
        return True
    return bottleneck_distance(a.points, b.points) <= tol


BASE_COLORS = ("green", "red", "blue")
PALETTE = ("magenta", "cyan", "yellow", "purple", "orange", "brown", "pink",
           "olive", "teal", "navy", "lime", "maroon")


def taxonomy_color(fp: AttractorFingerprint) -> str | None:
    """Fixed colors: green = period-1 high-energy orbit, red / blue = compact
    period-1 low-energy orbit in the right / left well. Others get palette
    colors in discovery order."""
    if fp.period == 1:
        if fp.energy is Energy.HIGH:
            return "green"
        if not fp.compact:
            return None
        if fp.well is Well.RIGHT:
            return "red"
        if fp.well is Well.LEFT:
            return "blue"
    return None


@dataclass
class RegistryEntry:
    class_id: int
    color: str
    fingerprint: AttractorFingerprint
    cells: int = 0


@dataclass
class AttractorRegistry:
    tol: float = 1e-2
    entries: list[RegistryEntry] = field(default_factory=list)

    def match(self, fp: AttractorFingerprint) -> RegistryEntry | None:
        for e in self.entries:
            if fingerprints_match(e.fingerprint, fp, self.tol):
                return e
        return None

    def register(self, fp: AttractorFingerprint) -> RegistryEntry:
        """Return the matching entry, adding a new one if none matches."""
        hit = self.match(fp)
        if hit is None:
            color = taxonomy_color(fp)
            if color is None:
                used = sum(1 for e in self.entries if e.color not in BASE_COLORS)
                color = PALETTE[used % len(PALETTE)]
                if used >= len(PALETTE):
                    color = f"{color}{used // len(PALETTE) + 1}"
            hit = RegistryEntry(len(self.entries) + 1, color, fp)
            self.entries.append(hit)
        hit.cells += 1
        return hit

    def by_id(self, class_id: int) -> RegistryEntry:
        return self.entries[class_id - 1]

    def pairwise_distinct(self) -> bool:
        """No two registered entries match each other, in either order."""
        for i, a in enumerate(self.entries):
            for b in self.entries[i + 1:]:
                ab = fingerprints_match(a.fingerprint, b.fingerprint, self.tol)
                ba = fingerprints_match(b.fingerprint, a.fingerprint, self.tol)
                if ab or ba:
                    return False
        return True


@dataclass
class BasinMap:
    grid: GridSpec
    labels: np.ndarray  # (ny, nx) int: class id >= 1 or a special label
    k: np.ndarray  # (ny, nx) median K, NaN where the test did not run
    registry: AttractorRegistry

    def label_name(self, label: int) -> str:
        return SPECIAL_LABELS.get(int(label), f"C{int(label)}")

    def color_of(self, label: int) -> str:
        if label in SPECIAL_LABELS:
            return {"chaotic": "gray"}.get(SPECIAL_LABELS[label], SPECIAL_LABELS[label])
        return self.registry.by_id(int(label)).color

    @property
    def divergent_cells(self) -> int:
        return int(np.count_nonzero(self.labels == DIVERGENT))


@dataclass(frozen=True)
class BasinOptions:
    tail_fraction: float = 0.1  # steady window for fingerprints
    chaos_window: float = 0.5  # late fraction of the voltage series tested
    # same radius as registry matching: slowly settling orbits must not split
    cluster_tol: float = 1e-2
    match_tol: float = 1e-2
    chunk: int = 2048


def compute_basins(params: HarvesterParams, grid: GridSpec, n_cycles: int,
                   chaos_cfg: Chaos01Config,
                   integ: IntegratorConfig = IntegratorConfig(),
                   opts: BasinOptions = BasinOptions(),
                   workers: int | None = None, phase0: float = 0.0) -> BasinMap:
    """Label every grid cell; see the module docstring for the pipeline.

    ``phase0`` shifts the forcing phase of every cell (cos(omega*t + phase0)).
    """
    set_workers(workers)
    n_tail = tail_length(n_cycles, opts.tail_fraction)
    n_test = tail_length(n_cycles, opts.chaos_window)
    if n_lags(n_test, chaos_cfg.cut_fraction) < 2:
        raise ValueError(f"{n_test} tested cycles are too few for the 0-1 test")
    n_keep = max(n_tail, n_test)
    keep_from = n_cycles - n_keep + 1
    cs = chaos_cfg.draw_c()
    wells = WellGeometry.from_params(params)

    y0 = grid.initial_states()
    labels = np.empty(grid.size, dtype=np.int64)
    kvals = np.full(grid.size, np.nan)
    pending: list[tuple[int, AttractorFingerprint]] = []
    for start in range(0, grid.size, opts.chunk):
        block = y0[start:start + opts.chunk]
        samples, status, _, xr = poincare_batch(
            params, block, n_cycles, integ, keep_from=keep_from,
            track_fraction=opts.tail_fraction, phase0=phase0)
        for j in range(len(block)):
            cell = start + j
            if status[j] != OK:
                labels[cell] = DIVERGENT
                continue
            kc = k_values(samples[j, -n_test:, 2], cs, chaos_cfg.cut_fraction)
            k = float(np.median(kc))
            kvals[cell] = k
            verdict = chaos_cfg.label(k)
            if verdict is Chaos01Class.CHAOTIC:
                labels[cell] = CHAOTIC
            elif verdict is Chaos01Class.INCONCLUSIVE:
                labels[cell] = INCONCLUSIVE
            else:
                fp = fingerprint(samples[j, -n_tail:, :2], wells, opts.cluster_tol,
                                 x_range=tuple(xr[j]))
                if fp is None:
                    # regular by the test but not settled on a short cycle
                    labels[cell] = INCONCLUSIVE
                else:
                    labels[cell] = 0
                    pending.append((cell, fp))

    registry = AttractorRegistry(tol=opts.match_tol)
    for cell, fp in pending:
        labels[cell] = registry.register(fp).class_id
    return BasinMap(grid, labels.reshape(grid.ny, grid.nx),
                    kvals.reshape(grid.ny, grid.nx), registry)


def relative_areas(bmap: BasinMap) -> dict[str, Fraction]:
    """Exact fraction of cells per label name."""
    counts = Counter(bmap.labels.ravel().tolist())
    total = bmap.labels.size
    return {bmap.label_name(lab): Fraction(n, total) for lab, n in sorted(counts.items())}


def color_areas(bmap: BasinMap) -> dict[str, Fraction]:
    """Exact fraction of cells per display color (classes sharing a color add)."""
    out: dict[str, Fraction] = {}
    total = bmap.labels.size
    for lab, n in sorted(Counter(bmap.labels.ravel().tolist()).items()):
        col = bmap.color_of(lab)
        out[col] = out.get(col, Fraction(0)) + Fraction(n, total)
    return out


def energy_areas(bmap: BasinMap) -> dict[str, Fraction]:
    """Fractions grouped by energy class, with special labels kept apart."""
    out: dict[str, Fraction] = {}
    total = bmap.labels.size
    for lab, n in Counter(bmap.labels.ravel().tolist()).items():
        key = SPECIAL_LABELS.get(lab) or bmap.registry.by_id(lab).fingerprint.energy.value
        out[key] = out.get(key, Fraction(0)) + Fraction(n, total)
    return dict(sorted(out.items()))
