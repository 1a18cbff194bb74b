"""Polyhedral capacity regions and their heavy-traffic geometry.

A region is the convex hull of a finite schedule set, described by the
minimal list of halfspaces with unit nonnegative normals. On top of that
sit the per-hyperplane quantities a heavy-traffic experiment needs: the
distance eps_k from an arrival vector to each hyperplane, its projection,
the dominant / interior-dominant classification, the minimum off-face
loss gamma_k, and the certified cone half-angle theta_k inside which the
max-weight rule provably serves on the face.

Exact enumeration only: L in {1, 2, 3}, at most 64 schedules. That covers
every system this laboratory simulates and avoids a general-dimension
hull dependency.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import GEOM_TOL, PROB_TOL, FiniteRealDist, as_float_tuple, inner, norm
from .errors import (
    DegenerateError,
    DimensionError,
    DomainError,
    NonCoordinateConvexError,
    NotInteriorError,
    UnsupportedDimensionError,
)

MAX_SCHEDULES = 64
MAX_FADING_COMBOS = 100_000

# Strictness used for relative-interior tests of projected points.
TOL_INTERIOR = 1e-9
TOL_STRICT = 1e-9


# -------- schedule sets --------

@dataclass(frozen=True)
class ScheduleSet:
    """Finite set of nonnegative-integer service vectors, containing zero."""

    schedules: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if not self.schedules:
            raise DomainError("schedule set is empty")
        L = len(self.schedules[0])
        if L < 1:
            raise DomainError("schedules must have length >= 1")
        for s in self.schedules:
            if len(s) != L:
                raise DimensionError("schedules differ in length")
            for v in s:
                if not isinstance(v, int) or v < 0:
                    raise DomainError(f"schedule entries must be nonnegative integers, got {v!r}")
        if tuple([0] * L) not in self.schedules:
            raise DomainError("schedule set must contain the zero vector")

    @classmethod
    def from_iterable(cls, schedules: Iterable[Sequence[int]]) -> "ScheduleSet":
        rows = sorted({tuple(int(v) for v in s) for s in schedules})
        return cls(tuple(rows))

    @property
    def L(self) -> int:
        return len(self.schedules[0])

    @property
    def s_max(self) -> int:
        return max(max(s) for s in self.schedules)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.schedules, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.schedules)


@dataclass(frozen=True)
class FadingModel:
    """I.i.d. channel states j with probabilities psi_j, one schedule set each."""

    probs: tuple[float, ...]
    schedule_sets: tuple[ScheduleSet, ...]
    state_labels: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self):
        if len(self.probs) != len(self.schedule_sets):
            raise DomainError("probs/schedule_sets length mismatch")
        if not self.probs:
            raise DomainError("fading model needs at least one state")
        if any(p <= 0.0 for p in self.probs):
            raise DomainError("state probabilities must be positive")
        if abs(sum(self.probs) - 1.0) > PROB_TOL:
            raise DomainError("state probabilities must sum to 1")
        L = self.schedule_sets[0].L
        if any(ss.L != L for ss in self.schedule_sets):
            raise DimensionError("per-state schedule sets differ in dimension")

    @property
    def L(self) -> int:
        return self.schedule_sets[0].L

    @property
    def n_states(self) -> int:
        return len(self.probs)

    @property
    def s_max(self) -> int:
        return max(ss.s_max for ss in self.schedule_sets)


# -------- halfspace description --------

@dataclass(frozen=True)
class Hyperplane:
    """Unit-norm nonnegative normal c with positive offset b."""

    c: tuple[float, ...]
    b: float

    def __post_init__(self):
        if abs(norm(self.c) - 1.0) > GEOM_TOL:
            raise DomainError(f"normal must be unit length, got {norm(self.c)!r}")
        if any(v < 0.0 for v in self.c):
            raise DomainError("normal must be nonnegative")
        if not self.b > 0.0:
            raise DomainError("offset must be positive")


@dataclass(frozen=True)
class CapacityRegion:
    hyperplanes: tuple[Hyperplane, ...]
    generators: ScheduleSet | FadingModel | None = None

    @property
    def K(self) -> int:
        return len(self.hyperplanes)

    @property
    def L(self) -> int:
        return len(self.hyperplanes[0].c)

    def member(self, r: Sequence[float]) -> bool:
        """True iff r >= 0 and every halfspace holds within GEOM_TOL."""
        if len(r) != self.L:
            raise DimensionError(f"point has length {len(r)}, region is {self.L}-dimensional")
        if any(v < -GEOM_TOL for v in r):
            return False
        return all(inner(h.c, r) <= h.b + GEOM_TOL for h in self.hyperplanes)


@dataclass(frozen=True)
class HeavyTrafficPoint:
    """An interior arrival vector with its per-hyperplane geometry."""

    lam: tuple[float, ...]
    eps: tuple[float, ...]
    projections: tuple[tuple[float, ...], ...]
    dominant: tuple[int, ...]
    interior_dominant: tuple[int, ...]


# -------- hull construction --------

def _facet_filter(facets: list[tuple[np.ndarray, float]], L: int) -> list[Hyperplane]:
    """Keep capacity hyperplanes, drop orthant-implied facets, reject the rest.

    A facet (n, b) whose constraint <n, r> <= b is implied by r >= 0
    (n <= 0 and b >= 0) is not part of the description. A facet with a
    genuinely mixed-sign normal means the hull is not expressible with
    nonnegative normals.
    """
    out = []
    for n, b in facets:
        scale = float(np.linalg.norm(n))
        if scale == 0.0:
            continue
        nu = n / scale
        bu = b / scale
        if np.all(nu <= GEOM_TOL) and bu >= -GEOM_TOL:
            continue  # implied by the nonnegative orthant
        if np.all(nu >= -GEOM_TOL) and bu > GEOM_TOL:
            c = np.clip(nu, 0.0, None)
            c /= np.linalg.norm(c)
            out.append(Hyperplane(as_float_tuple(c), float(bu)))
            continue
        raise NonCoordinateConvexError(
            f"hull facet with mixed-sign normal {tuple(nu.round(12))}; "
            "no nonnegative halfspace description exists"
        )
    # Deduplicate (several vertex tuples can span one facet) and order
    # deterministically: lexicographic by normal, then offset.
    seen: dict[tuple, Hyperplane] = {}
    for h in out:
        key = tuple(round(v, 9) for v in h.c) + (round(h.b, 9),)
        seen.setdefault(key, h)
    return sorted(seen.values(), key=lambda h: (h.c, h.b))


def _hull_halfspaces_1d(points: np.ndarray) -> list[Hyperplane]:
    top = float(points.max())
    if top <= GEOM_TOL:
        raise DegenerateError("region degenerate: only the origin is reachable")
    return [Hyperplane((1.0,), top)]


def _hull_halfspaces_2d(points: np.ndarray) -> list[Hyperplane]:
    pts = np.unique(points, axis=0)
    if len(pts) < 3:
        raise DegenerateError("2-d hull needs at least 3 distinct points")
    # Monotone chain, counterclockwise, collinear vertices dropped.
    ordered = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def cross2(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(chain_pts):
        chain: list[np.ndarray] = []
        for p in chain_pts:
            while len(chain) >= 2 and cross2(chain[-2], chain[-1], p) <= 1e-12:
                chain.pop()
            chain.append(p)
        return chain

    lower = half(ordered)
    upper = half(ordered[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateError("schedule points are collinear; hull has no area")
    facets = []
    for i in range(len(hull)):
        v1, v2 = hull[i], hull[(i + 1) % len(hull)]
        d = v2 - v1
        n = np.array([d[1], -d[0]], dtype=float)  # outward for a CCW polygon
        facets.append((n, float(n @ v1)))
    return _facet_filter(facets, 2)


def _hull_halfspaces_3d(points: np.ndarray) -> list[Hyperplane]:
    pts = np.unique(points, axis=0)
    if len(pts) < 4:
        raise DegenerateError("3-d hull needs at least 4 distinct points")
    span = pts - pts[0]
    if np.linalg.matrix_rank(span, tol=1e-9) < 3:
        raise DegenerateError("schedule points are coplanar; hull has no volume")
    scale = max(1.0, float(np.abs(pts).max()))
    tol = 1e-9 * scale * scale
    facets = []
    for i, j, k in itertools.combinations(range(len(pts)), 3):
        n = np.cross(pts[j] - pts[i], pts[k] - pts[i])
        if np.linalg.norm(n) < 1e-12 * scale * scale:
            continue
        b = float(n @ pts[i])
        d = pts @ n
        if np.all(d <= b + tol):
            facets.append((n, b))
        elif np.all(d >= b - tol):
            facets.append((-n, -b))
    return _facet_filter(facets, 3)


def _hull_halfspaces_points(points: np.ndarray) -> list[Hyperplane]:
    L = points.shape[1]
    if L == 1:
        return _hull_halfspaces_1d(points)
    if L == 2:
        return _hull_halfspaces_2d(points)
    if L == 3:
        return _hull_halfspaces_3d(points)
    raise UnsupportedDimensionError(f"exact hulls implemented for L <= 3, got L={L}")


def hull_halfspaces(s: ScheduleSet) -> CapacityRegion:
    """Minimal halfspace description of the convex hull of a schedule set.

    Hyperplanes come out sorted lexicographically by normal so regions are
    reproducible. Each reported hyperplane supports a facet of the hull,
    which makes the list minimal: dropping one strictly enlarges the set.
    """
    if s.L > 3:
        raise UnsupportedDimensionError(f"exact hulls implemented for L <= 3, got L={s.L}")
    if len(s) > MAX_SCHEDULES:
        raise DomainError(f"schedule set too large ({len(s)} > {MAX_SCHEDULES})")
    pts = s.as_array().astype(float)
    zero_cols = [l for l in range(s.L) if pts[:, l].max() <= 0.0]
    if zero_cols:
        raise DegenerateError(f"no schedule ever serves queue(s) {zero_cols}; region is degenerate")
    planes = _hull_halfspaces_points(pts)
    return CapacityRegion(tuple(planes), generators=s)


def member(region: CapacityRegion, r: Sequence[float]) -> bool:
    return region.member(r)


# -------- heavy-traffic geometry --------

def heavy_traffic_point(region: CapacityRegion, lam: Sequence[float]) -> HeavyTrafficPoint:
    """Distances, projections, and dominant-face classification of lam.

    lam must be strictly interior: every hyperplane distance exceeds
    TOL_INTERIOR. Hyperplane k is dominant when the projection
    lam + eps_k * c_k stays inside the region, and interior-dominant when
    that projection additionally keeps strict slack on every other
    hyperplane.
    """
    if len(lam) != region.L:
        raise DimensionError("arrival vector dimension mismatch")
    lam_t = as_float_tuple(lam)
    if any(v < 0.0 for v in lam_t):
        raise DomainError("arrival rates must be nonnegative")
    eps = []
    for h in region.hyperplanes:
        e = h.b - inner(h.c, lam_t)
        if e <= TOL_INTERIOR:
            raise NotInteriorError(
                f"lambda is not strictly interior: slack {e!r} on hyperplane {h.c}"
            )
        eps.append(e)
    projections = []
    dominant = []
    interior_dominant = []
    for k, h in enumerate(region.hyperplanes):
        proj = tuple(lam_t[l] + eps[k] * h.c[l] for l in range(region.L))
        projections.append(proj)
        if not region.member(proj):
            continue
        dominant.append(k)
        strict = all(
            inner(region.hyperplanes[j].c, proj) < region.hyperplanes[j].b - TOL_STRICT
            for j in range(region.K)
            if j != k
        )
        if strict:
            interior_dominant.append(k)
    return HeavyTrafficPoint(
        lam=lam_t,
        eps=tuple(eps),
        projections=tuple(projections),
        dominant=tuple(dominant),
        interior_dominant=tuple(interior_dominant),
    )


def gamma_k(region: CapacityRegion, s: ScheduleSet, k: int) -> float:
    """Minimum loss b_k - <c_k, s> over schedules strictly off face k."""
    h = _hyperplane(region, k)
    losses = [h.b - inner(h.c, sched) for sched in s.schedules]
    off = [x for x in losses if x > GEOM_TOL]
    if not off:
        raise DegenerateError(f"every schedule lies on face {k}; no off-face loss")
    return min(off)


def _hyperplane(region: CapacityRegion, k: int) -> Hyperplane:
    if not 0 <= k < region.K:
        raise DomainError(f"face index {k} out of range for K={region.K}")
    return region.hyperplanes[k]


# -------- cone angles --------

def _argmax_indices(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    w = points @ q
    wmax = w.max()
    tol = 1e-12 * max(1.0, abs(wmax))
    return np.nonzero(w >= wmax - tol)[0]


def _cone_angle_2d(points: np.ndarray, c: np.ndarray, on_face: np.ndarray) -> float:
    """Exact via the normal fan restricted to the closed positive quadrant."""
    phi_c = math.atan2(c[1], c[0])

    def ok(phi: float) -> bool:
        q = np.array([math.cos(phi), math.sin(phi)])
        return bool(np.all(on_face[_argmax_indices(points, q)]))

    breaks = {0.0, math.pi / 2}
    npts = len(points)
    for i in range(npts):
        for j in range(i + 1, npts):
            d = points[i] - points[j]
            if np.allclose(d, 0.0):
                continue
            # tie direction: q orthogonal to d, inside the quadrant if any
            for q in (np.array([-d[1], d[0]]), np.array([d[1], -d[0]])):
                if q[0] >= -1e-15 and q[1] >= -1e-15 and np.linalg.norm(q) > 0:
                    phi = math.atan2(max(q[1], 0.0), max(q[0], 0.0))
                    if -1e-12 <= phi <= math.pi / 2 + 1e-12:
                        breaks.add(min(max(phi, 0.0), math.pi / 2))
    grid = sorted(breaks)
    failing: list[float] = []
    for idx, phi in enumerate(grid):
        if not ok(phi):
            failing.append(phi)
        if idx + 1 < len(grid):
            mid = 0.5 * (phi + grid[idx + 1])
            if not ok(mid):
                failing.append(mid)
    if not failing:
        # Every nonnegative direction selects on-face maximizers; report the
        # angle that covers the whole quadrant from c.
        return max(phi_c, math.pi / 2 - phi_c)
    return min(abs(phi - phi_c) for phi in failing)


def _octant_directions(n_dirs: int) -> np.ndarray:
    """Deterministic quasi-uniform directions over the positive octant."""
    m = max(int(math.isqrt(n_dirs)), 4)
    us = np.linspace(0.0, 1.0, m)
    thetas = np.linspace(0.0, math.pi / 2, m)
    dirs = []
    for u in us:          # polar angle from the z-axis
        pz = math.cos(u * math.pi / 2)
        rxy = math.sin(u * math.pi / 2)
        for t in thetas:  # azimuth inside the quadrant
            dirs.append([rxy * math.cos(t), rxy * math.sin(t), pz])
    return np.unique(np.round(np.asarray(dirs), 15), axis=0)


def _cone_angle_3d(points: np.ndarray, c: np.ndarray, on_face: np.ndarray, n_dirs: int) -> float:
    def ok(q: np.ndarray) -> bool:
        return bool(np.all(on_face[_argmax_indices(points, q)]))

    probes = _octant_directions(n_dirs)
    angles = np.arccos(np.clip(probes @ c, -1.0, 1.0))
    best = None
    for q, a in zip(probes, angles):
        if np.linalg.norm(q) == 0.0:
            continue
        if not ok(q):
            # Bisect along the great-circle arc from c toward q to bracket
            # the failure boundary, then keep the passing side.
            lo, hi = 0.0, float(a)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                # rotate c toward q by angle mid
                axis = q / np.linalg.norm(q) - (c @ q / np.linalg.norm(q)) * c
                if np.linalg.norm(axis) < 1e-15:
                    break
                axis = axis / np.linalg.norm(axis)
                probe = math.cos(mid) * c + math.sin(mid) * axis
                if ok(np.clip(probe, 0.0, None)):
                    lo = mid
                else:
                    hi = mid
            best = lo if best is None else min(best, lo)
    if best is not None:
        return best * (1.0 - 1e-9)
    corners = np.eye(3)
    return float(max(math.acos(min(1.0, max(-1.0, float(c @ e)))) for e in corners))


def _cone_angle(points: np.ndarray, c_vec: Sequence[float], on_face: np.ndarray, n_dirs: int) -> float:
    L = points.shape[1]
    if not on_face.any():
        raise DegenerateError("no schedule on the face; cone angle undefined")
    c = np.asarray(c_vec, dtype=float)
    if L == 1:
        return math.pi / 2
    if L == 2:
        return _cone_angle_2d(points, c, on_face)
    if L == 3:
        return _cone_angle_3d(points, c, on_face, n_dirs)
    raise UnsupportedDimensionError("cone angles implemented for L <= 3")


def cone_angle_k(region: CapacityRegion, s: ScheduleSet, k: int, n_dirs: int = 2048) -> float:
    """Certified half-angle of the cone around c_k inside which every
    max-weight maximizer lies on face k.

    L=2 is exact via the sorted normal fan; L=3 probes an n_dirs grid on
    the octant and bisects to the failure boundary, reporting a lower
    estimate. When no nonnegative direction ever selects an off-face
    schedule, the reported angle is the one covering the entire orthant
    from c_k (pi/2 for L=1).
    """
    h = _hyperplane(region, k)
    pts = s.as_array().astype(float)
    on_face = np.array([inner(h.c, sched) >= h.b - GEOM_TOL for sched in s.schedules])
    if not on_face.any():
        raise DegenerateError(f"no schedule achieves b on face {k}")
    return _cone_angle(pts, h.c, on_face, n_dirs)


# -------- fading --------

def fading_region(f: FadingModel) -> CapacityRegion:
    """Probability-weighted Minkowski sum of the per-state hulls.

    Enumerates every weighted combination sum_j psi_j s_j of per-state
    schedules and takes the hull; guarded so the combination count stays
    below MAX_FADING_COMBOS.
    """
    if f.L > 3:
        raise UnsupportedDimensionError("fading regions implemented for L <= 3")
    sizes = [len(ss) for ss in f.schedule_sets]
    combos = math.prod(sizes)
    if combos > MAX_FADING_COMBOS:
        raise DomainError(f"too many vertex combinations ({combos} > {MAX_FADING_COMBOS})")
    arrays = [ss.as_array().astype(float) * p for p, ss in zip(f.probs, f.schedule_sets)]
    points = arrays[0]
    for arr in arrays[1:]:
        points = (points[:, None, :] + arr[None, :, :]).reshape(-1, f.L)
        points = np.unique(np.round(points, 12), axis=0)
    zero_cols = [l for l in range(f.L) if points[:, l].max() <= 0.0]
    if zero_cols:
        raise DegenerateError(f"no state ever serves queue(s) {zero_cols}; region is degenerate")
    planes = _hull_halfspaces_points(points)
    return CapacityRegion(tuple(planes), generators=f)


def onoff_downlink_fading(p: Sequence[float]) -> FadingModel:
    """ON/OFF downlink: each link is independently ON with probability p_l;
    the server may serve one packet to a single ON link per slot."""
    p = [float(v) for v in p]
    L = len(p)
    if L < 1:
        raise DomainError("need at least one link")
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"ON probability {v} outside [0, 1]")
    states = []
    probs = []
    sets = []
    for mask in itertools.product((1, 0), repeat=L):
        prob = math.prod(p[l] if mask[l] else 1.0 - p[l] for l in range(L))
        if prob <= 0.0:
            continue
        schedules = [tuple([0] * L)]
        for l in range(L):
            if mask[l]:
                e = [0] * L
                e[l] = 1
                schedules.append(tuple(e))
        states.append(mask)
        probs.append(prob)
        sets.append(ScheduleSet.from_iterable(schedules))
    return FadingModel(tuple(probs), tuple(sets), state_labels=tuple(states))


def onoff_downlink_region(p: Sequence[float]) -> CapacityRegion:
    """Closed-form ON/OFF downlink region: for every nonempty group G of
    links, sum_{l in G} r_l <= 1 - prod_{l in G} (1 - p_l). Redundant
    groups are removed so the description is minimal."""
    p = [float(v) for v in p]
    L = len(p)
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise DomainError(f"ON probability {v} outside [0, 1]")
    if any(v == 0.0 for v in p):
        raise DegenerateError("a link with p=0 can never be served; region is degenerate")
    raw = []
    for size in range(1, L + 1):
        for group in itertools.combinations(range(L), size):
            rhs = 1.0 - math.prod(1.0 - p[l] for l in group)
            c = np.zeros(L)
            c[list(group)] = 1.0
            scale = math.sqrt(size)
            raw.append((c / scale, rhs / scale))
    kept = _remove_redundant(raw, L)
    planes = sorted(
        (Hyperplane(as_float_tuple(c), float(b)) for c, b in kept),
        key=lambda h: (h.c, h.b),
    )
    return CapacityRegion(tuple(planes), generators=onoff_downlink_fading(p))


def _remove_redundant(constraints: list[tuple[np.ndarray, float]], L: int) -> list[tuple[np.ndarray, float]]:
    """Drop constraints whose removal does not enlarge {r >= 0, Ar <= b}."""
    from scipy.optimize import linprog

    kept = list(constraints)
    i = 0
    while i < len(kept):
        c_i, b_i = kept[i]
        others = kept[:i] + kept[i + 1 :]
        A = np.array([c for c, _ in others]) if others else None
        b = np.array([b for _, b in others]) if others else None
        res = linprog(
            -c_i,
            A_ub=A,
            b_ub=b,
            bounds=[(0.0, None)] * L,
            method="highs",
        )
        # Unbounded without this constraint means it is essential.
        if res.status == 3 or (res.status == 0 and -res.fun > b_i + 1e-12):
            i += 1
        else:
            kept.pop(i)
    return kept


def fading_face_service_dist(f: FadingModel, region: CapacityRegion, k: int) -> FiniteRealDist:
    """Distribution of the per-state face offset beta_k: in state j the
    best service weight along c_k is b_{j,k} = max_{s in S_j} <c_k, s>,
    occurring with probability psi_j; duplicates aggregated. Its mean is
    b_k by construction of the fading region."""
    h = _hyperplane(region, k)
    agg: dict[float, float] = {}
    for psi, ss in zip(f.probs, f.schedule_sets):
        bjk = max(inner(h.c, s) for s in ss.schedules)
        key = round(bjk, 12)
        agg[key] = agg.get(key, 0.0) + psi
    items = sorted(agg.items())
    return FiniteRealDist(tuple(v for v, _ in items), tuple(p for _, p in items))


def per_state_face_offsets(f: FadingModel, region: CapacityRegion, k: int) -> tuple[float, ...]:
    """b_{j,k} for every channel state, in state order."""
    h = _hyperplane(region, k)
    return tuple(max(inner(h.c, s) for s in ss.schedules) for ss in f.schedule_sets)


def fading_gamma_k(f: FadingModel, region: CapacityRegion, k: int) -> float:
    """Per-state analogue of gamma_k: the minimum over channel states of the
    smallest positive loss b_{j,k} - <c_k, s> within that state's schedule
    set. States whose schedules all sit on their own face contribute
    nothing."""
    h = _hyperplane(region, k)
    losses = []
    for ss in f.schedule_sets:
        bjk = max(inner(h.c, s) for s in ss.schedules)
        state_losses = [bjk - inner(h.c, s) for s in ss.schedules]
        losses.extend(x for x in state_losses if x > GEOM_TOL)
    if not losses:
        raise DegenerateError(f"no state has an off-face schedule for face {k}")
    return min(losses)


def fading_cone_angle_k(f: FadingModel, region: CapacityRegion, k: int, n_dirs: int = 2048) -> float:
    """Worst-case cone angle across channel states: within the reported
    angle of c_k, the max-weight rule serves on the state's own face in
    every state."""
    h = _hyperplane(region, k)
    angles = []
    for ss in f.schedule_sets:
        pts = ss.as_array().astype(float)
        bjk = max(inner(h.c, s) for s in ss.schedules)
        on_face = np.array([inner(h.c, s) >= bjk - GEOM_TOL for s in ss.schedules])
        angles.append(_cone_angle(pts, h.c, on_face, n_dirs))
    return min(angles)


# -------- serialization --------

def _fmt(x: float) -> float:
    return float(f"{x:.17g}")


def region_to_json(region: CapacityRegion) -> str:
    doc: dict = {
        "hyperplanes": [
            {"c": [_fmt(v) for v in h.c], "b": _fmt(h.b)} for h in region.hyperplanes
        ]
    }
    gen = region.generators
    if isinstance(gen, ScheduleSet):
        doc["generators"] = [list(s) for s in gen.schedules]
    elif isinstance(gen, FadingModel):
        doc["generators"] = {
            "states": [
                {"prob": _fmt(p), "schedules": [list(s) for s in ss.schedules]}
                for p, ss in zip(gen.probs, gen.schedule_sets)
            ]
        }
    else:
        doc["generators"] = None
    return json.dumps(doc, indent=2)


def region_from_json(text: str) -> CapacityRegion:
    try:
        doc = json.loads(text)
        planes = tuple(
            Hyperplane(as_float_tuple(h["c"]), float(h["b"])) for h in doc["hyperplanes"]
        )
        gen = doc.get("generators")
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DomainError(f"malformed region document: {exc}") from exc
    generators: ScheduleSet | FadingModel | None
    if gen is None:
        generators = None
    elif isinstance(gen, dict):
        generators = FadingModel(
            tuple(float(s["prob"]) for s in gen["states"]),
            tuple(ScheduleSet.from_iterable(s["schedules"]) for s in gen["states"]),
        )
    else:
        generators = ScheduleSet.from_iterable(gen)
    return CapacityRegion(planes, generators=generators)
