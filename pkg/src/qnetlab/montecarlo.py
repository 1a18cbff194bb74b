"""Steady-state estimation by burn-in plus batch means, with load sweeps.

Replications run in lockstep: all R queue vectors advance together as one
(R, L) integer array, and the per-slot randomness is pre-drawn in chunks
from R independent generators. Each replication owns the generator keyed
by (base_seed, rep), and always draws the same fixed number of uniforms
per slot, so estimates are bit-identical no matter how replications are
grouped across worker processes.

Estimates use nonoverlapping batch means: the post-burn-in window is cut
into ``batches`` equal blocks per replication (the remainder is dropped),
and a Student-t interval is formed over all R * batches block averages,
merged in replication order. Merging is therefore a pure reduction and
independent of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import t as student_t

from .core import BoundedIntDist, norm
from .dynamics import FadingSystem, RoutingSystem, SchedulingSystem, SlotRecord, System
from .errors import ConfigError, DimensionError, DomainError, InvariantViolation
from .geometry import CapacityRegion, FadingModel, per_state_face_offsets

# Slots simulated per pre-drawn randomness slab. Large enough that the
# per-chunk vector work dominates, small enough to keep slabs in cache.
CHUNK_SLOTS = 16_384
# A schedule counts as on-face when <c, s> >= b - FACE_TOL.
FACE_TOL = 1e-9

_ROUTING_POLICIES = ("jsq", "random", "round_robin")
_SCHEDULING_POLICIES = ("maxweight", "priority")
_FADING_POLICIES = ("maxweight_fading", "priority")


# -------- metric specifications --------

@dataclass(frozen=True)
class MetricSpec:
    """One per-slot scalar to average in steady state.

    ``scale_power`` is the power p such that eps^p * mean has a finite
    nonzero heavy-traffic limit; sweep reports use it for the scaled
    column.
    """

    kind: str
    name: str
    c: tuple[float, ...] | None = None
    power: float = 1.0
    b: float | None = None
    state_offsets: tuple[float, ...] | None = None
    scale_power: float = 0.0

    @classmethod
    def sum_q(cls) -> "MetricSpec":
        return cls(kind="sum_q", name="sum_q", scale_power=1.0)

    @classmethod
    def cq(cls, c: Sequence[float]) -> "MetricSpec":
        return cls(kind="cq", name="cq", c=tuple(float(v) for v in c), scale_power=1.0)

    @classmethod
    def cq_pow(cls, c: Sequence[float], n: int) -> "MetricSpec":
        if n < 1:
            raise DomainError("moment order must be >= 1")
        return cls(
            kind="cq_pow",
            name=f"cq_pow_{n:g}",
            c=tuple(float(v) for v in c),
            power=float(n),
            scale_power=float(n),
        )

    @classmethod
    def perp_norm_pow(cls, c: Sequence[float], r: float) -> "MetricSpec":
        if r <= 0:
            raise DomainError("perpendicular moment order must be positive")
        return cls(
            kind="perp_norm_pow",
            name=f"perp_norm_{r:g}",
            c=tuple(float(v) for v in c),
            power=float(r),
            scale_power=0.0,
        )

    @classmethod
    def q_norm2(cls) -> "MetricSpec":
        return cls(kind="q_norm2", name="q_norm2", scale_power=2.0)

    @classmethod
    def cu(cls, c: Sequence[float]) -> "MetricSpec":
        return cls(kind="cu", name="cu", c=tuple(float(v) for v in c), scale_power=0.0)

    @classmethod
    def face_freq(
        cls, region: CapacityRegion, k: int, fading: FadingModel | None = None
    ) -> "MetricSpec":
        h = region.hyperplanes[k]
        offsets = per_state_face_offsets(fading, region, k) if fading is not None else None
        return cls(
            kind="face_freq",
            name=f"face_freq_{k}",
            c=h.c,
            b=h.b,
            state_offsets=offsets,
            scale_power=0.0,
        )


# -------- configuration and results --------

@dataclass(frozen=True)
class SimConfig:
    horizon: int
    burn_in: int
    batches: int = 16
    replications: int = 1
    base_seed: int = 0
    metrics: tuple[MetricSpec, ...] = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not 0 <= self.burn_in < self.horizon:
            raise ConfigError(
                f"burn_in must lie in [0, horizon), got {self.burn_in} vs {self.horizon}"
            )
        if self.batches < 8:
            raise ConfigError(f"need at least 8 batches for interval estimates, got {self.batches}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")

    @property
    def batch_len(self) -> int:
        return (self.horizon - self.burn_in) // self.batches


@dataclass(frozen=True)
class SteadyStateEstimate:
    mean: float
    variance_of_mean: float
    ci_low: float
    ci_high: float
    batches: int
    samples: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


@dataclass(frozen=True)
class EstimateResult:
    metrics: dict[str, SteadyStateEstimate]
    warnings: tuple[str, ...] = ()


# -------- uniform slab layout --------
#
# Fixed number of uniforms per slot per system kind, used or not, so the
# random stream position depends only on (seed, rep, t):
#   routing:    [arrival total | L service draws | L tie keys]
#   scheduling: [L arrival draws | M tie keys]
#   fading:     [L arrival draws | state draw | M_max tie keys]

def _n_uniforms(system: System) -> int:
    if isinstance(system, RoutingSystem):
        return 1 + 2 * system.L
    if isinstance(system, SchedulingSystem):
        return system.L + len(system.schedules)
    if isinstance(system, FadingSystem):
        m_max = max(len(ss) for ss in system.fading.schedule_sets)
        return system.L + 1 + m_max
    raise ConfigError(f"unknown system type {type(system).__name__}")


def _check_policy(system: System, policy: str) -> None:
    if isinstance(system, RoutingSystem):
        allowed = _ROUTING_POLICIES
    elif isinstance(system, SchedulingSystem):
        allowed = _SCHEDULING_POLICIES
    elif isinstance(system, FadingSystem):
        allowed = _FADING_POLICIES
    else:
        raise ConfigError(f"unknown system type {type(system).__name__}")
    if policy not in allowed:
        raise ConfigError(
            f"policy {policy!r} not valid for {type(system).__name__}; choose from {allowed}"
        )


def _check_metrics(system: System, metrics: Sequence[MetricSpec]) -> None:
    if not metrics:
        raise ConfigError("no metrics requested")
    seen = set()
    for m in metrics:
        if m.name in seen:
            raise ConfigError(f"duplicate metric name {m.name!r}")
        seen.add(m.name)
        if m.c is not None and len(m.c) != system.L:
            raise DimensionError(
                f"metric {m.name!r} direction has length {len(m.c)}, system has L={system.L}"
            )
        if m.kind == "face_freq":
            if isinstance(system, RoutingSystem):
                raise ConfigError("face frequency is undefined for routing systems")
            if isinstance(system, FadingSystem) and m.state_offsets is None:
                raise ConfigError("face frequency on a fading system needs per-state offsets")


# -------- per-chunk metric evaluation --------

class _ChunkValues:
    """Lazily evaluated per-slot metric arrays for one chunk.

    q/u/s are (R, T, L) int64 slot buffers (queue after the slot, unused
    service, offered service); j is (R, T) channel states or None.
    """

    def __init__(self, q, u, s, j):
        self.q = q
        self.u = u
        self.s = s
        self.j = j
        self._cq: dict[tuple, np.ndarray] = {}
        self._q2: np.ndarray | None = None

    def cq(self, c: tuple[float, ...]) -> np.ndarray:
        arr = self._cq.get(c)
        if arr is None:
            arr = self.q @ np.asarray(c)
            self._cq[c] = arr
        return arr

    def q2(self) -> np.ndarray:
        if self._q2 is None:
            self._q2 = np.einsum("rtl,rtl->rt", self.q, self.q)
        return self._q2

    def values(self, m: MetricSpec) -> np.ndarray:
        if m.kind == "sum_q":
            return self.q.sum(axis=2)
        if m.kind == "cq":
            return self.cq(m.c)
        if m.kind == "cq_pow":
            return self.cq(m.c) ** m.power
        if m.kind == "q_norm2":
            return self.q2()
        if m.kind == "perp_norm_pow":
            v = self.cq(m.c)
            perp2 = np.maximum(self.q2() - v * v, 0.0)
            if m.power == 2.0:
                return perp2
            return perp2 ** (m.power / 2.0)
        if m.kind == "cu":
            return self.u @ np.asarray(m.c)
        if m.kind == "face_freq":
            cs = self.s @ np.asarray(m.c)
            if m.state_offsets is not None:
                target = np.asarray(m.state_offsets)[self.j]
            else:
                target = m.b
            return (cs >= target - FACE_TOL).astype(float)
        raise ConfigError(f"unknown metric kind {m.kind!r}")


# -------- pathwise invariant checks (vectorized) --------

def _first_bad(bad: np.ndarray) -> tuple[int, int]:
    idx = np.argwhere(bad)
    r, t = idx[0][0], idx[0][1]
    return int(r), int(t)


def _record_at(q_before, a_buf, vals: _ChunkValues, r: int, t: int) -> SlotRecord:
    j = None if vals.j is None else int(vals.j[r, t])
    return SlotRecord(
        q_before=tuple(int(x) for x in q_before[r, t]),
        a=tuple(int(x) for x in a_buf[r, t]),
        s=tuple(int(x) for x in vals.s[r, t]),
        u=tuple(int(x) for x in vals.u[r, t]),
        q_after=tuple(int(x) for x in vals.q[r, t]),
        j=j,
    )


def _check_chunk(
    vals: _ChunkValues,
    a_buf: np.ndarray,
    q_prev: np.ndarray,
    c: tuple[float, ...] | None,
    jump_bound: float,
    rep_ids: Sequence[int],
    t0: int,
) -> None:
    """Raise InvariantViolation at the first slot where an exact pathwise
    identity fails. q_prev is the queue state entering the chunk."""
    q_before = np.concatenate([q_prev[:, None, :], vals.q[:, :-1, :]], axis=1)

    def fail(tag: str, r: int, t: int):
        rec = _record_at(q_before, a_buf, vals, r, t)
        raise InvariantViolation(
            f"{tag} violated at replication {rep_ids[r]}, slot {t0 + t}: {rec}", record=rec
        )

    recon = q_before + a_buf - vals.s + vals.u
    bad = recon != vals.q
    if bad.any():
        r, t = _first_bad(bad.any(axis=2))
        fail("slot update identity Q' = Q + A - S + U", r, t)
    bad = (vals.u < 0) | (vals.u > vals.s)
    if bad.any():
        r, t = _first_bad(bad.any(axis=2))
        fail("unused service bound 0 <= U <= S", r, t)
    bad = (vals.u * vals.q) != 0
    if bad.any():
        r, t = _first_bad(bad.any(axis=2))
        fail("complementary slackness U_l * Q'_l = 0", r, t)

    if c is None:
        return
    cv = np.asarray(c)
    cq_after = vals.cq(c)
    cq_before = q_before @ cv
    q2_before = np.einsum("rtl,rtl->rt", q_before, q_before)
    perp_after = np.sqrt(np.maximum(vals.q2() - cq_after * cq_after, 0.0))
    perp_before = np.sqrt(np.maximum(q2_before - cq_before * cq_before, 0.0))

    dv = np.abs(perp_after - perp_before)
    bad2 = dv > jump_bound + 1e-9
    if bad2.any():
        r, t = _first_bad(bad2)
        fail("perpendicular jump bound |dV| <= 2 sqrt(L) max(A_max, S_max)", r, t)

    cu = vals.u @ cv
    qu = np.einsum("rtl,rtl->rt", vals.q, vals.u).astype(float)
    lhs = cq_after * cu
    rhs = lhs - qu  # -<Q_perp', U> expanded
    scale = np.maximum(1.0, np.abs(lhs))
    bad2 = np.abs(lhs - rhs) > 1e-9 * scale
    if bad2.any():
        r, t = _first_bad(bad2)
        fail("unused service identity <c,Q'><c,U> = -<Q_perp',U>", r, t)

    res = np.abs(cq_after * cq_after + perp_after * perp_after - vals.q2())
    bad2 = res > 1e-9 * np.maximum(1.0, vals.q2())
    if bad2.any():
        r, t = _first_bad(bad2)
        fail("Pythagoras ||Q||^2 = <c,Q>^2 + ||Q_perp||^2", r, t)


# -------- the lockstep engine --------

def _cum(dist: BoundedIntDist) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(dist.values, dtype=np.int64), dist.cumulative()


def _draw(vals: np.ndarray, cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cum, u, side="right")
    np.clip(idx, 0, len(vals) - 1, out=idx)
    return vals[idx]


def _simulate_reps(
    system: System,
    policy: str,
    cfg: SimConfig,
    metrics: tuple[MetricSpec, ...],
    rep_ids: Sequence[int],
    check_c: tuple[float, ...] | None,
    check_invariants: bool,
    fault: str | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance a group of replications and return per-batch aggregates.

    Returns (batch_sums, batch_max): batch_sums has shape
    (len(rep_ids), n_metrics, batches) holding sums of per-slot metric
    values over each batch; batch_max holds the max single-queue length
    seen in each batch.
    """
    R = len(rep_ids)
    L = system.L
    n_u = _n_uniforms(system)
    batch_len = cfg.batch_len
    used = batch_len * cfg.batches
    total_slots = cfg.burn_in + used  # the trailing remainder is never sampled

    gens = [
        np.random.default_rng(np.random.SeedSequence(entropy=cfg.base_seed, spawn_key=(rep,)))
        for rep in rep_ids
    ]

    batch_sums = np.zeros((R, len(metrics), cfg.batches))
    batch_max = np.zeros((R, cfg.batches))
    q = np.zeros((R, L), dtype=np.int64)

    # Precomputed sampling tables / policy tables.
    if isinstance(system, RoutingSystem):
        arr_tab = _cum(system.arrival)
        svc_tabs = [_cum(d) for d in system.services]
    else:
        arr_tabs = [_cum(d) for d in system.arrivals]
        if isinstance(system, SchedulingSystem):
            s_arr = system.schedules.as_array()          # (M, L)
            m_count = len(system.schedules)
            prio_idx = int(np.lexsort(s_arr.T[::-1])[-1])
        else:
            f = system.fading
            m_max = max(len(ss) for ss in f.schedule_sets)
            s_pad = np.zeros((f.n_states, m_max, L), dtype=np.int64)
            valid = np.zeros((f.n_states, m_max), dtype=bool)
            prio_per_state = np.zeros(f.n_states, dtype=np.int64)
            for jj, ss in enumerate(f.schedule_sets):
                arr = ss.as_array()
                s_pad[jj, : len(arr)] = arr
                valid[jj, : len(arr)] = True
                prio_per_state[jj] = int(np.lexsort(arr.T[::-1])[-1])
            psi_cum = np.cumsum(np.asarray(f.probs))
            psi_cum[-1] = 1.0

    rows = np.arange(R)
    t0 = 0
    while t0 < total_slots:
        tc = min(CHUNK_SLOTS, total_slots - t0)
        slab = np.stack([g.random((tc, n_u)) for g in gens])  # (R, tc, n_u)
        q_prev = q.copy()

        if isinstance(system, RoutingSystem):
            a_tot = _draw(*arr_tab, slab[:, :, 0])
            s_buf = np.empty((R, tc, L), dtype=np.int64)
            for l, tab in enumerate(svc_tabs):
                s_buf[:, :, l] = _draw(*tab, slab[:, :, 1 + l])
            a_buf = np.zeros((R, tc, L), dtype=np.int64)
            if L == 1:
                # Scalar reflected recursion in closed form: with partial
                # sums S_t of a - s, Q_t = S_t + max(Q_0, -min_{j<=t} S_j).
                x = a_tot - s_buf[:, :, 0]
                cums = np.cumsum(x, axis=1)
                mins = np.minimum.accumulate(cums, axis=1)
                phi = cums + np.maximum(q[:, 0:1], -mins)
                q_buf = phi[:, :, None]
                prev = np.concatenate([q[:, 0:1], phi[:, :-1]], axis=1)
                u_buf = (phi - prev - x)[:, :, None]
                a_buf[:, :, 0] = a_tot
                q = q_buf[:, -1, :].copy()
            else:
                tie = slab[:, :, 1 + L : 1 + 2 * L]
                q_buf = np.empty((R, tc, L), dtype=np.int64)
                u_buf = np.empty((R, tc, L), dtype=np.int64)
                if policy == "random":
                    picks = np.minimum((slab[:, :, 1 + L] * L).astype(np.int64), L - 1)
                for t in range(tc):
                    if policy == "jsq":
                        cand = q == q.min(axis=1, keepdims=True)
                        pick = np.where(cand, tie[:, t, :], -1.0).argmax(axis=1)
                    elif policy == "random":
                        pick = picks[:, t]
                    else:  # round_robin
                        pick = np.full(R, (t0 + t) % L)
                    a_slot = a_buf[:, t, :]
                    a_slot[rows, pick] = a_tot[:, t]
                    qn = q + a_slot - s_buf[:, t, :]
                    np.maximum(-qn, 0, out=u_buf[:, t, :])
                    np.maximum(qn, 0, out=q_buf[:, t, :])
                    q = q_buf[:, t, :]
                q = q.copy()
            j_buf = None
        else:
            a_buf = np.empty((R, tc, L), dtype=np.int64)
            for l, tab in enumerate(arr_tabs):
                a_buf[:, :, l] = _draw(*tab, slab[:, :, l])
            q_buf = np.empty((R, tc, L), dtype=np.int64)
            u_buf = np.empty((R, tc, L), dtype=np.int64)
            s_buf = np.empty((R, tc, L), dtype=np.int64)
            if isinstance(system, SchedulingSystem):
                tie = slab[:, :, L:]
                j_buf = None
                for t in range(tc):
                    if policy == "priority":
                        mi = prio_idx
                        st = s_arr[np.full(R, mi)]
                    else:
                        w = q @ s_arr.T
                        cand = w == w.max(axis=1, keepdims=True)
                        mi = np.where(cand, tie[:, t, :], -1.0).argmax(axis=1)
                        st = s_arr[mi]
                    s_buf[:, t, :] = st
                    qn = q + a_buf[:, t, :] - st
                    np.maximum(-qn, 0, out=u_buf[:, t, :])
                    np.maximum(qn, 0, out=q_buf[:, t, :])
                    q = q_buf[:, t, :]
            else:
                j_buf = np.searchsorted(psi_cum, slab[:, :, L], side="right")
                np.clip(j_buf, 0, len(psi_cum) - 1, out=j_buf)
                tie = slab[:, :, L + 1 :]
                for t in range(tc):
                    jt = j_buf[:, t]
                    sj = s_pad[jt]                       # (R, m_max, L)
                    if policy == "priority":
                        mi = prio_per_state[jt]
                    else:
                        w = np.einsum("rml,rl->rm", sj, q)
                        w = np.where(valid[jt], w, -1)
                        cand = w == w.max(axis=1, keepdims=True)
                        mi = np.where(cand, tie[:, t, :], -1.0).argmax(axis=1)
                    st = sj[rows, mi]
                    s_buf[:, t, :] = st
                    qn = q + a_buf[:, t, :] - st
                    np.maximum(-qn, 0, out=u_buf[:, t, :])
                    np.maximum(qn, 0, out=q_buf[:, t, :])
                    q = q_buf[:, t, :]
            q = q.copy()

        vals = _ChunkValues(q_buf, u_buf, s_buf, j_buf)

        if fault == "unused_service" and t0 == 0 and 0 in rep_ids:
            # Deliberate corruption used by wiring tests: breaks the slot
            # update identity at the first slot of replication 0.
            u_buf[rep_ids.index(0), 0, 0] += 1
        if check_invariants:
            jump_bound = 2.0 * math.sqrt(L) * max(system.a_max, system.s_max)
            _check_chunk(vals, a_buf, q_prev, check_c, jump_bound, rep_ids, t0)

        # Batch accumulation over the measurement window.
        lo = max(t0, cfg.burn_in)
        hi = min(t0 + tc, total_slots)
        if lo < hi:
            arrays = [vals.values(m) for m in metrics]
            maxq = q_buf.max(axis=2)
            while lo < hi:
                b = (lo - cfg.burn_in) // batch_len
                seg_end = min(hi, cfg.burn_in + (b + 1) * batch_len)
                sl = slice(lo - t0, seg_end - t0)
                for mi_, arr in enumerate(arrays):
                    batch_sums[:, mi_, b] += arr[:, sl].sum(axis=1)
                np.maximum(batch_max[:, b], maxq[:, sl].max(axis=1), out=batch_max[:, b])
                lo = seg_end
        t0 += tc

    return batch_sums, batch_max


# -------- estimation --------

def _interval(block_means: np.ndarray, samples: int) -> SteadyStateEstimate:
    n = block_means.size
    mean = float(block_means.mean())
    if n > 1:
        var_mean = float(block_means.var(ddof=1)) / n
    else:
        var_mean = 0.0
    half = float(student_t.ppf(0.975, n - 1)) * math.sqrt(var_mean) if n > 1 else 0.0
    return SteadyStateEstimate(
        mean=mean,
        variance_of_mean=var_mean,
        ci_low=mean - half,
        ci_high=mean + half,
        batches=n,
        samples=samples,
    )


def estimate(
    system: System,
    policy: str,
    cfg: SimConfig,
    metrics: Sequence[MetricSpec] | None = None,
    jobs: int = 1,
    check_invariants: bool = False,
    invariant_c: Sequence[float] | None = None,
    fault: str | None = None,
) -> EstimateResult:
    """Batch-means steady-state estimates, deterministic given base_seed.

    Replications are split across ``jobs`` worker processes; each
    replication's random stream is keyed by its id alone, so the grouping
    never changes the numbers. ``check_invariants`` turns on the exact
    pathwise checkers (with the projection identities when
    ``invariant_c`` is given); any violation raises InvariantViolation.
    """
    specs = tuple(metrics) if metrics is not None else tuple(cfg.metrics)
    _check_policy(system, policy)
    _check_metrics(system, specs)
    if cfg.batch_len < 1:
        raise ConfigError(
            f"horizon - burn_in = {cfg.horizon - cfg.burn_in} is smaller than {cfg.batches} batches"
        )
    c_t = tuple(float(v) for v in invariant_c) if invariant_c is not None else None
    if c_t is not None and abs(norm(c_t) - 1.0) > 1e-9:
        raise DomainError("invariant direction must be a unit vector")

    R = cfg.replications
    rep_ids = list(range(R))
    jobs = max(1, min(jobs, R))
    if jobs == 1:
        batch_sums, batch_max = _simulate_reps(
            system, policy, cfg, specs, rep_ids, c_t, check_invariants, fault
        )
    else:
        groups = [rep_ids[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(
                    _simulate_reps, system, policy, cfg, specs, g, c_t, check_invariants, fault
                )
                for g in groups
            ]
            parts = [f.result() for f in futures]
        batch_sums = np.zeros((R, len(specs), cfg.batches))
        batch_max = np.zeros((R, cfg.batches))
        for g, (bs, bm) in zip(groups, parts):
            batch_sums[g] = bs
            batch_max[g] = bm

    batch_len = cfg.batch_len
    samples = R * batch_len * cfg.batches
    block_means = batch_sums / batch_len  # (R, n_metrics, batches)
    out = {
        m.name: _interval(block_means[:, i, :].reshape(-1), samples)
        for i, m in enumerate(specs)
    }

    warnings: list[str] = []
    seq = batch_max.max(axis=0)  # worst replication per batch, time ordered
    dec = max(1, cfg.batches // 10)
    first, last = float(seq[:dec].max()), float(seq[-dec:].max())
    if last > 10.0 * max(first, 1.0):
        warnings.append(
            f"max queue grew from {first:g} (first batches) to {last:g} (last batches); "
            "the system may be unstable or under-burned"
        )
    return EstimateResult(metrics=out, warnings=tuple(warnings))


# -------- sweeps --------

@dataclass(frozen=True)
class SweepRow:
    eps: float
    metric: str
    mean: float
    ci_low: float
    ci_high: float
    scaled: float
    lower_bound: float | None = None
    upper_bound: float | None = None
    n2_hat: float | None = None


@dataclass
class SweepResult:
    rows: tuple[SweepRow, ...]
    estimates: dict[float, EstimateResult] = field(default_factory=dict)

    CSV_HEADER = "eps,metric,mean,ci_low,ci_high,scaled,lower_bound,upper_bound,n2_hat"

    def to_csv(self) -> str:
        def fmt(x: float | None) -> str:
            return "" if x is None else f"{x:.17g}"

        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                ",".join(
                    [
                        fmt(r.eps),
                        r.metric,
                        fmt(r.mean),
                        fmt(r.ci_low),
                        fmt(r.ci_high),
                        fmt(r.scaled),
                        fmt(r.lower_bound),
                        fmt(r.upper_bound),
                        fmt(r.n2_hat),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    def scaled_series(self, metric: str) -> list[tuple[float, float]]:
        return [(r.eps, r.scaled) for r in self.rows if r.metric == metric]

    def series(self, metric: str) -> list[SweepRow]:
        return [r for r in self.rows if r.metric == metric]

    @property
    def warnings(self) -> tuple[str, ...]:
        out: list[str] = []
        for eps, res in self.estimates.items():
            out.extend(f"eps={eps:g}: {w}" for w in res.warnings)
        return tuple(out)


def sweep(
    make_system: Callable[[float], System],
    policy: str,
    eps_list: Sequence[float],
    metrics: Sequence[MetricSpec],
    cfg: SimConfig | Callable[[float], SimConfig],
    bounds_fn: Callable[[float, float | None], dict] | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Estimate every metric at each load gap, largest gap first.

    ``cfg`` may be a single SimConfig or a callable eps -> SimConfig
    (horizons should grow as the gap shrinks). ``bounds_fn(eps, n2_hat)``
    returns {metric name: (lower, upper)} evaluated with the
    perpendicular second-moment estimate from the same run; n2_hat is
    None when no perp_norm_2 metric was requested.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ConfigError("empty eps list")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps values must be strictly decreasing")
    specs = tuple(metrics)

    n2_name = next(
        (m.name for m in specs if m.kind == "perp_norm_pow" and m.power == 2.0), None
    )
    rows: list[SweepRow] = []
    estimates: dict[float, EstimateResult] = {}
    for eps in eps_list:
        system = make_system(eps)
        cfg_e = cfg(eps) if callable(cfg) else cfg
        result = estimate(system, policy, cfg_e, specs, jobs=jobs)
        estimates[eps] = result
        n2_hat = result.metrics[n2_name].mean if n2_name is not None else None
        bounds = bounds_fn(eps, n2_hat) if bounds_fn is not None else {}
        for m in specs:
            est = result.metrics[m.name]
            lo, hi = bounds.get(m.name, (None, None))
            rows.append(
                SweepRow(
                    eps=eps,
                    metric=m.name,
                    mean=est.mean,
                    ci_low=est.ci_low,
                    ci_high=est.ci_high,
                    scaled=est.mean * eps**m.scale_power,
                    lower_bound=lo,
                    upper_bound=hi,
                    n2_hat=n2_hat,
                )
            )
    return SweepResult(rows=tuple(rows), estimates=estimates)


# -------- convenience wrappers --------

def face_frequency(
    system: SchedulingSystem | FadingSystem,
    policy: str,
    region: CapacityRegion,
    k: int,
    cfg: SimConfig,
    jobs: int = 1,
) -> SteadyStateEstimate:
    """Fraction of post-burn-in slots whose chosen schedule lies on face k
    (against the per-state offset b_{j,k} under fading)."""
    fading = system.fading if isinstance(system, FadingSystem) else None
    spec = MetricSpec.face_freq(region, k, fading=fading)
    return estimate(system, policy, cfg, [spec], jobs=jobs).metrics[spec.name]


def unused_service_mean(
    system: System,
    policy: str,
    c: Sequence[float],
    cfg: SimConfig,
    jobs: int = 1,
) -> SteadyStateEstimate:
    spec = MetricSpec.cu(c)
    return estimate(system, policy, cfg, [spec], jobs=jobs).metrics[spec.name]


def config_for_eps(
    eps: float,
    base_seed: int,
    slots_coeff: float = 0.5,
    batches: int = 16,
    replications: int = 8,
    min_horizon: int = 20_000,
    metrics: tuple[MetricSpec, ...] = (),
) -> SimConfig:
    """Default heavy-traffic sizing: horizon ~ slots_coeff / eps^2 per
    replication (relaxation of the parallel component slows as 1/eps^2),
    burn-in 10% of horizon."""
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    horizon = max(min_horizon, int(math.ceil(slots_coeff / (eps * eps))))
    return SimConfig(
        horizon=horizon,
        burn_in=horizon // 10,
        batches=batches,
        replications=replications,
        base_seed=base_seed,
        metrics=metrics,
    )
