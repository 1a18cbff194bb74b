"""Slotted queue dynamics and the exact single-server chain oracle.

The evolution is the standard reflected map applied simultaneously to
arrivals and service within a slot:

    Q'[l] = max(Q[l] + A[l] - S[l], 0)
    U[l]  = max(S[l] - A[l] - Q[l], 0)

so that Q' = Q + A - S + U holds exactly in integers and U[l] * Q'[l] = 0
componentwise (service is only wasted on queues that end the slot empty).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import BoundedIntDist, RandomStream
from .errors import ConfigError, DomainError, TruncationError, UnstableError
from .geometry import FadingModel, ScheduleSet
from . import policies

BALANCE_TOL = 1e-12
TAIL_TOL = 1e-10


# -------- systems --------

@dataclass(frozen=True)
class RoutingSystem:
    """Single exogenous arrival stream routed to one of L queues, each with
    its own server."""

    arrival: BoundedIntDist
    services: tuple[BoundedIntDist, ...]

    @property
    def L(self) -> int:
        return len(self.services)

    @property
    def a_max(self) -> int:
        return self.arrival.max_value

    @property
    def s_max(self) -> int:
        return max(d.max_value for d in self.services)

    @property
    def mu_total(self) -> float:
        return sum(d.mean for d in self.services)

    @property
    def eps_total(self) -> float:
        """Total service-rate surplus mu_sum - lambda_sum."""
        return self.mu_total - self.arrival.mean

    def line_direction(self) -> tuple[float, ...]:
        """Unit direction the queue vector concentrates along."""
        L = self.L
        return tuple(1.0 / np.sqrt(L) for _ in range(L))


@dataclass(frozen=True)
class SchedulingSystem:
    """Per-queue arrivals served by one schedule from a fixed set per slot."""

    arrivals: tuple[BoundedIntDist, ...]
    schedules: ScheduleSet

    def __post_init__(self):
        if len(self.arrivals) != self.schedules.L:
            raise ConfigError("arrival count must match schedule dimension")

    @property
    def L(self) -> int:
        return self.schedules.L

    @property
    def a_max(self) -> int:
        return max(d.max_value for d in self.arrivals)

    @property
    def s_max(self) -> int:
        return self.schedules.s_max

    @property
    def lam(self) -> tuple[float, ...]:
        return tuple(d.mean for d in self.arrivals)


@dataclass(frozen=True)
class FadingSystem:
    """Per-queue arrivals with an i.i.d. channel state choosing the legal
    schedule set each slot."""

    arrivals: tuple[BoundedIntDist, ...]
    fading: FadingModel

    def __post_init__(self):
        if len(self.arrivals) != self.fading.L:
            raise ConfigError("arrival count must match fading dimension")

    @property
    def L(self) -> int:
        return self.fading.L

    @property
    def a_max(self) -> int:
        return max(d.max_value for d in self.arrivals)

    @property
    def s_max(self) -> int:
        return self.fading.s_max

    @property
    def lam(self) -> tuple[float, ...]:
        return tuple(d.mean for d in self.arrivals)


System = RoutingSystem | SchedulingSystem | FadingSystem


# -------- single-slot dynamics --------

@dataclass(frozen=True)
class SlotRecord:
    q_before: tuple[int, ...]
    a: tuple[int, ...]
    s: tuple[int, ...]
    u: tuple[int, ...]
    q_after: tuple[int, ...]
    j: int | None = None


@dataclass
class SingleServerState:
    phi: int
    alpha_dist: BoundedIntDist
    beta_dist: BoundedIntDist

    def __post_init__(self):
        if self.phi < 0:
            raise DomainError("queue length must be nonnegative")


def step(q: Sequence[int], a: Sequence[int], s: Sequence[int], j: int | None = None) -> SlotRecord:
    """Advance one slot; arrivals and service apply simultaneously."""
    if not (len(q) == len(a) == len(s)):
        raise DomainError("q, a, s must have equal lengths")
    if any(v < 0 for v in a) or any(v < 0 for v in s):
        raise DomainError("arrivals and service must be nonnegative")
    q_after = []
    u = []
    for ql, al, sl in zip(q, a, s):
        net = int(ql) + int(al) - int(sl)
        q_after.append(max(net, 0))
        u.append(max(-net, 0))
    return SlotRecord(
        q_before=tuple(int(v) for v in q),
        a=tuple(int(v) for v in a),
        s=tuple(int(v) for v in s),
        u=tuple(u),
        q_after=tuple(q_after),
        j=j,
    )


def single_server_step(st: SingleServerState, rng: RandomStream) -> tuple[int, int]:
    """One slot of the scalar chain; returns (phi', chi) with
    phi' = phi + alpha - beta + chi exactly."""
    alpha = st.alpha_dist.sample(rng)
    beta = st.beta_dist.sample(rng)
    net = st.phi + alpha - beta
    phi_next = max(net, 0)
    chi = max(-net, 0)
    st.phi = phi_next
    return phi_next, chi


# -------- path generation --------

def _route_arrivals(system: RoutingSystem, policy: str, q, turn: int, rng: RandomStream):
    a_total = system.arrival.sample(rng)
    if policy == "jsq":
        return policies.jsq_route(q, a_total, rng).a
    if policy in ("random", "round_robin"):
        return policies.baseline_policy(policy, q=q, a_total=a_total, rng=rng, turn=turn).a
    raise ConfigError(f"policy {policy!r} is not a routing policy")


def _pick_schedule(system, policy: str, q, j: int | None, rng: RandomStream):
    if isinstance(system, SchedulingSystem):
        if policy == "maxweight":
            return policies.maxweight(q, system.schedules, rng).s
        if policy == "priority":
            return policies.baseline_policy(policy, s=system.schedules).s
        raise ConfigError(f"policy {policy!r} is not a static scheduling policy")
    if policy == "maxweight_fading":
        return policies.maxweight_fading(q, j, system.fading, rng).s
    if policy == "priority":
        return policies.baseline_policy(policy, s=None, f=system.fading, j=j).s
    raise ConfigError(f"policy {policy!r} is not a fading scheduling policy")


def run_path(
    system: System,
    policy: str,
    horizon: int,
    stream: RandomStream,
    q0: Sequence[int] | None = None,
) -> Iterator[SlotRecord]:
    """Stream SlotRecords for `horizon` slots; deterministic given the
    stream's key, O(1) memory for streaming consumers."""
    if horizon < 0:
        raise DomainError("horizon must be nonnegative")
    q = tuple(int(v) for v in (q0 if q0 is not None else [0] * system.L))
    if len(q) != system.L or any(v < 0 for v in q):
        raise DomainError("invalid initial queue vector")
    is_routing = isinstance(system, RoutingSystem)
    is_fading = isinstance(system, FadingSystem)
    gen = stream.generator
    for t in range(horizon):
        j = None
        if is_routing:
            a = _route_arrivals(system, policy, q, t, stream)
            s = tuple(d.sample(stream) for d in system.services)
        else:
            a = tuple(d.sample(stream) for d in system.arrivals)
            if is_fading:
                u = gen.random()
                j = int(np.searchsorted(np.cumsum(system.fading.probs), u, side="right"))
                j = min(j, system.fading.n_states - 1)
            s = _pick_schedule(system, policy, q, j, stream)
        rec = step(q, a, s, j=j)
        q = rec.q_after
        yield rec


def dump_path_csv(records: Iterable[SlotRecord], path: str) -> None:
    """Trajectory dump with columns t, q_1..q_L, a_*, s_*, u_*, j."""
    records = iter(records)
    first = next(records, None)
    if first is None:
        raise DomainError("empty path")
    L = len(first.q_before)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (
            ["t"]
            + [f"q_{l+1}" for l in range(L)]
            + [f"a_{l+1}" for l in range(L)]
            + [f"s_{l+1}" for l in range(L)]
            + [f"u_{l+1}" for l in range(L)]
            + ["j"]
        )
        writer.writerow(header)
        for t, rec in enumerate([first] + list(records)):
            row = (
                [t]
                + list(rec.q_after)
                + list(rec.a)
                + list(rec.s)
                + list(rec.u)
                + ["" if rec.j is None else rec.j]
            )
            writer.writerow(row)


# -------- exact chain oracle --------

def truncated_chain_solve(
    alpha_dist: BoundedIntDist,
    beta_dist: BoundedIntDist,
    truncation: int,
) -> tuple[np.ndarray, float, float]:
    """Stationary distribution of phi' = (phi + alpha - beta)^+ on {0..N}.

    Solves the balance equations of the truncated chain by a dense linear
    solve and checks both the balance residual and the tail mass, so the
    returned moments can serve as ground truth for bound tests.
    """
    if alpha_dist.mean >= beta_dist.mean:
        raise UnstableError(
            f"unstable chain: E[alpha]={alpha_dist.mean} >= E[beta]={beta_dist.mean}"
        )
    n = int(truncation)
    if n < alpha_dist.max_value + 1:
        raise DomainError("truncation smaller than one arrival batch")
    size = n + 1
    P = np.zeros((size, size))
    jumps: dict[int, float] = {}
    for av, ap in zip(alpha_dist.values, alpha_dist.probs):
        for bv, bp in zip(beta_dist.values, beta_dist.probs):
            d = av - bv
            jumps[d] = jumps.get(d, 0.0) + ap * bp
    for i in range(size):
        for d, p in jumps.items():
            nxt = min(max(i + d, 0), n)  # reflect at 0, absorb overflow at N
            P[i, nxt] += p
    A = P.T - np.eye(size)
    A[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.abs(pi @ P - pi).sum())
    if residual > BALANCE_TOL * 10:
        raise TruncationError(f"balance residual {residual} too large")
    tail = float(pi[max(0, n - alpha_dist.max_value) :].sum())
    if tail > TAIL_TOL:
        raise TruncationError(f"truncation too small: tail mass {tail}")
    states = np.arange(size, dtype=float)
    mean = float(pi @ states)
    second = float(pi @ states**2)
    return pi, mean, second


def chain_balance_residual(
    alpha_dist: BoundedIntDist, beta_dist: BoundedIntDist, pi: np.ndarray
) -> float:
    """L1 residual of pi against the (re-built) transition matrix."""
    n = len(pi) - 1
    P = np.zeros((n + 1, n + 1))
    for av, ap in zip(alpha_dist.values, alpha_dist.probs):
        for bv, bp in zip(beta_dist.values, beta_dist.probs):
            for i in range(n + 1):
                nxt = min(max(i + av - bv, 0), n)
                P[i, nxt] += ap * bp
    return float(np.abs(pi @ P - pi).sum())
