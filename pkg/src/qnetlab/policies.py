"""Control policies: shortest-queue routing, max-weight scheduling, and
plain baselines for comparison runs.

Weights are computed in exact integer arithmetic (queue lengths times
integer rates), so ties are genuine ties, collected first and then broken
uniformly at random. That makes tie frequencies directly testable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import RandomStream
from .errors import ConfigError, DomainError
from .geometry import FadingModel, ScheduleSet

POLICY_NAMES = ("jsq", "maxweight", "maxweight_fading", "random", "priority", "round_robin")


@dataclass(frozen=True)
class RoutingDecision:
    """Arrival vector for the slot; components sum to the slot's arrivals."""

    a: tuple[int, ...]


@dataclass(frozen=True)
class SchedulingDecision:
    """Chosen service vector, an element of the legal schedule set."""

    s: tuple[int, ...]
    index: int  # position within the schedule set it was drawn from


def _uniform_choice(candidates: Sequence[int], rng: RandomStream) -> int:
    if len(candidates) == 1:
        return candidates[0]
    return candidates[rng.choice_index(len(candidates))]


def jsq_route(q: Sequence[int], a_total: int, rng: RandomStream) -> RoutingDecision:
    """Send all of this slot's arrivals to one shortest queue.

    Ties among minimizers are broken uniformly at random. The resulting
    vector A attains <A, Q> = a_total * min_l Q_l.
    """
    if a_total < 0:
        raise DomainError("arrival count must be nonnegative")
    qmin = min(q)
    winners = [l for l, v in enumerate(q) if v == qmin]
    target = _uniform_choice(winners, rng)
    a = [0] * len(q)
    a[target] = int(a_total)
    return RoutingDecision(tuple(a))


def maxweight(q: Sequence[int], s: ScheduleSet, rng: RandomStream) -> SchedulingDecision:
    """Serve a uniformly chosen element of argmax_{s in S} <Q, s>."""
    weights = [sum(int(qv) * int(sv) for qv, sv in zip(q, sched)) for sched in s.schedules]
    wmax = max(weights)
    winners = [i for i, w in enumerate(weights) if w == wmax]
    idx = _uniform_choice(winners, rng)
    return SchedulingDecision(s.schedules[idx], idx)


def maxweight_fading(q: Sequence[int], j: int, f: FadingModel, rng: RandomStream) -> SchedulingDecision:
    """Max-weight restricted to the schedule set of channel state j."""
    if not 0 <= j < f.n_states:
        raise DomainError(f"unknown channel state {j}")
    return maxweight(q, f.schedule_sets[j], rng)


# -------- baselines --------

def _random_route(q: Sequence[int], a_total: int, rng: RandomStream) -> RoutingDecision:
    target = rng.choice_index(len(q))
    a = [0] * len(q)
    a[target] = int(a_total)
    return RoutingDecision(tuple(a))


def _round_robin_route(q: Sequence[int], a_total: int, turn: int) -> RoutingDecision:
    a = [0] * len(q)
    a[turn % len(q)] = int(a_total)
    return RoutingDecision(tuple(a))


def _priority_schedule(s: ScheduleSet) -> SchedulingDecision:
    """Fixed priority: the lexicographically largest feasible schedule."""
    idx = max(range(len(s.schedules)), key=lambda i: s.schedules[i])
    return SchedulingDecision(s.schedules[idx], idx)


def baseline_policy(name: str, **kw):
    """Dispatch a baseline decision by name.

    random:       _random_route(q, a_total, rng)
    priority:     _priority_schedule(s) — or the state's set under fading
    round_robin:  _round_robin_route(q, a_total, turn)
    """
    if name == "random":
        return _random_route(kw["q"], kw["a_total"], kw["rng"])
    if name == "priority":
        s = kw["s"]
        if "j" in kw:
            s = kw["f"].schedule_sets[kw["j"]]
        return _priority_schedule(s)
    if name == "round_robin":
        return _round_robin_route(kw["q"], kw["a_total"], kw["turn"])
    raise ConfigError(f"unknown baseline policy {name!r}")
