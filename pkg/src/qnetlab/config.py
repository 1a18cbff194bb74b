"""Experiment configuration: JSON schema, builders, and sweep plans.

A config file fully determines an experiment: the system (distributions
and schedule structure), the policy, the heavy-traffic approach, the
simulation sizes, and the metrics. Seeds are mandatory so every artifact
is reproducible. The same file drives all subcommands; each reads the
blocks it needs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import jsonschema

from .bounds import (
    ZetaParams,
    fading_bounds,
    lb_routing,
    lb_scheduling,
    ub_jsq,
    ub_mws,
    zeta_for_face,
)
from .core import BoundedIntDist
from .dynamics import FadingSystem, RoutingSystem, SchedulingSystem, System
from .errors import ConfigError, DomainError
from .geometry import (
    CapacityRegion,
    FadingModel,
    ScheduleSet,
    cone_angle_k,
    fading_cone_angle_k,
    fading_face_service_dist,
    fading_gamma_k,
    fading_region,
    gamma_k,
    heavy_traffic_point,
    hull_halfspaces,
    onoff_downlink_fading,
)
from .montecarlo import MetricSpec, SimConfig

_DIST_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {"bernoulli": {"type": "number", "minimum": 0, "maximum": 1}},
            "required": ["bernoulli"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "binomial": {
                    "type": "array",
                    "prefixItems": [
                        {"type": "integer", "minimum": 0},
                        {"type": "number", "minimum": 0, "maximum": 1},
                    ],
                    "minItems": 2,
                    "maxItems": 2,
                }
            },
            "required": ["binomial"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"point": {"type": "integer", "minimum": 0}},
            "required": ["point"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "uniform": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                }
            },
            "required": ["uniform"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "pmf": {
                    "type": "object",
                    "additionalProperties": {"type": "number", "minimum": 0},
                    "minProperties": 1,
                }
            },
            "required": ["pmf"],
            "additionalProperties": False,
        },
    ]
}

_SCHEDULE_SCHEMA = {
    "type": "array",
    "items": {"type": "integer", "minimum": 0},
    "minItems": 1,
    "maxItems": 3,
}

_METRIC_SCHEMA = {
    "oneOf": [
        {"enum": ["sum_q", "cq", "cu", "q_norm2", "face_freq"]},
        {
            "type": "object",
            "properties": {
                "kind": {"enum": ["cq_pow", "perp_norm_pow"]},
                "n": {"type": "integer", "minimum": 1},
                "r": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "system": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["routing", "scheduling", "scheduling_fading"]},
                "arrival": _DIST_SCHEMA,
                "services": {"type": "array", "items": _DIST_SCHEMA, "minItems": 1},
                "arrivals": {"type": "array", "items": _DIST_SCHEMA, "minItems": 1},
                "schedules": {"type": "array", "items": _SCHEDULE_SCHEMA, "minItems": 1},
                "fading": {
                    "type": "object",
                    "properties": {
                        "states": {
                            "type": "array",
                            "items": {
                                "type": "object",
                                "properties": {
                                    "prob": {"type": "number", "exclusiveMinimum": 0},
                                    "schedules": {
                                        "type": "array",
                                        "items": _SCHEDULE_SCHEMA,
                                        "minItems": 1,
                                    },
                                },
                                "required": ["prob", "schedules"],
                                "additionalProperties": False,
                            },
                            "minItems": 1,
                        },
                        "onoff_downlink": {
                            "type": "array",
                            "items": {"type": "number", "minimum": 0, "maximum": 1},
                            "minItems": 1,
                            "maxItems": 3,
                        },
                    },
                    "minProperties": 1,
                    "maxProperties": 1,
                    "additionalProperties": False,
                },
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "policy": {
            "enum": ["jsq", "maxweight", "maxweight_fading", "random", "priority", "round_robin"]
        },
        "heavy_traffic": {
            "type": "object",
            "properties": {
                "face": {"type": "integer", "minimum": 1},
                "lam": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "lam_on_face": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "eps_list": {
                    "type": "array",
                    "items": {"type": "number", "exclusiveMinimum": 0},
                    "minItems": 1,
                },
                "arrival_family": {
                    "type": "object",
                    "properties": {
                        "kind": {"enum": ["bernoulli", "binomial"]},
                        "n": {"type": "integer", "minimum": 1},
                    },
                    "required": ["kind"],
                    "additionalProperties": False,
                },
                "n2_hat": {"type": "number", "minimum": 0},
                "moments": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 1,
                },
            },
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "properties": {
                "horizon": {"type": "integer"},
                "burn_in": {"type": "integer", "minimum": 0},
                "batches": {"type": "integer"},
                "replications": {"type": "integer"},
                "slots_coeff": {"type": "number", "exclusiveMinimum": 0},
                "min_horizon": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "metrics": {"type": "array", "items": _METRIC_SCHEMA, "minItems": 1},
        "verdict": {
            "type": "object",
            "properties": {"tolerance": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "artifacts": {
            "type": "object",
            "properties": {"region": {"type": "string"}},
            "additionalProperties": False,
        },
        "test_hooks": {
            "type": "object",
            "properties": {"fault": {"enum": ["unused_service"]}},
            "additionalProperties": False,
        },
    },
    "required": ["seed", "system", "policy"],
    "additionalProperties": False,
}


def validate_config(doc: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {e.message}")
    _check_cross_fields(doc)


def _check_cross_fields(doc: dict) -> None:
    kind = doc["system"]["kind"]
    sysblock = doc["system"]
    policy = doc["policy"]
    if kind == "routing":
        if "services" not in sysblock:
            raise ConfigError("routing system needs a services list")
        if "arrival" not in sysblock and not _sweep_fields(doc):
            raise ConfigError("routing system needs an arrival distribution or a heavy_traffic block")
        if policy not in ("jsq", "random", "round_robin"):
            raise ConfigError(f"policy {policy!r} is not a routing policy")
    elif kind == "scheduling":
        if "schedules" not in sysblock:
            raise ConfigError("scheduling system needs a schedules list")
        if policy not in ("maxweight", "priority"):
            raise ConfigError(f"policy {policy!r} is not a scheduling policy")
    else:
        if "fading" not in sysblock:
            raise ConfigError("scheduling_fading system needs a fading block")
        if policy not in ("maxweight_fading", "priority"):
            raise ConfigError(f"policy {policy!r} is not a fading policy")
    if (
        kind != "routing"
        and "arrivals" not in sysblock
        and "lam" not in doc.get("heavy_traffic", {})
        and not _sweep_fields(doc)
    ):
        raise ConfigError(f"{kind} system needs arrivals, heavy_traffic.lam, or an eps rule")


def _sweep_fields(doc: dict) -> bool:
    ht = doc.get("heavy_traffic", {})
    return "eps_list" in ht or "eps" in ht


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    validate_config(doc)
    return doc


# -------- builders --------

def build_dist(spec: dict) -> BoundedIntDist:
    if "bernoulli" in spec:
        return BoundedIntDist.bernoulli(float(spec["bernoulli"]))
    if "binomial" in spec:
        n, p = spec["binomial"]
        return BoundedIntDist.binomial(int(n), float(p))
    if "point" in spec:
        return BoundedIntDist.point(int(spec["point"]))
    if "uniform" in spec:
        lo, hi = spec["uniform"]
        return BoundedIntDist.uniform(int(lo), int(hi))
    if "pmf" in spec:
        try:
            pmf = {int(k): float(v) for k, v in spec["pmf"].items()}
        except ValueError as exc:
            raise ConfigError(f"pmf keys must be integers: {exc}") from exc
        return BoundedIntDist.from_pmf(pmf)
    raise ConfigError(f"unknown distribution spec {spec!r}")


def build_generators(doc: dict) -> ScheduleSet | FadingModel | None:
    sysblock = doc["system"]
    kind = sysblock["kind"]
    if kind == "routing":
        return None
    if kind == "scheduling":
        return ScheduleSet.from_iterable(sysblock["schedules"])
    fad = sysblock["fading"]
    if "onoff_downlink" in fad:
        return onoff_downlink_fading(fad["onoff_downlink"])
    return FadingModel(
        probs=tuple(float(s["prob"]) for s in fad["states"]),
        schedule_sets=tuple(ScheduleSet.from_iterable(s["schedules"]) for s in fad["states"]),
    )


def build_region(doc: dict) -> CapacityRegion | None:
    gen = build_generators(doc)
    if gen is None:
        return None
    if isinstance(gen, ScheduleSet):
        return hull_halfspaces(gen)
    return fading_region(gen)


def face_index(doc: dict, region: CapacityRegion) -> int | None:
    """Config faces are 1-based in hyperplane order; internal indices 0-based."""
    ht = doc.get("heavy_traffic", {})
    if "face" not in ht:
        return None
    k = int(ht["face"]) - 1
    if not 0 <= k < region.K:
        raise ConfigError(
            f"face {ht['face']} out of range; region has {region.K} hyperplanes (1..{region.K})"
        )
    return k


def _family_dist(family: dict, rate: float) -> BoundedIntDist:
    kind = family.get("kind", "bernoulli")
    if kind == "bernoulli":
        if rate > 1.0 + 1e-12:
            raise ConfigError(f"bernoulli arrival family cannot carry rate {rate}")
        return BoundedIntDist.bernoulli(min(rate, 1.0))
    n = int(family.get("n", 1))
    if rate > n + 1e-12:
        raise ConfigError(f"binomial({n}) arrival family cannot carry rate {rate}")
    return BoundedIntDist.binomial(n, min(rate / n, 1.0))


@dataclass(frozen=True)
class ArrivalRule:
    """How a sweep re-parameterizes arrivals as the load gap changes."""

    kind: str                         # "routing_total" | "face_normal"
    family: dict
    lam_on_face: tuple[float, ...] | None = None
    c: tuple[float, ...] | None = None
    mu_total: float | None = None

    def rates(self, eps: float) -> tuple[float, ...]:
        if self.kind == "routing_total":
            return (self.mu_total - eps,)
        lam = tuple(
            self.lam_on_face[l] - eps * self.c[l] for l in range(len(self.lam_on_face))
        )
        if any(v < -1e-12 for v in lam):
            raise DomainError(f"eps={eps} pushes the arrival vector negative: {lam}")
        return tuple(max(v, 0.0) for v in lam)


def build_concrete_system(doc: dict, eps: float | None = None) -> System:
    """System with fully determined distributions.

    When the config specifies arrivals through a heavy-traffic block, eps
    (default: the block's eps, else the first of eps_list) fixes them.
    """
    sysblock = doc["system"]
    kind = sysblock["kind"]
    if kind == "routing":
        services = tuple(build_dist(d) for d in sysblock["services"])
        if "arrival" in sysblock:
            return RoutingSystem(arrival=build_dist(sysblock["arrival"]), services=services)
        rule = _routing_rule(doc, services)
        e = _pick_eps(doc, eps)
        return RoutingSystem(arrival=_family_dist(rule.family, rule.rates(e)[0]), services=services)

    gen = build_generators(doc)
    ht = doc.get("heavy_traffic", {})
    if "arrivals" in sysblock:
        arrivals = tuple(build_dist(d) for d in sysblock["arrivals"])
    elif "lam" in ht:
        family = ht.get("arrival_family", {"kind": "bernoulli"})
        arrivals = tuple(_family_dist(family, float(r)) for r in ht["lam"])
    else:
        region = build_region(doc)
        k = face_index(doc, region)
        if k is None:
            raise ConfigError("arrivals absent and no heavy_traffic face to derive them from")
        rule = _face_rule(doc, region, k)
        e = _pick_eps(doc, eps)
        arrivals = tuple(_family_dist(rule.family, r) for r in rule.rates(e))
    if kind == "scheduling":
        return SchedulingSystem(arrivals=arrivals, schedules=gen)
    return FadingSystem(arrivals=arrivals, fading=gen)


def _pick_eps(doc: dict, eps: float | None) -> float:
    if eps is not None:
        return float(eps)
    ht = doc.get("heavy_traffic", {})
    if "eps" in ht:
        return float(ht["eps"])
    if "eps_list" in ht:
        return float(ht["eps_list"][0])
    raise ConfigError("no eps given and heavy_traffic block has neither eps nor eps_list")


def _routing_rule(doc: dict, services: Sequence[BoundedIntDist]) -> ArrivalRule:
    ht = doc.get("heavy_traffic", {})
    family = ht.get("arrival_family", {"kind": "bernoulli"})
    mu = float(sum(d.mean for d in services))
    return ArrivalRule(kind="routing_total", family=family, mu_total=mu)


def _face_rule(doc: dict, region: CapacityRegion, k: int) -> ArrivalRule:
    ht = doc.get("heavy_traffic", {})
    if "lam_on_face" not in ht:
        raise ConfigError("face sweeps need lam_on_face (a point on the chosen face)")
    anchor = tuple(float(v) for v in ht["lam_on_face"])
    h = region.hyperplanes[k]
    if len(anchor) != region.L:
        raise ConfigError("lam_on_face has the wrong dimension")
    gap = abs(sum(ci * ai for ci, ai in zip(h.c, anchor)) - h.b)
    if gap > 1e-9:
        raise ConfigError(
            f"lam_on_face is not on face {k + 1}: <c,lam> differs from b by {gap:g}"
        )
    family = ht.get("arrival_family", {"kind": "bernoulli"})
    return ArrivalRule(kind="face_normal", family=family, lam_on_face=anchor, c=h.c)


# -------- metrics --------

def metric_specs(
    doc: dict,
    system: System,
    region: CapacityRegion | None,
    k: int | None,
) -> tuple[MetricSpec, ...]:
    """Resolve the config's metric list (or a kind-appropriate default).

    Directions come from the context: the diagonal for routing systems,
    the chosen face normal otherwise.
    """
    if isinstance(system, RoutingSystem):
        c = system.line_direction()
    elif k is not None:
        c = region.hyperplanes[k].c
    else:
        c = None
    fading = system.fading if isinstance(system, FadingSystem) else None

    requested = doc.get("metrics")
    if requested is None:
        if isinstance(system, RoutingSystem):
            requested = ["sum_q", {"kind": "perp_norm_pow", "r": 2}, "cu"]
        elif k is not None:
            requested = [
                "cq",
                {"kind": "cq_pow", "n": 2},
                "q_norm2",
                {"kind": "perp_norm_pow", "r": 2},
                "face_freq",
                "cu",
            ]
        else:
            requested = ["sum_q", "q_norm2"]

    def need_c(name) -> tuple[float, ...]:
        if c is None:
            raise ConfigError(f"metric {name!r} needs a direction; give a heavy_traffic face")
        return c

    out: list[MetricSpec] = []
    for m in requested:
        if m == "sum_q":
            out.append(MetricSpec.sum_q())
        elif m == "q_norm2":
            out.append(MetricSpec.q_norm2())
        elif m == "cq":
            out.append(MetricSpec.cq(need_c("cq")))
        elif m == "cu":
            out.append(MetricSpec.cu(need_c("cu")))
        elif m == "face_freq":
            if region is None or k is None:
                raise ConfigError("face_freq needs a heavy_traffic face")
            out.append(MetricSpec.face_freq(region, k, fading=fading))
        elif isinstance(m, dict) and m.get("kind") == "cq_pow":
            out.append(MetricSpec.cq_pow(need_c("cq_pow"), int(m.get("n", 2))))
        elif isinstance(m, dict) and m.get("kind") == "perp_norm_pow":
            out.append(MetricSpec.perp_norm_pow(need_c("perp_norm_pow"), float(m.get("r", 2))))
        else:
            raise ConfigError(f"unknown metric {m!r}")
    return tuple(out)


# -------- simulation sizing --------

_SIM_DEFAULTS = {
    "batches": 16,
    "replications": 8,
    "slots_coeff": 0.5,
    "min_horizon": 20_000,
}


def sim_config(
    doc: dict,
    seed: int,
    metrics: tuple[MetricSpec, ...] = (),
    eps: float | None = None,
) -> SimConfig:
    """SimConfig from the sim block; without an explicit horizon the sizes
    follow the heavy-traffic rule slots_coeff / eps^2."""
    block = dict(_SIM_DEFAULTS)
    block.update(doc.get("sim", {}))
    if "horizon" in block:
        horizon = int(block["horizon"])
        burn = int(block.get("burn_in", horizon // 10))
        return SimConfig(
            horizon=horizon,
            burn_in=burn,
            batches=int(block["batches"]),
            replications=int(block["replications"]),
            base_seed=seed,
            metrics=metrics,
        )
    if eps is None:
        eps = _pick_eps(doc, None)
    horizon = max(int(block["min_horizon"]), int(math.ceil(block["slots_coeff"] / (eps * eps))))
    return SimConfig(
        horizon=horizon,
        burn_in=horizon // 10,
        batches=int(block["batches"]),
        replications=int(block["replications"]),
        base_seed=seed,
        metrics=metrics,
    )


# -------- sweep plans --------

@dataclass
class SweepPlan:
    """Everything a load sweep needs, assembled once from the config."""

    make_system: Callable[[float], System]
    eps_list: tuple[float, ...]
    metrics: tuple[MetricSpec, ...]
    cfg_for_eps: Callable[[float], SimConfig]
    bounds_fn: Callable[[float, float | None], dict]
    targets_for_eps: Callable[[float], dict[str, float]]
    region: CapacityRegion | None
    face: int | None


def _routing_zeta(system: RoutingSystem) -> ZetaParams:
    return ZetaParams(
        sigma2=system.arrival.variance,
        nu2=float(sum(d.variance for d in system.services)),
        eps=system.eps_total,
    )


def build_sweep_plan(doc: dict, seed: int) -> SweepPlan:
    ht = doc.get("heavy_traffic", {})
    if "eps_list" not in ht:
        raise ConfigError("sweep needs heavy_traffic.eps_list")
    eps_list = tuple(float(e) for e in ht["eps_list"])
    kind = doc["system"]["kind"]
    n2_cfg = ht.get("n2_hat")

    if kind == "routing":
        services = tuple(build_dist(d) for d in doc["system"]["services"])
        rule = _routing_rule(doc, services)

        def make_system(eps: float) -> RoutingSystem:
            return RoutingSystem(
                arrival=_family_dist(rule.family, rule.rates(eps)[0]), services=services
            )

        probe = make_system(eps_list[0])
        L, s_max = probe.L, probe.s_max
        metrics = metric_specs(doc, probe, None, None)

        def bounds_fn(eps: float, n2_hat: float | None) -> dict:
            z = _routing_zeta(make_system(eps))
            lo = lb_routing(z, L, s_max).total
            n2 = n2_cfg if n2_hat is None else n2_hat
            hi = ub_jsq(z, L, s_max, n2).total if n2 is not None else None
            return {"sum_q": (lo, hi)}

        def targets(eps: float) -> dict[str, float]:
            z = _routing_zeta(make_system(eps))
            half = z.zeta / 2.0
            return {"sum_q": half, "q_norm2": half * half * 2.0}

        region_, k_ = None, None
    else:
        region_ = build_region(doc)
        k_ = face_index(doc, region_)
        if k_ is None:
            raise ConfigError("scheduling sweeps need heavy_traffic.face")
        rule = _face_rule(doc, region_, k_)
        gen = build_generators(doc)
        fading = isinstance(gen, FadingModel)

        def make_system(eps: float) -> System:
            arrivals = tuple(_family_dist(rule.family, r) for r in rule.rates(eps))
            if fading:
                return FadingSystem(arrivals=arrivals, fading=gen)
            return SchedulingSystem(arrivals=arrivals, schedules=gen)

        probe = make_system(eps_list[0])
        s_max = probe.s_max
        metrics = metric_specs(doc, probe, region_, k_)
        if fading:
            gamma = fading_gamma_k(gen, region_, k_)
            theta = fading_cone_angle_k(gen, region_, k_)
            var_beta = fading_face_service_dist(gen, region_, k_).variance
        else:
            gamma = gamma_k(region_, gen, k_)
            theta = cone_angle_k(region_, gen, k_)
            var_beta = 0.0
        moments = [int(n) for n in ht.get("moments", []) if int(n) >= 2]

        def _zeta(eps: float) -> tuple[ZetaParams, object]:
            system = make_system(eps)
            htp = heavy_traffic_point(region_, system.lam)
            sigma2 = [d.variance for d in system.arrivals]
            return zeta_for_face(htp, region_, k_, sigma2, var_beta=var_beta), (htp, sigma2)

        def bounds_fn(eps: float, n2_hat: float | None) -> dict:
            _, (htp, sigma2) = _zeta(eps)
            n2 = n2_cfg if n2_hat is None else n2_hat
            out: dict = {}
            if fading:
                lo_rep, hi_rep = fading_bounds(
                    region_, gen, htp, k_, sigma2, s_max, n2 if n2 is not None else 0.0,
                    theta=theta,
                )
                out["cq"] = (lo_rep.total, hi_rep.total if n2 is not None else None)
            else:
                lo_rep = lb_scheduling(region_, htp, k_, sigma2)
                hi = (
                    ub_mws(region_, htp, k_, sigma2, s_max, n2, gamma, theta).total
                    if n2 is not None
                    else None
                )
                out["cq"] = (lo_rep.total, hi)
            # nth-moment reports are dominant-term only (asymptotic); they
            # are convergence targets, not finite-eps bounds, so they do
            # not populate the bound columns.
            return out

        def targets(eps: float) -> dict[str, float]:
            z, _ = _zeta(eps)
            half = z.zeta / 2.0
            out = {"cq": half, "q_norm2": half * half * 2.0, "cq_pow_2": 2.0 * half * half}
            for n in moments:
                out[f"cq_pow_{n:g}"] = math.factorial(n) * half**n
            return out

    def cfg_for_eps(eps: float) -> SimConfig:
        return sim_config(doc, seed, metrics=metrics, eps=eps)

    return SweepPlan(
        make_system=make_system,
        eps_list=eps_list,
        metrics=metrics,
        cfg_for_eps=cfg_for_eps,
        bounds_fn=bounds_fn,
        targets_for_eps=targets,
        region=region_,
        face=k_,
    )
