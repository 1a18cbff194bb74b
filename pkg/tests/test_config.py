"""Config schema, builders, and sweep-plan assembly."""

import copy
import math
from pathlib import Path

import pytest

import qnetlab
from qnetlab.config import (
    ArrivalRule,
    build_concrete_system,
    build_dist,
    build_region,
    build_sweep_plan,
    face_index,
    load_config,
    metric_specs,
    sim_config,
    validate_config,
)
from qnetlab.dynamics import FadingSystem, RoutingSystem, SchedulingSystem
from qnetlab.errors import ConfigError, DomainError

CONFIG_DIR = Path(qnetlab.__file__).parent / "configs"

ROUTING = {
    "seed": 1,
    "system": {
        "kind": "routing",
        "arrival": {"bernoulli": 0.45},
        "services": [{"bernoulli": 0.5}],
    },
    "policy": "jsq",
}

JSQ_SWEEP = {
    "seed": 2,
    "system": {"kind": "routing", "services": [{"bernoulli": 0.5}, {"bernoulli": 0.5}]},
    "policy": "jsq",
    "heavy_traffic": {"arrival_family": {"kind": "binomial", "n": 2}, "eps_list": [0.2, 0.1]},
}

DOWNLINK = {
    "seed": 3,
    "system": {"kind": "scheduling_fading", "fading": {"onoff_downlink": [0.5, 1 / 3]}},
    "policy": "maxweight_fading",
    "heavy_traffic": {
        "face": 2,
        "lam_on_face": [0.4166666666666667, 0.25],
        "eps_list": [0.1, 0.05],
    },
}


def variant(base, **paths):
    doc = copy.deepcopy(base)
    for dotted, value in paths.items():
        parts = dotted.split("__")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        if value is ...:
            node.pop(parts[-1], None)
        else:
            node[parts[-1]] = value
    return doc


# -------- schema validation --------

def test_valid_configs_pass():
    for doc in (ROUTING, JSQ_SWEEP, DOWNLINK):
        validate_config(doc)


def test_bundled_configs_load():
    paths = sorted(CONFIG_DIR.glob("*.json"))
    assert len(paths) >= 3
    for p in paths:
        doc = load_config(str(p))
        assert "seed" in doc


def test_schema_rejections():
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, seed=...))
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, surprise=1))
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, policy="flood"))
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, system__arrival={"bernoulli": 0.4, "point": 1}))
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, system__arrival={"zipf": 2.0}))
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, seed=-4))


def test_cross_field_rejections():
    # wrong policy for the system kind
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, policy="maxweight"))
    # no arrival source at all
    with pytest.raises(ConfigError):
        validate_config(variant(ROUTING, system__arrival=...))
    # scheduling without schedules
    with pytest.raises(ConfigError):
        validate_config(
            {
                "seed": 1,
                "system": {"kind": "scheduling"},
                "policy": "maxweight",
                "heavy_traffic": {"eps": 0.1},
            }
        )
    # fading system without arrivals, lam, or eps rule
    with pytest.raises(ConfigError):
        validate_config(variant(DOWNLINK, heavy_traffic=...))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(arr))


# -------- distribution builders --------

def test_build_dist_kinds():
    assert build_dist({"bernoulli": 0.3}).mean == pytest.approx(0.3)
    b = build_dist({"binomial": [3, 0.5]})
    assert b.max_value == 3 and b.mean == pytest.approx(1.5)
    assert build_dist({"point": 2}).pmf == {2: 1.0}
    u = build_dist({"uniform": [1, 3]})
    assert u.pmf == {1: pytest.approx(1 / 3), 2: pytest.approx(1 / 3), 3: pytest.approx(1 / 3)}
    p = build_dist({"pmf": {"0": 0.25, "4": 0.75}})
    assert p.mean == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        build_dist({"pmf": {"x": 1.0}})
    with pytest.raises(ConfigError):
        build_dist({"weird": 1})


# -------- arrival rules and systems --------

def test_arrival_rule_rates():
    rule = ArrivalRule(kind="routing_total", family={"kind": "bernoulli"}, mu_total=1.0)
    assert rule.rates(0.1) == (0.9,)
    face = ArrivalRule(
        kind="face_normal",
        family={"kind": "bernoulli"},
        lam_on_face=(0.05, 0.25),
        c=(1 / math.sqrt(2), 1 / math.sqrt(2)),
    )
    with pytest.raises(DomainError):
        face.rates(0.5)  # first coordinate would go negative


def test_build_concrete_routing():
    sys_ = build_concrete_system(ROUTING)
    assert isinstance(sys_, RoutingSystem)
    assert sys_.arrival.mean == pytest.approx(0.45)

    swept = build_concrete_system(JSQ_SWEEP)  # defaults to eps_list[0]
    assert swept.arrival.mean == pytest.approx(1.0 - 0.2)
    assert swept.arrival.max_value == 2
    at_eps = build_concrete_system(JSQ_SWEEP, eps=0.5)
    assert at_eps.arrival.mean == pytest.approx(0.5)


def test_eps_precedence():
    doc = variant(JSQ_SWEEP, heavy_traffic__eps=0.1)
    assert build_concrete_system(doc).arrival.mean == pytest.approx(0.9)  # eps beats eps_list
    assert build_concrete_system(doc, eps=0.05).arrival.mean == pytest.approx(0.95)
    bare = variant(JSQ_SWEEP, heavy_traffic__eps_list=...)
    with pytest.raises(ConfigError):
        build_concrete_system(bare)


def test_build_concrete_fading_face():
    sys_ = build_concrete_system(DOWNLINK, eps=0.1)
    assert isinstance(sys_, FadingSystem)
    c = 1 / math.sqrt(2)
    assert sys_.lam[0] == pytest.approx(0.4166666666666667 - 0.1 * c)
    assert sys_.lam[1] == pytest.approx(0.25 - 0.1 * c)


def test_build_concrete_scheduling_with_pinned_lam():
    doc = {
        "seed": 4,
        "system": {
            "kind": "scheduling",
            "schedules": [[0, 0], [1, 0], [0, 1]],
        },
        "policy": "maxweight",
        "heavy_traffic": {"lam": [0.3, 0.25]},
    }
    validate_config(doc)
    sys_ = build_concrete_system(doc)
    assert isinstance(sys_, SchedulingSystem)
    assert sys_.lam == pytest.approx((0.3, 0.25))


def test_lam_on_face_must_sit_on_face():
    doc = variant(DOWNLINK, heavy_traffic__lam_on_face=[0.3, 0.25])
    with pytest.raises(ConfigError):
        build_concrete_system(doc, eps=0.1)


def test_face_index_mapping():
    region = build_region(DOWNLINK)
    assert face_index(DOWNLINK, region) == 1  # config faces are 1-based
    assert face_index(ROUTING, region) is None
    with pytest.raises(ConfigError):
        face_index(variant(DOWNLINK, heavy_traffic__face=9), region)


# -------- metric resolution --------

def test_metric_specs_defaults():
    rsys = build_concrete_system(ROUTING)
    names = [m.name for m in metric_specs(ROUTING, rsys, None, None)]
    assert names == ["sum_q", "perp_norm_2", "cu"]

    fsys = build_concrete_system(DOWNLINK, eps=0.1)
    region = build_region(DOWNLINK)
    names = [m.name for m in metric_specs(DOWNLINK, fsys, region, 1)]
    assert names == ["cq", "cq_pow_2", "q_norm2", "perp_norm_2", "face_freq_1", "cu"]


def test_metric_specs_explicit_and_errors():
    doc = variant(DOWNLINK, metrics=["cq", {"kind": "cq_pow", "n": 3}])
    fsys = build_concrete_system(doc, eps=0.1)
    region = build_region(doc)
    specs = metric_specs(doc, fsys, region, 1)
    assert [m.name for m in specs] == ["cq", "cq_pow_3"]
    assert specs[0].c == pytest.approx((1 / math.sqrt(2),) * 2)

    sched = {
        "seed": 4,
        "system": {"kind": "scheduling", "schedules": [[0, 0], [1, 0], [0, 1]]},
        "policy": "maxweight",
        "heavy_traffic": {"lam": [0.3, 0.25]},
    }
    ssys = build_concrete_system(sched)
    assert [m.name for m in metric_specs(sched, ssys, None, None)] == ["sum_q", "q_norm2"]
    with pytest.raises(ConfigError):
        metric_specs(variant(sched, metrics=["cq"]), ssys, None, None)
    with pytest.raises(ConfigError):
        metric_specs(variant(sched, metrics=["face_freq"]), ssys, None, None)
    with pytest.raises(ConfigError):
        metric_specs(variant(sched, metrics=["entropy"]), ssys, None, None)


# -------- sim sizing --------

def test_sim_config_explicit_horizon():
    doc = variant(ROUTING, sim={"horizon": 5000, "burn_in": 100, "batches": 10, "replications": 2})
    cfg = sim_config(doc, seed=9)
    assert (cfg.horizon, cfg.burn_in, cfg.batches, cfg.replications) == (5000, 100, 10, 2)
    assert cfg.base_seed == 9
    # burn-in defaults to a tenth of the horizon
    assert sim_config(variant(ROUTING, sim={"horizon": 5000}), seed=9).burn_in == 500


def test_sim_config_eps_rule():
    cfg = sim_config(JSQ_SWEEP, seed=9, eps=0.005)
    assert cfg.horizon == math.ceil(0.5 / 0.005**2)
    assert cfg.burn_in == cfg.horizon // 10
    assert sim_config(JSQ_SWEEP, seed=9, eps=0.2).horizon == 20_000
    with pytest.raises(ConfigError):
        sim_config(variant(ROUTING, sim={"horizon": 0}), seed=9)


# -------- sweep plans --------

def test_routing_sweep_plan():
    plan = build_sweep_plan(JSQ_SWEEP, seed=7)
    assert plan.eps_list == (0.2, 0.1)
    assert plan.region is None and plan.face is None
    assert [m.name for m in plan.metrics] == ["sum_q", "perp_norm_2", "cu"]
    sys01 = plan.make_system(0.1)
    assert sys01.arrival.mean == pytest.approx(0.9)

    lo, hi = plan.bounds_fn(0.1, 1.5)["sum_q"]
    assert lo == pytest.approx(4.025, abs=1e-12)
    assert hi == pytest.approx(14.736558703193815, abs=1e-9)
    assert plan.bounds_fn(0.1, None)["sum_q"][1] is None  # no n2 estimate, no upper

    t = plan.targets_for_eps(0.1)
    assert t["sum_q"] == pytest.approx(1.005 / 2, abs=1e-12)
    assert t["q_norm2"] == pytest.approx(2 * (1.005 / 2) ** 2, abs=1e-12)


def test_fading_sweep_plan():
    plan = build_sweep_plan(DOWNLINK, seed=7)
    assert plan.face == 1
    assert plan.region is not None
    sys_ = plan.make_system(0.05)
    assert isinstance(sys_, FadingSystem)
    lo, hi = plan.bounds_fn(0.05, 2.0)["cq"]
    assert 0.0 < lo < hi
    assert plan.bounds_fn(0.05, None)["cq"][1] is None
    targets = plan.targets_for_eps(0.05)
    assert targets["cq"] > 0
    assert targets["cq_pow_2"] == pytest.approx(2 * targets["cq"] ** 2, rel=1e-12)
    assert targets["q_norm2"] == pytest.approx(2 * targets["cq"] ** 2, rel=1e-12)


def test_sweep_plan_requires_eps_list():
    with pytest.raises(ConfigError):
        build_sweep_plan(ROUTING, seed=7)
    sched = {
        "seed": 4,
        "system": {"kind": "scheduling", "schedules": [[0, 0], [1, 0], [0, 1]]},
        "policy": "maxweight",
        "heavy_traffic": {"eps_list": [0.1], "lam_on_face": [0.5, 0.5]},
    }
    with pytest.raises(ConfigError):
        build_sweep_plan(sched, seed=7)  # no face chosen
