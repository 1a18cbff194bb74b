"""Vectorized estimator: determinism, exactness, accounting, faults."""

import math

import pytest

from qnetlab.bounds import ZetaParams, lb_routing
from qnetlab.core import BoundedIntDist, RandomStream
from qnetlab.dynamics import FadingSystem, RoutingSystem, SchedulingSystem, run_path
from qnetlab.errors import ConfigError, DimensionError, DomainError, InvariantViolation
from qnetlab.geometry import (
    ScheduleSet,
    fading_region,
    hull_halfspaces,
    onoff_downlink_fading,
)
from qnetlab.montecarlo import (
    MetricSpec,
    SimConfig,
    config_for_eps,
    estimate,
    face_frequency,
    sweep,
    unused_service_mean,
)

B = BoundedIntDist
C2 = (1 / math.sqrt(2), 1 / math.sqrt(2))
JSQ2 = RoutingSystem(arrival=B.binomial(2, 0.45), services=(B.bernoulli(0.5),) * 2)


def small_cfg(seed=7, reps=2):
    return SimConfig(horizon=8000, burn_in=800, batches=8, replications=reps, base_seed=seed)


# -------- config validation --------

def test_sim_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(horizon=0, burn_in=0)
    with pytest.raises(ConfigError):
        SimConfig(horizon=100, burn_in=100)
    with pytest.raises(ConfigError):
        SimConfig(horizon=100, burn_in=-1)
    with pytest.raises(ConfigError):
        SimConfig(horizon=100, burn_in=0, batches=4)
    with pytest.raises(ConfigError):
        SimConfig(horizon=100, burn_in=0, replications=0)
    assert SimConfig(horizon=100, burn_in=20, batches=8).batch_len == 10


def test_config_for_eps_sizing():
    cfg = config_for_eps(0.002, base_seed=3)
    assert cfg.horizon == math.ceil(0.5 / 0.002**2)
    assert cfg.burn_in == cfg.horizon // 10
    assert config_for_eps(0.5, base_seed=3).horizon == 20_000  # floor wins
    with pytest.raises(DomainError):
        config_for_eps(0.0, base_seed=3)


def test_metric_validation():
    cfg = small_cfg()
    with pytest.raises(ConfigError):
        estimate(JSQ2, "jsq", cfg, [])
    with pytest.raises(ConfigError):
        estimate(JSQ2, "jsq", cfg, [MetricSpec.sum_q(), MetricSpec.sum_q()])
    with pytest.raises(DimensionError):
        estimate(JSQ2, "jsq", cfg, [MetricSpec.cq((1.0, 0.0, 0.0))])
    region = hull_halfspaces(ScheduleSet.from_iterable([(0, 0), (1, 0), (0, 1)]))
    with pytest.raises(ConfigError):
        estimate(JSQ2, "jsq", cfg, [MetricSpec.face_freq(region, 0)])
    with pytest.raises(ConfigError):
        estimate(JSQ2, "maxweight", cfg, [MetricSpec.sum_q()])
    with pytest.raises(DomainError):
        MetricSpec.cq_pow(C2, 0)
    with pytest.raises(DomainError):
        MetricSpec.perp_norm_pow(C2, 0.0)


# -------- exactness and determinism --------

def test_zero_arrivals_give_exact_values():
    sys_ = RoutingSystem(arrival=B.point(0), services=(B.bernoulli(0.5),) * 2)
    cfg = small_cfg()
    res = estimate(
        sys_, "jsq", cfg, [MetricSpec.sum_q(), MetricSpec.q_norm2(), MetricSpec.cu(C2)]
    )
    assert res.metrics["sum_q"].mean == 0.0
    assert res.metrics["sum_q"].half_width == 0.0
    assert res.metrics["q_norm2"].mean == 0.0
    # queues stay empty, so u == s every slot and E[<c,U>] = <c, mu>
    cu = res.metrics["cu"]
    assert cu.ci_low <= 1 / math.sqrt(2) <= cu.ci_high


def test_estimate_deterministic_in_seed():
    a = estimate(JSQ2, "jsq", small_cfg(seed=11), [MetricSpec.sum_q()])
    b = estimate(JSQ2, "jsq", small_cfg(seed=11), [MetricSpec.sum_q()])
    c = estimate(JSQ2, "jsq", small_cfg(seed=12), [MetricSpec.sum_q()])
    assert a.metrics["sum_q"] == b.metrics["sum_q"]
    assert a.metrics["sum_q"].mean != c.metrics["sum_q"].mean


def test_jobs_do_not_change_numbers():
    cfg = small_cfg(seed=5, reps=3)
    specs = [MetricSpec.sum_q(), MetricSpec.perp_norm_pow(C2, 2)]
    serial = estimate(JSQ2, "jsq", cfg, specs, jobs=1)
    parallel = estimate(JSQ2, "jsq", cfg, specs, jobs=3)
    for name in ("sum_q", "perp_norm_2"):
        assert serial.metrics[name] == parallel.metrics[name]


def test_batch_accounting():
    cfg = SimConfig(horizon=10_000, burn_in=1000, batches=9, replications=3, base_seed=1)
    res = estimate(JSQ2, "jsq", cfg, [MetricSpec.sum_q()])
    est = res.metrics["sum_q"]
    assert est.batches == 27
    assert est.samples == 3 * 9 * cfg.batch_len
    assert est.ci_low <= est.mean <= est.ci_high


def test_engine_agrees_with_run_path():
    # same chain, two implementations: vectorized engine vs per-slot loop
    cfg = SimConfig(horizon=60_000, burn_in=6000, batches=8, replications=4, base_seed=21)
    res = estimate(JSQ2, "jsq", cfg, [MetricSpec.sum_q()]).metrics["sum_q"]
    total = n = 0
    for t, rec in enumerate(run_path(JSQ2, "jsq", 60_000, RandomStream(99))):
        if t >= 6000:
            total += sum(rec.q_after)
            n += 1
    loop_mean = total / n
    assert abs(res.mean - loop_mean) < 6 * math.sqrt(res.variance_of_mean * 2)


def test_estimate_matches_chain_truth():
    sys_ = RoutingSystem(arrival=B.bernoulli(0.45), services=(B.bernoulli(0.5),))
    cfg = SimConfig(horizon=250_000, burn_in=25_000, batches=16, replications=4, base_seed=8)
    est = estimate(sys_, "jsq", cfg, [MetricSpec.sum_q()]).metrics["sum_q"]
    # E[Phi] = 4.5 exactly; allow 4 half-widths
    assert abs(est.mean - 4.5) < 4 * max(est.half_width, 1e-3)


# -------- invariant checking and fault injection --------

def test_fault_injection_is_caught():
    cfg = small_cfg()
    with pytest.raises(InvariantViolation):
        estimate(
            JSQ2,
            "jsq",
            cfg,
            [MetricSpec.sum_q()],
            check_invariants=True,
            invariant_c=C2,
            fault="unused_service",
        )


def test_fault_without_checks_passes_silently():
    # the corrupted accounting only trips the explicit checkers
    res = estimate(JSQ2, "jsq", small_cfg(), [MetricSpec.sum_q()], fault="unused_service")
    assert res.metrics["sum_q"].mean >= 0.0


def test_clean_run_passes_checks():
    res = estimate(
        JSQ2, "jsq", small_cfg(), [MetricSpec.sum_q()], check_invariants=True, invariant_c=C2
    )
    assert res.metrics["sum_q"].mean > 0.0
    with pytest.raises(DomainError):
        estimate(JSQ2, "jsq", small_cfg(), [MetricSpec.sum_q()], invariant_c=(1.0, 1.0))


def test_instability_warning():
    overloaded = RoutingSystem(arrival=B.binomial(2, 0.8), services=(B.bernoulli(0.5),) * 2)
    cfg = SimConfig(horizon=30_000, burn_in=0, batches=16, replications=1, base_seed=2)
    res = estimate(overloaded, "jsq", cfg, [MetricSpec.sum_q()])
    assert any("unstable" in w for w in res.warnings)


# -------- scheduling and fading paths --------

def test_face_frequency_static_and_fading():
    ss = ScheduleSet.from_iterable([(0, 0), (1, 0), (0, 1)])
    region = hull_halfspaces(ss)
    sys_ = SchedulingSystem(arrivals=(B.bernoulli(0.4), B.bernoulli(0.4)), schedules=ss)
    est = face_frequency(sys_, "maxweight", region, 0, small_cfg())
    assert 0.0 <= est.mean <= 1.0
    assert est.mean > 0.5  # loaded system mostly serves on the dominant face

    f = onoff_downlink_fading([0.5, 1 / 3])
    freg = fading_region(f)
    fsys = FadingSystem(arrivals=(B.bernoulli(0.35), B.bernoulli(0.2)), fading=f)
    fest = face_frequency(fsys, "maxweight_fading", freg, 1, small_cfg())
    assert 0.0 <= fest.mean <= 1.0


def test_unused_service_mean_tracks_surplus():
    # <c, E[U]> = eps/sqrt(L) exactly in steady state for JSQ
    eps = 0.2
    sys_ = RoutingSystem(arrival=B.binomial(2, (1 - eps) / 2), services=(B.bernoulli(0.5),) * 2)
    cfg = SimConfig(horizon=50_000, burn_in=5000, batches=16, replications=4, base_seed=31)
    est = unused_service_mean(sys_, "jsq", C2, cfg)
    target = eps / math.sqrt(2)
    assert est.ci_low - 2 * est.half_width <= target <= est.ci_high + 2 * est.half_width


# -------- sweeps --------

def _jsq_system(eps):
    return RoutingSystem(arrival=B.binomial(2, (1 - eps) / 2), services=(B.bernoulli(0.5),) * 2)


def _jsq_bounds(eps, n2_hat):
    z = ZetaParams(sigma2=2 * (1 - eps) / 2 * (1 + eps) / 2, nu2=0.5, eps=eps)
    return {"sum_q": (lb_routing(z, 2, 1.0).total, None)}


def test_sweep_rows_and_csv():
    metrics = [MetricSpec.sum_q(), MetricSpec.perp_norm_pow(C2, 2)]
    cfg = lambda eps: SimConfig(
        horizon=8000, burn_in=800, batches=8, replications=2, base_seed=17
    )
    res = sweep(_jsq_system, "jsq", [0.3, 0.15], metrics, cfg, bounds_fn=_jsq_bounds)
    assert len(res.rows) == 4
    sum_rows = res.series("sum_q")
    assert [r.eps for r in sum_rows] == [0.3, 0.15]
    for r in sum_rows:
        assert r.scaled == pytest.approx(r.mean * r.eps)
        assert r.lower_bound is not None and r.upper_bound is None
        assert r.n2_hat is not None  # filled from the perp metric in the same run
    perp_rows = res.series("perp_norm_2")
    assert perp_rows[0].scaled == perp_rows[0].mean  # scale_power 0

    csv_text = res.to_csv()
    again = sweep(_jsq_system, "jsq", [0.3, 0.15], metrics, cfg, bounds_fn=_jsq_bounds)
    assert again.to_csv() == csv_text
    assert csv_text.splitlines()[0] == (
        "eps,metric,mean,ci_low,ci_high,scaled,lower_bound,upper_bound,n2_hat"
    )


def test_sweep_requires_decreasing_eps():
    cfg = small_cfg()
    with pytest.raises(ConfigError):
        sweep(_jsq_system, "jsq", [0.1, 0.2], [MetricSpec.sum_q()], cfg)
    with pytest.raises(ConfigError):
        sweep(_jsq_system, "jsq", [], [MetricSpec.sum_q()], cfg)


def test_sweep_without_perp_metric_has_no_n2():
    res = sweep(_jsq_system, "jsq", [0.3], [MetricSpec.sum_q()], small_cfg())
    assert res.rows[0].n2_hat is None
