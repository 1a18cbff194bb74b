"""Decomposition, pathwise invariant checkers, and drift diagnostics."""

import math

import pytest

from qnetlab.collapse import (
    decompose,
    hajek_diagnostic,
    perp_moment_sweep,
    slot_record_check,
    unused_service_identity_check,
    vperp_drift_check,
)
from qnetlab.core import BoundedIntDist, RandomStream
from qnetlab.dynamics import RoutingSystem, SchedulingSystem, SlotRecord, run_path
from qnetlab.errors import DomainError, InvariantViolation
from qnetlab.geometry import ScheduleSet, hull_halfspaces
from qnetlab.montecarlo import SimConfig

B = BoundedIntDist
C45 = (1 / math.sqrt(2), 1 / math.sqrt(2))


# -------- decomposition --------

def test_decompose_frozen_example():
    d = decompose((3, 1), C45)
    assert d.q_par_scalar == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert d.q_par == pytest.approx((2.0, 2.0), abs=1e-12)
    assert d.q_perp == pytest.approx((1.0, -1.0), abs=1e-12)


def test_decompose_pythagoras():
    d = decompose((5, 2, 9), (1.0, 0.0, 0.0))
    assert d.q_par == (5.0, 0.0, 0.0)
    assert d.q_perp == (0.0, 2.0, 9.0)
    total = sum(v * v for v in (5, 2, 9))
    parts = sum(v * v for v in d.q_par) + sum(v * v for v in d.q_perp)
    assert parts == pytest.approx(total, abs=1e-9)


def test_decompose_rejects_bad_direction():
    with pytest.raises(DomainError):
        decompose((1, 1), (1.0, 1.0))  # not unit
    with pytest.raises(DomainError):
        decompose((1, 1), (0.6, -0.8))  # unit but negative


# -------- slot record checker --------

def test_slot_record_check_passes_real_steps():
    sys_ = RoutingSystem(arrival=B.binomial(2, 0.45), services=(B.bernoulli(0.5),) * 2)
    for rec in run_path(sys_, "jsq", 2000, RandomStream(3)):
        slot_record_check(rec)


def test_slot_record_check_detects_identity_break():
    rec = SlotRecord(q_before=(1,), a=(1,), s=(0,), u=(0,), q_after=(3,))
    with pytest.raises(InvariantViolation):
        slot_record_check(rec)


def test_slot_record_check_detects_wasted_service_on_busy_queue():
    rec = SlotRecord(q_before=(2,), a=(1,), s=(1,), u=(1,), q_after=(3,))
    with pytest.raises(InvariantViolation):
        slot_record_check(rec)


def test_slot_record_check_detects_negative_unused():
    rec = SlotRecord(q_before=(2,), a=(0,), s=(1,), u=(-1,), q_after=(0,))
    with pytest.raises(InvariantViolation):
        slot_record_check(rec)


# -------- perpendicular drift checker --------

def test_vperp_check_clean_on_jsq_path():
    sys_ = RoutingSystem(arrival=B.binomial(2, 0.475), services=(B.bernoulli(0.5),) * 2)
    path = run_path(sys_, "jsq", 5000, RandomStream(9))
    rep = vperp_drift_check(path, C45, sys_.a_max, sys_.s_max)
    assert rep.ok
    assert rep.steps == 5000
    assert rep.max_vperp_jump <= 2 * math.sqrt(2) * 2 + 1e-9
    assert rep.max_pythagoras_residual <= 1e-9


def test_vperp_check_clean_on_maxweight_path():
    ss = ScheduleSet.from_iterable([(0, 0), (1, 0), (0, 1), (1, 1)])
    region = hull_halfspaces(ss)
    c = region.hyperplanes[0].c
    sys_ = SchedulingSystem(arrivals=(B.bernoulli(0.45), B.bernoulli(0.45)), schedules=ss)
    path = run_path(sys_, "maxweight", 5000, RandomStream(10))
    rep = vperp_drift_check(path, c, sys_.a_max, sys_.s_max)
    assert rep.ok


def test_vperp_check_detects_teleport():
    rec = SlotRecord(q_before=(0, 0), a=(0, 0), s=(0, 0), u=(0, 0), q_after=(1000, 0))
    rep = vperp_drift_check([rec], C45, 1, 1, raise_on_violation=False)
    assert not rep.ok
    assert rep.violations == 1
    assert rep.first_violation is rec
    with pytest.raises(InvariantViolation):
        vperp_drift_check([rec], C45, 1, 1)


def test_vperp_check_stable_on_collapse_line():
    # Q_perp is pure rounding noise when Q sits exactly on the line; the
    # comparison inequality must not amplify it at large queue lengths.
    n = 10**6
    rec = SlotRecord(
        q_before=(n, n), a=(1, 1), s=(0, 0), u=(0, 0), q_after=(n + 1, n + 1)
    )
    rep = vperp_drift_check([rec], C45, 1, 1)
    assert rep.ok


# -------- unused service identity --------

def test_unused_service_identity_clean_on_path():
    sys_ = RoutingSystem(arrival=B.binomial(2, 0.4), services=(B.bernoulli(0.5),) * 2)
    path = run_path(sys_, "jsq", 5000, RandomStream(4))
    rep = unused_service_identity_check(path, C45)
    assert rep.ok
    assert rep.max_identity_residual <= 1e-9


def test_unused_service_identity_detects_corruption():
    # wasted service recorded against a queue that ends the slot busy
    rec = SlotRecord(q_before=(2, 0), a=(0, 0), s=(0, 1), u=(1, 0), q_after=(2, 0))
    rep = unused_service_identity_check([rec], C45, raise_on_violation=False)
    assert rep.violations == 1
    with pytest.raises(InvariantViolation):
        unused_service_identity_check([rec], C45)


# -------- drift diagnostics --------

def _descending_path(start: int) -> list[SlotRecord]:
    return [
        SlotRecord(q_before=(k,), a=(0,), s=(1,), u=(0,), q_after=(k - 1,))
        for k in range(start, 0, -1)
    ]


def test_hajek_exact_on_deterministic_drain():
    path = _descending_path(200)
    rep = hajek_diagnostic(path, lambda q: float(sum(q)), kappa=50.0, d_theoretical=1.0)
    assert rep.eta_hat == pytest.approx(1.0)
    assert rep.eta_ci == pytest.approx((1.0, 1.0))
    assert rep.d_hat == 1.0
    assert rep.c2_violations == 0
    assert rep.conditioned_samples == 151
    assert rep.warning is None


def test_hajek_counts_jump_bound_exceedances():
    rep = hajek_diagnostic(
        _descending_path(200), lambda q: float(sum(q)), kappa=50.0, d_theoretical=0.5
    )
    assert rep.c2_violations == 200


def test_hajek_warns_without_samples():
    rep = hajek_diagnostic(_descending_path(50), lambda q: float(sum(q)), kappa=1e9)
    assert rep.conditioned_samples == 0
    assert math.isnan(rep.eta_hat)
    assert rep.warning is not None


def test_hajek_warns_on_few_samples():
    rep = hajek_diagnostic(_descending_path(200), lambda q: float(sum(q)), kappa=195.0)
    assert rep.conditioned_samples == 6
    assert "unreliable" in rep.warning


def test_hajek_estimates_negative_drift_of_stable_queue():
    # scalar queue with alpha=Bern(0.45), beta=Bern(0.5): above any busy
    # level the mean drift is alpha - beta = -0.05
    sys_ = RoutingSystem(arrival=B.bernoulli(0.45), services=(B.bernoulli(0.5),))
    path = run_path(sys_, "jsq", 50_000, RandomStream(15))
    rep = hajek_diagnostic(path, lambda q: float(q[0]), kappa=1.0, d_theoretical=1.0)
    assert rep.conditioned_samples > 5_000
    assert rep.c2_violations == 0
    assert rep.eta_hat == pytest.approx(0.05, abs=0.02)
    assert rep.eta_ci[0] > 0.0


# -------- moment sweep smoke --------

def test_perp_moment_sweep_flat_for_jsq():
    def make_system(eps):
        return RoutingSystem(
            arrival=B.binomial(2, (1.0 - eps) / 2.0), services=(B.bernoulli(0.5),) * 2
        )

    def cfg_for_eps(eps):
        return SimConfig(horizon=6000, burn_in=600, batches=8, replications=2, base_seed=5)

    table, ratios = perp_moment_sweep(
        make_system, "jsq", lambda eps: C45, [2], [0.3, 0.15], cfg_for_eps
    )
    assert set(table) == {0.3, 0.15}
    for eps in (0.3, 0.15):
        est = table[eps][2]
        assert est.mean > 0.0
        assert est.ci_low <= est.mean <= est.ci_high
    assert 1.0 <= ratios[2] < 3.0
