"""Closed-form moment bounds against independently computed arithmetic.

Expected values below were frozen from a standalone script that evaluates
the same formulas with plain math on the published inputs.
"""

import math

import pytest

from qnetlab.bounds import (
    ZetaParams,
    fading_bounds,
    lb_nth_moment,
    lb_routing,
    lb_scheduling,
    lb_single_server,
    pi_k_bound_check,
    ub_jsq,
    ub_mws,
    ub_nth_moment,
    zeta_for_face,
)
from qnetlab.errors import DomainError
from qnetlab.geometry import (
    fading_region,
    heavy_traffic_point,
    onoff_downlink_fading,
    onoff_downlink_region,
)

R2 = math.sqrt(2.0)


def test_zeta_params():
    z = ZetaParams(sigma2=0.2475, nu2=0.25, eps=0.05)
    assert z.zeta == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DomainError):
        ZetaParams(sigma2=-0.1, nu2=0.0, eps=0.1)
    with pytest.raises(DomainError):
        ZetaParams(sigma2=0.1, nu2=-1e-9, eps=0.1)


# -------- single server and routing --------

def test_lb_single_server_frozen():
    # Bern(0.45)/Bern(0.5): zeta = 0.5 exactly, bound 4.5, tight in this case
    z = ZetaParams(sigma2=0.45 * 0.55, nu2=0.25, eps=0.05)
    rep = lb_single_server(z, beta_max=1.0)
    assert rep.kind == "lower"
    assert rep.metric == "phi"
    assert rep.total == pytest.approx(4.5, abs=1e-12)
    assert rep.scaled_limit == pytest.approx(0.25, abs=1e-15)
    with pytest.raises(DomainError):
        lb_single_server(ZetaParams(0.25, 0.25, 0.0), beta_max=1.0)


def test_lb_routing_frozen():
    # binomial(2, 0.45) arrivals into two Bern(0.5) servers at eps = 0.1
    z = ZetaParams(sigma2=2 * 0.45 * 0.55, nu2=0.5, eps=0.1)
    rep = lb_routing(z, L=2, s_max=1.0)
    assert z.zeta == pytest.approx(1.005, abs=1e-12)
    assert rep.total == pytest.approx(4.025, abs=1e-12)
    assert rep.correction == pytest.approx(1.0)
    assert rep.metric == "sum_q"


def test_lower_bound_floors_at_zero():
    rep = lb_routing(ZetaParams(sigma2=0.5, nu2=0.0, eps=1.0), L=4, s_max=2.0)
    assert rep.raw_total == pytest.approx(-3.25, abs=1e-12)
    assert rep.total == 0.0


def test_ub_jsq_frozen():
    z = ZetaParams(sigma2=2 * 0.45 * 0.55, nu2=0.5, eps=0.1)
    rep = ub_jsq(z, L=2, s_max=1.0, n2_hat=1.5)
    assert rep.kind == "upper"
    assert rep.correction == pytest.approx(9.711558703193814, abs=1e-12)
    assert rep.total == pytest.approx(14.736558703193815, abs=1e-11)
    assert rep.inputs["n2_hat"] == 1.5
    with pytest.raises(DomainError):
        ub_jsq(z, L=2, s_max=1.0, n2_hat=-0.5)


def test_upper_dominates_lower():
    z = ZetaParams(sigma2=2 * 0.45 * 0.55, nu2=0.5, eps=0.1)
    assert ub_jsq(z, 2, 1.0, 1.5).total > lb_routing(z, 2, 1.0).total


# -------- nth moments --------

def test_nth_moment_dominant_terms():
    lo = lb_nth_moment(ZetaParams(sigma2=0.99, nu2=0.0, eps=0.1), n=2)
    assert lo.scaled_limit == pytest.approx(0.5, abs=1e-12)
    assert lo.total == pytest.approx(50.0, rel=1e-12)
    assert lo.asymptotic_only
    hi = ub_nth_moment(ZetaParams(sigma2=0.79, nu2=0.0, eps=0.1), n=3)
    assert hi.scaled_limit == pytest.approx(0.384, abs=1e-12)
    assert hi.asymptotic_only
    with pytest.raises(DomainError):
        lb_nth_moment(ZetaParams(0.5, 0.0, 0.1), n=0)
    with pytest.raises(DomainError):
        ub_nth_moment(ZetaParams(0.5, 0.0, 0.1), n=0)


def test_first_moment_special_case_matches_scalar_form():
    z = ZetaParams(sigma2=0.45, nu2=0.05, eps=0.1)
    assert lb_nth_moment(z, 1).dominant_term == pytest.approx(z.zeta / (2 * 0.1))


# -------- face bounds --------

DOWNLINK_P = (0.5, 1 / 3)
ANCHOR = (0.4166666666666667, 0.25)
C_FACE = (1 / R2, 1 / R2)


def _downlink_htp(eps):
    region = onoff_downlink_region(DOWNLINK_P)
    lam = tuple(a - eps * ci for a, ci in zip(ANCHOR, C_FACE))
    return region, heavy_traffic_point(region, lam)


def test_zeta_for_face_frozen():
    region, htp = _downlink_htp(0.1)
    lam = htp.lam
    sigma2_vec = tuple(l * (1 - l) for l in lam)
    z = zeta_for_face(htp, region, 1, sigma2_vec)
    assert z.zeta == pytest.approx(0.19670755173822616, rel=1e-9)
    z_fad = zeta_for_face(htp, region, 1, sigma2_vec, var_beta=1 / 9)
    assert z_fad.zeta == pytest.approx(0.30781866284933723, rel=1e-9)
    with pytest.raises(DomainError):
        zeta_for_face(htp, region, 1, (0.1, 0.2, 0.3))


def test_lb_scheduling_frozen():
    region, htp = _downlink_htp(0.1)
    sigma2_vec = tuple(l * (1 - l) for l in htp.lam)
    rep = lb_scheduling(region, htp, 1, sigma2_vec)
    assert rep.total == pytest.approx(0.7478354982956148, rel=1e-9)
    assert rep.correction == pytest.approx(R2 / 6, abs=1e-12)
    with pytest.raises(DomainError):
        lb_scheduling(region, htp, 7, sigma2_vec)


def test_ub_mws_frozen_and_flags():
    region, htp = _downlink_htp(0.05)
    sigma2_vec = (0.25, 0.16)
    rep = ub_mws(region, htp, 1, sigma2_vec, s_max=1.0, n2_hat=2.0,
                 gamma=1 / R2, theta=math.pi / 4)
    assert rep.correction == pytest.approx(21.01161357337897, rel=1e-9)
    assert not rep.out_of_regime
    # eps >= gamma is emitted but flagged
    region, htp = _downlink_htp(0.1)
    far = ub_mws(region, htp, 1, sigma2_vec, s_max=1.0, n2_hat=2.0,
                 gamma=0.05, theta=math.pi / 4)
    assert far.out_of_regime
    assert "regime" in far.notes


def test_ub_mws_input_validation():
    region, htp = _downlink_htp(0.05)
    sigma2_vec = (0.25, 0.16)
    with pytest.raises(DomainError):
        ub_mws(region, htp, 9, sigma2_vec, 1.0, 1.0, 0.5, math.pi / 4)
    with pytest.raises(DomainError):
        ub_mws(region, htp, 1, sigma2_vec, 1.0, 1.0, 0.5, 0.0)
    with pytest.raises(DomainError):
        ub_mws(region, htp, 1, sigma2_vec, 1.0, 1.0, 0.5, math.pi / 2 + 0.1)
    with pytest.raises(DomainError):
        ub_mws(region, htp, 1, sigma2_vec, 1.0, -1.0, 0.5, math.pi / 4)
    with pytest.raises(DomainError):
        ub_mws(region, htp, 1, sigma2_vec, 1.0, 1.0, 0.0, math.pi / 4)


# -------- fading --------

def test_fading_bounds_frozen():
    f = onoff_downlink_fading(DOWNLINK_P)
    region = fading_region(f)
    lam = tuple(a - 0.1 * ci for a, ci in zip(ANCHOR, C_FACE))
    htp = heavy_traffic_point(region, lam)
    sigma2_vec = tuple(l * (1 - l) for l in lam)
    lower, upper = fading_bounds(region, f, htp, 1, sigma2_vec, s_max=1, n2_hat=2.0)
    assert lower.inputs["var_beta"] == pytest.approx(1 / 9, abs=1e-12)
    assert lower.total == pytest.approx(1.039093314246686, rel=1e-9)
    assert lower.correction == pytest.approx(0.5)
    assert upper.structural_estimate
    assert not lower.structural_estimate
    # default theta is the fading cone angle, pi/4 for this downlink
    assert upper.inputs["theta"] == pytest.approx(math.pi / 4, abs=1e-9)
    assert upper.inputs["gamma"] == pytest.approx(1 / R2, abs=1e-12)
    assert upper.total == pytest.approx(17.06389182836647, rel=1e-9)
    with pytest.raises(DomainError):
        fading_bounds(region, f, htp, 5, sigma2_vec, s_max=1, n2_hat=2.0)


# -------- schedule-frequency bound --------

def test_pi_bound_check_cases():
    rep = pi_k_bound_check(pi_hat=0.995, ci_half_width=0.001, eps_k=0.01, gamma_k=1 / R2)
    assert rep.bound == pytest.approx(0.01 * R2, abs=1e-12)
    assert rep.satisfied and not rep.out_of_regime

    bad = pi_k_bound_check(pi_hat=0.9, ci_half_width=0.001, eps_k=0.01, gamma_k=1 / R2)
    assert not bad.satisfied

    out = pi_k_bound_check(pi_hat=0.5, ci_half_width=0.01, eps_k=0.9, gamma_k=0.5)
    assert out.out_of_regime and out.satisfied

    with pytest.raises(DomainError):
        pi_k_bound_check(0.9, 0.01, eps_k=0.0, gamma_k=0.5)
    with pytest.raises(DomainError):
        pi_k_bound_check(0.9, 0.01, eps_k=0.1, gamma_k=0.0)


def test_bound_report_serializes():
    rep = lb_routing(ZetaParams(sigma2=0.495, nu2=0.5, eps=0.1), L=2, s_max=1.0)
    d = rep.to_dict()
    assert d["total"] == rep.total
    assert d["kind"] == "lower"
    assert set(d) >= {"metric", "dominant_term", "correction", "scaled_limit", "inputs"}
    with pytest.raises(DomainError):
        type(rep)(kind="sideways", metric="x", n=1, dominant_term=0, correction=0,
                  total=0, raw_total=0, scaled_limit=0)
