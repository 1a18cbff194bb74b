"""Closed-form lower and upper bounds on steady-state queue moments.

Every bound splits into a dominant variance term zeta/(2 eps) (or its
nth-moment analogue n! (zeta/2)^n) and a correction constant. Lower
bounds subtract the correction, upper bounds add it. The perpendicular
second moment N2 that upper corrections need is not available in closed
form, so callers pass a simulated estimate; the report records it so the
empirical status of the bound stays explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError
from .geometry import (
    CapacityRegion,
    FadingModel,
    HeavyTrafficPoint,
    fading_cone_angle_k,
    fading_face_service_dist,
    fading_gamma_k,
)


@dataclass(frozen=True)
class ZetaParams:
    """Variance aggregate zeta = sigma2 + nu2 + eps^2 for one bound."""

    sigma2: float
    nu2: float
    eps: float

    def __post_init__(self):
        if self.sigma2 < 0.0 or self.nu2 < 0.0:
            raise DomainError("variance terms must be nonnegative")

    @property
    def zeta(self) -> float:
        return self.sigma2 + self.nu2 + self.eps * self.eps


@dataclass(frozen=True)
class BoundReport:
    kind: str                 # "lower" | "upper"
    metric: str               # what is being bounded, e.g. "sum_q" or "cq"
    n: int                    # moment order
    dominant_term: float
    correction: float
    total: float              # dominant -/+ correction, lower floored at 0
    raw_total: float          # before flooring
    scaled_limit: float       # eps^n * bound -> n! (zeta/2)^n as eps -> 0
    inputs: dict = field(default_factory=dict)
    asymptotic_only: bool = False
    structural_estimate: bool = False
    out_of_regime: bool = False
    notes: str = ""

    def __post_init__(self):
        if self.kind not in ("lower", "upper"):
            raise DomainError(f"kind must be lower/upper, got {self.kind!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "metric": self.metric,
            "n": self.n,
            "dominant_term": self.dominant_term,
            "correction": self.correction,
            "total": self.total,
            "raw_total": self.raw_total,
            "scaled_limit": self.scaled_limit,
            "inputs": dict(self.inputs),
            "asymptotic_only": self.asymptotic_only,
            "structural_estimate": self.structural_estimate,
            "out_of_regime": self.out_of_regime,
            "notes": self.notes,
        }


def _require_pos_eps(eps: float) -> None:
    if not eps > 0.0:
        raise DomainError(f"heavy-traffic gap must be positive, got {eps!r}")


def _lower(metric: str, z: ZetaParams, correction: float, inputs: dict, notes: str = "") -> BoundReport:
    dominant = z.zeta / (2.0 * z.eps)
    raw = dominant - correction
    return BoundReport(
        kind="lower",
        metric=metric,
        n=1,
        dominant_term=dominant,
        correction=correction,
        total=max(raw, 0.0),
        raw_total=raw,
        scaled_limit=z.zeta / 2.0,
        inputs=inputs,
        notes=notes,
    )


# -------- lower bounds --------

def lb_single_server(z: ZetaParams, beta_max: float) -> BoundReport:
    """E[Phi] >= zeta/(2 eps) - beta_max/2 for the scalar queue."""
    _require_pos_eps(z.eps)
    return _lower(
        "phi",
        z,
        beta_max / 2.0,
        {"eps": z.eps, "zeta": z.zeta, "sigma2": z.sigma2, "nu2": z.nu2, "beta_max": beta_max},
    )


def lb_routing(z: ZetaParams, L: int, s_max: float) -> BoundReport:
    """E[sum_l Q_l] >= zeta/(2 eps) - L s_max / 2 for any routing policy.

    eps here is the total service surplus mu_sum - lambda_sum; sigma2 the
    arrival-stream variance and nu2 the pooled service variance.
    """
    _require_pos_eps(z.eps)
    return _lower(
        "sum_q",
        z,
        L * s_max / 2.0,
        {"eps": z.eps, "zeta": z.zeta, "sigma2": z.sigma2, "nu2": z.nu2, "L": L, "s_max": s_max},
    )


def zeta_for_face(
    htp: HeavyTrafficPoint,
    region: CapacityRegion,
    k: int,
    sigma2_vec: Sequence[float],
    var_beta: float = 0.0,
) -> ZetaParams:
    """zeta for face k: <c_k^2, sigma^2> + Var(beta_k) + eps_k^2.

    The eps^2 term is included for consistency with the single-server and
    fading forms; it vanishes in the heavy-traffic limit either way.
    """
    c = region.hyperplanes[k].c
    if len(sigma2_vec) != len(c):
        raise DomainError("sigma2 vector dimension mismatch")
    sigma2 = sum(cl * cl * s2 for cl, s2 in zip(c, sigma2_vec))
    return ZetaParams(sigma2=sigma2, nu2=float(var_beta), eps=htp.eps[k])


def lb_scheduling(
    region: CapacityRegion,
    htp: HeavyTrafficPoint,
    k: int,
    sigma2_vec: Sequence[float],
) -> BoundReport:
    """E[<c_k, Q>] >= zeta_k/(2 eps_k) - b_k/2 for any feasible policy."""
    if not 0 <= k < region.K:
        raise DomainError(f"face index {k} out of range")
    z = zeta_for_face(htp, region, k, sigma2_vec)
    _require_pos_eps(z.eps)
    b_k = region.hyperplanes[k].b
    return _lower(
        "cq",
        z,
        b_k / 2.0,
        {"eps": z.eps, "zeta": z.zeta, "sigma2": z.sigma2, "k": k, "b_k": b_k},
    )


def lb_nth_moment(z: ZetaParams, n: int) -> BoundReport:
    """Dominant term of the nth-moment lower bound:
    eps^n E[X^n] >= n! (zeta/2)^n minus a vanishing correction with no
    closed form; only the dominant term is evaluated."""
    if n < 1:
        raise DomainError("moment order must be >= 1")
    _require_pos_eps(z.eps)
    dominant_scaled = math.factorial(n) * (z.zeta / 2.0) ** n
    dominant = dominant_scaled / z.eps**n
    return BoundReport(
        kind="lower",
        metric="x_pow",
        n=n,
        dominant_term=dominant,
        correction=0.0,
        total=max(dominant, 0.0),
        raw_total=dominant,
        scaled_limit=dominant_scaled,
        inputs={"eps": z.eps, "zeta": z.zeta, "n": n},
        asymptotic_only=True,
        notes="correction term vanishes as eps -> 0 but has no closed form",
    )


# -------- upper bounds --------

def ub_jsq(z: ZetaParams, L: int, s_max: float, n2_hat: float) -> BoundReport:
    """E[sum_l Q_l] <= zeta/(2 eps) + L sqrt(n2_hat sqrt(L) s_max / eps) + s_max/2
    under shortest-queue routing; n2_hat estimates E[||Q_perp||^2]."""
    _require_pos_eps(z.eps)
    if n2_hat < 0.0:
        raise DomainError("n2_hat must be nonnegative")
    dominant = z.zeta / (2.0 * z.eps)
    correction = L * math.sqrt(n2_hat * math.sqrt(L) * s_max / z.eps) + s_max / 2.0
    total = dominant + correction
    return BoundReport(
        kind="upper",
        metric="sum_q",
        n=1,
        dominant_term=dominant,
        correction=correction,
        total=total,
        raw_total=total,
        scaled_limit=z.zeta / 2.0,
        inputs={"eps": z.eps, "zeta": z.zeta, "L": L, "s_max": s_max, "n2_hat": n2_hat},
    )


def _mws_correction(
    b_k: float,
    c_k: Sequence[float],
    eps_k: float,
    s_max: float,
    n2_hat: float,
    gamma: float,
    theta: float,
) -> float:
    c_pos = [v for v in c_k if v > 0.0]
    if not c_pos:
        raise DomainError("face normal has no positive entry")
    c_min = min(c_pos)
    cs = s_max * sum(c_k)  # <c_k, s_max * 1>
    t_const = b_k * b_k + cs * cs
    return (
        (math.cos(theta) / math.sin(theta)) * math.sqrt(n2_hat * t_const / (eps_k * gamma))
        + t_const / (2.0 * gamma)
        + cs / 2.0
        + math.sqrt(n2_hat * s_max / (eps_k * c_min))
    )


def ub_mws(
    region: CapacityRegion,
    htp: HeavyTrafficPoint,
    k: int,
    sigma2_vec: Sequence[float],
    s_max: float,
    n2_hat: float,
    gamma: float,
    theta: float,
    var_beta: float = 0.0,
    structural_estimate: bool = False,
) -> BoundReport:
    """E[<c_k, Q>] <= zeta_k/(2 eps_k) + correction under max-weight, for an
    interior-dominant face approached along its normal.

    The correction combines the cone angle theta (smaller cones cost
    more), the off-face loss gamma, and the simulated perpendicular second
    moment n2_hat; each term vanishes relative to 1/eps_k in the limit.
    Outside the regime eps_k < gamma the bound is still emitted but
    flagged out_of_regime.
    """
    if not 0 <= k < region.K:
        raise DomainError(f"face index {k} out of range")
    if not 0.0 < theta <= math.pi / 2:
        raise DomainError(f"cone angle must be in (0, pi/2], got {theta!r}")
    if n2_hat < 0.0:
        raise DomainError("n2_hat must be nonnegative")
    if gamma <= 0.0:
        raise DomainError("gamma must be positive")
    z = zeta_for_face(htp, region, k, sigma2_vec, var_beta=var_beta)
    _require_pos_eps(z.eps)
    h = region.hyperplanes[k]
    correction = _mws_correction(h.b, h.c, z.eps, s_max, n2_hat, gamma, theta)
    dominant = z.zeta / (2.0 * z.eps)
    total = dominant + correction
    out = z.eps >= gamma
    return BoundReport(
        kind="upper",
        metric="cq",
        n=1,
        dominant_term=dominant,
        correction=correction,
        total=total,
        raw_total=total,
        scaled_limit=z.zeta / 2.0,
        inputs={
            "eps": z.eps,
            "zeta": z.zeta,
            "k": k,
            "b_k": h.b,
            "gamma": gamma,
            "theta": theta,
            "n2_hat": n2_hat,
            "s_max": s_max,
            "var_beta": var_beta,
        },
        structural_estimate=structural_estimate,
        out_of_regime=out,
        notes="eps_k >= gamma: outside the proven regime" if out else "",
    )


def ub_nth_moment(z: ZetaParams, n: int) -> BoundReport:
    """Dominant term of the nth-moment upper bound: eps^n E[X^n] ->
    n! (zeta/2)^n; the finite-eps correction has no closed form."""
    if n < 1:
        raise DomainError("moment order must be >= 1")
    _require_pos_eps(z.eps)
    dominant_scaled = math.factorial(n) * (z.zeta / 2.0) ** n
    dominant = dominant_scaled / z.eps**n
    return BoundReport(
        kind="upper",
        metric="x_pow",
        n=n,
        dominant_term=dominant,
        correction=0.0,
        total=dominant,
        raw_total=dominant,
        scaled_limit=dominant_scaled,
        inputs={"eps": z.eps, "zeta": z.zeta, "n": n},
        asymptotic_only=True,
        notes="correction term vanishes as eps -> 0 but has no closed form",
    )


# -------- fading --------

def fading_bounds(
    fregion: CapacityRegion,
    f: FadingModel,
    htp: HeavyTrafficPoint,
    k: int,
    sigma2_vec: Sequence[float],
    s_max: float,
    n2_hat: float,
    theta: float | None = None,
    n_dirs: int = 2048,
) -> tuple[BoundReport, BoundReport]:
    """Lower and upper bounds on E[<c_k, Q>] for the fading system.

    zeta gains the variance of the per-state face offset beta_k. The
    lower correction is s_max/2. The upper bound reuses the static
    max-weight correction with the per-state gamma and worst-case cone
    angle, and is flagged structural_estimate because that assembly
    follows the static proof's structure rather than a closed-form
    constant.
    """
    if not 0 <= k < fregion.K:
        raise DomainError(f"face index {k} out of range")
    beta = fading_face_service_dist(f, fregion, k)
    var_beta = beta.variance
    z = zeta_for_face(htp, fregion, k, sigma2_vec, var_beta=var_beta)
    _require_pos_eps(z.eps)
    lower = _lower(
        "cq",
        z,
        s_max / 2.0,
        {
            "eps": z.eps,
            "zeta": z.zeta,
            "k": k,
            "var_beta": var_beta,
            "s_max": s_max,
        },
        notes="fading lower bound; zeta includes Var(beta_k)",
    )
    gamma = fading_gamma_k(f, fregion, k)
    if theta is None:
        theta = fading_cone_angle_k(f, fregion, k, n_dirs)
    upper = ub_mws(
        fregion,
        htp,
        k,
        sigma2_vec,
        s_max,
        n2_hat,
        gamma,
        theta,
        var_beta=var_beta,
        structural_estimate=True,
    )
    return lower, upper


# -------- schedule-frequency check --------

@dataclass(frozen=True)
class PiBoundReport:
    pi_hat: float
    ci_half_width: float
    eps_k: float
    gamma_k: float
    bound: float          # eps_k / gamma_k
    satisfied: bool
    out_of_regime: bool


def pi_k_bound_check(
    pi_hat: float,
    ci_half_width: float,
    eps_k: float,
    gamma_k: float,
    ci_widths: float = 2.0,
) -> PiBoundReport:
    """Check the off-face frequency bound 1 - pi_k <= eps_k / gamma_k.

    Only meaningful for eps_k in (0, gamma_k); outside that regime the
    report is flagged and not asserted. The measured frequency is allowed
    `ci_widths` confidence half-widths of slack.
    """
    _require_pos_eps(eps_k)
    if gamma_k <= 0.0:
        raise DomainError("gamma must be positive")
    bound = eps_k / gamma_k
    out = bound >= 1.0
    satisfied = out or (1.0 - pi_hat) <= bound + ci_widths * ci_half_width
    return PiBoundReport(
        pi_hat=pi_hat,
        ci_half_width=ci_half_width,
        eps_k=eps_k,
        gamma_k=gamma_k,
        bound=bound,
        satisfied=satisfied,
        out_of_regime=out,
    )
