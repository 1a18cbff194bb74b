"""Parallel/perpendicular decomposition and pathwise drift diagnostics.

The queue vector is split along a unit direction c into Q_par + Q_perp.
Three families of checks live here:

* exact pathwise identities that must hold at every slot (the bounded
  jump of ||Q_perp||, the unused-service identity, Pythagoras, and the
  non-expansiveness of the projection),
* drift-condition diagnostics in the style of exponential-tail lemmas:
  estimated conditional drift and the observed jump bound,
* steady-state sweeps of E[||Q_perp||^r] across the load gap, which stay
  flat while parallel moments blow up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import GEOM_TOL, inner, norm
from .errors import DomainError, InvariantViolation
from .dynamics import SlotRecord


@dataclass(frozen=True)
class Decomposition:
    c: tuple[float, ...]
    q_par_scalar: float
    q_par: tuple[float, ...]
    q_perp: tuple[float, ...]


def decompose(q: Sequence[float], c: Sequence[float]) -> Decomposition:
    """Split q into components along and orthogonal to the unit vector c."""
    if abs(norm(c) - 1.0) > GEOM_TOL:
        raise DomainError(f"direction must be unit length, got norm {norm(c)!r}")
    if any(v < 0.0 for v in c):
        raise DomainError("direction must be nonnegative")
    scalar = inner(c, q)
    q_par = tuple(scalar * cl for cl in c)
    q_perp = tuple(float(ql) - pl for ql, pl in zip(q, q_par))
    return Decomposition(tuple(float(v) for v in c), scalar, q_par, q_perp)


# -------- pathwise checkers --------

@dataclass
class PathCheckReport:
    steps: int = 0
    violations: int = 0
    max_vperp_jump: float = 0.0
    max_identity_residual: float = 0.0
    max_pythagoras_residual: float = 0.0
    first_violation: SlotRecord | None = None

    @property
    def ok(self) -> bool:
        return self.violations == 0


def vperp_drift_check(
    path: Iterable[SlotRecord],
    c: Sequence[float],
    a_max: int,
    s_max: int,
    raise_on_violation: bool = True,
) -> PathCheckReport:
    """Verify the two perpendicular-drift inequalities along a path.

    Hard bound: |Delta ||Q_perp||| <= 2 sqrt(L) max(A_max, S_max) at every
    step. Comparison bound: whenever ||Q_perp|| > 0,
    Delta||Q_perp|| <= (Delta||Q||^2 - Delta||Q_par||^2) / (2||Q_perp||).
    Also checks Pythagoras and non-expansiveness of the projection.
    """
    L = len(c)
    bound = 2.0 * math.sqrt(L) * max(a_max, s_max)
    rep = PathCheckReport()
    for rec in path:
        before = decompose(rec.q_before, c)
        after = decompose(rec.q_after, c)
        v_before = norm(before.q_perp)
        v_after = norm(after.q_perp)
        dv = v_after - v_before
        rep.steps += 1
        rep.max_vperp_jump = max(rep.max_vperp_jump, abs(dv))
        bad = abs(dv) > bound + GEOM_TOL
        # Pythagoras on both endpoints.
        for dec, q in ((before, rec.q_before), (after, rec.q_after)):
            resid = abs(inner(q, q) - (inner(dec.q_par, dec.q_par) + inner(dec.q_perp, dec.q_perp)))
            rep.max_pythagoras_residual = max(rep.max_pythagoras_residual, resid)
            bad = bad or resid > GEOM_TOL * max(1.0, inner(q, q))
        # Comparison inequality against the quadratic drifts. Skipped when
        # ||Q_perp|| is pure rounding noise (queue on the collapse line),
        # where the division would amplify float error without bound.
        if v_before > GEOM_TOL * max(1.0, norm(rec.q_before)):
            dw = inner(rec.q_after, rec.q_after) - inner(rec.q_before, rec.q_before)
            dwpar = after.q_par_scalar**2 - before.q_par_scalar**2
            if dv > (dw - dwpar) / (2.0 * v_before) + GEOM_TOL * max(1.0, v_before):
                bad = True
        # Non-expansiveness of the projection.
        dpar = norm(tuple(a - b for a, b in zip(after.q_par, before.q_par)))
        dq = norm(tuple(a - b for a, b in zip(rec.q_after, rec.q_before)))
        if dpar > dq + GEOM_TOL:
            bad = True
        if bad:
            rep.violations += 1
            if rep.first_violation is None:
                rep.first_violation = rec
            if raise_on_violation:
                raise InvariantViolation(
                    f"perpendicular drift violation at step {rep.steps}: "
                    f"|dV|={abs(dv)!r} bound={bound!r}",
                    record=rec,
                )
    return rep


def unused_service_identity_check(
    path: Iterable[SlotRecord],
    c: Sequence[float],
    raise_on_violation: bool = True,
) -> PathCheckReport:
    """Exact pathwise identity linking unused service to the perpendicular
    component: <c, Q[t+1]> <c, U[t]> = <-Q_perp[t+1], U[t]> at every step.

    Both sides reduce to <Q[t+1], U[t]> = 0, so the residual is floating
    rounding only.
    """
    rep = PathCheckReport()
    for rec in path:
        after = decompose(rec.q_after, c)
        lhs = inner(c, rec.q_after) * inner(c, rec.u)
        rhs = -inner(after.q_perp, rec.u)
        resid = abs(lhs - rhs)
        rep.steps += 1
        rep.max_identity_residual = max(rep.max_identity_residual, resid)
        scale = max(1.0, abs(lhs), abs(rhs))
        if resid > GEOM_TOL * scale:
            rep.violations += 1
            if rep.first_violation is None:
                rep.first_violation = rec
            if raise_on_violation:
                raise InvariantViolation(
                    f"unused-service identity violated at step {rep.steps}: "
                    f"lhs={lhs!r} rhs={rhs!r}",
                    record=rec,
                )
    return rep


def slot_record_check(rec: SlotRecord) -> None:
    """Integer slot identities: q' = q + a - s + u, u*q' = 0, 0 <= u <= s."""
    for ql, al, sl, ul, qn in zip(rec.q_before, rec.a, rec.s, rec.u, rec.q_after):
        if qn != ql + al - sl + ul:
            raise InvariantViolation(f"slot identity broken: {rec!r}", record=rec)
        if ul * qn != 0:
            raise InvariantViolation(f"unused service on a nonempty queue: {rec!r}", record=rec)
        if not 0 <= ul <= sl:
            raise InvariantViolation(f"unused service outside [0, s]: {rec!r}", record=rec)


# -------- drift-condition diagnostics --------

@dataclass
class HajekReport:
    eta_hat: float
    eta_ci: tuple[float, float]
    d_hat: float
    c2_violations: int
    conditioned_samples: int
    warning: str | None = None


def hajek_diagnostic(
    path: Iterable[SlotRecord],
    z_fn: Callable[[tuple[int, ...]], float],
    kappa: float,
    d_theoretical: float | None = None,
    batches: int = 32,
) -> HajekReport:
    """Empirical check of the two drift conditions behind exponential tails.

    C1: the conditional mean drift of Z above level kappa should be
    negative; reported as eta_hat = -E[dZ | Z >= kappa] with a batch-means
    confidence interval. C2: jumps |dZ| are bounded; d_hat is the largest
    observed jump and c2_violations counts exceedances of the supplied
    theoretical bound.
    """
    deltas: list[float] = []
    d_hat = 0.0
    c2 = 0
    for rec in path:
        z0 = z_fn(rec.q_before)
        z1 = z_fn(rec.q_after)
        dz = z1 - z0
        d_hat = max(d_hat, abs(dz))
        if d_theoretical is not None and abs(dz) > d_theoretical + GEOM_TOL:
            c2 += 1
        if z0 >= kappa:
            deltas.append(dz)
    n = len(deltas)
    if n == 0:
        return HajekReport(
            eta_hat=float("nan"),
            eta_ci=(float("nan"), float("nan")),
            d_hat=d_hat,
            c2_violations=c2,
            conditioned_samples=0,
            warning="no samples above the conditioning level",
        )
    arr = np.asarray(deltas)
    eta = -float(arr.mean())
    nb = min(batches, n)
    means = np.array([chunk.mean() for chunk in np.array_split(arr, nb)])
    if nb > 1:
        from scipy.stats import t as student_t

        half = student_t.ppf(0.975, nb - 1) * means.std(ddof=1) / math.sqrt(nb)
    else:
        half = float("inf")
    warning = None
    if n < 100:
        warning = f"only {n} conditioned samples; drift estimate is unreliable"
    return HajekReport(
        eta_hat=eta,
        eta_ci=(eta - half, eta + half),
        d_hat=d_hat,
        c2_violations=c2,
        conditioned_samples=n,
        warning=warning,
    )


# -------- moment sweeps --------

def perp_moment_sweep(
    make_system,
    policy: str,
    c_for_eps,
    r_list: Sequence[int],
    eps_list: Sequence[float],
    cfg_for_eps,
):
    """Estimate E[||Q_perp||^r] across a load sweep.

    ``make_system(eps)`` builds the system at each gap, ``c_for_eps(eps)``
    the decomposition direction, and ``cfg_for_eps(eps)`` the simulation
    config. Returns (table, ratios): table[eps][r] is a SteadyStateEstimate
    and ratios[r] = max/min of the means across the sweep.
    """
    from .montecarlo import MetricSpec, estimate

    table: dict[float, dict[int, object]] = {}
    for eps in eps_list:
        system = make_system(eps)
        c = c_for_eps(eps)
        metrics = [MetricSpec.perp_norm_pow(c, r) for r in r_list]
        result = estimate(system, policy, cfg_for_eps(eps), metrics)
        table[eps] = {r: result.metrics[MetricSpec.perp_norm_pow(c, r).name] for r in r_list}
    ratios = {}
    for r in r_list:
        means = [table[eps][r].mean for eps in eps_list]
        low = min(means)
        ratios[r] = float("inf") if low <= 0 else max(means) / low
    return table, ratios
