"""Command-line front end.

Subcommands: region | bounds | simulate | sweep | verify. Every run is
driven by a JSON config (seed mandatory) and writes its artifacts under
--out: delimited data (CSV/JSON) plus rendered figures for the report
commands, and a manifest tying outputs to the config hash.

Exit codes: 0 ok, 2 config error, 3 domain error, 4 pathwise invariant
violation, 5 verification failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .bounds import (
    lb_nth_moment,
    lb_routing,
    lb_scheduling,
    lb_single_server,
    fading_bounds,
    ub_jsq,
    ub_mws,
    ub_nth_moment,
    zeta_for_face,
)
from .collapse import (
    hajek_diagnostic,
    slot_record_check,
    unused_service_identity_check,
    vperp_drift_check,
)
from .config import (
    _routing_zeta,
    build_concrete_system,
    build_generators,
    build_region,
    build_sweep_plan,
    face_index,
    load_config,
    metric_specs,
    sim_config,
)
from .core import RandomStream, inner
from .dynamics import FadingSystem, RoutingSystem, run_path
from .errors import (
    ConfigError,
    DomainError,
    InvariantViolation,
    VerificationError,
)
from .geometry import (
    FadingModel,
    ScheduleSet,
    cone_angle_k,
    fading_gamma_k,
    gamma_k,
    heavy_traffic_point,
    per_state_face_offsets,
    region_from_json,
    region_to_json,
)
from .montecarlo import estimate, face_frequency, sweep, unused_service_mean
from .plotting import render_region_figure, render_sweep_figure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_INVARIANT = 4
EXIT_VERIFY = 5


# -------- small helpers --------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write(path: str, text: str) -> str:
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _write_manifest(args, doc: dict, command: str, outputs: list[str], t_start: float) -> str:
    manifest = {
        "command": command,
        "config_sha256": _config_hash(doc),
        "seed": _seed(args, doc),
        "version": __version__,
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "wall_clock_s": round(time.monotonic() - t_start, 3),
    }
    path = os.path.join(_outdir(args), f"{command}_manifest.json")
    return _write(path, json.dumps(manifest, indent=2) + "\n")


def _seed(args, doc: dict) -> int:
    return int(args.seed) if args.seed is not None else int(doc["seed"])


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, int(args.jobs))
    return os.cpu_count() or 1


def _print_table(header: list[str], rows: list[list[str]]) -> None:
    widths = [len(h) for h in header]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    print(line)
    print("-" * len(line))
    for row in rows:
        print("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))


# -------- region --------

def cmd_region(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    region = build_region(doc)
    if region is None:
        raise ConfigError("the region command needs a scheduling or fading system")
    gen = region.generators

    out = _outdir(args)
    json_text = region_to_json(region) + "\n"
    outputs = [_write(os.path.join(out, "region.json"), json_text)]
    if region.L <= 2:
        outputs.append(
            render_region_figure(region, os.path.join(out, "region.png"))
        )

    if args.format == "json":
        print(json_text, end="")
    elif args.format == "csv":
        cols = [f"c_{l + 1}" for l in range(region.L)]
        print(",".join(["face"] + cols + ["b"]))
        for k, h in enumerate(region.hyperplanes):
            print(",".join([str(k + 1)] + [_fmt(v) for v in h.c] + [_fmt(h.b)]))
    else:
        print(f"capacity region: L={region.L}, K={region.K} bounding hyperplanes")
        rows = []
        for k, h in enumerate(region.hyperplanes):
            if isinstance(gen, ScheduleSet):
                verts = [
                    s for s in gen.schedules if abs(inner(h.c, s) - h.b) <= 1e-9
                ]
                extra = " ".join(str(v) for v in verts)
            elif isinstance(gen, FadingModel):
                offs = per_state_face_offsets(gen, region, k)
                extra = "state offsets " + " ".join(_fmt(o) for o in offs)
            else:
                extra = ""
            rows.append(
                [str(k + 1), "(" + ", ".join(f"{v:.6f}" for v in h.c) + ")", f"{h.b:.6f}", extra]
            )
        _print_table(["face", "normal c", "offset b", "on-face generators"], rows)

    outputs.append(_write_manifest(args, doc, "region", outputs, t0))
    return EXIT_OK


# -------- bounds --------

def _bounds_reports(doc: dict, seed: int) -> list:
    ht = doc.get("heavy_traffic", {})
    moments = [int(n) for n in ht.get("moments", [])]
    n2_hat = ht.get("n2_hat")
    reports = []
    if doc["system"]["kind"] == "routing":
        system = build_concrete_system(doc)
        z = _routing_zeta(system)
        if z.eps <= 0.0:
            raise DomainError(
                f"arrival rate {system.arrival.mean} is not inside the service capacity "
                f"{system.mu_total}"
            )
        if system.L == 1:
            reports.append(lb_single_server(z, float(system.services[0].max_value)))
        reports.append(lb_routing(z, system.L, system.s_max))
        if n2_hat is not None:
            reports.append(ub_jsq(z, system.L, system.s_max, float(n2_hat)))
        for n in moments:
            reports.append(lb_nth_moment(z, n))
            reports.append(ub_nth_moment(z, n))
        return reports

    region = build_region(doc)
    k = face_index(doc, region)
    if k is None:
        raise ConfigError("bounds for scheduling systems need heavy_traffic.face")
    system = build_concrete_system(doc)
    htp = heavy_traffic_point(region, system.lam)
    sigma2 = [d.variance for d in system.arrivals]
    gen = build_generators(doc)
    if isinstance(system, FadingSystem):
        lo, hi = fading_bounds(
            region, gen, htp, k, sigma2, system.s_max,
            float(n2_hat) if n2_hat is not None else 0.0,
        )
        reports.append(lo)
        if n2_hat is not None:
            reports.append(hi)
        var_beta = lo.inputs["var_beta"] if "var_beta" in lo.inputs else 0.0
    else:
        reports.append(lb_scheduling(region, htp, k, sigma2))
        if n2_hat is not None:
            gamma = gamma_k(region, gen, k)
            theta = cone_angle_k(region, gen, k)
            reports.append(
                ub_mws(region, htp, k, sigma2, system.s_max, float(n2_hat), gamma, theta)
            )
        var_beta = 0.0
    z = zeta_for_face(htp, region, k, sigma2, var_beta=var_beta)
    for n in moments:
        reports.append(lb_nth_moment(z, n))
        reports.append(ub_nth_moment(z, n))
    return reports


def cmd_bounds(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    seed = _seed(args, doc)
    reports = _bounds_reports(doc, seed)

    out = _outdir(args)
    doc_out = json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
    outputs = [_write(os.path.join(out, "bounds.json"), doc_out)]

    if args.format == "json":
        print(doc_out, end="")
    else:
        rows = []
        for r in reports:
            flags = ",".join(
                f
                for f, on in [
                    ("asymptotic", r.asymptotic_only),
                    ("structural", r.structural_estimate),
                    ("out_of_regime", r.out_of_regime),
                ]
                if on
            )
            rows.append(
                [
                    r.kind,
                    r.metric,
                    str(r.n),
                    f"{r.dominant_term:.6g}",
                    f"{r.correction:.6g}",
                    f"{r.total:.6g}",
                    flags,
                ]
            )
        _print_table(["kind", "metric", "n", "dominant", "correction", "total", "flags"], rows)

    outputs.append(_write_manifest(args, doc, "bounds", outputs, t0))
    return EXIT_OK


# -------- simulate --------

def _invariant_direction(doc: dict, system) -> tuple[float, ...] | None:
    if isinstance(system, RoutingSystem):
        return system.line_direction()
    region = build_region(doc)
    k = face_index(doc, region)
    if k is not None:
        return region.hyperplanes[k].c
    return None


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    seed = _seed(args, doc)
    system = build_concrete_system(doc)
    region = build_region(doc)
    k = face_index(doc, region) if region is not None else None
    metrics = metric_specs(doc, system, region, k)
    cfg = sim_config(doc, seed, metrics=metrics)
    c = _invariant_direction(doc, system)
    fault = doc.get("test_hooks", {}).get("fault")

    result = estimate(
        system,
        doc["policy"],
        cfg,
        metrics,
        jobs=_jobs(args),
        check_invariants=True,
        invariant_c=c,
        fault=fault,
    )

    lines = ["metric,mean,ci_low,ci_high,batches,samples"]
    for m in metrics:
        e = result.metrics[m.name]
        lines.append(
            ",".join(
                [m.name, _fmt(e.mean), _fmt(e.ci_low), _fmt(e.ci_high), str(e.batches), str(e.samples)]
            )
        )
    csv_text = "\n".join(lines) + "\n"

    out = _outdir(args)
    outputs = [_write(os.path.join(out, "estimates.csv"), csv_text)]

    if args.format == "csv":
        print(csv_text, end="")
    elif args.format == "json":
        payload = {
            m.name: {
                "mean": result.metrics[m.name].mean,
                "ci_low": result.metrics[m.name].ci_low,
                "ci_high": result.metrics[m.name].ci_high,
                "batches": result.metrics[m.name].batches,
                "samples": result.metrics[m.name].samples,
            }
            for m in metrics
        }
        print(json.dumps(payload, indent=2))
    else:
        rows = [
            [
                m.name,
                f"{result.metrics[m.name].mean:.6g}",
                f"[{result.metrics[m.name].ci_low:.6g}, {result.metrics[m.name].ci_high:.6g}]",
                str(result.metrics[m.name].samples),
            ]
            for m in metrics
        ]
        _print_table(["metric", "mean", "95% CI", "samples"], rows)
        print(f"pathwise invariants: checked, none violated over {cfg.replications} replications")
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)

    outputs.append(_write_manifest(args, doc, "simulate", outputs, t0))
    return EXIT_OK


# -------- sweep --------

def cmd_sweep(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    seed = _seed(args, doc)
    plan = build_sweep_plan(doc, seed)
    result = sweep(
        plan.make_system,
        doc["policy"],
        plan.eps_list,
        plan.metrics,
        plan.cfg_for_eps,
        plan.bounds_fn,
        jobs=_jobs(args),
    )

    out = _outdir(args)
    outputs = [_write(os.path.join(out, "sweep.csv"), result.to_csv())]

    eps_min = plan.eps_list[-1]
    targets = plan.targets_for_eps(eps_min)
    for m in plan.metrics:
        fig_path = os.path.join(out, f"sweep_{m.name}.png")
        outputs.append(
            render_sweep_figure(
                result, m.name, fig_path, scale_power=m.scale_power, target=targets.get(m.name)
            )
        )

    tol = doc.get("verdict", {}).get("tolerance", 0.25)
    verdict_rows = []
    for m in plan.metrics:
        series = result.series(m.name)
        last = series[-1]
        target = targets.get(m.name)
        if target is None or len(series) < 2:
            verdict = "n/a"
            detail = "no convergence target" if target is None else "single point"
        else:
            rel = abs(last.scaled - target) / abs(target)
            verdict = "PASS" if rel <= tol else "FAIL"
            detail = f"|scaled - {target:.6g}| / target = {rel:.3f} (tol {tol})"
        bound_state = ""
        viol = [
            r
            for r in series
            if (r.lower_bound is not None and r.ci_high < r.lower_bound)
            or (r.upper_bound is not None and r.ci_low > r.upper_bound)
        ]
        if any(r.lower_bound is not None or r.upper_bound is not None for r in series):
            bound_state = "violated" if viol else "respected"
        verdict_rows.append([m.name, verdict, detail, bound_state])

    if args.format == "csv":
        print(result.to_csv(), end="")
    elif args.format == "json":
        payload = [r.__dict__ for r in result.rows]
        print(json.dumps(payload, indent=2))
    else:
        rows = [
            [
                f"{r.eps:g}",
                r.metric,
                f"{r.mean:.6g}",
                f"[{r.ci_low:.6g}, {r.ci_high:.6g}]",
                f"{r.scaled:.6g}",
                "" if r.lower_bound is None else f"{r.lower_bound:.6g}",
                "" if r.upper_bound is None else f"{r.upper_bound:.6g}",
            ]
            for r in result.rows
        ]
        _print_table(["eps", "metric", "mean", "95% CI", "scaled", "lower", "upper"], rows)
        print()
        _print_table(["metric", "verdict", "detail", "bounds"], verdict_rows)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)

    outputs.append(_write_manifest(args, doc, "sweep", outputs, t0))
    return EXIT_OK


# -------- verify --------

def _lp_member(points: np.ndarray, r: np.ndarray) -> bool:
    """Brute-force membership: is r a convex combination of the points?"""
    from scipy.optimize import linprog

    n = len(points)
    a_eq = np.vstack([points.T, np.ones((1, n))])
    b_eq = np.concatenate([r, [1.0]])
    res = linprog(np.zeros(n), A_eq=a_eq, b_eq=b_eq, bounds=[(0.0, None)] * n, method="highs")
    return res.status == 0


def _coordinate_closure(points: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Close a point set under coordinate zeroing so its hull is
    coordinate-convex (service can always be left unused)."""
    import itertools as it

    L = len(points[0])
    out = set()
    for p in points:
        for mask in it.product((0, 1), repeat=L):
            out.add(tuple(v * m for v, m in zip(p, mask)))
    return sorted(out)


def _check_geometry_oracle(seed: int) -> tuple[bool, str]:
    from .geometry import hull_halfspaces

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1001,)))
    sets = 0
    points_checked = 0
    while sets < 12:
        L = int(rng.integers(2, 4))
        n = int(rng.integers(3, 7))
        raw = [tuple(int(v) for v in rng.integers(0, 4, size=L)) for _ in range(n)]
        pts = _coordinate_closure(raw)
        arr = np.asarray(pts, dtype=float)
        if any(arr[:, l].max() <= 0 for l in range(L)):
            continue
        if L == 2 and np.linalg.matrix_rank(arr - arr[0], tol=1e-9) < 2:
            continue
        if L == 3 and np.linalg.matrix_rank(arr - arr[0], tol=1e-9) < 3:
            continue
        try:
            region = hull_halfspaces(ScheduleSet.from_iterable(pts))
        except DomainError:
            continue
        sets += 1
        top = arr.max() * 1.2
        for _ in range(200):
            r = rng.random(L) * top
            # keep clear of hyperplane boundaries where the two methods
            # may legitimately disagree by rounding
            if any(abs(inner(h.c, r) - h.b) < 1e-6 for h in region.hyperplanes):
                continue
            points_checked += 1
            if region.member(r) != _lp_member(arr, r):
                return False, f"disagreement at {tuple(r)} for set {pts}"
    return True, f"{sets} schedule sets, {points_checked} points, full agreement"


def _verify_checks(doc: dict, seed: int, jobs: int) -> list[tuple[str, str, str]]:
    """Run every applicable check; returns (name, status, detail) rows with
    status PASS / FAIL / SKIP."""
    results: list[tuple[str, str, str]] = []

    ok, detail = _check_geometry_oracle(seed)
    results.append(("geometry_oracle", "PASS" if ok else "FAIL", detail))

    system = build_concrete_system(doc)
    region = build_region(doc)
    k = face_index(doc, region) if region is not None else None
    c = _invariant_direction(doc, system)

    # Exact pathwise identities on a fresh path.
    horizon = 20_000
    stream = RandomStream(seed=seed, stream_id=7)
    path = list(run_path(system, doc["policy"], horizon, stream))
    for rec in path:
        slot_record_check(rec)
    if c is not None:
        rep1 = vperp_drift_check(path, c, system.a_max, system.s_max, raise_on_violation=False)
        rep2 = unused_service_identity_check(path, c, raise_on_violation=False)
        bad = rep1.violations + rep2.violations
        results.append(
            (
                "pathwise_identities",
                "PASS" if bad == 0 else "FAIL",
                f"{horizon} slots, max residual {max(rep1.max_identity_residual, rep2.max_identity_residual):.2e}",
            )
        )
    else:
        results.append(("pathwise_identities", "PASS", f"{horizon} slots, integer checks only"))

    # Drift diagnostic around 1.5x the observed mean of <c, Q>.
    if c is not None:
        zs = [inner(c, rec.q_after) for rec in path]
        kappa = 1.5 * (sum(zs) / len(zs)) if zs else 1.0
        rep = hajek_diagnostic(path, lambda q: inner(c, q), kappa=max(kappa, 1.0))
        if rep.warning is not None:
            raise VerificationError(f"drift diagnostic: insufficient data ({rep.warning})")
        ok = rep.eta_hat > 0.0 and rep.c2_violations == 0
        results.append(
            (
                "drift_beyond_kappa",
                "PASS" if ok else "FAIL",
                f"eta_hat={rep.eta_hat:.4f}, jumps bounded ({rep.c2_violations} violations), "
                f"{rep.conditioned_samples} samples",
            )
        )

    cfg = sim_config(doc, seed, eps=None if _has_ht(doc) else 1.0)
    if isinstance(system, RoutingSystem):
        eps = system.eps_total
        target = eps / math.sqrt(system.L)
        est = unused_service_mean(system, doc["policy"], system.line_direction(), cfg, jobs=jobs)
        if est.half_width > max(0.25 * target, 1e-6):
            raise VerificationError(
                f"unused-service equality: insufficient data (CI half-width {est.half_width:.2e} "
                f"too wide for target {target:.2e}); increase the horizon"
            )
        ok = est.ci_low - 1e-12 <= target <= est.ci_high + 1e-12
        results.append(
            (
                "unused_service_equality",
                "PASS" if ok else "FAIL",
                f"E<c,U> = {est.mean:.5f} vs eps/sqrt(L) = {target:.5f} "
                f"(CI [{est.ci_low:.5f}, {est.ci_high:.5f}])",
            )
        )
    elif k is not None:
        htp = heavy_traffic_point(region, system.lam)
        eps_k = htp.eps[k]
        gen = build_generators(doc)
        gamma = (
            fading_gamma_k(gen, region, k)
            if isinstance(gen, FadingModel)
            else gamma_k(region, gen, k)
        )
        est = face_frequency(system, doc["policy"], region, k, cfg, jobs=jobs)
        if est.half_width > 0.05:
            raise VerificationError(
                f"face frequency: insufficient data (CI half-width {est.half_width:.3f}); "
                "increase the horizon"
            )
        if eps_k < gamma:
            bound = eps_k / gamma
            off = 1.0 - est.mean
            ok = off <= bound + 2.0 * est.half_width
            results.append(
                (
                    "face_frequency_bound",
                    "PASS" if ok else "FAIL",
                    f"1 - pi_hat = {off:.4f} vs eps/gamma = {bound:.4f} (+2 CI)",
                )
            )
        else:
            results.append(
                (
                    "face_frequency_bound",
                    "SKIP",
                    f"eps_k = {eps_k:.4f} >= gamma = {gamma:.4f}; outside the bound's regime",
                )
            )
        cu_est = unused_service_mean(system, doc["policy"], region.hyperplanes[k].c, cfg, jobs=jobs)
        ok = cu_est.mean <= eps_k + 2.0 * cu_est.half_width
        results.append(
            (
                "unused_service_inequality",
                "PASS" if ok else "FAIL",
                f"E<c,U> = {cu_est.mean:.5f} <= eps_k = {eps_k:.5f} (+2 CI)",
            )
        )

    artifact = doc.get("artifacts", {}).get("region")
    if artifact is not None:
        if region is None:
            raise ConfigError("artifacts.region given but the system has no region")
        try:
            with open(artifact) as fh:
                stored = region_from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read region artifact {artifact}: {exc}") from exc
        except DomainError as exc:
            raise ConfigError(f"region artifact {artifact} is corrupt: {exc}") from exc
        same = stored.K == region.K and all(
            abs(a.b - b.b) <= 1e-9 and all(abs(x - y) <= 1e-9 for x, y in zip(a.c, b.c))
            for a, b in zip(stored.hyperplanes, region.hyperplanes)
        )
        results.append(
            (
                "region_artifact_match",
                "PASS" if same else "FAIL",
                f"{artifact} vs recomputed region",
            )
        )
    return results


def _has_ht(doc: dict) -> bool:
    ht = doc.get("heavy_traffic", {})
    return "eps" in ht or "eps_list" in ht


def cmd_verify(args) -> int:
    t0 = time.monotonic()
    doc = load_config(args.config)
    seed = _seed(args, doc)
    results = _verify_checks(doc, seed, _jobs(args))

    out = _outdir(args)
    report = [{"check": n, "status": s, "detail": d} for n, s, d in results]
    outputs = [
        _write(os.path.join(out, "verify_report.json"), json.dumps(report, indent=2) + "\n")
    ]
    for name, status, detail in results:
        print(f"[{status}] {name}: {detail}")
    outputs.append(_write_manifest(args, doc, "verify", outputs, t0))

    failed = [n for n, s, _ in results if s == "FAIL"]
    if failed:
        raise VerificationError(f"checks failed: {', '.join(failed)}")
    return EXIT_OK


# -------- entry point --------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qnetlab",
        description="Queueing-network laboratory: regions, bounds, simulation, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, help_text in [
        ("region", cmd_region, "compute and print the capacity region"),
        ("bounds", cmd_bounds, "evaluate closed-form moment bounds"),
        ("simulate", cmd_simulate, "steady-state estimates with invariant checking"),
        ("sweep", cmd_sweep, "heavy-traffic load sweep with bound columns"),
        ("verify", cmd_verify, "run the invariant and statistical check suite"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=None, help="worker processes (default: cores)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument(
            "--format",
            choices=["json", "csv", "table"],
            default="table",
            help="stdout format",
        )
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
