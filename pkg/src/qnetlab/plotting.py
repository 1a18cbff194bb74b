"""Figure rendering for reports: capacity regions and sweep convergence.

Headless by construction (Agg backend); every function writes a PNG and
returns the path. The numbers plotted are exactly the ones in the
corresponding CSV/JSON artifacts, the figures add no new data.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import UnsupportedDimensionError
from .geometry import CapacityRegion, FadingModel, ScheduleSet


def render_region_figure(region: CapacityRegion, out_path: str, title: str | None = None) -> str:
    """Draw a 1-d or 2-d capacity region with its bounding hyperplanes and
    generator points. Three-queue regions are not projected; callers skip
    the figure instead."""
    if region.L > 2:
        raise UnsupportedDimensionError("region figures implemented for L <= 2")
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    if region.L == 1:
        b = region.hyperplanes[0].b
        ax.plot([0.0, b], [0.0, 0.0], linewidth=6, solid_capstyle="butt")
        ax.plot([b], [0.0], marker="|", markersize=18, color="black")
        ax.set_xlim(-0.05 * b, 1.3 * b)
        ax.set_yticks([])
        ax.set_xlabel("r_1")
    else:
        lim = 1.15 * max(
            h.b / c for h in region.hyperplanes for c in h.c if c > 1e-12
        )
        xs = np.linspace(0.0, lim, 400)
        ys = np.linspace(0.0, lim, 400)
        gx, gy = np.meshgrid(xs, ys)
        mask = np.ones_like(gx, dtype=bool)
        for h in region.hyperplanes:
            mask &= h.c[0] * gx + h.c[1] * gy <= h.b + 1e-12
        ax.imshow(
            mask,
            origin="lower",
            extent=(0.0, lim, 0.0, lim),
            cmap="Blues",
            alpha=0.35,
            aspect="equal",
            interpolation="nearest",
        )
        for h in region.hyperplanes:
            # segment of <c, r> = b inside the plot box
            pts = []
            if h.c[0] > 1e-12:
                x0 = h.b / h.c[0]
                if 0.0 <= x0 <= lim:
                    pts.append((x0, 0.0))
            if h.c[1] > 1e-12:
                y0 = h.b / h.c[1]
                if 0.0 <= y0 <= lim:
                    pts.append((0.0, y0))
            if h.c[1] > 1e-12:
                y_at_lim = (h.b - h.c[0] * lim) / h.c[1]
                if 0.0 <= y_at_lim <= lim:
                    pts.append((lim, y_at_lim))
            if h.c[0] > 1e-12:
                x_at_lim = (h.b - h.c[1] * lim) / h.c[0]
                if 0.0 <= x_at_lim <= lim:
                    pts.append((x_at_lim, lim))
            uniq = sorted(set((round(x, 12), round(y, 12)) for x, y in pts))
            if len(uniq) >= 2:
                (x1, y1), (x2, y2) = uniq[0], uniq[-1]
                ax.plot([x1, x2], [y1, y2], linewidth=1.2)
                ax.annotate(
                    f"b={h.b:.4g}",
                    xy=(0.5 * (x1 + x2), 0.5 * (y1 + y2)),
                    fontsize=8,
                    xytext=(3, 3),
                    textcoords="offset points",
                )
        gen = region.generators
        if isinstance(gen, ScheduleSet):
            pts = gen.as_array()
            ax.plot(pts[:, 0], pts[:, 1], "k.", markersize=8)
        elif isinstance(gen, FadingModel):
            for p, ss in zip(gen.probs, gen.schedule_sets):
                pts = ss.as_array() * 1.0
                ax.plot(pts[:, 0], pts[:, 1], ".", markersize=5, alpha=0.6)
        ax.set_xlim(0.0, lim)
        ax.set_ylim(0.0, lim)
        ax.set_xlabel("r_1")
        ax.set_ylabel("r_2")
    ax.set_title(title or "capacity region")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_sweep_figure(
    sweep_result,
    metric: str,
    out_path: str,
    scale_power: float = 0.0,
    target: float | None = None,
    title: str | None = None,
) -> str:
    """Scaled metric against the load gap (log x, heavy traffic right),
    with the theoretical limit and any scaled bound columns overlaid.
    ``scale_power`` must match the metric's, so CIs and bounds are scaled
    the same way as the stored scaled column."""
    rows = sweep_result.series(metric)
    if not rows:
        raise ValueError(f"sweep has no rows for metric {metric!r}")
    eps = np.array([r.eps for r in rows])
    p = scale_power
    scale = eps**p
    mean_s = np.array([r.scaled for r in rows])
    lo_s = np.array([r.ci_low for r in rows]) * scale
    hi_s = np.array([r.ci_high for r in rows]) * scale

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.errorbar(
        eps,
        mean_s,
        yerr=np.vstack([mean_s - lo_s, hi_s - mean_s]),
        fmt="o-",
        capsize=3,
        label=f"eps^{p:g} * mean({metric})",
    )
    lb = [r.lower_bound for r in rows]
    ub = [r.upper_bound for r in rows]
    if all(v is not None for v in lb):
        ax.plot(eps, np.array(lb) * scale, "v--", alpha=0.7, label="lower bound (scaled)")
    if all(v is not None for v in ub):
        ax.plot(eps, np.array(ub) * scale, "^--", alpha=0.7, label="upper bound (scaled)")
    if target is not None:
        ax.axhline(target, color="black", linewidth=1, linestyle=":", label="limit")
    ax.set_xscale("log")
    ax.invert_xaxis()  # heavy traffic to the right
    ax.set_xlabel("load gap eps")
    ax.set_ylabel("scaled value")
    ax.set_title(title or f"{metric} across the load sweep")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
