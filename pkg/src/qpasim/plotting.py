"""Three-panel noise maps: key rate before/after QPA and the QPA gain."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import Normalize, TwoSlopeNorm  # noqa: E402

from .metrics import Region  # noqa: E402
from .sweep import SweepResult  # noqa: E402


@dataclass
class MapRender:
    """Paths written by :func:`render_maps` plus what was drawn."""

    paths: dict[str, Path]
    rate_scale: tuple[float, float]
    gain_scale: tuple[float, float]
    threshold_crossings: dict[str, float] = field(default_factory=dict)
    region_centroids: dict[str, tuple[float, float]] = field(default_factory=dict)


def _extent(result: SweepResult):
    p, q = result.p_values, result.q_values
    return (float(p[0]), float(p[-1]), float(q[0]), float(q[-1]))


def _threshold_lines(ax, result: SweepResult) -> dict[str, float]:
    """Draw the zero contours of the unclamped pre-QPA rates; return axis crossings."""
    P, Q = np.meshgrid(result.p_values, result.q_values, indexing="ij")
    crossings = {}
    for name, fieldname in (("pol", "raw_pol"), ("et", "raw_et")):
        f = result.field(fieldname)
        if f.min() >= 0 or f.max() <= 0 or min(f.shape) < 2:
            continue
        cs = ax.contour(P, Q, f, levels=[0.0], colors="black", linewidths=2.5)
        segs = [s for s in cs.allsegs[0] if len(s)]
        if not segs:
            continue
        pts = np.concatenate(segs)
        if name == "pol":
            # vertical line: p where it meets the lowest q row
            crossings[name] = float(pts[np.argmin(pts[:, 1]), 0])
        else:
            crossings[name] = float(pts[np.argmin(pts[:, 0]), 1])
    return crossings


def _centroids(result: SweepResult) -> dict[str, tuple[float, float]]:
    labels = result.field("region")
    P, Q = np.meshgrid(result.p_values, result.q_values, indexing="ij")
    out = {}
    for reg in (Region.I, Region.II, Region.III, Region.IV):
        sel = labels == reg.value
        if sel.any():
            out[reg.value] = (float(P[sel].mean()), float(Q[sel].mean()))
    return out


def _panel(ax, result, data, norm, cmap, title):
    im = ax.imshow(
        data.T, origin="lower", extent=_extent(result), aspect="auto",
        interpolation="bilinear", cmap=cmap, norm=norm,
    )
    ax.set_xlabel("QBER z, polarisation")
    ax.set_ylabel("QBER z, energy-time")
    ax.set_title(title)
    return im


def render_maps(result: SweepResult, out_dir: str | os.PathLike, fmt: str = "png") -> MapRender:
    """Write ``k_noisy``, ``k_qpa`` and ``gain`` heatmaps plus a combined figure.

    The two rate maps share one color scale; the gain map uses a diverging
    scale centred on zero with the zero contour drawn.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    k_noisy = result.field("k_noisy")
    k_qpa = result.field("k_qpa")
    g = result.field("gain")

    rate_scale = (0.0, float(max(k_noisy.max(), k_qpa.max())))
    rate_norm = Normalize(*rate_scale)
    gmin, gmax = float(g.min()), float(g.max())
    gain_norm = TwoSlopeNorm(vcenter=0.0, vmin=min(gmin, -1e-12), vmax=max(gmax, 1e-12))
    centroids = _centroids(result)

    panels = (
        ("k_noisy", k_noisy, rate_norm, "viridis", "key rate before QPA"),
        ("k_qpa", k_qpa, rate_norm, "viridis", "key rate after QPA"),
        ("gain", g, gain_norm, "RdBu_r", "QPA gain"),
    )

    paths: dict[str, Path] = {}
    crossings: dict[str, float] = {}

    def draw(ax, name, data, norm, cmap, title):
        im = _panel(ax, result, data, norm, cmap, title)
        found = _threshold_lines(ax, result)
        crossings.update(found)
        if name == "gain":
            P, Q = np.meshgrid(result.p_values, result.q_values, indexing="ij")
            if gmin < 0 < gmax and min(g.shape) >= 2:
                ax.contour(P, Q, g, levels=[0.0], colors="grey", linewidths=1, linestyles="--")
            for label, (cp, cq) in centroids.items():
                ax.text(cp, cq, label, ha="center", va="center", fontsize=12, weight="bold")
        return im

    for name, data, norm, cmap, title in panels:
        fig, ax = plt.subplots(figsize=(5, 4.2))
        im = draw(ax, name, data, norm, cmap, title)
        fig.colorbar(im, ax=ax, label="bits per pair")
        fig.tight_layout()
        paths[name] = out_dir / f"{name}.{fmt}"
        fig.savefig(paths[name], dpi=120)
        plt.close(fig)

    fig, axes = plt.subplots(1, 3, figsize=(15, 4.2))
    ims = [draw(ax, *panel) for ax, panel in zip(axes, panels)]
    fig.colorbar(ims[1], ax=axes[:2].tolist(), label="bits per pair")
    fig.colorbar(ims[2], ax=axes[2], label="gain (bits per pair)")
    paths["combined"] = out_dir / f"noise_maps.{fmt}"
    fig.savefig(paths["combined"], dpi=120)
    plt.close(fig)

    return MapRender(
        paths=paths,
        rate_scale=rate_scale,
        gain_scale=(float(gain_norm.vmin), float(gain_norm.vmax)),
        threshold_crossings=crossings,
        region_centroids=centroids,
    )
