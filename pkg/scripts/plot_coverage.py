#!/usr/bin/env python3
"""Render a planned trajectory over its reference density.

Reads a trajectory CSV (as written by `flowcover plan` or
`flowcover baseline-tsp`) plus the config that produced it, and writes a
figure with the reference density shaded, mixture means marked, and the
workspace path drawn over it. 3D workspaces are shown as a top-down view
colored by the third coordinate.
"""

import argparse
from pathlib import Path

import numpy as np


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("trajectory", help="trajectory CSV to render")
    ap.add_argument("--config", help="config the run was produced with")
    ap.add_argument("--out", default=None, help="figure path (default: alongside the CSV)")
    args = ap.parse_args()

    try:
        import matplotlib
    except ImportError:
        print("matplotlib is required; install the 'plot' extra")
        return 2
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from flowcover.config import RunConfig, build_reference, load_config
    from flowcover.dynamics import get_model
    from flowcover.io import read_trajectory
    from flowcover.reference import GaussianMixture

    cfg = load_config(args.config) if args.config else RunConfig()
    model = get_model(cfg.model)
    trajectory = read_trajectory(args.trajectory, model)
    q = build_reference(cfg, model)
    pts = model.project_states(trajectory.S)

    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    if isinstance(q, GaussianMixture):
        lo = pts[:, :2].min(axis=0) - 0.2
        hi = pts[:, :2].max(axis=0) + 0.2
        lo = np.minimum(lo, q.means[:, :2].min(axis=0) - 0.5)
        hi = np.maximum(hi, q.means[:, :2].max(axis=0) + 0.5)
        gx, gy = np.meshgrid(np.linspace(lo[0], hi[0], 200), np.linspace(lo[1], hi[1], 200))
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        if q.dim > 2:
            # top-down view: evaluate the density at the mean height
            z = np.full((len(grid), q.dim - 2), q.means[:, 2:].mean(axis=0))
            grid = np.hstack([grid, z])
        dens = np.exp(q.log_density(grid)).reshape(gx.shape)
        ax.contourf(gx, gy, dens, levels=12, cmap="Greys", alpha=0.7)
        ax.plot(q.means[:, 0], q.means[:, 1], "r*", markersize=12, label="modes")
    else:
        ax.plot(q.points[:, 0], q.points[:, 1], ".", color="0.6", markersize=2, label="targets")

    if pts.shape[1] >= 3:
        sc = ax.scatter(pts[:, 0], pts[:, 1], c=pts[:, 2], s=4, cmap="viridis")
        fig.colorbar(sc, ax=ax, label=model.state_names[2])
    else:
        ax.plot(pts[:, 0], pts[:, 1], "-", linewidth=0.8, color="tab:blue")
    ax.plot(pts[0, 0], pts[0, 1], "go", label="start")
    ax.set_aspect("equal")
    ax.set_xlabel(model.state_names[0])
    ax.set_ylabel(model.state_names[1])
    ax.legend(loc="upper right")
    fig.tight_layout()

    out = Path(args.out) if args.out else Path(args.trajectory).with_suffix(".svg")
    fig.savefig(out)
    print(f"figure -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
