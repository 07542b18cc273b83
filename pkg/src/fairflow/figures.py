"""Matplotlib figure rendering for solve, compare, and sweep outputs.

matplotlib is imported lazily with the Agg backend so the library works in
headless environments and importing fairflow never pulls in a GUI toolkit.
Each function writes one PNG file and returns the path.
"""

from __future__ import annotations

import numpy as np


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_allocations(path, allocations, title="Community allocations"):
    plt = _plt()
    x = np.asarray(allocations, dtype=float)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.18 * len(x) + 2.0), 3.5))
    ax.bar(np.arange(1, len(x) + 1), x, color="#33689c")
    ax.set_xlabel("community")
    ax.set_ylabel("allocation")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_gap_trace(path, gap_trace, title="Optimality gap per iteration"):
    plt = _plt()
    g = np.maximum(np.asarray(gap_trace, dtype=float), 1e-16)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.semilogy(np.arange(len(g)), g, marker=".", color="#33689c")
    ax.set_xlabel("iteration")
    ax.set_ylabel("gap")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_network(path, network, link_flow=None, title="Network"):
    """Draws the node map with links; line width scales with flow if given.

    Requires network.coordinates; returns None without writing a file when
    the network carries no planar positions.
    """
    if network.coordinates is None:
        return None
    plt = _plt()
    xy = np.asarray(network.coordinates, dtype=float)
    flows = None
    if link_flow is not None:
        flows = np.asarray(link_flow, dtype=float)
        top = max(float(flows.max()), 1e-12)
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    for k, (a, b) in enumerate(np.asarray(network.links)):
        width, color = 0.8, "#b0b0b0"
        if flows is not None:
            width = 0.4 + 3.6 * flows[k] / top
            color = "#33689c" if flows[k] > 1e-9 else "#c9c9c9"
        ax.plot([xy[a, 0], xy[b, 0]], [xy[a, 1], xy[b, 1]],
                color=color, linewidth=width, zorder=1)
    ax.scatter(xy[:, 0], xy[:, 1], s=60, color="#d1495b", zorder=2)
    for i in range(network.n_nodes):
        ax.annotate(str(i), (xy[i, 0], xy[i, 1]), fontsize=8,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_compare(path, fair_alloc, maxsum_alloc,
                 title="Fair vs throughput-optimal allocations"):
    plt = _plt()
    fair = np.asarray(fair_alloc, dtype=float)
    base = np.asarray(maxsum_alloc, dtype=float)
    idx = np.arange(1, len(fair) + 1)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.24 * len(fair) + 2.0), 3.5))
    width = 0.4
    ax.bar(idx - width / 2, fair, width, label="fair", color="#33689c")
    ax.bar(idx + width / 2, base, width, label="maxsum", color="#d1495b")
    ax.set_xlabel("community")
    ax.set_ylabel("allocation")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_sweep(path, rows, title="Allocations across risk levels"):
    """rows: iterable of (delta, community_id, allocation, objective_tag)."""
    plt = _plt()
    rows = list(rows)
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for tag, color in (("fair", "#33689c"), ("maxsum", "#d1495b")):
        pts = [(d, x) for d, _, x, t in rows if t == tag]
        if pts:
            arr = np.asarray(pts, dtype=float)
            ax.scatter(arr[:, 0], arr[:, 1], s=12, alpha=0.6,
                       color=color, label=tag)
    ax.set_xlabel("risk level")
    ax.set_ylabel("allocation")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
