"""Figure rendering for run reports and sweep summaries.

Everything draws through the Agg backend and lands in a file; nothing
here opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def loss_figure(report_dict: dict, path) -> str:
    """Two-panel loss trace (pretraining left, fine-tuning right)."""
    pre = report_dict["pretrain_trace"]["epochs"]
    fine = report_dict["finetune_trace"]["epochs"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for key in ("loss", "contrastive", "reconstruction"):
        ax1.plot([e["epoch"] for e in pre], [e[key] for e in pre], label=key)
    ax1.set_title("pretraining")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    for key in ("loss", "contrastive", "reconstruction", "dual_center"):
        ax2.plot([e["epoch"] for e in fine], [e[key] for e in fine], label=key)
    ax2.set_title("fine-tuning")
    ax2.set_xlabel("epoch")
    ax2.legend(fontsize=8)
    fig.suptitle(f"seed {report_dict.get('seed')}", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def sweep_figure(rows: list, path, metric: str = "acc") -> str:
    """Heatmap of a metric over the (tau, beta) grid.

    Failed or unlabeled cells render as blanks. A degenerate grid (one
    beta value) still renders as a single-row heatmap.
    """
    taus = sorted({r["tau"] for r in rows})
    betas = sorted({r["beta"] for r in rows})
    grid = np.full((len(betas), len(taus)), np.nan)
    for r in rows:
        if r.get(metric) is None:
            continue
        grid[betas.index(r["beta"]), taus.index(r["tau"])] = r[metric]
    fig, ax = plt.subplots(figsize=(1.2 + 1.1 * len(taus), 1.2 + 0.9 * len(betas)))
    im = ax.imshow(grid, cmap="viridis", aspect="auto",
                   vmin=np.nanmin(grid) if np.isfinite(grid).any() else 0,
                   vmax=np.nanmax(grid) if np.isfinite(grid).any() else 1)
    ax.set_xticks(range(len(taus)), [f"{t:g}" for t in taus])
    ax.set_yticks(range(len(betas)), [f"{b:g}" for b in betas])
    ax.set_xlabel("tau")
    ax.set_ylabel("beta")
    ax.set_title(metric)
    for i in range(len(betas)):
        for j in range(len(taus)):
            if np.isfinite(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.3f}", ha="center", va="center",
                        color="white", fontsize=8)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
