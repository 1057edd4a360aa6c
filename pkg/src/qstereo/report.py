"""Figure rendering for sweep reports.

The ablation driver emits a CSV of metrics per setting; alongside it we
render a small matplotlib figure so a sweep can be eyeballed without
further tooling.  Uses the Agg backend only; nothing here opens windows.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def write_sweep_csv(path, rows: list[dict]) -> None:
    """Rows of {which, setting, rmse, bpp, n_valid} to a CSV file."""
    fields = ["which", "setting", "rmse", "bpp", "n_valid"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in fields})


def render_sweep_figure(path, rows: list[dict], title: str) -> None:
    """RMSE and BPP over the sweep settings, rendered to an image file."""
    settings = [str(r["setting"]) for r in rows]
    rmse_vals = [float(r["rmse"]) for r in rows]
    bpp_vals = [float(r["bpp"]) for r in rows]
    xs = range(len(settings))

    fig, ax1 = plt.subplots(figsize=(6.0, 3.6))
    ax1.plot(xs, rmse_vals, "o-", color="tab:blue", label="RMSE")
    ax1.set_xticks(list(xs))
    ax1.set_xticklabels(settings, rotation=20)
    ax1.set_xlabel("setting")
    ax1.set_ylabel("RMSE", color="tab:blue")
    ax1.tick_params(axis="y", labelcolor="tab:blue")

    ax2 = ax1.twinx()
    ax2.plot(xs, bpp_vals, "s--", color="tab:red", label="BPP")
    ax2.set_ylabel("BPP [%]", color="tab:red")
    ax2.tick_params(axis="y", labelcolor="tab:red")

    ax1.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_disparity_figure(path, values, title: str) -> None:
    """Disparity map as a color-mapped image file."""
    fig, ax = plt.subplots(figsize=(5.2, 4.2))
    im = ax.imshow(values, cmap="turbo")
    ax.set_title(title)
    ax.set_axis_off()
    fig.colorbar(im, ax=ax, shrink=0.85, label="disparity [px]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
