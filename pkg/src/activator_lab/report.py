"""Render accuracy/loss curve figures from a metrics CSV."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_metrics_csv(path):
    """List of dict rows with numeric values."""
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        rows = []
        for row in reader:
            rows.append({k: float(v) for k, v in row.items()})
    return rows


def render_curves(metrics_path, out_dir, prefix="", title=None):
    """Write <prefix>accuracy.png and <prefix>loss.png next to the CSV data.

    Returns the two file paths.
    """
    rows = read_metrics_csv(metrics_path)
    if not rows:
        raise ValueError(f"{metrics_path}: no metric rows")
    epochs = [r["epoch"] for r in rows]
    outputs = []
    for kind, cols in (("accuracy", ("train_acc", "test_acc")),
                       ("loss", ("train_loss", "test_loss"))):
        fig, ax = plt.subplots(figsize=(6, 4))
        for col in cols:
            ax.plot(epochs, [r[col] for r in rows],
                    label=col.replace("_", " "))
        ax.set_xlabel("epoch")
        ax.set_ylabel("accuracy (%)" if kind == "accuracy" else "loss")
        ax.legend()
        ax.grid(True, alpha=0.3)
        if title:
            ax.set_title(title)
        out = f"{out_dir}/{prefix}{kind}.png"
        fig.tight_layout()
        fig.savefig(out, dpi=120)
        plt.close(fig)
        outputs.append(out)
    return outputs
