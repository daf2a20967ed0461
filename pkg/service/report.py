"""
Tables and figures built from the evaluation CSVs: mean ± std aggregation, the
comparison digest, and the ablation, frequency and L2-distance plots.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

# column in the per-episode rows -> heading in the comparison table
TABLE_COLUMNS = {
    "reward": "Reward",
    "deviation": "Dev %",
    "recon_error": "Recons.",
    "wasserstein": "Wass.",
    "ssim": "SSIM",
    "semantics_changing": "Sem. change",
    "history_aligned": "Hist. aligned",
    "faithfulness": "Faithfulness",
    "generation_ms": "Gen. ms",
}
NO_DATA = "no data"
_IDENTIFIERS = ("seed", "episode")


def aggregate(rows: pd.DataFrame, keys: list[str]) -> pd.DataFrame:
    """Mean and std per group as `<metric>_mean` / `<metric>_std` column pairs."""
    metrics = [c for c in rows.select_dtypes(include="number").columns if c not in keys and c not in _IDENTIFIERS]
    grouped = rows.groupby(keys, sort=False)
    table = grouped[metrics].agg(["mean", "std"])
    table.columns = [f"{metric}_{stat}" for metric, stat in table.columns]
    std_columns = [c for c in table.columns if c.endswith("_std")]
    table[std_columns] = table[std_columns].fillna(0.0)
    table.insert(0, "episodes", grouped.size())
    return table.reset_index()


def comparison_table(summary: pd.DataFrame) -> pd.DataFrame:
    table = summary[["attack", "defense"]].copy()
    for column, heading in TABLE_COLUMNS.items():
        if f"{column}_mean" not in summary:
            continue
        means, stds = summary[f"{column}_mean"], summary[f"{column}_std"]
        table[heading] = [("-" if np.isnan(m) else f"{m:.3f} ± {s:.3f}") for m, s in zip(means, stds)]
    return table


def digest(summary: pd.DataFrame | None, detection: pd.DataFrame | None = None,
           frequency: pd.DataFrame | None = None) -> str:
    if summary is None or summary.empty:
        return NO_DATA + "\n"
    parts = ["Attack comparison (mean ± std over episodes)", comparison_table(summary).to_string(index=False)]
    if detection is not None and not detection.empty:
        parts += ["", "Detector verdicts",
                  detection[["attack", "episodes", "mad_verdict", "cusum_verdict"]].to_string(index=False)]
    if frequency is not None and not frequency.empty:
        cols = [c for c in ("attack", "xi", "reward_mean", "reward_std", "attacked_fraction_mean") if c in frequency]
        parts += ["", "Attack frequency", frequency[cols].to_string(index=False, float_format="%.3f")]
    return "\n".join(parts) + "\n"


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_gamma2_sweep(ablation: pd.DataFrame, path: Path) -> Path:
    sweep = ablation[ablation["study"] == "gamma2"].sort_values("gamma2")
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(sweep["gamma2"], sweep["reward_mean"], yerr=sweep["reward_std"], marker="o", capsize=3)
    ax.set_xlabel("policy guidance strength")
    ax.set_ylabel("episode reward")
    ax2 = ax.twinx()
    ax2.plot(sweep["gamma2"], sweep["deviation_mean"], color="tab:red", marker="s", linestyle="--")
    ax2.set_ylabel("action deviation (%)", color="tab:red")
    ax.set_title("Reward vs policy guidance")
    return _save(fig, path)


def plot_realism_curves(curves: dict[str, np.ndarray], path: Path) -> Path:
    """Mean reconstruction error per step for each labelled run."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, curve in curves.items():
        ax.plot(np.arange(len(curve)), curve, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("reconstruction error")
    ax.set_title("Realism guidance on/off")
    ax.legend()
    return _save(fig, path)


def plot_l2_histogram(samples: dict[str, list[float]], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    values = [v for vs in samples.values() for v in vs]
    bins = np.linspace(0.0, max(values) if values else 1.0, 30)
    for label, vs in samples.items():
        ax.hist(vs, bins=bins, alpha=0.6, label=label)
    ax.set_xlabel("L2 distance to the true frame")
    ax.set_ylabel("attacked steps")
    ax.legend()
    return _save(fig, path)


def plot_frequency(frequency: pd.DataFrame, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for variant, rows in frequency.groupby("variant", sort=True):
        rows = rows.sort_values("xi")
        ax.errorbar(rows["xi"], rows["reward_mean"], yerr=rows["reward_std"], marker="o", capsize=3, label=variant)
    ax.set_xlabel("attack frequency")
    ax.set_ylabel("episode reward")
    ax.legend()
    return _save(fig, path)
