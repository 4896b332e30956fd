"""PNG figures for evaluation reports, rendered next to the CSV tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 8,
    "axes.linewidth": 0.5,
    "axes.labelsize": 8,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "legend.fontsize": 7,
    "savefig.dpi": 150,
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def confusion_figure(cm, accuracy: float, path: Path, title: str = "") -> Path:
    cm = np.asarray(cm)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 3.0))
        ax.imshow(cm, cmap="Blues")
        for (r, c), v in np.ndenumerate(cm):
            if v:
                ax.text(c, r, str(v), ha="center", va="center", fontsize=6)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        ax.set_title(f"{title} accuracy {100 * accuracy:.1f}%")
        return _save(fig, path)


def validity_per_sample_figure(v_correct, v_incorrect, tau: float, path: Path) -> Path:
    """Validity of each correct (top) and incorrect (bottom) sample with the threshold line."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(3.4, 3.6), sharey=True)
        for ax, v, label in ((axes[0], v_correct, "correct"), (axes[1], v_incorrect, "incorrect")):
            v = np.asarray(v, dtype=float)
            ax.plot(np.arange(len(v)), np.nan_to_num(v, nan=0.0), ".", ms=2)
            ax.axhline(tau, color="k", lw=0.5, ls="--")
            ax.set_ylim(-0.05, 1.05)
            ax.set_ylabel("validity")
            ax.set_title(f"{label} ({len(v)})")
        axes[1].set_xlabel("sample")
        fig.tight_layout()
        return _save(fig, path)


def validity_vs_error_figure(truth, err, validity, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(6.0, 2.6))
        a0.plot(truth, err, ".", ms=2)
        a0.set_xlabel("target")
        a0.set_ylabel("absolute error")
        a1.plot(err, np.nan_to_num(validity, nan=0.0), ".", ms=2)
        a1.set_xlabel("absolute error")
        a1.set_ylabel("validity")
        a1.set_ylim(-0.05, 1.05)
        fig.tight_layout()
        return _save(fig, path)


def sweep_figure(sweep, path: Path) -> Path:
    tau = [s["tau"] for s in sweep]
    nan = float("nan")
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.4, 2.4))
        ax.plot(tau, [nan if s["fir"] is None else s["fir"] for s in sweep], label="FIR")
        ax.plot(tau, [nan if s["fvr"] is None else s["fvr"] for s in sweep], label="FVR")
        ax.set_xlabel("validity threshold")
        ax.set_ylabel("rate")
        ax.legend()
        return _save(fig, path)


def render_output(out: Path, summary, truth, err, validity, correct) -> list[Path]:
    name = summary.name
    paths = [
        confusion_figure(summary.confusion, summary.accuracy, out / f"{name}_confusion.png", name),
        validity_per_sample_figure(validity[correct], validity[~correct], summary.tau_validity,
                                   out / f"{name}_validity.png"),
        sweep_figure(summary.sweep, out / f"{name}_sweep.png"),
    ]
    if summary.kind != "classification":
        paths.append(validity_vs_error_figure(truth, err, validity, out / f"{name}_validity_vs_error.png"))
    return paths
