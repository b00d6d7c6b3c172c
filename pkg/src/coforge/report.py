"""Render a simulation report to delimited files and figures on disk."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .simulate import SimulationReport


def write_report(report: SimulationReport, out_dir: str) -> list[str]:
    """Write TSV tables and PNG figures; returns the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = [
        _write_summary(report, os.path.join(out_dir, "summary.tsv")),
        _write_trials(report, os.path.join(out_dir, "trials.tsv")),
        _write_utilities(report, os.path.join(out_dir, "utilities.tsv")),
        _plot_convergence(report, os.path.join(out_dir, "convergence.png")),
    ]
    if report.fitted is not None:
        written.append(_plot_recovery(report, os.path.join(out_dir, "recovery.png")))
    return written


def _write_summary(report: SimulationReport, path: str) -> str:
    doc = report.to_dict()
    doc.pop("true_utilities")
    doc.pop("fitted_utilities")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("key\tvalue\n")
        for key, value in doc.items():
            handle.write(f"{key}\t{value}\n")
    return path


def _write_trials(report: SimulationReport, path: str) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("trial\tbracket_seed\targmax_in_final\tmatches\trunning_frequency\n")
        for row in report.rows:
            handle.write(
                f"{row.trial}\t{row.bracket_seed}\t{int(row.argmax_in_final)}"
                f"\t{row.matches}\t{row.running_frequency:.6f}\n"
            )
    return path


def _write_utilities(report: SimulationReport, path: str) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("artifact_id\ttrue_utility\tfitted_score\n")
        for cid in sorted(report.true_utilities, key=int):
            fitted = report.fitted.scores[cid] if report.fitted else float("nan")
            handle.write(f"{cid}\t{report.true_utilities[cid]:.6f}\t{fitted:.6f}\n")
    return path


def _plot_convergence(report: SimulationReport, path: str) -> str:
    figure, axes = plt.subplots(figsize=(7, 4))
    trials = [row.trial + 1 for row in report.rows]
    axes.plot(trials, [row.running_frequency for row in report.rows], linewidth=1.2)
    axes.axhline(
        report.argmax_final_frequency,
        linestyle="--",
        linewidth=0.9,
        label=f"final frequency {report.argmax_final_frequency:.4f}",
    )
    axes.set_xlabel("trial")
    axes.set_ylabel("argmax-in-final running frequency")
    axes.set_title(
        f"n={report.n_candidates}, p={report.noise_p}, {report.trials} trials"
    )
    axes.set_ylim(0.0, 1.05)
    axes.legend(loc="lower right")
    figure.tight_layout()
    figure.savefig(path, dpi=120)
    plt.close(figure)
    return path


def _plot_recovery(report: SimulationReport, path: str) -> str:
    ids = sorted(report.true_utilities, key=int)
    true = [report.true_utilities[cid] for cid in ids]
    fitted = [report.fitted.scores[cid] for cid in ids]
    figure, axes = plt.subplots(figsize=(5, 5))
    axes.scatter(true, fitted, s=28)
    for cid, x, y in zip(ids, true, fitted):
        axes.annotate(cid, (x, y), textcoords="offset points", xytext=(5, 3), fontsize=8)
    axes.set_xlabel("planted utility")
    axes.set_ylabel("fitted score")
    tau = f"{report.kendall_tau:.4f}" if report.kendall_tau is not None else "n/a"
    axes.set_title(f"ordering recovery, kendall tau {tau}")
    figure.tight_layout()
    figure.savefig(path, dpi=120)
    plt.close(figure)
    return path
