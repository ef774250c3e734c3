"""Trace export: tab-delimited per-stage records plus a rendered figure."""

import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .solver import StageTrace


def write_trace(trace, path):
    """One tab-delimited line per stage, with a header row."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(StageTrace.TRACE_FIELDS)
        for record in trace:
            writer.writerow(record.as_row())


def read_trace(path):
    """Parse a trace file back into StageTrace records."""
    with open(path, newline="") as f:
        reader = csv.reader(f, delimiter="\t")
        header = next(reader)
        if tuple(header) != StageTrace.TRACE_FIELDS:
            raise ValueError(f"{path}: unexpected trace header {header}")
        records = []
        for row in reader:
            stage, fid, smooth, pot, total, cg, bt = row
            records.append(
                StageTrace(
                    stage=int(stage),
                    fidelity=float(fid),
                    smoothness=float(smooth),
                    potential=float(pot),
                    total=float(total),
                    cg_iters=int(cg),
                    backtrack_halvings=int(bt),
                )
            )
    return records


def plot_trace(trace, path, title=None):
    """Render the per-stage energy terms to an image file."""
    stages = [r.stage for r in trace]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(stages, [r.fidelity for r in trace], "o-", label="fidelity")
    ax1.plot(stages, [r.smoothness for r in trace], "s-", label="smoothness")
    ax1.plot(stages, [r.potential for r in trace], "^-", label="potential")
    ax1.plot(stages, [r.total for r in trace], "k--", label="total")
    ax1.set_xlabel("stage")
    ax1.set_ylabel("energy")
    ax1.set_yscale("symlog")
    ax1.legend(fontsize=8)
    ax2.bar([s - 0.15 for s in stages], [r.cg_iters for r in trace],
            width=0.3, label="CG iterations")
    ax2.bar([s + 0.15 for s in stages], [r.backtrack_halvings for r in trace],
            width=0.3, label="halvings")
    ax2.set_xlabel("stage")
    ax2.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
