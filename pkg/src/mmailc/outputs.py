"""CSV, SVG and manifest writers. All outputs are byte-deterministic for a fixed report."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from mmailc import __version__

SUMMARY_HEADER = ("k", "max_track_err", "max_ident_err", "j_star_mode")
TRACE_HEADER = ("k", "t", "x", "x_m", "u", "e", "e_hat_sel", "j_star")
LOG_FLOOR = 1e-17


def fmt(value: float) -> str:
    """17 significant digits: lossless for float64."""
    return format(float(value), ".17g")


def _write_rows(path: Path, header, rows) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(buf.getvalue())
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def summary_rows(report):
    for r in report.records:
        # models are labeled 1..M in files
        yield (r.k, fmt(r.max_track_err), fmt(r.max_ident_err), r.j_star_mode + 1)


def trace_rows(report):
    for r in report.records:
        sel = r.e_hat_sel
        for t in range(r.u.shape[0]):
            yield (r.k, t, fmt(r.x[t, -1]), fmt(r.x_m[t]), fmt(r.u[t]), fmt(r.e[t]), fmt(sel[t]),
                   int(r.j_star[t]) + 1)


def emit_csv(report, out_dir, trace: bool = False) -> list[Path]:
    """Write ``summary.csv`` (and ``trace.csv`` when asked) into ``out_dir``.

    In trace.csv, ``x``, ``x_m`` and ``u`` are at sample t while ``e`` and
    ``e_hat_sel`` are the errors at t+1 produced by that input.
    """
    out_dir = Path(out_dir)
    paths = [_write_rows(out_dir / "summary.csv", SUMMARY_HEADER, summary_rows(report))]
    if trace:
        paths.append(_write_rows(out_dir / "trace.csv", TRACE_HEADER, trace_rows(report)))
    return paths


def emit_table(batches: dict, path) -> Path:
    """Per-strategy RMS metrics (mean/min/max over seeds)."""
    rows = []
    for label, batch in batches.items():
        s = batch.summary()
        rows.append((label, len(batch.seeds),
                     fmt(s["rms_ident"]["mean"]), fmt(s["rms_track"]["mean"]),
                     fmt(s["rms_ident"]["min"]), fmt(s["rms_ident"]["max"]),
                     fmt(s["rms_track"]["min"]), fmt(s["rms_track"]["max"])))
    header = ("strategy", "n_seeds", "rms_ident_mean", "rms_track_mean",
              "rms_ident_min", "rms_ident_max", "rms_track_min", "rms_track_max")
    return _write_rows(Path(path), header, rows)


def emit_batch(batch, path) -> Path:
    header = ("seed", "rms_track", "rms_ident", "final_track", "final_ident")
    rows = [(row["seed"], fmt(row["rms_track"]), fmt(row["rms_ident"]), fmt(row["final_track"]),
             fmt(row["final_ident"])) for row in batch.rows]
    return _write_rows(Path(path), header, rows)


def emit_plot(reports, path, labels=None, title: str | None = None) -> Path:
    """Log-scale peak errors against iteration; one line per error type per report."""
    if isinstance(reports, dict):
        labels = list(reports)
        reports = list(reports.values())
    reports = list(reports)
    if not reports:
        raise ValueError("emit_plot needs at least one report")
    if labels is None:
        labels = [r.config.mode for r in reports]

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "mmailc", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharex=True)
        for ax, attr, name in ((axes[0], "ident_norms", "identification"), (axes[1], "track_norms", "tracking")):
            for label, rep in zip(labels, reports):
                norms = np.maximum(getattr(rep, attr), LOG_FLOOR)
                ax.semilogy(np.arange(1, norms.shape[0] + 1), norms, label=label)
            ax.set_xlabel("iteration k")
            ax.set_ylabel(f"max |{name} error|")
            ax.set_title(f"peak {name} error")
            ax.grid(True, which="major", alpha=0.3)
            if len(reports) > 1:
                ax.legend()
        if title:
            fig.suptitle(title)
        fig.tight_layout()
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        finally:
            plt.close(fig)
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, config_echo: dict, seeds, files) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "version": __version__,
        "config": config_echo,
        "seeds": list(seeds),
        "files": {Path(f).name: sha256(f) for f in files},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
