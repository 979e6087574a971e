#!/usr/bin/env python3
"""Regenerate the study's figures from harness CSV output.

    report.py --figure <kind> --in <csv[,csv...]> --out <file>

Kinds: corrector_vs_strike, sample_paths, revision_times, error_vs_n,
lambda_vs_t.  The script performs no numerical computation beyond axis
transforms; plotted values are exactly the CSV columns.  Rendering is
deterministic (fixed size, seeded SVG ids, no timestamp metadata), so
re-rendering the same CSV reproduces the output byte for byte.  A
schema mismatch prints the column-name diff and exits nonzero.
"""

import argparse
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "lelandjump-report"
matplotlib.rcParams["figure.figsize"] = (8.0, 5.0)
matplotlib.rcParams["figure.dpi"] = 100
matplotlib.rcParams["savefig.dpi"] = 100

import matplotlib.pyplot as plt  # noqa: E402

SCHEMAS = {
    "corrector_vs_strike": ["x", "gamma_limit", "corrector"],
    "sample_paths": ["path", "t", "s", "y"],
    "revision_times": ["mu", "i", "t_i"],
    "error_vs_n": [
        "n", "paths", "mean_raw", "std_raw", "mean_corrected", "std_corrected",
        "stderr_corrected", "skew_corrected", "mean_gamma_n", "mean_corrector",
        "seed",
    ],
    "lambda_vs_t": ["j", "t_j", "lambda_j"],
}


class SchemaError(RuntimeError):
    pass


def read_csv(path, kind):
    """Load the CSV as column arrays after validating the header."""
    expected = SCHEMAS[kind]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != expected:
            missing = [c for c in expected if c not in header]
            extra = [c for c in header if c not in expected]
            raise SchemaError(
                f"{path}: header mismatch for figure {kind!r}\n"
                f"  expected: {expected}\n"
                f"  found:    {header}\n"
                f"  missing:  {missing}\n"
                f"  extra:    {extra}"
            )
        rows = [[float(v) for v in row] for row in reader if row]
    cols = list(zip(*rows)) if rows else [[] for _ in expected]
    return {name: list(col) for name, col in zip(expected, cols)}


def figure_series(kind, tables):
    """The (label, x, y[, yerr]) series a figure draws; no computation."""
    if kind == "corrector_vs_strike":
        t = tables[0]
        return [("corrector", t["x"], t["corrector"], None),
                ("gamma_limit", t["x"], t["gamma_limit"], None)]
    if kind == "sample_paths":
        t = tables[0]
        series = []
        ids = sorted(set(t["path"]))
        for pid in ids:
            idx = [i for i, p in enumerate(t["path"]) if p == pid]
            series.append((f"S path {int(pid)}", [t["t"][i] for i in idx],
                           [t["s"][i] for i in idx], None))
            series.append((f"y path {int(pid)}", [t["t"][i] for i in idx],
                           [t["y"][i] for i in idx], None))
        return series
    if kind == "revision_times":
        t = tables[0]
        series = []
        for mu in sorted(set(t["mu"])):
            idx = [i for i, m in enumerate(t["mu"]) if m == mu]
            series.append((f"mu={mu:g}", [t["t_i"][i] for i in idx],
                           [mu] * len(idx), None))
        return series
    if kind == "error_vs_n":
        out = []
        for k, t in enumerate(tables):
            out.append((f"series {k}", t["n"], t["mean_corrected"],
                        t["stderr_corrected"]))
        return out
    if kind == "lambda_vs_t":
        t = tables[0]
        return [("lambda_j", t["t_j"], t["lambda_j"], None)]
    raise SchemaError(f"unknown figure kind {kind!r}")


def render(kind, in_paths, out_path):
    tables = [read_csv(p, kind) for p in in_paths]
    series = figure_series(kind, tables)

    fig, ax = plt.subplots()
    for label, x, y, yerr in series:
        if kind == "sample_paths" and label.startswith("y "):
            continue  # volatility state drawn on the twin axis below
        if kind == "revision_times":
            ax.plot(x, y, marker="|", linestyle="none", markersize=14,
                    label=label)
        elif yerr is not None:
            ax.errorbar(x, y, yerr=yerr, marker="o", capsize=3, label=label)
        else:
            ax.plot(x, y, label=label)
    if kind == "sample_paths":
        ax2 = ax.twinx()
        for label, x, y, _ in series:
            if label.startswith("y "):
                ax2.plot(x, y, linestyle="--", alpha=0.6)
        ax2.set_ylabel("volatility state y")
    if kind == "error_vs_n":
        ax.set_xscale("log")
        ax.axhline(0.0, color="black", linewidth=0.8)

    labels = {
        "corrector_vs_strike": ("terminal price x", "value",
                                "Hedging-error corrector and limit trading volume"),
        "sample_paths": ("t", "price S", "Simulated asset and volatility paths"),
        "revision_times": ("t", "mu", "Revision dates for different mu"),
        "error_vs_n": ("revisions n", "mean corrected error",
                       "Corrected hedging error vs revision count"),
        "lambda_vs_t": ("t_j", "lambda_j", "Remaining enlarged variance sequence"),
    }
    xl, yl, title = labels[kind]
    ax.set_xlabel(xl)
    ax.set_ylabel(yl)
    ax.set_title(title)
    if kind not in ("sample_paths",):
        ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Date": None})
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--figure", required=True, choices=sorted(SCHEMAS))
    parser.add_argument("--in", dest="inputs", required=True,
                        help="input CSV path(s), comma separated")
    parser.add_argument("--out", required=True, help="output image path (.svg/.png)")
    args = parser.parse_args(argv)
    in_paths = [Path(p) for p in args.inputs.split(",")]
    for p in in_paths:
        if not p.exists():
            print(f"input not found: {p}", file=sys.stderr)
            return 2
    try:
        render(args.figure, in_paths, args.out)
    except SchemaError as err:
        print(str(err), file=sys.stderr)
        return 1
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
