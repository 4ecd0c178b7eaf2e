"""Delimited-file emitters, their readers, and figure rendering.

Every writer here produces LF line endings, `.` decimals, and a fixed
column order, so reruns with the same inputs are byte-identical.  Floats
are written with repr (shortest round-trip form): values survive a
write/read cycle unchanged.

Formats:
  evaluation CSV   `model,weights,all,<group names...>`
  stability TSV    `feature_id	token	count	proportion`
  union            one feature id per line
  denoise CSV      `gamma,threshold,mse` (+ JSON summary)
  removal CSV      `penalty,removal_type,all_pct,<name>_pct...,coef_removed`
  venn JSON        region map keyed by sorted "+"-joined set labels
  labels CSV       `row,id,rating,group`
"""

from __future__ import annotations

import json

import numpy as np

from .denoise import DenoiseSweep
from .dsl import EvalResult
from .errors import DataError
from .subgroup_analysis import RemovalReport, SubgroupSets


def _fmt(x) -> str:
    return repr(float(x))


def write_evaluation_csv(path, results, group_names) -> None:
    """One row per fitted model, MSE over all rows then per group."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("model,weights,all," + ",".join(group_names) + "\n")
        for r in results:
            cells = [r.model, r.weights, _fmt(r.all_mse)]
            cells += [_fmt(r.group_mse[name]) for name in group_names]
            fh.write(",".join(cells) + "\n")


def read_evaluation_csv(path):
    """Reverse of write_evaluation_csv: (results, group_names)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[:3] != ["model", "weights", "all"]:
            raise DataError(f"{path}: unexpected evaluation header")
        names = header[3:]
        results = []
        for line in fh:
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(header):
                raise DataError(f"{path}: ragged row")
            results.append(EvalResult(
                model=cells[0], weights=cells[1], all_mse=float(cells[2]),
                group_mse={n: float(v) for n, v in zip(names, cells[3:])}))
    return results, names


def write_stability_tsv(path, rows, tokens=None) -> None:
    """rows: (feature_id, count, proportion); token column blank when
    no vocabulary is supplied."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("feature_id\ttoken\tcount\tproportion\n")
        for feature, count, prop in rows:
            token = tokens[feature] if tokens is not None else ""
            fh.write(f"{feature}\t{token}\t{count}\t{_fmt(prop)}\n")


def read_stability_tsv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != "feature_id\ttoken\tcount\tproportion":
            raise DataError(f"{path}: unexpected stability header")
        for line in fh:
            f, token, c, p = line.rstrip("\n").split("\t")
            rows.append((int(f), token, int(c), float(p)))
    return rows


def write_union(path, features) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for j in features:
            fh.write(f"{int(j)}\n")


def read_union(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return np.asarray([int(line) for line in fh if line.strip()],
                          dtype=np.int64)


def write_denoise_csv(path, sweep: DenoiseSweep) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma,threshold,mse\n")
        for g, t, m in zip(sweep.gammas, sweep.thresholds, sweep.mses):
            fh.write(f"{_fmt(g)},{_fmt(t)},{_fmt(m)}\n")


def read_denoise_csv(path):
    """(gammas, thresholds, mses) arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != "gamma,threshold,mse":
            raise DataError(f"{path}: unexpected denoise header")
        cols = [line.rstrip("\n").split(",") for line in fh]
    data = np.asarray(cols, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 3:
        raise DataError(f"{path}: expected three columns")
    return data[:, 0], data[:, 1], data[:, 2]


def write_denoise_summary(path, sweep: DenoiseSweep) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(sweep.summary(), sort_keys=True, indent=2))
        fh.write("\n")


def write_removal_csv(path, report: RemovalReport) -> None:
    """Percent MSE change per removal row; `all` column first."""
    names = report.group_names
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("penalty,removal_type,all_pct,"
                 + ",".join(f"{n}_pct" for n in names)
                 + ",coef_removed\n")
        for row in report.rows:
            cells = [row.penalty, row.removal_type, _fmt(row.pct["all"])]
            cells += [_fmt(row.pct[n]) for n in names]
            cells.append(str(row.coef_removed))
            fh.write(",".join(cells) + "\n")


def venn_key(labels) -> str:
    return "+".join(sorted(labels))


def write_venn_json(path, sets: SubgroupSets) -> None:
    """Region counts keyed by sorted "+"-joined member labels."""
    regions = {venn_key(k): v for k, v in sets.venn.items()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(regions, sort_keys=True, indent=2))
        fh.write("\n")


def write_labels_csv(path, reviews, groups, group_names) -> None:
    """Row order matches the design; group column holds the genre name."""
    groups = np.asarray(groups)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("row,id,rating,group\n")
        for i, r in enumerate(reviews):
            fh.write(f"{i},{r.id},{r.rating},{group_names[groups[i] - 1]}\n")


def read_labels_csv(path, group_names):
    """(ids, ratings, group ids) with groups resolved against the given
    name order."""
    index = {name: g for g, name in enumerate(group_names, start=1)}
    ids, ratings, groups = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        if fh.readline().rstrip("\n") != "row,id,rating,group":
            raise DataError(f"{path}: unexpected labels header")
        for i, line in enumerate(fh):
            row, rid, rating, group = line.rstrip("\n").split(",")
            if int(row) != i:
                raise DataError(f"{path}: row column out of order at {i}")
            if group not in index:
                raise DataError(f"{path}: unknown group {group!r}")
            ids.append(rid)
            ratings.append(float(rating))
            groups.append(index[group])
    return (ids, np.asarray(ratings),
            np.asarray(groups, dtype=np.int64))


def _new_figure(width=6.4, height=4.2):
    from matplotlib.figure import Figure
    return Figure(figsize=(width, height), dpi=120)


def render_denoise_figure(path, gammas, mses, sigma=None) -> None:
    """Test MSE against the sweep parameter, minimum marked."""
    fig = _new_figure()
    ax = fig.add_subplot()
    ax.plot(gammas, mses, color="#27559c", lw=1.6)
    best = int(np.argmin(mses))
    ax.axvline(gammas[best], color="#c23b22", lw=1.0, ls="--")
    ax.annotate(f"min at {gammas[best]:.3f}",
                xy=(gammas[best], mses[best]),
                xytext=(5, 10), textcoords="offset points", fontsize=8)
    ax.set_xlabel("threshold scale")
    ax.set_ylabel("test MSE")
    title = "Post-fit de-noising sweep"
    if sigma is not None:
        title += f" (sigma={sigma:.4g})"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)


def render_stability_figure(path, rows, title, top=30) -> None:
    """Horizontal bars of selection proportion for the most stable
    features; `rows` as read_stability_tsv returns them."""
    rows = rows[:top]
    fig = _new_figure(6.4, max(2.0, 0.22 * len(rows) + 1.2))
    ax = fig.add_subplot()
    labels = [tok if tok else str(f) for f, tok, _, _ in rows]
    props = [p for _, _, _, p in rows]
    pos = np.arange(len(rows))[::-1]
    ax.barh(pos, props, color="#2f7e4f")
    ax.set_yticks(pos, labels=labels, fontsize=7)
    ax.set_xlim(0, 1)
    ax.set_xlabel("selection proportion")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)


def render_evaluation_figure(path, results, group_names) -> None:
    """Grouped bars: one cluster per MSE column, one bar per model."""
    cols = ["all"] + list(group_names)
    fig = _new_figure(1.6 * len(cols) + 2.4, 4.2)
    ax = fig.add_subplot()
    width = 0.8 / max(len(results), 1)
    for i, r in enumerate(results):
        vals = [r.all_mse] + [r.group_mse[n] for n in group_names]
        label = r.model if not r.weights else f"{r.model} ({r.weights})"
        ax.bar(np.arange(len(cols)) + i * width, vals, width, label=label)
    ax.set_xticks(np.arange(len(cols)) + 0.4 - width / 2, labels=cols)
    ax.set_ylabel("test MSE")
    ax.set_title("Model comparison")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
