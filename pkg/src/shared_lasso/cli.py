"""Command line driver: featurize, fit, bootstrap, denoise, subgroups, report.

Every subcommand reads and writes plain files in an output directory and
drops a `manifest.json` there recording the resolved configuration, the
seed, and the package version, so any run can be reproduced from its
manifest alone.  All randomness derives from the single --seed value
through named sub-streams; reruns with identical flags produce identical
files.

Exit codes: 0 success, 2 configuration error, 3 data error,
4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, reports
from .corpus import Vocabulary, group_and_split, ingest
from .denoise import estimate_sigma, sweep_gamma
from .dsl import (WEIGHT_SCHEMES, DslFit, GroupedDataset, evaluate, fit_dsl,
                  fit_pooled, fit_separate)
from .errors import (ConfigurationError, ConvergenceError, DataError)
from .lasso_solver import LassoFit, LassoOptions, fit_cv, mse, predict
from .resampling import (BootstrapConfig, StabilityCounts, bootstrap_dsl,
                         bootstrap_lasso_group, reduce_dataset,
                         stability_report)
from .seeding import subseed
from .sparse_core import SparseBinaryDesign
from .subgroup_analysis import (RemovalReport, extract_sets, removal_table,
                                subgroups)

_FORMATS_HELP = """\
file formats (fixed column order, LF endings, '.' decimals):
  train/test_design.txt   sparse design: 'n_rows n_cols' header line, then
                          one line of sorted column ids per row
  train/test_labels.csv   row,id,rating,group
  vocab.tsv               feature_id,token,doc_freq
  mse.csv                 model,weights,all,<group names...>
  stability*.tsv          feature_id,token,count,proportion (tab separated)
  union*.txt              one feature id per line
  denoise.csv             gamma,threshold,mse
  removal.csv             penalty,removal_type,all_pct,<name>_pct...,coef_removed
  venn_*.json             region counts keyed by '+'-joined set labels
"""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _add_solver_flags(sp) -> None:
    grp = sp.add_argument_group("solver")
    grp.add_argument("--cv-folds", type=_positive_int, default=10,
                     help="cross-validation folds (default 10)")
    grp.add_argument("--lambda-grid-size", type=_positive_int, default=100,
                     help="points on the penalty path (default 100)")
    grp.add_argument("--lambda-min-ratio", type=float, default=1e-3,
                     help="smallest grid penalty relative to the largest")
    grp.add_argument("--tolerance", type=float, default=1e-7,
                     help="coordinate-descent stopping tolerance")
    grp.add_argument("--max-iterations", type=_positive_int, default=10000,
                     help="sweep budget before a convergence failure")
    grp.add_argument("--threads", type=_positive_int, default=None,
                     help="worker threads; default from SHARED_LASSO_THREADS "
                          "or 1; results do not depend on the count")


def _solver_options(args) -> LassoOptions:
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("SHARED_LASSO_THREADS", "1"))
    return LassoOptions(
        cv_folds=args.cv_folds,
        lambda_grid_size=args.lambda_grid_size,
        lambda_min_ratio=args.lambda_min_ratio,
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        threads=threads,
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, group_names=None) -> None:
    config = {}
    for key, value in vars(args).items():
        if key == "func":
            continue
        config[key] = str(value) if isinstance(value, Path) else value
    doc = {"version": __version__, "config": config}
    if group_names is not None:
        doc["group_names"] = list(group_names)
    with open(out / "manifest.json", "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2))
        fh.write("\n")


def _load_split(data_dir):
    """Read a featurize output directory back into grouped datasets."""
    data = Path(data_dir)
    manifest_path = data / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"{data}: no manifest.json; "
                        f"point --data at a featurize output directory")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    names = manifest.get("group_names")
    if not names:
        raise DataError(f"{manifest_path}: manifest lacks group_names")
    halves = []
    for half in ("train", "test"):
        X = SparseBinaryDesign.load(data / f"{half}_design.txt")
        _, y, groups = reports.read_labels_csv(
            data / f"{half}_labels.csv", names)
        halves.append(GroupedDataset(X, y, groups, group_names=names))
    vocab_path = data / "vocab.tsv"
    vocab = Vocabulary.load(vocab_path) if vocab_path.is_file() else None
    return halves[0], halves[1], vocab


def _parse_weights(text: str):
    """Scheme name, or custom:v1,v2,... -> array."""
    if text.startswith("custom:"):
        try:
            values = [float(v) for v in text[len("custom:"):].split(",")]
        except ValueError as exc:
            raise ConfigurationError(f"bad custom weights {text!r}") from exc
        return np.asarray(values)
    if text not in WEIGHT_SCHEMES:
        raise ConfigurationError(
            f"unknown weight scheme {text!r}; choose one of "
            f"{sorted(WEIGHT_SCHEMES)} or custom:v1,v2,...")
    return text


def _scheme_label(scheme) -> str:
    return scheme if isinstance(scheme, str) else "custom"


def cmd_featurize(args) -> None:
    if args.group and not args.genres:
        raise ConfigurationError(
            "--group needs genre metadata; pass the sidecar TSV via --genres")
    reviews = ingest(args.corpus, args.genres)
    if args.group:
        genres = [g.strip() for g in args.group.split(",") if g.strip()]
        priority = ([g.strip() for g in args.priority.split(",")]
                    if args.priority else None)
    else:
        # ungrouped corpus: one catch-all group so downstream code sees
        # the same shape either way
        reviews = [replace(r, genres=frozenset({"all"})) for r in reviews]
        genres, priority = ["all"], None
    split = group_and_split(reviews, genres, seed=args.seed,
                            min_doc_freq=args.min_doc_freq,
                            priority=priority)
    out = _out_dir(args)
    split.train.X.save(out / "train_design.txt")
    split.test.X.save(out / "test_design.txt")
    reports.write_labels_csv(out / "train_labels.csv", split.train_reviews,
                             split.train.groups, genres)
    reports.write_labels_csv(out / "test_labels.csv", split.test_reviews,
                             split.test.groups, genres)
    split.vocab.save(out / "vocab.tsv")
    _write_manifest(out, args, group_names=genres)
    sizes = ", ".join(f"{name}={int(n)}" for name, n in
                      zip(genres, split.train.group_sizes))
    print(f"featurize: train n={split.train.n_rows} "
          f"test n={split.test.n_rows} p={split.vocab.size} ({sizes})")


def cmd_fit(args) -> None:
    train, test, _ = _load_split(args.data)
    opts = _solver_options(args)
    out = _out_dir(args)
    names = train.group_names
    results = []

    if args.model == "pooled":
        fitted = fit_pooled(train, opts, seed=subseed(args.seed, "pooled"))
        (out / "fit_pooled.json").write_text(fitted.to_json() + "\n",
                                             encoding="utf-8")
        results.append(evaluate(fitted, test, model="pooled",
                                weights_label=""))
    elif args.model == "separate":
        fits = fit_separate(train, opts, seed=subseed(args.seed, "separate"))
        for name, fitted in zip(names, fits):
            (out / f"fit_separate_{name}.json").write_text(
                fitted.to_json() + "\n", encoding="utf-8")
        results.append(evaluate(fits, test, model="separate",
                                weights_label=""))
    else:
        schemes = (list(WEIGHT_SCHEMES) if args.weights == "all"
                   else [_parse_weights(args.weights)])
        for scheme in schemes:
            label = _scheme_label(scheme)
            fitted = fit_dsl(train, scheme, opts,
                             seed=subseed(args.seed, "dsl", label))
            (out / f"fit_dsl_{label}.json").write_text(
                fitted.to_json() + "\n", encoding="utf-8")
            results.append(evaluate(fitted, test, model="dsl",
                                    weights_label=label))

    reports.write_evaluation_csv(out / "mse.csv", results, names)
    _write_manifest(out, args, group_names=names)
    for r in results:
        print(f"fit: {r.model} {r.weights or '-'} all={r.all_mse:.6g}")


def _bls_outputs(train, test, cfg, opts, seed, out, tokens) -> None:
    names = train.group_names
    per_group = bootstrap_lasso_group(train, cfg)
    lines = ["group,full_mse,reduced_mse,union_size"]
    for g in range(1, train.n_groups + 1):
        name = names[g - 1]
        counts, reduced = per_group[g]
        reports.write_stability_tsv(out / f"stability_{name}.tsv",
                                    stability_report(counts), tokens)
        reports.write_union(out / f"union_{name}.txt", reduced.features)
        rows_tr = train.group_rows(g)
        rows_te = test.group_rows(g)
        Xtr, ytr = train.X.row_select(rows_tr), train.y[rows_tr]
        Xte, yte = test.X.row_select(rows_te), test.y[rows_te]
        Xtr_red, _ = Xtr.column_slice(reduced.features)
        Xte_red, _ = Xte.column_slice(reduced.features)
        Xtr_red.save(out / f"reduced_{name}_design.txt")
        eval_seed = subseed(seed, "bls-eval", g)
        full, _ = fit_cv(Xtr, ytr, np.ones(Xtr.n_cols), opts,
                         seed=eval_seed)
        red, _ = fit_cv(Xtr_red, ytr, np.ones(Xtr_red.n_cols), opts,
                        seed=eval_seed)
        full_mse = mse(predict(full, Xte), yte)
        red_mse = mse(predict(red, Xte_red), yte)
        lines.append(f"{name},{full_mse!r},{red_mse!r},{reduced.size}")
        print(f"bootstrap bls {name}: union={reduced.size} "
              f"full_mse={full_mse:.6g} reduced_mse={red_mse:.6g}")
    (out / "reduction_mse.csv").write_text("\n".join(lines) + "\n",
                                           encoding="utf-8")


def _bsls_outputs(train, test, cfg, opts, scheme, seed, out, tokens) -> None:
    names = train.group_names
    aug_counts, reduced = bootstrap_dsl(train, scheme, cfg)
    base_counts = np.zeros(train.n_features, dtype=np.int64)
    base_counts[reduced.features] = reduced.counts
    flat = StabilityCounts(base_counts, aug_counts.replicates,
                           aug_counts.failures)
    reports.write_stability_tsv(out / "stability.tsv",
                                stability_report(flat), tokens)
    reports.write_union(out / "union.txt", reduced.features)
    tr_red, _ = reduce_dataset(train, reduced)
    te_red, _ = reduce_dataset(test, reduced)
    tr_red.X.save(out / "reduced_train_design.txt")
    te_red.X.save(out / "reduced_test_design.txt")
    label = _scheme_label(scheme)
    eval_seed = subseed(seed, "bsls-eval")
    full = fit_dsl(train, scheme, opts, seed=eval_seed)
    red = fit_dsl(tr_red, scheme, opts, seed=eval_seed)
    results = [evaluate(full, test, model="dsl_full", weights_label=label),
               evaluate(red, te_red, model="dsl_reduced",
                        weights_label=label)]
    reports.write_evaluation_csv(out / "reduction_mse.csv", results, names)
    print(f"bootstrap bsls: union={reduced.size} "
          f"full_mse={results[0].all_mse:.6g} "
          f"reduced_mse={results[1].all_mse:.6g}")


def cmd_bootstrap(args) -> None:
    train, test, vocab = _load_split(args.data)
    opts = _solver_options(args)
    out = _out_dir(args)
    tokens = vocab.tokens if vocab is not None else None
    cfg = BootstrapConfig(replicates=args.replicates, seed=args.seed,
                          options=opts, resample_size=args.resample_size)
    if args.mode == "bls":
        _bls_outputs(train, test, cfg, opts, args.seed, out, tokens)
    else:
        scheme = _parse_weights(args.weights)
        _bsls_outputs(train, test, cfg, opts, scheme, args.seed, out, tokens)
    _write_manifest(out, args, group_names=train.group_names)


def _load_fit(path: Path, n_features: int):
    if not path.is_file():
        raise DataError(f"{path}: fit file not found")
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed fit document: {exc}") from exc
    if "scheme" in doc:
        return DslFit.from_json(text, n_features)
    return LassoFit.from_json(text, n_features)


def cmd_denoise(args) -> None:
    train, test, _ = _load_split(args.data)
    fitted = _load_fit(Path(args.fit), train.n_features)
    if args.sigma == "auto":
        sigma = estimate_sigma(fitted, train)
    else:
        try:
            sigma = float(args.sigma)
        except ValueError as exc:
            raise ConfigurationError(
                f"--sigma takes 'auto' or a number, got {args.sigma!r}"
            ) from exc
    n = train.n_rows if args.n == "auto" else int(args.n)
    sweep = sweep_gamma(fitted, test, sigma, n)
    out = _out_dir(args)
    reports.write_denoise_csv(out / "denoise.csv", sweep)
    reports.write_denoise_summary(out / "denoise_summary.json", sweep)
    _write_manifest(out, args, group_names=train.group_names)
    s = sweep.summary()
    print(f"denoise: argmin_gamma={s['argmin_gamma']:.6g} "
          f"min_mse={s['min_mse']:.6g} sigma={s['sigma']:.6g} n={s['n']}")


def cmd_subgroups(args) -> None:
    train, test, _ = _load_split(args.data)
    opts = _solver_options(args)
    out = _out_dir(args)
    names = train.group_names
    schemes = [_parse_weights(s.strip()) for s in args.schemes.split(",")]
    separate_fits = fit_separate(train, opts,
                                 seed=subseed(args.seed, "separate"))
    all_rows = []
    for scheme in schemes:
        label = _scheme_label(scheme)
        # the removal refits must share the baseline's seed so the
        # empty-removal row reproduces it exactly (0% by construction)
        scheme_seed = subseed(args.seed, "dsl", label)
        baseline = fit_dsl(train, scheme, opts, seed=scheme_seed)
        group_sets, shared = extract_sets(separate_fits, baseline, names)
        sets = subgroups(group_sets, shared)
        reports.write_venn_json(out / f"venn_{label}.json", sets)
        named = {"all_intersection": sets.all_intersection}
        for name, s in zip(names, sets.shared_int):
            named[f"shared_int_{name}"] = s
        named["additional"] = sets.additional
        table = removal_table(train, test, scheme, named, baseline,
                              seed=scheme_seed, opts=opts,
                              zero_only=args.zero_only,
                              reuse_lambda=args.reuse_lambda)
        all_rows.extend(table.rows)
        print(f"subgroups {label}: shared={len(shared)} "
              f"all_intersection={len(sets.all_intersection)} "
              f"additional={len(sets.additional)}")
    reports.write_removal_csv(out / "removal.csv",
                              RemovalReport(all_rows, list(names)))
    _write_manifest(out, args, group_names=names)


def cmd_report(args) -> None:
    run = Path(args.run)
    if not run.is_dir():
        raise DataError(f"{run}: not a directory")
    out = Path(args.out) if args.out else run / "figures"
    out.mkdir(parents=True, exist_ok=True)
    rendered = []

    denoise_csv = run / "denoise.csv"
    if denoise_csv.is_file():
        gammas, _, mses = reports.read_denoise_csv(denoise_csv)
        sigma = None
        summary = run / "denoise_summary.json"
        if summary.is_file():
            sigma = json.loads(summary.read_text(encoding="utf-8")).get(
                "sigma")
        target = out / "denoise.png"
        reports.render_denoise_figure(target, gammas, mses, sigma)
        rendered.append(target)

    for tsv in sorted(run.glob("stability*.tsv")):
        rows = reports.read_stability_tsv(tsv)
        if not rows:
            continue
        target = out / f"{tsv.stem}.png"
        reports.render_stability_figure(target, rows,
                                        title=tsv.stem.replace("_", " "))
        rendered.append(target)

    for csv_path in sorted(run.glob("*.csv")):
        with open(csv_path, "r", encoding="utf-8") as fh:
            header = fh.readline()
        if not header.startswith("model,weights,all"):
            continue
        results, group_names = reports.read_evaluation_csv(csv_path)
        if not results:
            continue
        target = out / f"{csv_path.stem}.png"
        reports.render_evaluation_figure(target, results, group_names)
        rendered.append(target)

    _write_manifest(out, args)
    if rendered:
        for target in rendered:
            print(f"report: wrote {target}")
    else:
        print("report: nothing to render in "
              f"{run} (no denoise.csv, stability*.tsv, or MSE csv)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shared-lasso",
        description="Grouped lasso pipeline over bag-of-words review data.",
        epilog=_FORMATS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser(
        "featurize", help="corpus directory -> designs, labels, vocabulary")
    sp.add_argument("corpus", type=Path,
                    help="root with train/{pos,neg} and test/{pos,neg}")
    sp.add_argument("--genres", type=Path, default=None,
                    help="sidecar TSV: review_id<TAB>genre1,genre2,...")
    sp.add_argument("--group", default=None,
                    help="comma list of genres to keep as groups "
                         "(omit for one catch-all group)")
    sp.add_argument("--priority", default=None,
                    help="tie-break order for multi-genre reviews "
                         "(default: the --group order)")
    sp.add_argument("--min-doc-freq", type=_positive_int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser(
        "fit", help="pooled, separate, or data-shared model -> fit JSON + MSE")
    sp.add_argument("--data", type=Path, required=True,
                    help="featurize output directory")
    sp.add_argument("--model", choices=("pooled", "separate", "dsl"),
                    default="dsl")
    sp.add_argument("--weights", default="sqrt_share",
                    help="scheme name, custom:v1,v2,..., or 'all' for every "
                         "named scheme (dsl only)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path, required=True)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser(
        "bootstrap",
        help="resampled refits -> stability counts, union, reduced design")
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--mode", choices=("bls", "bsls"), default="bls",
                    help="per-group lasso or the data-shared model")
    sp.add_argument("-B", "--replicates", type=_positive_int, default=100)
    sp.add_argument("--weights", default="sqrt_share",
                    help="scheme for bsls mode")
    sp.add_argument("--resample-size", type=_positive_int, default=None,
                    help="rows per replicate (default: the group size)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path, required=True)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_bootstrap)

    sp = sub.add_parser(
        "denoise", help="sweep soft-threshold levels over a saved fit")
    sp.add_argument("--fit", type=Path, required=True,
                    help="fit JSON from the fit subcommand")
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--sigma", default="auto",
                    help="noise scale, or 'auto' for the training residual "
                         "standard deviation")
    sp.add_argument("--n", default="auto",
                    help="sample count in the threshold formula "
                         "(default: training rows)")
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_denoise)

    sp = sub.add_parser(
        "subgroups",
        help="active-set algebra and feature-removal effects per scheme")
    sp.add_argument("--data", type=Path, required=True)
    sp.add_argument("--schemes", default=",".join(WEIGHT_SCHEMES),
                    help="comma list of weight schemes (default: all named)")
    sp.add_argument("--zero-only", action="store_true",
                    help="zero removed coefficients instead of refitting")
    sp.add_argument("--reuse-lambda", action="store_true",
                    help="keep the baseline lambda instead of fresh CV")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path, required=True)
    _add_solver_flags(sp)
    sp.set_defaults(func=cmd_subgroups)

    sp = sub.add_parser(
        "report", help="render figures for a run directory's outputs")
    sp.add_argument("--run", type=Path, required=True,
                    help="directory holding outputs of other subcommands")
    sp.add_argument("--out", type=Path, default=None,
                    help="figure directory (default: <run>/figures)")
    sp.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 4
    return 0


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
