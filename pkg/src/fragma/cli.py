"""Command-line front end: fit, predict, compare, simulate, screen.

Every subcommand writes a ``config.json`` into its output directory with
the resolved arguments, sufficient to re-run the command bit-identically.
Exit codes: 0 success, 1 numerical failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import (
    AveragedModel,
    fit_averaged,
    predict,
    predict_for_pattern,
)
from .baselines import fit_cc, fit_glasso, fit_imp, fit_smoothed_ic
from .errors import DataError, NumericalError
from .glm import FitOptions, get_family
from .io import (
    format_cell,
    read_fragmentary_csv,
    read_groups_sidecar,
    read_matrix_csv,
    write_csv,
)
from .patterns import FragmentaryDataset, build_pattern_index
from .screening import screen_groups
from .sim import ALL_METHODS, SimConfig, run_study

DEFAULT_COMPARE_METHODS = "opt1,opt2,cc,saic,sbic,imp1,imp2"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, args) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    with open(out / "config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)


def _parse_lambda(text: str):
    if text in ("log-n1", "opt2"):
        return "opt2"
    if text in ("2", "opt1"):
        return "opt1"
    return float(text)


def _fit_options(args) -> FitOptions:
    return FitOptions(
        max_iter=args.max_iter, grad_tol=args.grad_tol, ridge=args.ridge
    )


def _patterns_report(data: FragmentaryDataset, index) -> str:
    lines = []
    lines.append(f"subjects: {data.n}    columns: {data.p}    patterns: {index.K}")
    lines.append("")
    width = max(len(c) for c in data.column_names)
    head = "  k   exact   cover   p_k   " + "  ".join(
        c.rjust(width) for c in data.column_names
    )
    lines.append(head)
    lines.append("-" * len(head))
    for k, pat in enumerate(index.patterns, start=1):
        stars = [
            ("*" if j in pat.indices else "").rjust(width) for j in range(data.p)
        ]
        lines.append(
            f"{k:>3}   {index.t_sets[k - 1].size:>5}   {index.s_sets[k - 1].size:>5}"
            f"   {pat.size:>3}   " + "  ".join(stars)
        )
    if data.n <= 30:
        lines.append("")
        lines.append("subject rows per pattern (1-based; exact = availability equals the "
                     "pattern, cover = availability includes it):")
        for k in range(1, index.K + 1):
            t = (index.t_sets[k - 1] + 1).tolist()
            s = (index.s_sets[k - 1] + 1).tolist()
            lines.append(f"  pattern {k}: exact={t} cover={s}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> int:
    out = _out_dir(args)
    _write_config(out, args)
    data = read_fragmentary_csv(
        args.input, args.response, args.na_marker, args.add_intercept
    )
    index = build_pattern_index(data)
    report = _patterns_report(data, index)
    (out / "report.txt").write_text(report)

    model = fit_averaged(
        data,
        get_family(args.family),
        _parse_lambda(getattr(args, "lam")),
        fit_opts=_fit_options(args),
    )
    with open(out / "model.json", "w") as fh:
        json.dump(model.to_dict(), fh, indent=2)

    w = np.asarray(model.weights)
    lines = [report, "candidates and weights:"]
    for k, cand in enumerate(model.candidates):
        cols = [model.column_names[j] for j in cand.pattern.indices]
        lines.append(
            f"  {k + 1}: n_k={cand.n_k} p_k={cand.p_k} weight={w[k]:.6f} "
            f"loglik={cand.loglik:.4f} converged={cand.converged} columns={cols}"
        )
    lines.append(f"lambda_n={model.lambda_n:.6g}  criterion={model.criterion_value:.8g}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print(f"fit: K={index.K} candidates, weighting sample {model.diagnostics['n_weighting']}")
    print(f"wrote {out / 'model.json'}")
    return 0


def _align_query(header, values, column_names):
    """Arrange query CSV columns to the model's column order (absent = unobserved)."""
    q = np.full((values.shape[0], len(column_names)), np.nan)
    pos = {name: j for j, name in enumerate(header)}
    for t, name in enumerate(column_names):
        if name in pos:
            q[:, t] = values[:, pos[name]]
        elif name == "intercept":
            q[:, t] = 1.0
    return q


def cmd_predict(args) -> int:
    out = _out_dir(args)
    _write_config(out, args)
    with open(args.model) as fh:
        model = AveragedModel.from_dict(json.load(fh))
    header, values = read_matrix_csv(args.input, args.na_marker)
    q = _align_query(header, values, model.column_names)

    train = None
    if args.train:
        train = read_fragmentary_csv(
            args.train, args.response, args.na_marker, args.add_intercept
        )
        if train.column_names != model.column_names:
            raise DataError("training CSV columns do not match the model's columns")

    lead = set(model.candidates[0].pattern.indices)
    cache: dict[tuple, tuple] = {}
    rows = []
    for i in range(q.shape[0]):
        obs = frozenset(np.flatnonzero(np.isfinite(q[i])).tolist())
        if lead <= obs:
            theta, mean = predict(model, q[i])
            rule = "full"
        else:
            if train is None:
                raise DataError(
                    f"query row {i + 1} observes only a sub-pattern; "
                    "re-fitting requires --train"
                )
            key = tuple(sorted(obs))
            if key not in cache:
                x_star = np.where(np.isfinite(q[i]), q[i], np.nan)
                cache[key] = predict_for_pattern(
                    train, model.family, model.lambda_n, x_star, return_model=True
                )[2]
            sub = cache[key]
            theta, mean = predict(sub, q[i][list(key)])
            rule = "restricted:" + "+".join(
                model.column_names[j] for j in sorted(obs)
            )
        rows.append([i + 1, rule, f"{theta:.17g}", f"{mean:.17g}"])
    write_csv(out / "predictions.csv", ["row", "rule", "theta", "mean"], rows)
    print(f"wrote {out / 'predictions.csv'} ({len(rows)} rows)")
    return 0


def _split_by_pattern(data, index, split, rng):
    train_rows, test_rows = [], []
    for t in index.t_sets:
        perm = rng.permutation(t)
        n_train = min(len(t), max(1, int(round(split * len(t)))))
        train_rows.extend(perm[:n_train])
        test_rows.extend(perm[n_train:])
    return np.sort(np.asarray(train_rows, dtype=int)), np.sort(
        np.asarray(test_rows, dtype=int)
    )


def _subset(data, rows):
    return FragmentaryDataset(
        y=data.y[rows],
        x=data.x[rows],
        mask=data.mask[rows],
        column_names=list(data.column_names),
    )


def cmd_compare(args) -> int:
    out = _out_dir(args)
    _write_config(out, args)
    family = get_family(args.family)
    data = read_fragmentary_csv(
        args.input, args.response, args.na_marker, args.add_intercept
    )
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise DataError(f"unknown methods {sorted(unknown)}; choose from {ALL_METHODS}")
    groups = None
    if args.groups:
        groups = read_groups_sidecar(args.groups, data.column_names)
    if "glasso" in methods and groups is None:
        raise DataError("glasso requires a --groups sidecar")

    rng = np.random.default_rng(args.seed)
    index_all = build_pattern_index(data)
    train_rows, test_rows = _split_by_pattern(data, index_all, args.split, rng)
    if test_rows.size == 0:
        raise DataError("test split is empty; lower --split")
    train = _subset(data, train_rows)
    test = _subset(data, test_rows)

    index = build_pattern_index(train)
    lead = list(index.patterns[0].indices)
    fopts = _fit_options(args)
    fits = {}
    for m in methods:
        if m in ("opt1", "opt2"):
            fits[m] = fit_averaged(train, family, m, fit_opts=fopts, index=index)
        elif m == "cc":
            fits[m] = fit_cc(train, family, opts=fopts, index=index)
        elif m in ("saic", "sbic"):
            fits[m] = fit_smoothed_ic(train, family, m[1:], opts=fopts, index=index)
        elif m in ("imp1", "imp2"):
            fits[m] = fit_imp(
                train, family, "opt1" if m == "imp1" else "opt2", opts=fopts, index=index
            )
        elif m == "glasso":
            fits[m] = fit_glasso(train, family, groups, seed=args.seed, opts=fopts, index=index)

    eval_rows = np.flatnonzero(test.mask[:, lead].all(axis=1))
    summary = []
    cache: dict[tuple, AveragedModel] = {}
    for m in methods:
        fit = fits[m]
        preds = []
        for i in range(test.n):
            theta = np.nan
            rule = "unavailable"
            xq = np.where(test.mask[i], test.x[i], np.nan)
            try:
                if isinstance(fit, AveragedModel):
                    obs = frozenset(np.flatnonzero(test.mask[i]).tolist())
                    if set(lead) <= obs:
                        theta, _ = predict(fit, xq)
                        rule = "full"
                    else:
                        key = tuple(sorted(obs))
                        if key not in cache:
                            cache[key] = predict_for_pattern(
                                train, family, fit.lambda_n, xq, return_model=True
                            )[2]
                        theta, _ = predict(cache[key], xq[list(key)])
                        rule = "restricted"
                else:
                    theta = fit.linear_predictor(xq)
                    rule = "zero-imputed" if fit.metadata.get("zero_impute") else "full"
            except (ValueError, DataError, NumericalError):
                pass
            mean = float(family.b_prime(theta)) if np.isfinite(theta) else np.nan
            preds.append([i + 1, rule, f"{theta:.17g}", f"{mean:.17g}"])
        write_csv(out / f"predictions_{m}.csv", ["row", "rule", "theta", "mean"], preds)

        theta_eval = np.array([float(preds[i][2]) for i in eval_rows])
        ok = np.isfinite(theta_eval)
        y_eval = test.y[eval_rows][ok]
        loss = (
            2.0 / family.phi * float(np.mean(family.b(theta_eval[ok]) - y_eval * theta_eval[ok]))
            if ok.any()
            else float("nan")
        )
        summary.append([m, int(ok.sum()), f"{loss:.10g}"])
    write_csv(out / "kl_summary.csv", ["method", "n_eval", "loss_per_obs"], summary)
    print(f"train={train.n} test={test.n} evaluated on {eval_rows.size} full-pattern test rows")
    print(f"wrote {out / 'kl_summary.csv'}")
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    _write_config(out, args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    cfg = SimConfig(
        n=args.n,
        beta_case=args.beta_case,
        rho=args.rho,
        reps=args.reps,
        seed=args.seed,
        methods=methods,
    )
    result = run_study(cfg)
    with open(out / "config.json", "w") as fh:
        json.dump({"command": "simulate", "version": __version__, **cfg.to_dict()}, fh, indent=2)

    rows = []
    for rep in range(cfg.reps):
        rows.append(
            [rep, f"{result.cc_fraction_per_rep[rep]:.6f}"]
            + [f"{v:.10g}" for v in result.per_rep_kl[rep]]
        )
    write_csv(out / "kl_per_rep.csv", ["rep", "cc_fraction"] + list(methods), rows)
    srows = [
        [
            m,
            f"{s['median']:.10g}",
            f"{s['q25']:.10g}",
            f"{s['q75']:.10g}",
            f"{s['mean']:.10g}",
            s["failures"],
        ]
        for m, s in result.summary.items()
    ]
    write_csv(
        out / "summary.csv", ["method", "median", "q25", "q75", "mean", "failures"], srows
    )
    print(f"simulate: n={cfg.n} rho={cfg.rho} beta={cfg.beta_case} reps={cfg.reps}")
    for m, s in result.summary.items():
        print(f"  {m}: median KL = {s['median']:.5f}")
    print(f"wrote {out / 'kl_per_rep.csv'}")
    return 0


def cmd_screen(args) -> int:
    out = _out_dir(args)
    _write_config(out, args)
    data = read_fragmentary_csv(args.input, args.response, args.na_marker)
    groups = read_groups_sidecar(args.groups, data.column_names)
    kept = screen_groups(data, groups, keep=args.keep)

    kept_cols = sorted({j for pairs in kept.values() for j, _ in pairs})
    grouped = {j for cols in groups.values() for j in cols}
    ungrouped = [j for j in range(data.p) if j not in grouped]
    final_cols = sorted(set(kept_cols) | set(ungrouped))

    header = [args.response] + [data.column_names[j] for j in final_cols]
    rows = []
    for i in range(data.n):
        row = [format_cell(data.y[i], args.na_marker)]
        for j in final_cols:
            row.append(
                format_cell(data.x[i, j] if data.mask[i, j] else np.nan, args.na_marker)
            )
        rows.append(row)
    write_csv(out / "reduced.csv", header, rows)

    report = {
        name: [
            {"column": data.column_names[j], "correlation": r} for j, r in pairs
        ]
        for name, pairs in kept.items()
    }
    with open(out / "screen_report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"kept {len(final_cols)} columns; wrote {out / 'reduced.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fragma",
        description="Model averaging for GLMs on fragmentary (pattern-missing) data",
    )
    parser.add_argument("--version", action="version", version=f"fragma {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--na-marker", default="NA", dest="na_marker")
    common.add_argument(
        "--family", default="binomial", choices=["binomial", "gaussian", "poisson"]
    )

    fitlike = argparse.ArgumentParser(add_help=False)
    fitlike.add_argument("--input", required=True, help="pattern-structured CSV")
    fitlike.add_argument("--response", required=True, help="response column name")
    fitlike.add_argument("--add-intercept", action="store_true", dest="add_intercept")
    fitlike.add_argument("--max-iter", type=int, default=100, dest="max_iter")
    fitlike.add_argument("--grad-tol", type=float, default=1e-8, dest="grad_tol")
    fitlike.add_argument("--ridge", type=float, default=1e-8)

    p_fit = sub.add_parser("fit", parents=[common, fitlike], help="fit an averaged model")
    p_fit.add_argument(
        "--lambda",
        default="2",
        dest="lam",
        help="penalty level: 2, log-n1, or a float",
    )
    p_fit.set_defaults(func=cmd_fit)

    p_pred = sub.add_parser("predict", parents=[common], help="score a query CSV")
    p_pred.add_argument("--model", required=True, help="model.json from fit")
    p_pred.add_argument("--input", required=True, help="query CSV (cells may be missing)")
    p_pred.add_argument(
        "--train", default=None, help="training CSV (needed for sub-pattern queries)"
    )
    p_pred.add_argument("--response", default=None, help="response column of --train")
    p_pred.add_argument("--add-intercept", action="store_true", dest="add_intercept")
    p_pred.set_defaults(func=cmd_predict)

    p_cmp = sub.add_parser(
        "compare", parents=[common, fitlike], help="train/test comparison of methods"
    )
    p_cmp.add_argument("--methods", default=DEFAULT_COMPARE_METHODS)
    p_cmp.add_argument("--split", type=float, default=0.75)
    p_cmp.add_argument(
        "--stratify-pattern",
        action="store_true",
        default=True,
        dest="stratify_pattern",
        help="split within each availability pattern (always on)",
    )
    p_cmp.add_argument("--groups", default=None, help="JSON sidecar of column groups")
    p_cmp.set_defaults(func=cmd_compare)

    p_sim = sub.add_parser("simulate", parents=[common], help="run the Monte Carlo study")
    p_sim.add_argument("--n", type=int, default=400)
    p_sim.add_argument("--rho", type=float, default=0.3)
    p_sim.add_argument(
        "--beta-case", default="decay", choices=["decay", "flat", "rise"], dest="beta_case"
    )
    p_sim.add_argument("--reps", type=int, default=50)
    p_sim.add_argument("--methods", default=DEFAULT_COMPARE_METHODS)
    p_sim.set_defaults(func=cmd_simulate)

    p_scr = sub.add_parser(
        "screen", parents=[common], help="marginal-correlation screening within groups"
    )
    p_scr.add_argument("--input", required=True)
    p_scr.add_argument("--response", required=True)
    p_scr.add_argument("--groups", required=True, help="JSON sidecar of column groups")
    p_scr.add_argument("--keep", type=int, default=10)
    p_scr.set_defaults(func=cmd_screen)
    return parser


def _emit_error(args, exc, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    out = getattr(args, "out", None)
    if out is not None and Path(out).is_dir():
        with open(Path(out) / "error.json", "w") as fh:
            json.dump(payload, fh, indent=2)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, FileNotFoundError) as exc:
        return _emit_error(args, exc, 2)
    except (NumericalError, ValueError) as exc:
        return _emit_error(args, exc, 1)


if __name__ == "__main__":
    sys.exit(main())
