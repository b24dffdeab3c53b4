"""Command-line driver for data generation, training, and reproduction.

Subcommands: generate, learn-manifold, train-rom, predict, evaluate, tune,
export-plot, reproduce. Every run is reproducible (same inputs and seed
give identical numeric outputs) and report paths emit both delimited data
and rendered figures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, plots
from .fom import (AllenCahnConfig, KdvConfig, allen_cahn_dataset, kdv_simulate,
                  lift, toy_snapshot_set)
from .learn import LearnConfig
from .manifold import EncodeSettings, load_model, save_model
from .pipeline import (default_ic_method, evaluate_prediction, fit_manifold,
                       predict_snapshots, train_reduced_model)
from .snapshot import (SnapshotSet, center, load_matrix, load_snapshot_set,
                       save_matrix, save_snapshot_set)
from .rom import load_reduced_model, save_reduced_model
from .tune import Grid, grid_search, write_table_csv


def _output_root() -> Path:
    return Path(os.environ.get("POLYROM_OUTPUT_ROOT", "."))


def _resolve_out(path) -> Path:
    path = Path(path)
    if not path.is_absolute():
        path = _output_root() / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def cmd_generate(args) -> int:
    out = _resolve_out(args.out)
    if args.problem == "toy":
        sset = toy_snapshot_set()
        config = {"problem": "toy"}
    elif args.problem == "allen-cahn":
        cfg = AllenCahnConfig(kappa=args.kappa, n=args.n or 512,
                              t_final=args.t_final or 60.0,
                              internal_dt=args.internal_dt or 0.005)
        mus = [float(v) for v in args.mu.split(",")] if args.mu else [0.5]
        sset = allen_cahn_dataset(mus, cfg)
        if args.lift:
            sset = SnapshotSet(data=lift(sset.data), times=sset.times,
                               trajectory_breaks=sset.trajectory_breaks,
                               param_labels=sset.param_labels)
        config = {"problem": "allen-cahn", "kappa": cfg.kappa, "mu": mus,
                  "lifted": bool(args.lift), "internal_dt": cfg.internal_dt}
    elif args.problem == "kdv":
        cfg = KdvConfig(n=args.n or 256, t_final=args.t_final or 1.0,
                        internal_dt=args.internal_dt or 1e-5)
        sset = kdv_simulate(cfg)
        config = {"problem": "kdv", "alpha": cfg.alpha, "beta": cfg.beta,
                  "internal_dt": cfg.internal_dt}
    else:
        raise ValueError(f"unknown problem {args.problem!r}")
    save_snapshot_set(sset, out, fmt=args.format, config=config)
    print(f"wrote {sset.n}x{sset.k} snapshot matrix to {out}")
    return 0


def _load_training_set(args):
    sset, _ = load_snapshot_set(args.data)
    cs = center(sset, args.center)
    return sset, cs


def _learn_config_from_args(args) -> LearnConfig:
    return LearnConfig(
        r=args.r, q=args.q, p=args.p, gamma=args.gamma,
        am_energy_tolerance=args.am_tol,
        am_max_outer_iterations=args.max_iter,
        encode=EncodeSettings(),
    )


def cmd_learn_manifold(args) -> int:
    sset, cs = _load_training_set(args)
    cfg = _learn_config_from_args(args)
    method = {"pod": "mpod", "am": "mam"}[args.method]
    manifold, S_hat, report = fit_manifold(method, cs, cfg)
    out = _resolve_out(args.out)
    save_model(manifold, out)
    coords_path = Path(args.coords) if args.coords else Path(str(out) + ".coords.smat")
    save_matrix(S_hat, _resolve_out(coords_path))
    print(f"wrote manifold to {out} and coordinates to {coords_path}")
    if report is not None:
        print(f"alternating learner: {report.iterations} iterations, "
              f"converged={report.converged}")
    return 0


def cmd_train_rom(args) -> int:
    sset, cs = _load_training_set(args)
    cfg = _learn_config_from_args(args)
    if args.manifold:
        manifold = load_model(args.manifold)
        coords = args.coords or str(args.manifold) + ".coords.smat"
        S_hat = load_matrix(coords)
        cfg = replace(cfg, r=manifold.r, q=manifold.q, p=manifold.p)
    else:
        manifold, S_hat, _ = fit_manifold(args.method, cs, cfg)
    model = train_reduced_model(args.method, cs, cfg,
                                (args.lambda1, args.lambda2, args.lambda3),
                                manifold=manifold, S_hat=S_hat)
    out = _resolve_out(args.out)
    save_reduced_model(model, out)
    print(f"wrote reduced model to {out}")
    return 0


def cmd_predict(args) -> int:
    model = load_reduced_model(args.rom)
    sset, _ = load_snapshot_set(args.data)
    ic_method = args.ic_method or default_ic_method(args.method)
    pred = predict_snapshots(model, sset, substeps=args.substeps, ic_method=ic_method)
    out = _resolve_out(args.out)
    save_matrix(pred, out, fmt=args.format)
    print(f"wrote {pred.shape[0]}x{pred.shape[1]} prediction to {out}")
    return 0


def cmd_evaluate(args) -> int:
    pred = load_matrix(args.prediction)
    ref = load_matrix(args.reference)
    manifold = load_model(args.manifold) if args.manifold else None
    if manifold is not None:
        s_ref = manifold.s_ref
    elif args.s_ref:
        s_ref = load_matrix(args.s_ref).ravel()
    else:
        s_ref = ref.mean(axis=1)
    metrics = evaluate_prediction(pred, ref, s_ref, manifold=manifold)
    out = _resolve_out(args.out)
    pointwise_path = Path(str(out) + ".pointwise.smat")
    save_matrix(metrics.pointwise_error, pointwise_path)
    doc = {
        "relative_state_error": metrics.relative_state_error,
        "energy_metric": metrics.energy_metric,
        "pointwise_error_path": str(pointwise_path),
    }
    _write_json(doc, out)
    print(f"relative state error {metrics.relative_state_error:.6g}; metrics in {out}")
    return 0


def cmd_tune(args) -> int:
    sset, cs = _load_training_set(args)
    cfg = _learn_config_from_args(args)
    grid = Grid(
        gamma_values=[float(v) for v in args.grid_gamma.split(",")],
        lambda1_values=[float(v) for v in args.grid_lambda1.split(",")],
        lambda2_values=[float(v) for v in args.grid_lambda2.split(",")],
        lambda3_values=[float(v) for v in args.grid_lambda3.split(",")],
    )
    result = grid_search(sset, cs, cfg, grid, method=args.method, substeps=args.substeps)
    out = _resolve_out(args.out)
    write_table_csv(result, out)
    best = result.best
    print(f"best: gamma={best.gamma:g} lambdas=({best.lambda1:g}, {best.lambda2:g}, "
          f"{best.lambda3:g}) score={result.score:.6g}; table in {out}")
    return 0


def _reproduce_outputs(result: dict, out_dir: Path) -> None:
    """Persist a run: summary JSON, delimited reports, and figures."""
    summary = result["summary"]
    artifacts = result["artifacts"]
    _write_json(summary, out_dir / "summary.json")
    name = summary["experiment"]
    if name == "toy3d":
        data = artifacts["data"].data
        recons = artifacts["reconstructions"]
        with open(out_dir / "errors.csv", "w") as fh:
            fh.write("method,relative_state_error\n")
            for method, err in summary["relative_state_error"].items():
                fh.write(f"{method},{err:.17g}\n")
        plots.plot_toy_surfaces(data, recons, out_dir / "reconstructions.png")
        for method, recon in recons.items():
            save_matrix(recon, out_dir / f"reconstruction_{method}.smat")
    elif name == "allen-cahn":
        spectrum = artifacts["spectrum"]
        _spectrum_csv(spectrum, out_dir / "singular_values.csv")
        plots.plot_singular_values(spectrum, out_dir / "singular_values.png", mark=20)
        with open(out_dir / "median_errors.csv", "w") as fh:
            fh.write("method,train_median,test_median\n")
            for method, res in summary["methods"].items():
                fh.write(f"{method},{res['train_median']:.17g},{res['test_median']:.17g}\n")
        test = artifacts["test"]
        x = artifacts["x_grid"]
        n = x.size
        start, stop = test.trajectory_slices()[0]
        times = test.times[start:stop]
        for method, pred in artifacts["predictions"].items():
            save_matrix(pred["test"], out_dir / f"prediction_test_{method}.smat")
        errors = {m: np.abs(p["test"][:n, start:stop] - test.data[:n, start:stop]).mean(axis=0)
                  for m, p in artifacts["predictions"].items()}
        plots.plot_error_curves(times, errors, out_dir / "test_error_over_time.png",
                                title="first test trajectory")
        plots.plot_spacetime(times, x, test.data[:n, start:stop],
                             out_dir / "reference_test.png", title="reference")
    elif name == "kdv":
        spectrum = artifacts["spectrum"]
        _spectrum_csv(spectrum, out_dir / "singular_values.csv")
        plots.plot_singular_values(spectrum, out_dir / "singular_values.png",
                                   mark=summary["r"] + summary["q"])
        full = artifacts["full"]
        for method, pred in artifacts["predictions"].items():
            save_matrix(np.nan_to_num(pred, nan=0.0),
                        out_dir / f"prediction_{method}.smat")
            plots.plot_spacetime(full.times, artifacts["x_grid"], pred,
                                 out_dir / f"spacetime_{method}.png",
                                 title=method, train_until=summary["train_time"])
        plots.plot_spacetime(full.times, artifacts["x_grid"], full.data,
                             out_dir / "spacetime_reference.png", title="reference",
                             train_until=summary["train_time"])
        export_kdv_slices(out_dir, full, artifacts["predictions"], artifacts["x_grid"],
                          (summary["train_time"], full.times[-1]))
        with open(out_dir / "errors.csv", "w") as fh:
            fh.write("method,energy_metric,training_error,prediction_error\n")
            for method, res in summary["methods"].items():
                fh.write(f"{method},{res['energy_metric']:.17g},"
                         f"{res['training_error']:.17g},{res['prediction_error']:.17g}\n")
    elif name == "external":
        save_matrix(artifacts["prediction"], out_dir / "prediction.smat")
        save_reduced_model(artifacts["model"], out_dir / "reduced_model.json")


def _spectrum_csv(spectrum, path) -> None:
    with open(path, "w") as fh:
        fh.write("index,singular_value,cumulative_energy\n")
        for i, (s, e) in enumerate(zip(spectrum.singular_values,
                                       spectrum.cumulative_energy), start=1):
            fh.write(f"{i},{s:.17g},{e:.17g}\n")


def export_kdv_slices(out_dir: Path, full, predictions: dict, x, slice_times) -> tuple:
    """Write the solution-slice CSV and its rendered figure.

    Columns are x then reference and per-method values at each slice time.
    Returns (csv_path, png_path).
    """
    out_dir = Path(out_dir)
    columns = {"x": x}
    panel_data = {}
    for t in slice_times:
        j = int(np.argmin(np.abs(full.times - t)))
        label = f"t{full.times[j]:g}"
        curves = {"reference": full.data[:, j]}
        columns[f"reference_{label}"] = full.data[:, j]
        for method, pred in predictions.items():
            col = pred[:, j]
            columns[f"{method}_{label}"] = col
            if np.all(np.isfinite(col)):
                curves[method] = col
        panel_data[f"t = {full.times[j]:g}"] = curves
    csv_path = out_dir / "solution_slices.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for i in range(x.size):
            fh.write(",".join(format(columns[c][i], ".17g") for c in columns) + "\n")
    png_path = plots.plot_solution_slices(x, panel_data, out_dir / "solution_slices.png")
    return str(csv_path), str(png_path)


def cmd_reproduce(args) -> int:
    recipe = experiments.parse_recipe(args.recipe)
    out_dir = _resolve_out(Path(args.out) / "summary.json").parent
    log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    result = experiments.run_experiment(recipe, log=log)
    _reproduce_outputs(result, out_dir)
    print(f"wrote {recipe.name} results to {out_dir}")
    return 0


def cmd_export_plot(args) -> int:
    run_dir = Path(args.run)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"no summary.json under {run_dir}")
    with open(summary_path) as fh:
        summary = json.load(fh)
    if summary.get("experiment") != "kdv":
        raise ValueError("export-plot currently renders slice reports for kdv runs")
    out_dir = Path(args.out) if args.out else run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = args.data
    if data_path is None:
        raise ValueError("pass --data with the reference snapshot file "
                         "(the full simulated trajectory)")
    full, _ = load_snapshot_set(data_path)
    predictions = {}
    for method in summary["methods"]:
        pred_path = run_dir / f"prediction_{method}.smat"
        if pred_path.exists():
            predictions[method] = load_matrix(pred_path)
    from .fom import kdv_grid
    csv_path, png_path = export_kdv_slices(
        out_dir, full, predictions, kdv_grid(full.n),
        (summary["train_time"], full.times[-1]))
    print(f"wrote {csv_path} and {png_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyrom",
        description="Reduced-order models on polynomial manifolds",
    )
    parser.add_argument("--threads", type=int, default=1,
                        help="cap for worker threads (modules run serially by default)")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate benchmark snapshot data")
    g.add_argument("--problem", required=True, choices=["toy", "allen-cahn", "kdv"])
    g.add_argument("--out", required=True)
    g.add_argument("--format", default="smat", choices=["smat", "csv"])
    g.add_argument("--kappa", type=float, default=0.01)
    g.add_argument("--mu", help="comma-separated parameter values (allen-cahn)")
    g.add_argument("--lift", action="store_true", help="store lifted variables (allen-cahn)")
    g.add_argument("--n", type=int)
    g.add_argument("--t-final", dest="t_final", type=float)
    g.add_argument("--internal-dt", dest="internal_dt", type=float)
    g.set_defaults(func=cmd_generate)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", required=True)
    common.add_argument("--center", default="column_mean",
                        choices=["column_mean", "initial_condition_mean"])
    common.add_argument("--r", type=int, required=True)
    common.add_argument("--q", type=int, default=0)
    common.add_argument("--p", type=int, default=2)
    common.add_argument("--gamma", type=float, default=0.0)
    common.add_argument("--am-tol", dest="am_tol", type=float, default=1e-3)
    common.add_argument("--max-iter", dest="max_iter", type=int, default=100)

    lm = sub.add_parser("learn-manifold", parents=[common],
                        help="fit a polynomial manifold to snapshots")
    lm.add_argument("--method", default="pod", choices=["pod", "am"])
    lm.add_argument("--out", required=True)
    lm.add_argument("--coords", help="where to store the learned coordinates")
    lm.set_defaults(func=cmd_learn_manifold)

    tr = sub.add_parser("train-rom", parents=[common],
                        help="infer reduced operators from snapshots")
    tr.add_argument("--method", default="mpod", choices=["opinf", "mpod", "mam"])
    tr.add_argument("--manifold", help="reuse a saved manifold instead of refitting")
    tr.add_argument("--coords", help="coordinates matrix for --manifold")
    tr.add_argument("--lambda1", type=float, default=0.0)
    tr.add_argument("--lambda2", type=float, default=0.0)
    tr.add_argument("--lambda3", type=float, default=0.0)
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train_rom)

    pr = sub.add_parser("predict", help="integrate a reduced model over a dataset's time grid")
    pr.add_argument("--rom", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--method", default="mpod", choices=["opinf", "mpod", "mam"])
    pr.add_argument("--ic-method", dest="ic_method", choices=["linear", "nls"])
    pr.add_argument("--substeps", type=int, default=10)
    pr.add_argument("--format", default="smat", choices=["smat", "csv"])
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="error metrics between prediction and reference")
    ev.add_argument("--prediction", required=True)
    ev.add_argument("--reference", required=True)
    ev.add_argument("--manifold")
    ev.add_argument("--s-ref", dest="s_ref", help="reference state matrix (n x 1)")
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_evaluate)

    tu = sub.add_parser("tune", parents=[common], help="grid-search regularization")
    tu.add_argument("--method", default="mpod", choices=["opinf", "mpod", "mam"])
    tu.add_argument("--grid-gamma", default="0")
    tu.add_argument("--grid-lambda1", default="1e-6,1e-3,1")
    tu.add_argument("--grid-lambda2", default="1e-6,1e-3,1")
    tu.add_argument("--grid-lambda3", default="0")
    tu.add_argument("--substeps", type=int, default=10)
    tu.add_argument("--out", required=True)
    tu.set_defaults(func=cmd_tune)

    ep = sub.add_parser("export-plot", help="re-render slice reports from a run directory")
    ep.add_argument("--run", required=True)
    ep.add_argument("--data", help="reference snapshot file for the run")
    ep.add_argument("--out")
    ep.set_defaults(func=cmd_export_plot)

    rp = sub.add_parser("reproduce", help="run a benchmark recipe end to end")
    rp.add_argument("recipe", help="recipe name (toy3d, allen_cahn, kdv_r5, kdv_r16) or path")
    rp.add_argument("--out", required=True)
    rp.add_argument("--quiet", action="store_true")
    rp.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface module errors with stage context
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
