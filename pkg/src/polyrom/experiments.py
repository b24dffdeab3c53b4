"""Benchmark experiment recipes and their runners.

A recipe is a declarative INI document naming one of the studies
(toy3d, allen-cahn, kdv, external) and its parameters. Runners return a
plain-dict summary of every error metric plus the heavyweight artifacts
(datasets, models, predictions) that the CLI persists next to it. The
same entry points back the acceptance checks, so tests exercise exactly
what users run.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .fom import (AllenCahnConfig, KdvConfig, allen_cahn_dataset,
                  kdv_grid, kdv_simulate, lift, toy_snapshot_set)
from .learn import LearnConfig, learn_am, learn_pod
from .manifold import (EncodeSettings, relative_state_error, energy_metric)
from .pipeline import (default_ic_method, per_trajectory_errors,
                       predict_snapshots, relative_error, train_reduced_model)
from .snapshot import SnapshotSet, center, svd_spectrum
from .tune import Grid, grid_search


@dataclass
class ExperimentRecipe:
    """Parsed recipe: experiment name, random seed, and stage parameters."""

    name: str
    seed: int
    sections: dict

    def get(self, section: str, key: str, fallback=None):
        return self.sections.get(section, {}).get(key, fallback)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in str(text).split(",") if str(v).strip())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in str(text).split(",") if str(v).strip())


def bundled_recipe_path(name: str) -> Path:
    """Path of a recipe shipped with the package."""
    base = resources.files("polyrom") / "recipes" / f"{name.replace('-', '_')}.ini"
    return Path(str(base))


def parse_recipe(path_or_name) -> ExperimentRecipe:
    """Read a recipe file; bare names resolve to the bundled recipes."""
    path = Path(str(path_or_name))
    if not path.exists() and not path.suffix:
        path = bundled_recipe_path(str(path_or_name))
    if not path.exists():
        raise FileNotFoundError(f"recipe not found: {path_or_name}")
    parser = configparser.ConfigParser()
    parser.read(path)
    sections = {name: dict(parser[name]) for name in parser.sections()}
    exp = sections.get("experiment", {})
    name = exp.get("name")
    if name not in ("toy3d", "allen-cahn", "kdv", "external"):
        raise ValueError(f"unknown experiment name {name!r} in {path}")
    return ExperimentRecipe(name=name, seed=int(exp.get("seed", 0)), sections=sections)


def _learn_config(recipe: ExperimentRecipe, p: int | None = None) -> LearnConfig:
    sec = recipe.sections.get("manifold", {})
    encode = EncodeSettings(
        function_tolerance=float(sec.get("encode_tolerance", 1e-9)),
        max_iterations=int(sec.get("encode_max_iterations", 200)),
    )
    return LearnConfig(
        r=int(sec["r"]),
        q=int(sec.get("q", 0)),
        p=p if p is not None else int(sec.get("p", 2)),
        gamma=float(sec.get("gamma", 0.0)),
        am_energy_tolerance=float(sec.get("am_tolerance", 1e-3)),
        am_max_outer_iterations=int(sec.get("am_max_iterations", 100)),
        encode=encode,
    )


def _lambda_grid(recipe: ExperimentRecipe, method: str, cfg: LearnConfig,
                 label: str | None = None) -> Grid:
    """Candidate grid for one training variant.

    Recipe keys are looked up most-specific first: ``<key>_<label>`` (for
    example lambda2_values_mpod_p3), then ``<key>_<method>``, then the
    bare key.
    """
    sec = recipe.sections.get("opinf", {})

    def values(key, fallback):
        raw = sec.get(f"{key}_{label}") if label else None
        if raw is None:
            raw = sec.get(f"{key}_{method}", sec.get(key))
        return _floats(raw) if raw is not None else fallback

    lam3 = values("lambda3_values", (0.0,))
    if method == "opinf":
        lam3 = (0.0,)
    return Grid(
        gamma_values=values("gamma_values", (cfg.gamma,)),
        lambda1_values=values("lambda1_values", (1e-6, 1e-3, 1.0)),
        lambda2_values=values("lambda2_values", (1e-6, 1e-3, 1.0)),
        lambda3_values=lam3,
    )


def _tuned_model(recipe, method, sset, cs, cfg, substeps, log=None, label=None):
    """Grid-search the penalties (manifold fits cached per gamma) and
    return the winning model."""
    from dataclasses import replace

    grid = _lambda_grid(recipe, method, cfg, label=label)
    cache = {}
    result = grid_search(sset, cs, cfg, grid, method=method, substeps=substeps,
                         manifold_cache=cache)
    best = result.best
    manifold, S_hat, report = cache[best.gamma]
    model = train_reduced_model(method, cs, replace(cfg, gamma=best.gamma),
                                (best.lambda1, best.lambda2, best.lambda3),
                                manifold=manifold, S_hat=S_hat)
    if log:
        log(f"{method}: best (gamma, lambdas) = ({best.gamma:.3g}; {best.lambda1:.3g}, "
            f"{best.lambda2:.3g}, {best.lambda3:.3g}), training score {result.score:.4f}")
    return model, S_hat, report, result


def run_toy3d(recipe: ExperimentRecipe, log=None) -> dict:
    """Three reconstructions of the 3-D surface with two modal coordinates."""
    sset = toy_snapshot_set()
    cs = center(sset, "column_mean")
    cfg = _learn_config(recipe, p=int(recipe.get("manifold", "p", 3)))

    m_pod, S_pod = learn_pod(cs, LearnConfig(r=cfg.r, q=0, p=cfg.p))
    e_pod = relative_state_error(m_pod, S_pod, sset.data)
    m_mpod, S_mpod = learn_pod(cs, cfg)
    e_mpod = relative_state_error(m_mpod, S_mpod, sset.data)
    m_mam, S_mam, report = learn_am(cs, cfg, init=(m_mpod, S_mpod))
    e_mam = relative_state_error(m_mam, S_mam, sset.data)
    if log:
        log(f"toy3d errors: pod={e_pod:.4f} mpod={e_mpod:.4f} mam={e_mam:.4f}")
    summary = {
        "experiment": "toy3d",
        "relative_state_error": {"pod": e_pod, "mpod": e_mpod, "mam": e_mam},
        "am_iterations": report.iterations,
        "am_converged": report.converged,
    }
    artifacts = {
        "data": sset,
        "reconstructions": {
            "pod": m_pod.s_ref[:, None] + m_pod.V @ S_pod,
            "mpod": np.asarray(m_mpod.s_ref[:, None]
                               + m_mpod.V @ S_mpod
                               + m_mpod.V_bar @ (m_mpod.Xi @ _g(S_mpod, cfg.p))),
            "mam": np.asarray(m_mam.s_ref[:, None]
                              + m_mam.V @ S_mam
                              + m_mam.V_bar @ (m_mam.Xi @ _g(S_mam, cfg.p))),
        },
        "manifolds": {"pod": m_pod, "mpod": m_mpod, "mam": m_mam},
    }
    return {"summary": summary, "artifacts": artifacts}


def _g(S_hat, p):
    from .features import g_eval
    return g_eval(S_hat, p)


def run_allen_cahn(recipe: ExperimentRecipe, log=None) -> dict:
    """Parametric phase-separation study on lifted snapshots.

    Trains on three parameter values, tests on seeded random draws, and
    compares the linear-subspace model against manifold models of
    increasing embedding order at fixed r.
    """
    data_sec = recipe.sections.get("data", {})
    fom_cfg = AllenCahnConfig(
        kappa=float(data_sec.get("kappa", 0.01)),
        n=int(data_sec.get("n", 512)),
        t_record=float(data_sec.get("t_record", 0.1)),
        t_final=float(data_sec.get("t_final", 60.0)),
        internal_dt=float(data_sec.get("internal_dt", 0.005)),
    )
    mu_train = _floats(data_sec.get("mu_train", "0.50,0.55,0.60"))
    n_test = int(data_sec.get("n_test", 10))
    mu_lo, mu_hi = _floats(data_sec.get("mu_range", "0.5,0.6"))
    rng = np.random.default_rng(recipe.seed)
    mu_test = tuple(float(v) for v in rng.uniform(mu_lo, mu_hi, size=n_test))
    if log:
        log(f"allen-cahn: simulating {len(mu_train)} training and {n_test} test trajectories")

    train_raw = allen_cahn_dataset(mu_train, fom_cfg)
    test_raw = allen_cahn_dataset(mu_test, fom_cfg)
    train = SnapshotSet(data=lift(train_raw.data), times=train_raw.times,
                        trajectory_breaks=train_raw.trajectory_breaks,
                        param_labels=train_raw.param_labels)
    test = SnapshotSet(data=lift(test_raw.data), times=test_raw.times,
                       trajectory_breaks=test_raw.trajectory_breaks,
                       param_labels=test_raw.param_labels)
    cs = center(train, data_sec.get("center", "initial_condition_mean"))
    spectrum = svd_spectrum(cs)

    substeps = int(recipe.get("rom", "substeps", 10))
    p_values = _ints(recipe.get("manifold", "p_values", "2,3,4"))
    methods = [("opinf", None)] + [("mpod", p) for p in p_values]
    results = {}
    predictions = {}
    for method, p in methods:
        label = method if p is None else f"{method}_p{p}"
        cfg = _learn_config(recipe, p=p if p is not None else 2)
        model, S_hat, _, tuned = _tuned_model(recipe, method, train, cs, cfg,
                                              substeps, log=log, label=label)
        ic = default_ic_method(method)
        pred_train = predict_snapshots(model, train, substeps=substeps, ic_method=ic)
        pred_test = predict_snapshots(model, test, substeps=substeps, ic_method=ic)
        train_errors = per_trajectory_errors(pred_train, train, cs.s_ref)
        test_errors = per_trajectory_errors(pred_test, test, cs.s_ref)
        results[label] = {
            "lambdas": [tuned.best.lambda1, tuned.best.lambda2, tuned.best.lambda3],
            "train_errors": train_errors,
            "test_errors": test_errors,
            "train_median": float(np.median(train_errors)),
            "test_median": float(np.median(test_errors)),
        }
        predictions[label] = {"train": pred_train, "test": pred_test}
        if log:
            log(f"{label}: median train {results[label]['train_median']:.4f}, "
                f"median test {results[label]['test_median']:.4f}")
    summary = {
        "experiment": "allen-cahn",
        "kappa": fom_cfg.kappa,
        "mu_train": list(mu_train),
        "mu_test": list(mu_test),
        "spectrum": {
            "energy_2": spectrum.energy_at(2),
            "energy_20": spectrum.energy_at(20),
            "projection_error_20": float(np.sqrt(max(0.0, 1.0 - spectrum.energy_at(20)))),
        },
        "methods": results,
    }
    artifacts = {
        "train": train,
        "test": test,
        "centered": cs,
        "spectrum": spectrum,
        "predictions": predictions,
        "x_grid": np.linspace(-1.0, 1.0, fom_cfg.n),
    }
    return {"summary": summary, "artifacts": artifacts}


def run_kdv(recipe: ExperimentRecipe, log=None, full=None) -> dict:
    """Soliton study: train over one window, predict well beyond it.

    A precomputed full-window snapshot set may be passed to skip the
    simulation (tests share one run across recipes).
    """
    data_sec = recipe.sections.get("data", {})
    fom_cfg = KdvConfig(
        alpha=float(data_sec.get("alpha", 4.0)),
        beta=float(data_sec.get("beta", 1.0)),
        n=int(data_sec.get("n", 256)),
        t_record=float(data_sec.get("t_record", 0.0002)),
        t_final=float(data_sec.get("t_final", 1.0)),
        internal_dt=float(data_sec.get("internal_dt", 1e-5)),
    )
    train_time = float(data_sec.get("train_time", 0.2))
    if full is None:
        if log:
            log(f"kdv: simulating to t={fom_cfg.t_final:g}")
        full = kdv_simulate(fom_cfg)
    train_cols = full.times <= train_time + 1e-12
    train = SnapshotSet(data=full.data[:, train_cols], times=full.times[train_cols])
    cs = center(train, data_sec.get("center", "column_mean"))
    spectrum = svd_spectrum(cs)

    substeps = int(recipe.get("rom", "substeps", 2))
    methods = [m.strip() for m in
               str(recipe.get("rom", "methods", "opinf,mpod,mam")).split(",")]
    pred_cols = full.times > train_time + 1e-12
    results = {}
    predictions = {}
    for method in methods:
        cfg = _learn_config(recipe)
        model, S_hat, report, tuned = _tuned_model(recipe, method, train, cs, cfg,
                                                   substeps, log=log)
        ic = default_ic_method(method)
        eps_r = energy_metric(model.manifold, S_hat, train.data, cs.s_ref)
        try:
            pred = predict_snapshots(model, full, substeps=substeps, ic_method=ic)
            err_train = relative_error(pred[:, train_cols], full.data[:, train_cols], cs.s_ref)
            err_pred = relative_error(pred[:, pred_cols], full.data[:, pred_cols], cs.s_ref)
            stable = True
        except RuntimeError:
            pred = predict_snapshots(model, train, substeps=substeps, ic_method=ic)
            pred = np.hstack([pred, np.full((train.n, int(pred_cols.sum())), np.nan)])
            err_train = relative_error(pred[:, train_cols], full.data[:, train_cols], cs.s_ref)
            err_pred = float("inf")
            stable = False
        results[method] = {
            "lambdas": [tuned.best.lambda1, tuned.best.lambda2, tuned.best.lambda3],
            "energy_metric": eps_r,
            "training_error": err_train,
            "prediction_error": err_pred,
            "stable_full_window": stable,
            "am_iterations": report.iterations if report is not None else None,
        }
        predictions[method] = pred
        if log:
            log(f"{method}: energy {eps_r:.4f}, train {err_train:.4f}, "
                f"prediction {err_pred:.4f}")
    summary = {
        "experiment": "kdv",
        "r": int(recipe.get("manifold", "r", 5)),
        "q": int(recipe.get("manifold", "q", 9)),
        "train_time": train_time,
        "spectrum": {
            "energy_14": spectrum.energy_at(14),
            "energy_r": spectrum.energy_at(int(recipe.get("manifold", "r", 5))),
        },
        "methods": results,
    }
    artifacts = {
        "full": full,
        "train": train,
        "centered": cs,
        "spectrum": spectrum,
        "predictions": predictions,
        "x_grid": kdv_grid(fom_cfg.n),
    }
    return {"summary": summary, "artifacts": artifacts}


def run_external(recipe: ExperimentRecipe, log=None) -> dict:
    """Ingest an externally produced snapshot matrix and fit one model."""
    from .snapshot import load_snapshot_set

    data_sec = recipe.sections.get("data", {})
    path = data_sec.get("path")
    if not path or not Path(path).exists():
        raise FileNotFoundError(f"external snapshot file not found: {path!r}")
    sset, _ = load_snapshot_set(path)
    cs = center(sset, data_sec.get("center", "column_mean"))
    method = str(recipe.get("manifold", "method", "mpod"))
    cfg = _learn_config(recipe)
    substeps = int(recipe.get("rom", "substeps", 10))
    model, S_hat, _, tuned = _tuned_model(recipe, method, sset, cs, cfg, substeps, log=log)
    ic = default_ic_method(method)
    pred = predict_snapshots(model, sset, substeps=substeps, ic_method=ic)
    err = relative_error(pred, sset.data, cs.s_ref)
    eps_r = energy_metric(model.manifold, S_hat, sset.data, cs.s_ref)
    summary = {
        "experiment": "external",
        "data_path": str(path),
        "method": method,
        "lambdas": [tuned.best.lambda1, tuned.best.lambda2, tuned.best.lambda3],
        "energy_metric": eps_r,
        "training_error": err,
    }
    artifacts = {"data": sset, "model": model, "prediction": pred}
    return {"summary": summary, "artifacts": artifacts}


RUNNERS = {
    "toy3d": run_toy3d,
    "allen-cahn": run_allen_cahn,
    "kdv": run_kdv,
    "external": run_external,
}


def run_experiment(recipe: ExperimentRecipe, log=None, **kwargs) -> dict:
    return RUNNERS[recipe.name](recipe, log=log, **kwargs)
