"""Command-line pipeline: synth, extract, train, search, evaluate, baseline, report.

Every command resolves its parameters (flags > --config file > defaults),
writes the resolved set next to its outputs for reproducibility, and
exits non-zero on errors. All randomness flows from explicit seeds.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from . import __version__
from .baseline import (
    PAPER_BASELINE_GRIDS,
    baseline_search,
    write_baseline_csv,
)
from .features import FeatureMatrix, load_matrix, save_matrix_csv, save_matrix_npz
from .forest import ForestHyperparams, load_model, model_to_json, predict_batch, save_model, train
from .metrics import evaluate
from .overlay import render_overlay
from .pipeline import extract_split, page_from_tsv
from .rng import derive_rng
from .search import PAPER_FOREST_GRIDS, random_search, write_candidates_csv
from .synth import ManipulationSpec, build_corpus, load_truth
from .pagegen import load_clean_dir

logger = logging.getLogger("glyphforge")


def _merge_config(ctx: click.Context, values: dict) -> dict:
    """Fill parameters the user left at their defaults from the config file."""
    cfg = (ctx.obj or {}).get("config", {}).get(ctx.info_name, {})
    out = {}
    for name, value in values.items():
        src = ctx.get_parameter_source(name)
        if src is not None and src.name == "DEFAULT" and name in cfg:
            out[name] = cfg[name]
        else:
            out[name] = value
    return out


def _write_run_config(out: Path, command: str, params: dict) -> None:
    doc = {"command": command, "tool_version": __version__, "params": params}
    target = out / "run_config.json" if out.is_dir() else out.with_name(out.name + ".run.json")
    target.write_text(json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n")


@click.group()
@click.version_option(__version__)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with per-command parameter defaults.")
@click.option("--seed", type=int, default=None, help="Fallback seed for commands that take one.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker threads for training/search.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Fallback output location.")
@click.pass_context
def main(ctx, config, seed, jobs, out_dir):
    """Character-level document forgery detection toolkit."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {
        "config": json.loads(Path(config).read_text()) if config else {},
        "seed": seed,
        "jobs": jobs,
        "out": out_dir,
    }


def _fallback(ctx, value, key):
    return value if value is not None else (ctx.obj or {}).get(key)


@main.command()
@click.option("--input", "input_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="Clean-input directory (pages.json + pages/*.png).")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Corpus output directory.")
@click.option("--kind", "--spec", "kind", type=click.Choice(["shift", "scale"]), default="shift",
              show_default=True)
@click.option("--range", "mag_range", type=float, nargs=2, default=(1, 5), show_default=True,
              help="Magnitude range: pixels for shift, fraction for scale.")
@click.option("--prob", type=float, default=0.05, show_default=True)
@click.option("--direction-policy", type=click.Choice(["axis4", "vertical_only"]), default="axis4",
              show_default=True)
@click.option("--scale-policy", type=click.Choice(["enlarge", "shrink", "both"]), default="both",
              show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--test-fraction", type=float, default=0.0, show_default=True)
@click.pass_context
def synth(ctx, input_dir, out_dir, kind, mag_range, prob, direction_policy, scale_policy, seed, test_fraction):
    """Build a manipulated corpus from clean pages."""
    p = _merge_config(ctx, dict(
        input_dir=input_dir, out_dir=out_dir, kind=kind, mag_range=tuple(mag_range), prob=prob,
        direction_policy=direction_policy, scale_policy=scale_policy, seed=seed,
        test_fraction=test_fraction,
    ))
    p["seed"] = _fallback(ctx, p["seed"], "seed") or 0
    p["out_dir"] = _fallback(ctx, p["out_dir"], "out")
    if p["out_dir"] is None:
        raise click.ClickException("an output directory is required (--out)")
    if not 0 <= p["test_fraction"] < 1:
        raise click.ClickException(f"test fraction must be in [0, 1), got {p['test_fraction']}")
    try:
        spec = ManipulationSpec(
            kind=p["kind"], magnitude_range=tuple(p["mag_range"]), probability=p["prob"],
            direction_policy=p["direction_policy"], scale_policy=p["scale_policy"], seed=p["seed"],
        )
    except ValueError as exc:
        raise click.ClickException(f"invalid manipulation spec: {exc}")

    pages = load_clean_dir(p["input_dir"])
    if not pages:
        raise click.ClickException(f"no pages found under {p['input_dir']}")
    n_test = int(round(p["test_fraction"] * len(pages)))
    rng = derive_rng(p["seed"], 0x5517)
    test_indices = sorted(rng.choice(len(pages), size=n_test, replace=False).tolist()) if n_test else []

    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = build_corpus(pages, spec, out, test_indices=test_indices)
    _write_run_config(out, "synth", p)

    for split in ("train", "test"):
        truth = load_truth(out / split) if (out / split / "truth.json").exists() else {}
        n_records = sum(len(v) for v in truth.values())
        n_pages = len(manifest["splits"][split])
        click.echo(f"{split}: {n_pages} pages, {n_records} manipulated characters ({spec.kind})")


@main.command()
@click.option("--corpus", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--split", type=click.Choice(["train", "test"]), default="train", show_default=True)
@click.option("--tsv-dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of pageNNNN.tsv files (default: inside the split).")
@click.option("--n", "n_values", type=int, multiple=True, default=(3,), show_default=True,
              help="Neighbors per side; repeat for several matrices.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def extract(ctx, corpus, split, tsv_dir, n_values, out_dir):
    """Parse TSVs, label against ground truth, write feature matrices."""
    p = _merge_config(ctx, dict(corpus=corpus, split=split, tsv_dir=tsv_dir,
                                n_values=tuple(n_values), out_dir=out_dir))
    p["out_dir"] = _fallback(ctx, p["out_dir"], "out")
    if p["out_dir"] is None:
        raise click.ClickException("an output directory is required (--out)")
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)

    matrices = extract_split(Path(p["corpus"]) / p["split"], list(p["n_values"]), p["tsv_dir"])
    for n, m in matrices.items():
        save_matrix_csv(m, str(out / f"features_n{n}.csv"))
        save_matrix_npz(m, str(out / f"features_n{n}.npz"))
        click.echo(
            f"n={n}: {m.X.shape[0]} vectors of length {m.X.shape[1]}, "
            f"{int(m.y.sum())} labeled manipulated"
        )
    _write_run_config(out, "extract", p)


def _load_matrix_checked(path: str) -> FeatureMatrix:
    try:
        return load_matrix(path)
    except Exception as exc:
        raise click.ClickException(f"cannot read feature matrix {path}: {exc}")


@main.command("train")
@click.option("--features", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--trees", type=int, default=250, show_default=True)
@click.option("--max-depth", type=int, default=25, show_default=True)
@click.option("--min-leaf", type=int, default=4, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Model file to write.")
@click.option("--export-json", type=click.Path(), default=None, help="Also write a JSON view of the model.")
@click.pass_context
def train_cmd(ctx, features, trees, max_depth, min_leaf, seed, out_path, export_json):
    """Train a forest on one feature matrix."""
    p = _merge_config(ctx, dict(features=features, trees=trees, max_depth=max_depth,
                                min_leaf=min_leaf, seed=seed, out_path=out_path,
                                export_json=export_json))
    p["seed"] = _fallback(ctx, p["seed"], "seed") or 0
    p["out_path"] = _fallback(ctx, p["out_path"], "out")
    if p["out_path"] is None:
        raise click.ClickException("an output model path is required (--out)")
    m = _load_matrix_checked(p["features"])
    hp = ForestHyperparams(
        n_trees=p["trees"], max_depth=p["max_depth"], min_samples_leaf=p["min_leaf"],
        n_neighbors=m.n, seed=p["seed"],
    )
    try:
        model = train(m.X, m.y, hp, jobs=(ctx.obj or {}).get("jobs", 1))
    except ValueError as exc:
        raise click.ClickException(str(exc))
    out = Path(p["out_path"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(save_model(model))
    if p["export_json"]:
        Path(p["export_json"]).write_text(model_to_json(model))
    _write_run_config(out, "train", p)
    click.echo(f"trained {hp.n_trees} trees on {m.X.shape[0]} vectors -> {out}")


METRIC_ROWS = (("Precision", "precision"), ("Recall", "recall"),
               ("Accuracy", "accuracy"), ("F1 Score", "f1"))


def _print_fold_table(title: str, summary: dict[str, tuple[float, float]]) -> None:
    click.echo(title)
    for label, key in METRIC_ROWS:
        mean, std = summary[key]
        click.echo(f"  {label:<9} {mean:.4f} ± {std:.4f}")


@main.command()
@click.option("--features", "features_paths", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True, help="One matrix per n in the grid; repeatable.")
@click.option("--iterations", type=int, default=480, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--grids", "grids_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file overriding the published hyperparameter grids.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def search(ctx, features_paths, iterations, folds, seed, grids_path, out_dir):
    """Randomized hyperparameter search with k-fold cross-validation."""
    p = _merge_config(ctx, dict(features_paths=tuple(features_paths), iterations=iterations,
                                folds=folds, seed=seed, grids_path=grids_path, out_dir=out_dir))
    p["seed"] = _fallback(ctx, p["seed"], "seed") or 0
    p["out_dir"] = _fallback(ctx, p["out_dir"], "out")
    if p["out_dir"] is None:
        raise click.ClickException("an output directory is required (--out)")
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)

    datasets = {}
    for path in p["features_paths"]:
        m = _load_matrix_checked(path)
        if m.n in datasets:
            raise click.ClickException(f"two matrices supplied for n={m.n}")
        datasets[m.n] = (m.X, m.y)
    grids = dict(PAPER_FOREST_GRIDS)
    if p["grids_path"]:
        grids.update(json.loads(Path(p["grids_path"]).read_text()))
    else:
        grids["n_neighbors"] = sorted(datasets)

    try:
        result = random_search(datasets, grids, iterations=p["iterations"], folds=p["folds"],
                               seed=p["seed"], jobs=(ctx.obj or {}).get("jobs", 1))
    except ValueError as exc:
        raise click.ClickException(str(exc))

    with open(out / "candidates.csv", "w", newline="") as fh:
        write_candidates_csv(result, fh)
    best = result.best
    (out / "best.json").write_text(json.dumps(
        {"hyperparams": best.hp.to_dict(),
         "summary": {k: {"mean": v[0], "std": v[1]} for k, v in best.summary().items()}},
        indent=2) + "\n")
    X, y = datasets[best.hp.n_neighbors]
    final = train(X, y, best.hp, jobs=(ctx.obj or {}).get("jobs", 1))
    (out / "best_model.gfm").write_bytes(save_model(final))
    _write_run_config(out, "search", p)
    _print_fold_table(f"best of {len(result.candidates)} candidates ({p['folds']} folds):",
                      best.summary())
    click.echo(f"hyperparams: {best.hp.to_dict()}")


@main.command("evaluate")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--features", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None,
              help="CSV with y_true,y_pred columns, evaluated directly.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Optional metrics JSON.")
@click.pass_context
def evaluate_cmd(ctx, model_path, features, predictions, out_path):
    """Score a model on a matrix, or score a prediction file."""
    p = _merge_config(ctx, dict(model_path=model_path, features=features,
                                predictions=predictions, out_path=out_path))
    if p["predictions"]:
        rows = np.loadtxt(p["predictions"], delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
        met = evaluate(rows[:, 0], rows[:, 1])
    elif p["model_path"] and p["features"]:
        try:
            model = load_model(Path(p["model_path"]).read_bytes())
        except ValueError as exc:
            raise click.ClickException(str(exc))
        m = _load_matrix_checked(p["features"])
        if m.X.shape[1] != model.n_features:
            raise click.ClickException(
                f"schema mismatch: model expects {model.n_features} features "
                f"(n={model.schema.n_neighbors}), matrix has {m.X.shape[1]} (n={m.n})"
            )
        pred, _ = predict_batch(model, m.X)
        met = evaluate(m.y, pred)
    else:
        raise click.ClickException("pass either --predictions or both --model and --features")

    for label, key in METRIC_ROWS:
        click.echo(f"{label:<9} {getattr(met, key):.4f}")
    click.echo(f"confusion tp={met.tp} fp={met.fp} tn={met.tn} fn={met.fn}")
    if p["out_path"]:
        Path(p["out_path"]).write_text(json.dumps(met.to_dict(), indent=2) + "\n")
        _write_run_config(Path(p["out_path"]), "evaluate", p)


@main.command()
@click.option("--features", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--mode", type=click.Choice(["exhaustive", "random"]), default="exhaustive",
              show_default=True)
@click.option("--iterations", type=int, default=480, show_default=True,
              help="Draws in random mode.")
@click.option("--seed", type=int, default=None)
@click.option("--combine", type=click.Choice(["or", "and"]), default="or", show_default=True)
@click.option("--extended-w", is_flag=True, default=False,
              help="Append line offset and inertia angle to the class-model vector.")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.pass_context
def baseline(ctx, features, folds, mode, iterations, seed, combine, extended_w, out_dir):
    """Cross-validate the two-method baseline over its parameter grid."""
    p = _merge_config(ctx, dict(features=features, folds=folds, mode=mode, iterations=iterations,
                                seed=seed, combine=combine, extended_w=extended_w, out_dir=out_dir))
    p["seed"] = _fallback(ctx, p["seed"], "seed") or 0
    p["out_dir"] = _fallback(ctx, p["out_dir"], "out")
    if p["out_dir"] is None:
        raise click.ClickException("an output directory is required (--out)")
    out = Path(p["out_dir"])
    out.mkdir(parents=True, exist_ok=True)

    m = _load_matrix_checked(p["features"])
    result = baseline_search(
        m, PAPER_BASELINE_GRIDS, folds=p["folds"], seed=p["seed"], mode=p["mode"],
        iterations=p["iterations"], combine_rule=p["combine"], extended_w=p["extended_w"],
    )
    with open(out / "baseline_candidates.csv", "w", newline="") as fh:
        write_baseline_csv(result, fh)
    best = result.best
    (out / "baseline_best.json").write_text(json.dumps(
        {"params": best.params.to_dict(),
         "summary": {k: {"mean": v[0], "std": v[1]} for k, v in best.summary().items()}},
        indent=2) + "\n")
    _write_run_config(out, "baseline", p)
    _print_fold_table(f"best of {len(result.candidates)} combinations ({p['folds']} folds):",
                      best.summary())
    click.echo(f"params: {best.params.to_dict()}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--image", "image_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--tsv", "tsv_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--truth", "truth_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="truth.json of the corpus split the page came from.")
@click.option("--page-index", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def report(ctx, model_path, image_path, tsv_path, truth_path, page_index, out_path):
    """Render a page overlay with flagged and ground-truth boxes."""
    p = _merge_config(ctx, dict(model_path=model_path, image_path=image_path, tsv_path=tsv_path,
                                truth_path=truth_path, page_index=page_index, out_path=out_path))
    p["out_path"] = _fallback(ctx, p["out_path"], "out")
    if p["out_path"] is None:
        raise click.ClickException("an output image path is required (--out)")
    try:
        model = load_model(Path(p["model_path"]).read_bytes())
    except ValueError as exc:
        raise click.ClickException(str(exc))

    image = np.asarray(Image.open(p["image_path"]).convert("L"))
    page = page_from_tsv(Path(p["tsv_path"]).read_text(), p["page_index"], p["image_path"],
                         image.shape[1], image.shape[0])
    truth_boxes = []
    if p["truth_path"]:
        by_page = load_truth(Path(p["truth_path"]).parent)
        truth_boxes = [r.altered_box for r in by_page.get(p["page_index"], [])]

    from .features import extract_page_vectors

    n = model.schema.n_neighbors
    vectors = extract_page_vectors(page, image, [n], truth_boxes)[n]
    flagged = []
    if vectors:
        X = np.stack([v.values for v in vectors])
        pred, _ = predict_batch(model, X)
        for v, is_hit in zip(vectors, pred):
            if is_hit:
                b = page.lines[v.source[1]].boxes[v.source[2]]
                flagged.append((b.x0, b.y0, b.width, b.height))
    out = Path(p["out_path"])
    out.parent.mkdir(parents=True, exist_ok=True)
    render_overlay(image, flagged, truth_boxes).save(out)
    _write_run_config(out, "report", p)
    click.echo(f"{len(flagged)} characters flagged -> {out}")


if __name__ == "__main__":
    main()
