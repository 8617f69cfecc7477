"""Randomized hyperparameter search with stratified k-fold cross-validation.

Candidates are drawn uniformly (with replacement) from the grid lists;
every candidate is scored by mean fold F1 on one shared fold
assignment, which is seeded independently of tree seeds so candidates
compete on identical splits. The grid defaults reproduce the published
search space.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Mapping

import numpy as np

from .forest import ForestHyperparams, train, predict_batch
from .metrics import Metrics, evaluate, mean_std, stratified_folds
from .rng import derive_rng, derive_seed

# Published search space for the forest.
PAPER_FOREST_GRIDS: dict[str, list[int]] = {
    "n_trees": [1000, 250, 1500, 1750, 2000, 2250, 2500, 2750, 3000, 3250, 3500, 3750, 4000, 5000],
    "max_depth": [5, 10, 15, 20, 25, 30, 35, 40, 45, 50],
    "min_samples_leaf": [4, 6, 8, 10, 12],
    "n_neighbors": [3, 5, 7, 9],
}
DEFAULT_ITERATIONS = 480
DEFAULT_FOLDS = 5


@dataclass
class CandidateResult:
    candidate_id: int
    hp: ForestHyperparams
    fold_metrics: list[Metrics]

    @property
    def mean_f1(self) -> float:
        return mean_std([m.f1 for m in self.fold_metrics])[0]

    def summary(self) -> dict[str, tuple[float, float]]:
        return {
            name: mean_std([getattr(m, name) for m in self.fold_metrics])
            for name in ("precision", "recall", "accuracy", "f1")
        }


@dataclass
class SearchResult:
    best: CandidateResult
    candidates: list[CandidateResult]
    folds: np.ndarray = field(repr=False)

    @property
    def best_hp(self) -> ForestHyperparams:
        return self.best.hp


def sample_candidates(grids: Mapping[str, list[int]], iterations: int, seed: int) -> list[ForestHyperparams]:
    """Uniform draws with replacement from the per-dimension grids."""
    rng = derive_rng(seed, 0xCA9D)
    out = []
    for i in range(iterations):
        out.append(
            ForestHyperparams(
                n_trees=int(rng.choice(grids["n_trees"])),
                max_depth=int(rng.choice(grids["max_depth"])),
                min_samples_leaf=int(rng.choice(grids["min_samples_leaf"])),
                n_neighbors=int(rng.choice(grids["n_neighbors"])),
                seed=derive_seed(seed, 1, i),
            )
        )
    return out


def cross_validate(
    X: np.ndarray,
    y: np.ndarray,
    hp: ForestHyperparams,
    folds: np.ndarray,
    jobs: int = 1,
) -> list[Metrics]:
    """Per-fold metrics for one hyperparameter combination."""
    out = []
    for f in range(int(folds.max()) + 1):
        val = folds == f
        model = train(X[~val], y[~val], hp, jobs=jobs)
        pred, _ = predict_batch(model, X[val])
        out.append(evaluate(y[val], pred))
    return out


def random_search(
    datasets: Mapping[int, tuple[np.ndarray, np.ndarray]],
    grids: Mapping[str, list[int]] | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    folds: int = DEFAULT_FOLDS,
    seed: int = 0,
    jobs: int = 1,
) -> SearchResult:
    """Best-F1 hyperparameters over `iterations` sampled combinations.

    `datasets` maps each candidate n_neighbors value to its (X, y)
    matrix; all matrices must describe the same rows (identical labels)
    so folds carry across. Ties in mean F1 go to the earlier candidate.
    """
    if iterations < 1:
        raise ValueError("need at least one iteration")
    grids = dict(grids or PAPER_FOREST_GRIDS)
    for n in grids["n_neighbors"]:
        if n not in datasets:
            raise ValueError(f"grid includes n_neighbors={n} but no matrix was supplied for it")
    ys = [np.asarray(xy[1]) for xy in datasets.values()]
    for other in ys[1:]:
        if other.shape != ys[0].shape or not np.array_equal(other, ys[0]):
            raise ValueError("datasets for different n must share the same rows and labels")

    fold_ids = stratified_folds(ys[0], folds, derive_seed(seed, 0xF01D5))
    candidates = sample_candidates(grids, iterations, seed)

    def run(args: tuple[int, ForestHyperparams]) -> CandidateResult:
        cid, hp = args
        X, y = datasets[hp.n_neighbors]
        return CandidateResult(cid, hp, cross_validate(X, y, hp, fold_ids))

    tasks = list(enumerate(candidates))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    best = max(results, key=lambda r: (r.mean_f1, -r.candidate_id))
    return SearchResult(best=best, candidates=results, folds=fold_ids)


def write_candidates_csv(result: SearchResult, fh: IO[str]) -> None:
    """Per-fold rows for every candidate plus mean/std summary rows."""
    w = csv.writer(fh)
    hp_fields = ["n_trees", "max_depth", "min_samples_leaf", "n_neighbors", "seed"]
    w.writerow(["candidate_id", *hp_fields, "fold", "precision", "recall", "accuracy", "f1"])
    for cand in result.candidates:
        hp_values = [getattr(cand.hp, f) for f in hp_fields]
        for f, m in enumerate(cand.fold_metrics):
            w.writerow([cand.candidate_id, *hp_values, f, m.precision, m.recall, m.accuracy, m.f1])
        summary = cand.summary()
        for stat, pick in (("mean", 0), ("std", 1)):
            w.writerow(
                [cand.candidate_id, *hp_values, stat,
                 *[summary[name][pick] for name in ("precision", "recall", "accuracy", "f1")]]
            )
