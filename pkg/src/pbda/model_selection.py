"""k-fold cross-validation, reverse (circular) validation and grid search."""

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .data_io import LabeledSample, UnlabeledSample, kfold_split
from .training import HYPERPARAMETERS, predict, train


class DegenerateSelfLabelingWarning(UserWarning):
    """The intermediate classifier gave every target point the same label."""


def _strip(target):
    # learners only ever see target features
    if target is None:
        return None
    return target.unlabeled() if isinstance(target, LabeledSample) else target


def _error(model, sample: LabeledSample) -> float:
    return float(np.mean(predict(model, sample) != sample.labels))


def cross_validate(algorithm, source: LabeledSample, hyperparameters, k: int = 5, seed: int = 0,
                   target: Optional[UnlabeledSample] = None, kernel=None, settings=None,
                   convex: bool = True) -> float:
    """Mean held-out source 0-1 error over k folds.

    Adaptation algorithms also get a target sample, partitioned the same way so
    that paired learners see equally sized domains.
    """
    folds = kfold_split(source, k, seed)
    target = _strip(target)
    tfolds = kfold_split(target, k, seed + 1) if target is not None else None
    errs = []
    for i, (train_idx, test_idx) in enumerate(folds):
        tgt = target.subset(tfolds[i][0]) if target is not None else None
        model = train(algorithm, source.subset(train_idx), tgt, hyperparameters, kernel, settings,
                      convex)
        errs.append(_error(model, source.subset(test_idx)))
    return float(np.mean(errs))


def reverse_cross_validate(algorithm, source: LabeledSample, target: UnlabeledSample,
                           hyperparameters, k: int = 5, seed: int = 0, kernel=None,
                           settings=None, convex: bool = True) -> float:
    """Mean reverse risk: source -> self-labeled target -> back to the held-out source fold."""
    if target is None:
        raise ValueError("reverse validation needs a target sample")
    target = _strip(target)
    sfolds = kfold_split(source, k, seed)
    tfolds = kfold_split(target, k, seed + 1)
    errs = []
    for i in range(k):
        s_tr, s_te = sfolds[i]
        t_tr = tfolds[i][0]
        src = source.subset(s_tr)
        tgt = target.subset(t_tr)
        forward = train(algorithm, src, tgt, hyperparameters, kernel, settings, convex)
        pseudo = predict(forward, tgt)
        if np.all(pseudo == pseudo[0]):
            warnings.warn(f"fold {i}: self-labeling produced a single class",
                          DegenerateSelfLabelingWarning, stacklevel=2)
        reverse = train(algorithm, LabeledSample(tgt.features, pseudo), src.unlabeled(),
                        hyperparameters, kernel, settings, convex)
        errs.append(_error(reverse, source.subset(s_te)))
    return float(np.mean(errs))


# --------------------------------------------------------------------------
# Grids


@dataclass(frozen=True)
class GridAxis:
    name: str
    lo: float
    hi: float
    points: int
    log: bool = True

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"axis {self.name}: min must be < max")
        if self.points < 2:
            raise ValueError(f"axis {self.name}: need at least 2 points")
        if self.log and self.lo <= 0:
            raise ValueError(f"axis {self.name}: log axis needs min > 0")

    def values(self) -> np.ndarray:
        if self.log:
            v = np.logspace(math.log10(self.lo), math.log10(self.hi), self.points)
        else:
            v = np.linspace(self.lo, self.hi, self.points)
        v[0], v[-1] = self.lo, self.hi  # exact endpoints
        return v


@dataclass(frozen=True)
class GridSpec:
    axis1: GridAxis
    axis2: Optional[GridAxis] = None

    @property
    def names(self) -> Tuple[str, ...]:
        return (self.axis1.name,) if self.axis2 is None else (self.axis1.name, self.axis2.name)

    def points(self) -> List[Tuple[float, ...]]:
        """Row-major: axis1 outer, axis2 inner."""
        if self.axis2 is None:
            return [(float(a),) for a in self.axis1.values()]
        return [(float(a), float(b)) for a in self.axis1.values() for b in self.axis2.values()]


def default_grid(algorithm: str, points: int = 20) -> GridSpec:
    """The 20 x 20 log grid: Omega or C in [0.01, 1e6], A or B in [1, 1e8]."""
    if algorithm == "pbgd3":
        return GridSpec(GridAxis("Omega", 0.01, 1e6, points))
    if algorithm == "pbda":
        return GridSpec(GridAxis("Omega", 0.01, 1e6, points), GridAxis("A", 1.0, 1e8, points))
    if algorithm == "dalc":
        return GridSpec(GridAxis("C", 0.01, 1e6, points), GridAxis("B", 1.0, 1e8, points))
    raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass
class GridResult:
    names: Tuple[str, ...]
    table: List[Tuple[Tuple[float, ...], float]]
    best: Dict[str, float]
    best_score: float

    def to_csv(self) -> str:
        lines = [",".join(self.names) + ",score"]
        for params, score in self.table:
            lines.append(",".join(f"{p:.17g}" for p in params) + f",{score:.17g}")
        return "\n".join(lines) + "\n"


def worker_count() -> int:
    cores = os.cpu_count() or 1
    env = os.environ.get("PBDA_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"PBDA_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValueError("PBDA_THREADS must be >= 1")
        return min(n, cores)
    return cores


def grid_search(algorithm, source: LabeledSample, target=None, grid: Optional[GridSpec] = None,
                k: int = 5, seed: int = 0, selection: str = "cv", kernel=None, settings=None,
                convex: bool = True, scorer: Optional[Callable] = None,
                workers: Optional[int] = None) -> GridResult:
    """Score every grid point and keep the lowest (ties: smallest parameter tuple).

    ``scorer(params_dict) -> float`` replaces the validator when given.
    """
    grid = grid or default_grid(algorithm)
    if selection not in ("cv", "reverse_cv"):
        raise ValueError(f"selection must be 'cv' or 'reverse_cv', got {selection!r}")
    if selection == "reverse_cv" and target is None:
        raise ValueError("reverse_cv selection needs a target sample")
    if scorer is None:
        needed = set(HYPERPARAMETERS[algorithm])
        if set(grid.names) != needed:
            raise ValueError(f"{algorithm} grid must cover {sorted(needed)}, got {list(grid.names)}")

        def scorer(hp):
            if selection == "cv":
                return cross_validate(algorithm, source, hp, k, seed, target, kernel, settings,
                                      convex)
            return reverse_cross_validate(algorithm, source, target, hp, k, seed, kernel,
                                          settings, convex)

    points = grid.points()
    names = grid.names

    def score(params):
        return float(scorer(dict(zip(names, params))))

    n_workers = workers or worker_count()
    if n_workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            scores = list(pool.map(score, points))  # map keeps row-major order
    else:
        scores = [score(p) for p in points]
    table = list(zip(points, scores))
    best_params, best_score = min(table, key=lambda r: (math.inf if math.isnan(r[1]) else r[1], r[0]))
    return GridResult(names, table, dict(zip(names, best_params)), best_score)
