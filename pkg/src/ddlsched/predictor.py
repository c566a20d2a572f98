"""Training-iteration prediction from recurring (group, user) history."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .model import JobSpec


@dataclass(frozen=True)
class TrainingExample:
    group_id: int
    user_id: int
    iterations: int

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class ForestConfig:
    num_trees: int = 100
    min_samples_leaf: int = 1
    bootstrap: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


@dataclass
class Tree:
    # parallel arrays; feature == -1 marks a leaf
    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[float] = field(default_factory=list)

    def _node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def predict_one(self, x0: float, x1: float) -> float:
        i = 0
        feat, thr = self.feature, self.threshold
        while feat[i] >= 0:
            xv = x0 if feat[i] == 0 else x1
            i = self.left[i] if xv <= thr[i] else self.right[i]
        return self.value[i]

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            i, d = stack.pop()
            best = max(best, d)
            if self.feature[i] >= 0:
                stack.append((self.left[i], d + 1))
                stack.append((self.right[i], d + 1))
        return best

    @property
    def num_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)


def grow_tree(X: np.ndarray, y: np.ndarray, min_leaf: int) -> Tree:
    """Axis-aligned regression tree minimising summed child squared error."""
    tree = Tree()
    root = tree._node()
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        ys = y[idx]
        tree.value[node] = float(ys.mean())
        if len(idx) < 2 * min_leaf or ys.max() == ys.min():
            continue
        best = None  # (proxy, feature, threshold, left idx, right idx)
        for f in range(X.shape[1]):
            order = idx[np.argsort(X[idx, f], kind="stable")]
            xs = X[order, f]
            proxy, pos = kernels.best_split(xs, y[order], min_leaf)
            if pos < 0:
                continue
            if best is None or proxy > best[0]:
                thr = 0.5 * (xs[pos - 1] + xs[pos])
                best = (proxy, f, thr, order[:pos], order[pos:])
        if best is None:
            continue
        _, f, thr, li, ri = best
        tree.feature[node] = f
        tree.threshold[node] = float(thr)
        left = tree._node()
        right = tree._node()
        tree.left[node] = left
        tree.right[node] = right
        stack.append((right, ri))
        stack.append((left, li))
    return tree


@dataclass
class PredictionModel:
    trees: List[Tree]
    group_codes: Dict[int, int]
    user_codes: Dict[int, int]

    def encode(self, group_id: int, user_id: int) -> Tuple[float, float]:
        return float(self.group_codes[group_id]), float(self.user_codes.get(user_id, -1))

    def summary(self) -> str:
        if not self.trees:
            return "empty forest (predicts 0 everywhere)\n"
        depths = [t.depth() for t in self.trees]
        leaves = [t.num_leaves for t in self.trees]
        return (f"trees: {len(self.trees)}\n"
                f"groups seen: {len(self.group_codes)}\n"
                f"users seen: {len(self.user_codes)}\n"
                f"depth min/mean/max: {min(depths)}/{np.mean(depths):.1f}/{max(depths)}\n"
                f"leaves min/mean/max: {min(leaves)}/{np.mean(leaves):.1f}/{max(leaves)}\n")


def _codes(values: Iterable[int]) -> Dict[int, int]:
    codes: Dict[int, int] = {}
    for v in values:
        if v not in codes:
            codes[v] = len(codes)
    return codes


def fit(examples: Sequence[TrainingExample], config: ForestConfig = ForestConfig()) -> PredictionModel:
    if not examples:
        return PredictionModel([], {}, {})
    groups = _codes(e.group_id for e in examples)
    users = _codes(e.user_id for e in examples)
    X = np.array([[groups[e.group_id], users[e.user_id]] for e in examples], dtype=np.float64)
    y = np.array([e.iterations for e in examples], dtype=np.float64)
    rng = np.random.default_rng(config.rng_seed)
    n = len(y)
    trees = []
    for _ in range(config.num_trees):
        if config.bootstrap:
            sample = rng.integers(0, n, size=n)
            trees.append(grow_tree(X[sample], y[sample], config.min_samples_leaf))
        else:
            trees.append(grow_tree(X, y, config.min_samples_leaf))
    return PredictionModel(trees, groups, users)


def predict(model: PredictionModel, group_id: int, user_id: int) -> int:
    if group_id not in model.group_codes:
        return 0
    x0, x1 = model.encode(group_id, user_id)
    mean = sum(t.predict_one(x0, x1) for t in model.trees) / len(model.trees)
    return max(0, round_half_up(mean))


def prediction_errors(pairs: Iterable[Tuple[int, int]]) -> Tuple[float, float]:
    """Total and average absolute error over (true, predicted) pairs."""
    pairs = list(pairs)
    total = float(sum(abs(n - p) for n, p in pairs))
    return total, (total / len(pairs) if pairs else 0.0)


class Predictor:
    """Interface used by the simulator: predict at arrival, observe at completion."""

    name = "base"

    def predict_job(self, job: JobSpec) -> int:
        raise NotImplementedError

    def observe(self, job: JobSpec) -> None:
        pass


class ZeroPredictor(Predictor):
    name = "zero"

    def predict_job(self, job):
        return 0


class PerfectPredictor(Predictor):
    name = "perfect"

    def predict_job(self, job):
        return job.iterations


class _GroupHistory(Predictor):
    def __init__(self, history: Iterable[TrainingExample] = (), online: bool = True):
        self.online = online
        self._hist: Dict[int, List[int]] = {}
        for e in history:
            self._hist.setdefault(e.group_id, []).append(e.iterations)

    def observe(self, job):
        if self.online:
            self._hist.setdefault(job.group_id, []).append(job.iterations)

    def _stat(self, values: List[int]) -> float:
        raise NotImplementedError

    def predict_group(self, group_id: int) -> int:
        values = self._hist.get(group_id)
        if not values:
            return 0
        return round_half_up(self._stat(values))

    def predict_job(self, job):
        return self.predict_group(job.group_id)


class GroupMeanPredictor(_GroupHistory):
    name = "mean"

    def _stat(self, values):
        return sum(values) / len(values)


class GroupMedianPredictor(_GroupHistory):
    name = "median"

    def _stat(self, values):
        return statistics.median(values)


class ForestPredictor(Predictor):
    """Random forest on (group, user); optionally refit every ``refit_every`` completions."""

    name = "forest"

    def __init__(self, history: Iterable[TrainingExample] = (),
                 config: ForestConfig = ForestConfig(), refit_every: Optional[int] = None,
                 model: Optional[PredictionModel] = None):
        self.config = config
        self.history = list(history)
        self.refit_every = refit_every
        self._since_fit = 0
        # a model already fitted on ``history`` can be passed in to skip refitting
        self.model = model if model is not None else fit(self.history, config)

    def observe(self, job):
        if not self.refit_every:
            return
        self.history.append(TrainingExample(job.group_id, job.user_id, job.iterations))
        self._since_fit += 1
        if self._since_fit >= self.refit_every:
            self.model = fit(self.history, self.config)
            self._since_fit = 0

    def predict_job(self, job):
        return predict(self.model, job.group_id, job.user_id)


class FixedPredictor(Predictor):
    """Predictions supplied up front, keyed by job id (tests, replay)."""

    name = "fixed"

    def __init__(self, predictions: Dict[int, int]):
        self.predictions = dict(predictions)

    def predict_job(self, job):
        return int(self.predictions[job.job_id])


PREDICTORS = {
    "zero": ZeroPredictor,
    "perfect": PerfectPredictor,
    "mean": GroupMeanPredictor,
    "median": GroupMedianPredictor,
    "forest": ForestPredictor,
}


def examples_from_jobs(jobs: Iterable[JobSpec]) -> List[TrainingExample]:
    return [TrainingExample(j.group_id, j.user_id, j.iterations) for j in jobs]
