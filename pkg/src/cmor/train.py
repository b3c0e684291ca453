"""Readout training: fit a hyperplane on CA features, then map it onto device levels.

The fitting step is ordinary linear SVM training (hinge loss + L2, full-batch
subgradient descent). Programming it into hardware is the constrained part:
conductances are nonnegative and quantized, so negative weights are dropped
and the bias is replaced by a threshold chosen from the simulated conductances.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cmor.bank import (
    DeviceParams,
    classify_value,
    new_bank,
    program,
    read_conductance_batch,
    round_sig,
)
from cmor.eca import LatticeState, Rule, run_reservoir_batch

log = logging.getLogger(__name__)


class SeparabilityWarning(UserWarning):
    """Quantized plan cannot separate the training classes with any threshold."""


@dataclass(frozen=True)
class LabeledDataset:
    items: tuple[tuple[LatticeState, int], ...]

    def __post_init__(self):
        items = tuple(self.items)
        if items:
            n = items[0][0].n
            for state, label in items:
                if state.n != n:
                    raise ValueError("all dataset inputs must share one lattice size")
                if label not in (-1, 1):
                    raise ValueError(f"labels must be -1 or +1, got {label}")
        object.__setattr__(self, "items", items)

    @property
    def n(self) -> int:
        return self.items[0][0].n

    @property
    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.items], dtype=np.int64)

    def input_matrix(self) -> np.ndarray:
        return np.array([s.bits for s, _ in self.items], dtype=np.uint8)

    def __len__(self):
        return len(self.items)

    @classmethod
    def from_arrays(cls, bits, labels) -> "LabeledDataset":
        return cls(tuple((LatticeState(tuple(b)), int(y)) for b, y in zip(bits, labels)))


def parse_dataset(text: str) -> LabeledDataset:
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("+1", "-1", "1"):
            raise ValueError(f"line {lineno}: expected '<bits> <+1|-1>', got {raw!r}")
        try:
            state = LatticeState.from_string(parts[0])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        items.append((state, int(parts[1])))
    return LabeledDataset(tuple(items))


def format_dataset(dataset: LabeledDataset) -> str:
    return "".join(f"{s.to_string()} {'+1' if y > 0 else '-1'}\n" for s, y in dataset.items)


def load_dataset(path) -> LabeledDataset:
    return parse_dataset(Path(path).read_text())


def save_dataset(dataset: LabeledDataset, path) -> None:
    Path(path).write_text(format_dataset(dataset))


def featurize(dataset: LabeledDataset, rule: Rule, m: int) -> np.ndarray:
    """Flattened reservoir traces, one row per item, iteration-major."""
    if len(dataset) == 0:
        raise ValueError("cannot featurize an empty dataset")
    traces = run_reservoir_batch(dataset.input_matrix(), rule, m)
    return traces.reshape(len(dataset), -1)


@dataclass(frozen=True)
class TrainHyperparams:
    epochs: int = 5000
    learning_rate: float = 0.1
    l2: float = 0.01
    tol: float = 1e-9
    patience: int = 200
    nonnegative: bool = False


@dataclass(frozen=True)
class LinearModel:
    w: np.ndarray
    b: float
    converged: bool
    epochs_run: int
    objective: float

    def decision(self, features) -> np.ndarray:
        return np.asarray(features, dtype=float) @ self.w - self.b

    def accuracy(self, features, labels) -> float:
        pred = np.where(self.decision(features) > 0, 1, -1)
        return float(np.mean(pred == np.asarray(labels)))


def _objective(w, b, x, y, l2):
    margins = y * (x @ w - b)
    return 0.5 * l2 * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def train_linear(features, labels, hyperparams: TrainHyperparams | None = None) -> LinearModel:
    """Minimize ``l2/2 |w|^2 + mean(max(0, 1 - y (w.x - b)))`` by subgradient descent.

    Returns the best iterate seen. ``converged`` is set when the objective stops
    improving by more than ``tol`` for ``patience`` consecutive epochs. With
    ``nonnegative`` set, weights are projected onto w >= 0 after every step.
    """
    hp = hyperparams or TrainHyperparams()
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("features must be (items, dims) matching labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    k, d = x.shape
    w = np.zeros(d)
    b = 0.0
    best = (_objective(w, b, x, y, hp.l2), w.copy(), b)
    stale = 0
    converged = False
    epoch = 0
    for epoch in range(1, hp.epochs + 1):
        active = y * (x @ w - b) < 1.0
        grad_w = hp.l2 * w - (y[active] @ x[active]) / k
        grad_b = float(np.sum(y[active])) / k
        w = w - hp.learning_rate * grad_w
        if hp.nonnegative:
            w = np.maximum(w, 0.0)
        b = b - hp.learning_rate * grad_b
        obj = _objective(w, b, x, y, hp.l2)
        if obj < best[0] - hp.tol:
            best = (obj, w.copy(), b)
            stale = 0
        else:
            stale += 1
            if stale >= hp.patience:
                converged = True
                break
    if not converged:
        log.info("subgradient descent used its %d-epoch budget", hp.epochs)
    return LinearModel(w=best[1], b=best[2], converged=converged, epochs_run=epoch, objective=best[0])


@dataclass(frozen=True)
class ProgrammingPlan:
    writes: tuple[tuple[int, int, int], ...]
    g_b: float
    achieved_accuracy: float

    def __post_init__(self):
        writes = tuple(sorted((int(i), int(c), int(lv)) for i, c, lv in self.writes))
        addrs = [(i, c) for i, c, _ in writes]
        if len(set(addrs)) != len(addrs):
            raise ValueError("plan writes contain a duplicate address")
        if self.g_b < 0:
            raise ValueError("plan threshold must be >= 0")
        object.__setattr__(self, "writes", writes)

    def level_grid(self, n: int, m: int) -> np.ndarray:
        grid = np.zeros((m, n), dtype=np.int64)
        for i, c, lv in self.writes:
            grid[i - 1, c - 1] = lv
        return grid


def apply_plan(plan: ProgrammingPlan, n: int, m: int, params: DeviceParams):
    """A fresh bank built from ``params`` (and its seed) with the plan written in."""
    bank = new_bank(n, m, params, plan.g_b)
    for i, c, lv in plan.writes:
        program(bank, (i, c), lv)
    return bank


def plan_accuracy(plan: ProgrammingPlan, features, labels, n: int, m: int, params: DeviceParams) -> float:
    bank = apply_plan(plan, n, m, params)
    g = read_conductance_batch(bank, np.asarray(features).reshape(-1, m, n))
    return float(np.mean(classify_value(g, plan.g_b) == np.asarray(labels)))


def _best_threshold(g: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Threshold >= 0 maximizing accuracy of ``g > threshold``; lowest threshold on ties."""
    values = np.unique(g)
    candidates = [values[0] / 2.0] if values[0] > 0 else []
    candidates += list((values[:-1] + values[1:]) / 2.0)
    candidates.append(values[-1] + max(values[-1], 1e-12))
    best_acc, best_t = -1.0, 0.0
    for t in candidates:
        acc = float(np.mean(np.where(g > t, 1, -1) == labels))
        if acc > best_acc:
            best_acc, best_t = acc, float(t)
    return best_t, best_acc


def _round_to_levels(scaled: np.ndarray, levels: np.ndarray) -> np.ndarray:
    dist = np.abs(scaled[:, None] - levels[None, :])
    # argmin picks the first (lowest) level on exact ties
    return np.argmin(dist, axis=1)


def _place_threshold(g: np.ndarray, labels: np.ndarray, top_level: float) -> tuple[float, bool]:
    """Class-gap midpoint when the classes separate, else the best-accuracy threshold."""
    pos, neg = g[labels > 0], g[labels < 0]
    if pos.size and neg.size and neg.max() < pos.min():
        return (neg.max() + pos.min()) / 2.0, True
    if not neg.size:
        return pos.min() / 2.0, True
    if not pos.size:
        return neg.max() + top_level / 2.0, True
    return _best_threshold(g, labels)[0], False


def _level_indices(wp: np.ndarray, scale: float, levels: np.ndarray) -> np.ndarray:
    if scale <= 0:
        return np.zeros(wp.size, dtype=np.int64)
    return _round_to_levels(wp * scale, levels)


def _evaluate(grid: np.ndarray, x: np.ndarray, labels: np.ndarray, n: int, m: int, params: DeviceParams):
    writes = tuple((k // n + 1, k % n + 1, int(lv)) for k, lv in enumerate(grid) if lv > 0)
    bank = apply_plan(ProgrammingPlan(writes, 0.0, 0.0), n, m, params)
    g = read_conductance_batch(bank, x)
    g_b, separated = _place_threshold(g, labels, params.level_values[-1])
    acc = float(np.mean(classify_value(g, g_b) == labels))
    return acc, writes, float(g_b), separated


def _refine(grid: np.ndarray, x, labels, n: int, m: int, params: DeviceParams):
    """Best-improvement hill climb over single-device level changes."""
    grid = grid.copy()
    current = _evaluate(grid, x, labels, n, m, params)
    while current[0] < 1.0:
        best_move = None
        for k in range(n * m):
            for lv in range(params.n_levels):
                if lv == grid[k]:
                    continue
                trial = grid.copy()
                trial[k] = lv
                result = _evaluate(trial, x, labels, n, m, params)
                if result[0] > (best_move[0][0] if best_move else current[0]):
                    best_move = (result, k, lv)
        if best_move is None:
            break
        current = best_move[0]
        grid[best_move[1]] = best_move[2]
    return current, grid


def _prune(grid: np.ndarray, current, x, labels, n: int, m: int, params: DeviceParams):
    """Reset programmed devices to level 0, in address order, whenever accuracy does not drop."""
    grid = grid.copy()
    for k in np.flatnonzero(grid):
        trial = grid.copy()
        trial[k] = 0
        result = _evaluate(trial, x, labels, n, m, params)
        if result[0] >= current[0]:
            grid, current = trial, result
    return current


def quantize_plan(
    w,
    b: float,
    params: DeviceParams,
    features,
    labels,
    n: int,
    m: int,
    scale_search: bool = True,
    refine: bool = True,
    prune: bool = True,
) -> ProgrammingPlan:
    """Map real weights onto device levels and place the threshold.

    Negative weights are clamped to zero, the largest weight is scaled to the
    top level, and every weight is rounded to its nearest nominal level. The
    threshold is the midpoint between the highest negative-class and lowest
    positive-class conductance, simulated on a fresh bank from ``params``.
    The real bias ``b`` only matters through the weights it was trained with.

    With ``scale_search`` the other scales at which some weight crosses a
    rounding boundary are also tried; one replaces the max-to-top scaling only
    if its simulated training accuracy is strictly higher. With ``refine``, a
    plan that still misclassifies training items is then improved by greedy
    single-device level changes, again only on strict accuracy gains. With
    ``prune``, writes that training accuracy does not need are dropped last.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (n * m,):
        raise ValueError(f"weight vector must have length n*m = {n * m}")
    labels = np.asarray(labels)
    x = np.asarray(features).reshape(-1, m, n)
    levels = np.asarray(params.level_values, dtype=float)
    wp = np.clip(w, 0.0, None)
    wmax = wp.max()

    scales = [levels[-1] / wmax if wmax > 0 else 0.0]
    if scale_search and wmax > 0:
        mids = (levels[:-1] + levels[1:]) / 2.0
        positive = np.unique(wp[wp > 0])
        # just above each boundary, so that weight rounds up
        extra = np.unique((mids[None, :] / positive[:, None]).ravel()) * (1 + 1e-9)
        scales += [s for s in extra if s > 0]

    best = None
    tried = set()
    for scale in scales:
        idx = _level_indices(wp, scale, levels)
        key = idx.tobytes()
        if key in tried:
            continue
        tried.add(key)
        result = _evaluate(idx, x, labels, n, m, params)
        if best is None or result[0] > best[0][0]:
            best = (result, idx)
        if result[0] == 1.0:
            break
    result, idx = best
    if refine and result[0] < 1.0:
        result, idx = _refine(idx, x, labels, n, m, params)
    if prune:
        result = _prune(idx, result, x, labels, n, m, params)
    acc, writes, g_b, separated = result
    if not separated:
        warnings.warn(
            "classes overlap after quantization; threshold set for best training accuracy",
            SeparabilityWarning,
            stacklevel=2,
        )
    return ProgrammingPlan(writes, g_b, acc)


def train_plan(
    dataset: LabeledDataset,
    rule: Rule,
    m: int,
    params: DeviceParams,
    hyperparams: TrainHyperparams | None = None,
) -> tuple[ProgrammingPlan, LinearModel]:
    hp = dataclasses.replace(hyperparams or TrainHyperparams(), nonnegative=True)
    x = featurize(dataset, rule, m)
    model = train_linear(x, dataset.labels, hp)
    plan = quantize_plan(model.w, model.b, params, x, dataset.labels, dataset.n, m)
    return plan, model


class OracleTooLargeError(ValueError):
    pass


def exhaustive_oracle(
    dataset: LabeledDataset, rule: Rule, n: int, m: int, params: DeviceParams
) -> ProgrammingPlan:
    """Best binary programming by enumerating all 2^(n*m) level grids.

    Conductances use the ideal (variation-free) device model. Among plans of
    equal accuracy the lexicographically smallest level vector wins.
    """
    if n * m > 16:
        raise OracleTooLargeError(f"refusing to enumerate 2^{n * m} programmings (limit 2^16)")
    if dataset.n != n:
        raise ValueError(f"dataset lattice size {dataset.n} != n={n}")
    ideal = params.ideal()
    x = featurize(dataset, rule, m).astype(np.int64)
    y = dataset.labels
    g_lo = float(ideal.parasitic_enabled)
    g_hi = round_sig(ideal.level_values[1])
    # rows of `grids` enumerate in lexicographic order (device 0 is most significant)
    grids = np.array(list(itertools.product((0, 1), repeat=n * m)), dtype=np.int64)
    # integer enable counts keep equal-count items at bit-equal conductance
    n_hi = x @ grids.T  # (items, plans)
    n_lo = x.sum(axis=1, keepdims=True) - n_hi
    cond = n_hi * g_hi + n_lo * g_lo

    best_acc = np.full(grids.shape[0], -1.0)
    best_thr = np.zeros(grids.shape[0])
    order = np.argsort(cond, axis=0, kind="stable")
    sorted_g = np.take_along_axis(cond, order, axis=0)
    sorted_y = y[order]
    k = len(y)
    # threshold placed after position j: items 0..j negative, j+1.. positive
    neg_correct = np.vstack([np.zeros(grids.shape[0]), np.cumsum(sorted_y < 0, axis=0)])
    pos_correct = np.vstack([np.cumsum((sorted_y > 0)[::-1], axis=0)[::-1], np.zeros(grids.shape[0])])
    for j in range(k + 1):
        if 0 < j < k:
            valid = sorted_g[j - 1] < sorted_g[j]
            thr = (sorted_g[j - 1] + sorted_g[j]) / 2.0
        elif j == 0:
            valid = sorted_g[0] > 0
            thr = sorted_g[0] / 2.0
        else:
            valid = np.ones(grids.shape[0], dtype=bool)
            thr = sorted_g[-1] + np.maximum(sorted_g[-1], 1e-12)
        acc = (neg_correct[j] + pos_correct[j]) / k
        better = valid & (acc > best_acc)
        best_acc = np.where(better, acc, best_acc)
        best_thr = np.where(better, thr, best_thr)

    winner = int(np.argmax(best_acc))  # first maximum = lexicographically smallest
    grid = grids[winner]
    writes = tuple((d // n + 1, d % n + 1, 1) for d in range(n * m) if grid[d])
    return ProgrammingPlan(writes, float(best_thr[winner]), float(best_acc[winner]))


# text format for plans


def dumps_plan(plan: ProgrammingPlan) -> str:
    lines = [
        "# cmor programming plan",
        f"g_b={plan.g_b!r}",
        f"achieved_accuracy={plan.achieved_accuracy!r}",
        "# iteration cell level",
    ]
    lines += [f"{i} {c} {lv}" for i, c, lv in plan.writes]
    return "\n".join(lines) + "\n"


def loads_plan(text: str) -> ProgrammingPlan:
    header: dict[str, str] = {}
    writes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'iteration cell level'")
        writes.append(tuple(int(p) for p in parts))
    if "g_b" not in header:
        raise ValueError("plan file has no g_b")
    return ProgrammingPlan(tuple(writes), float(header["g_b"]), float(header.get("achieved_accuracy", "nan")))


def save_plan(plan: ProgrammingPlan, path) -> None:
    Path(path).write_text(dumps_plan(plan))


def load_plan(path) -> ProgrammingPlan:
    return loads_plan(Path(path).read_text())
