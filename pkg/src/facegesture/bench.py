"""Synthetic benchmark comparing the four distance measures."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .classifier import TrainConfig, classify_coords, train
from .imgio import LabeledDataset, synth_dataset
from .metrics import METRICS


@dataclass(frozen=True)
class BenchRow:
    metric: str
    mean_accuracy: float
    stddev: float
    accuracies: tuple[float, ...]


def split_per_class(data: LabeledDataset, n_train: int) -> tuple[LabeledDataset, LabeledDataset]:
    """First ``n_train`` images of each class for training, the rest for testing."""
    seen: dict[str, int] = {}
    tr, te = [], []
    for label, img in data.items:
        i = seen.get(label, 0)
        seen[label] = i + 1
        (tr if i < n_train else te).append((label, img))
    return LabeledDataset(tuple(tr)), LabeledDataset(tuple(te))


def accuracies_for_seed(classes: int, n_train: int, n_test: int, width: int, height: int,
                        sigma: float, seed: int, lam: float = 0.1,
                        fraction: float | None = None) -> dict[str, float]:
    data = synth_dataset(classes, n_train + n_test, width, height, sigma, seed)
    train_set, test_set = split_per_class(data, n_train)
    base = train(train_set, TrainConfig(fraction=fraction, lam=lam))
    coords = [(lbl, base.embed(img)) for lbl, img in test_set.items]
    out = {}
    for metric in METRICS:
        model = dataclasses.replace(base, metric=metric)
        hits = sum(classify_coords(model, y).label == lbl for lbl, y in coords)
        out[metric] = hits / len(coords)
    return out


def run_benchmark(classes: int = 5, per_class: int = 20, test_per_class: int | None = None,
                  width: int = 32, height: int = 32, sigma: float = 0.15,
                  seeds=(1, 2, 3, 4, 5), lam: float = 0.1,
                  fraction: float | None = None) -> list[BenchRow]:
    """Mean and population std of test accuracy per metric across seeds."""
    n_test = per_class if test_per_class is None else test_per_class
    per_seed = [accuracies_for_seed(classes, per_class, n_test, width, height, sigma, s, lam, fraction)
                for s in seeds]
    rows = []
    for metric in METRICS:
        accs = np.array([r[metric] for r in per_seed])
        rows.append(BenchRow(metric, float(accs.mean()), float(accs.std()), tuple(accs.tolist())))
    return rows


def ordering_holds(rows: list[BenchRow]) -> bool:
    by = {r.metric: r.mean_accuracy for r in rows}
    return by["md"] >= by["ed"]
