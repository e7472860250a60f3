import os
import sys
from typing import Optional

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from datasets import NEGATIVE, POSITIVE, Dataset  # noqa: E402


def make_blobs(seed: int, n_pos: int, n_neg: int, n_features: int = 2, shift: float = 1.5, name: str = "blobs",
               decimals: Optional[int] = 1) -> Dataset:
    rng = np.random.default_rng(seed)
    positives = rng.normal(loc=shift, scale=1.0, size=(n_pos, n_features))
    negatives = rng.normal(loc=0.0, scale=1.0, size=(n_neg, n_features))
    # Округление даёт равные расстояния и повторы - проверяем правила разрешения ничьих
    features = np.vstack([positives, negatives])
    if decimals is not None:
        features = np.round(features, decimals)
    labels = np.array([POSITIVE] * n_pos + [NEGATIVE] * n_neg)
    return Dataset(name=name, features=features, labels=labels,
                   feature_names=[f"x{j}" for j in range(n_features)])


def keel_text(dataset: Dataset, rows=None) -> str:
    rows = range(dataset.n_samples) if rows is None else rows
    lines = [f"@relation {dataset.name}"]
    for name in dataset.feature_names:
        lines.append(f"@attribute {name} real [-100.0, 100.0]")
    lines.append("@attribute Class {positive, negative}")
    lines.append(f"@inputs {', '.join(dataset.feature_names)}")
    lines.append("@outputs Class")
    lines.append("@data")
    for i in rows:
        values = ", ".join(repr(float(v)) for v in dataset.features[i])
        label = "positive" if dataset.labels[i] == POSITIVE else "negative"
        lines.append(f"{values}, {label}")
    return "\n".join(lines) + "\n"


def write_keel_dir(base_dir, dataset: Dataset, folds=None, full: bool = True):
    folder = os.path.join(str(base_dir), dataset.name)
    os.makedirs(folder, exist_ok=True)
    if full:
        with open(os.path.join(folder, f"{dataset.name}.dat"), "w", encoding="utf-8") as stream:
            stream.write(keel_text(dataset))
    for i, (train_rows, test_rows) in enumerate(folds or [], start=1):
        with open(os.path.join(folder, f"{dataset.name}-5-{i}tra.dat"), "w", encoding="utf-8") as stream:
            stream.write(keel_text(dataset, train_rows))
        with open(os.path.join(folder, f"{dataset.name}-5-{i}tst.dat"), "w", encoding="utf-8") as stream:
            stream.write(keel_text(dataset, test_rows))
    return folder


@pytest.fixture
def blobs():
    return make_blobs


@pytest.fixture
def keel():
    return keel_text


@pytest.fixture
def keel_dir():
    return write_keel_dir


@pytest.fixture
def small_dataset() -> Dataset:
    return make_blobs(seed=7, n_pos=12, n_neg=36, name="small")


@pytest.fixture
def keel_root():
    path = os.getenv("DES_KEEL_DIR")
    if not path or not os.path.isdir(path):
        pytest.skip("DES_KEEL_DIR не задан - тесты на реальных наборах KEEL пропущены")
    return path
