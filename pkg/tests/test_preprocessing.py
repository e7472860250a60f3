import math

import numpy as np
import pytest

from datasets import NEGATIVE, Dataset, load_keel_dir, stratified_folds
from preprocessing import apply_edit, enn_edit


def line_dataset(values, labels):
    return Dataset("line", np.array(values, dtype=float).reshape(-1, 1), np.array(labels), ["x"])


def test_lone_negative_removed_deep_negative_kept():
    values = [0.0, 0.1, 0.2, 0.3, 0.15, 10.0, 11.0, 12.0, 13.0, 14.0]
    labels = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    dsel = line_dataset(values, labels)
    result = enn_edit(dsel)
    assert result.removed_count == 1
    assert 4 not in result.kept_indices.tolist()
    assert result.kept_indices.tolist() == [0, 1, 2, 3, 5, 6, 7, 8, 9]

    edited = apply_edit(dsel, result)
    assert edited.n_positive == dsel.n_positive
    assert edited.n_negative == 5


def brute_force_marks(features, labels, k=3):
    marks = []
    for i, row in enumerate(features):
        if labels[i] != 0:
            marks.append(False)
            continue
        others = []
        for j, other in enumerate(features):
            if j == i:
                continue
            total = 0.0
            for a, b in zip(row, other):
                total += (a - b) * (a - b)
            others.append((math.sqrt(total), j))
        others.sort()
        positives = sum(1 for _, j in others[:k] if labels[j] == 1)
        marks.append(positives >= 2)
    return marks


@pytest.mark.parametrize("seed", range(10))
def test_marks_match_recount(blobs, seed):
    dsel = blobs(seed=seed, n_pos=20, n_neg=60, shift=0.7)
    marks = brute_force_marks(dsel.features.tolist(), dsel.labels.tolist())
    result = enn_edit(dsel)
    assert result.kept_indices.tolist() == [i for i, marked in enumerate(marks) if not marked]
    assert result.removed_count == sum(marks)
    assert result.removed_count <= dsel.n_negative
    assert apply_edit(dsel, result).n_positive == dsel.n_positive


def test_losing_negative_class_rejected():
    dsel = line_dataset([0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.5, 3.5], [1, 1, 1, 1, 1, 1, 0, 0])
    with pytest.raises(ValueError):
        enn_edit(dsel)


@pytest.mark.parametrize("values, labels", [
    ([0.0, 1.0, 2.0], [1, 0, 0]),
    ([0.0, 1.0, 2.0, 3.0, 4.0], [0, 0, 0, 0, 0]),
])
def test_preconditions(values, labels):
    with pytest.raises(ValueError):
        enn_edit(line_dataset(values, labels))


SMOKE_CORPUS = ["ecoli-0_vs_1", "shuttle-c2-vs-c4", "glass1", "yeast4", "glass2", "glass-0-1-5_vs_2"]


@pytest.mark.parametrize("name", SMOKE_CORPUS)
def test_enn_on_keel_corpus_touches_only_negatives(keel_root, name):
    try:
        dataset, official = load_keel_dir(keel_root, name)
    except FileNotFoundError:
        pytest.skip(f"{name} нет в {keel_root}")
    folds = official or stratified_folds(dataset, k=5, seed=0)
    # DSEL - обучающая часть фолда
    for dsel in [dataset] + [dataset.subset(fold.train_indices) for fold in folds]:
        result = enn_edit(dsel)
        removed = np.setdiff1d(np.arange(dsel.n_samples), result.kept_indices)
        assert (dsel.labels[removed] == NEGATIVE).all()
        edited = apply_edit(dsel, result)
        assert edited.n_positive == dsel.n_positive
        assert edited.has_both_classes()
        assert result.removed_count == removed.size
