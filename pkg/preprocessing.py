import logging
from dataclasses import dataclass

import numpy as np

from datasets import NEGATIVE, POSITIVE, Dataset
from neighborhood import loo_neighbors

logger = logging.getLogger(__name__)

DEFAULT_ENN_K = 3


@dataclass(frozen=True, eq=False)
class EditResult:
    kept_indices: np.ndarray
    removed_count: int


def enn_edit(dsel: Dataset, k: int = DEFAULT_ENN_K) -> EditResult:
    """
    Edited Nearest Neighbors только для мажоритарного класса.
    Один проход по исходному набору: negative-образец, у которого большинство из k соседей
    (без него самого) - positive, помечается; все помеченные удаляются разом.
    """
    if dsel.n_samples <= k:
        raise ValueError(f"ENN: N={dsel.n_samples} должно быть больше k={k}")
    if not dsel.has_both_classes():
        raise ValueError("ENN: нужны образцы обоих классов")

    labels = dsel.labels
    neighbors = loo_neighbors(dsel.features, k)
    positive_neighbors = np.count_nonzero(labels[neighbors] == POSITIVE, axis=1)
    marked = (labels == NEGATIVE) & (2 * positive_neighbors > k)

    kept = np.flatnonzero(~marked)
    if not np.any(labels[kept] == NEGATIVE):
        raise ValueError("ENN удалил бы весь негативный класс")

    removed = int(np.count_nonzero(marked))
    logger.info(f"ENN на {dsel.name}: удалено {removed} из {dsel.n_negative} негативных образцов")
    return EditResult(kept_indices=kept, removed_count=removed)


def apply_edit(dsel: Dataset, result: EditResult) -> Dataset:
    return dsel.subset(result.kept_indices)
