import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


# Регион компетентности: соседи запроса по возрастанию расстояния
@dataclass(frozen=True)
class RegionOfCompetence:
    indices: Tuple[int, ...]
    distances: Tuple[float, ...]
    query: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, dsel_index: int) -> bool:
        return dsel_index in self.indices

    @property
    def members(self) -> List[Tuple[int, float]]:
        return list(zip(self.indices, self.distances))

    def removal_order_by_distance(self) -> List[int]:
        """Полный порядок удаления "сначала самый дальний" (как в KNORA-E)."""
        return list(reversed(self.indices))


def _as_features(dsel: Any) -> np.ndarray:
    # Принимаем как Dataset, так и голую матрицу признаков
    features = getattr(dsel, "features", dsel)
    return np.asarray(features, dtype=np.float64)


# Единое выражение расстояния: на нём держатся симметрия и побитовое совпадение.
# Квадраты складываются по признакам строго слева направо.
def distance_row(features: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = features - query
    total = np.zeros(diff.shape[0], dtype=np.float64)
    for j in range(diff.shape[1]):
        total += diff[:, j] * diff[:, j]
    return np.sqrt(total)


def knn(query, dsel, k: int, exclude: Optional[int] = None) -> RegionOfCompetence:
    features = _as_features(dsel)
    query = np.asarray(query, dtype=np.float64)
    n_samples = features.shape[0]

    if query.ndim != 1 or query.shape[0] != features.shape[1]:
        raise ValueError(f"Размерность запроса {query.shape} не совпадает с числом признаков {features.shape[1]}")

    available = n_samples - (1 if exclude is not None else 0)
    if k < 0 or k > available:
        raise ValueError(f"k={k} вне допустимого диапазона [0, {available}]")

    distances = distance_row(features, query)
    index = np.arange(n_samples)
    # Сортировка по расстоянию, при равенстве - по меньшему индексу
    order = np.lexsort((index, distances))
    if exclude is not None:
        order = order[order != exclude]
    order = order[:k]

    return RegionOfCompetence(
        indices=tuple(int(i) for i in order),
        distances=tuple(float(distances[i]) for i in order),
        query=query,
    )


def remove_member(roc: RegionOfCompetence, dsel_index: int) -> RegionOfCompetence:
    if dsel_index not in roc.indices:
        raise ValueError(f"Образец {dsel_index} отсутствует в регионе компетентности")

    position = roc.indices.index(dsel_index)
    return RegionOfCompetence(
        indices=roc.indices[:position] + roc.indices[position + 1:],
        distances=roc.distances[:position] + roc.distances[position + 1:],
        query=roc.query,
    )


def remove_furthest(roc: RegionOfCompetence) -> RegionOfCompetence:
    if len(roc) == 0:
        raise ValueError("Регион компетентности пуст")
    # Последний элемент - самый дальний (при равенстве расстояний - с большим индексом)
    return RegionOfCompetence(indices=roc.indices[:-1], distances=roc.distances[:-1], query=roc.query)


# Соседи каждого образца без него самого (leave-one-out)
def loo_neighbors(dsel, k: int) -> np.ndarray:
    features = _as_features(dsel)
    n_samples = features.shape[0]
    if k >= n_samples:
        raise ValueError(f"Для k={k} нужно больше {k} образцов, получено {n_samples}")

    neighbors = np.empty((n_samples, k), dtype=np.int64)
    for i in range(n_samples):
        neighbors[i] = knn(features[i], features, k, exclude=i).indices
    return neighbors
