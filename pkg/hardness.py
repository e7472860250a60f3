"""
Оценка сложности образцов DSEL (этап запоминания).

Четыре меры, все в [0, 1], больше - сложнее:
    KDN  - доля соседей другого класса среди k ближайших;
    KDNi - (KDN + e) / p_o, ограниченная f(x) = 1 - 1 / (1 + x);
    LSC  - 1 - |LS| / N;
    LSCi - 1 - |LS| / (число образцов того же класса).
LS (local set) - образцы, которые ближе к x_i, чем его ближайший враг.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from neighborhood import distance_row, knn

logger = logging.getLogger(__name__)

DEFAULT_KDN_K = 5
DEFAULT_EPSILON = 1e-3


class Measure(str, Enum):
    KDN = "KDN"
    KDNI = "KDNi"
    LSC = "LSC"
    LSCI = "LSCi"

    @classmethod
    def parse(cls, value: str) -> "Measure":
        for measure in cls:
            if measure.value.lower() == str(value).strip().lower():
                return measure
        raise ValueError(f"Неизвестная мера сложности: {value!r}")


@dataclass(frozen=True, eq=False)
class HardnessProfile:
    measure: Optional[Measure]
    scores: np.ndarray
    kdn_k: int = DEFAULT_KDN_K
    epsilon: float = DEFAULT_EPSILON

    def __len__(self) -> int:
        return self.scores.shape[0]


def _features_labels(dsel):
    return np.asarray(dsel.features, dtype=np.float64), np.asarray(dsel.labels)


def kdn(sample_index: int, dsel, k: int = DEFAULT_KDN_K) -> float:
    features, labels = _features_labels(dsel)
    if features.shape[0] <= k:
        raise ValueError(f"KDN: N={features.shape[0]} должно быть больше k={k}")
    roc = knn(features[sample_index], features, k, exclude=sample_index)
    disagreeing = int(np.count_nonzero(labels[list(roc.indices)] != labels[sample_index]))
    return disagreeing / k


def bound(x: float) -> float:
    return 1.0 - 1.0 / (1.0 + x)


def opposite_proportion(sample_index: int, dsel) -> float:
    _, labels = _features_labels(dsel)
    p_o = np.count_nonzero(labels != labels[sample_index]) / labels.shape[0]
    if p_o == 0:
        raise ValueError("KDNi: в DSEL только один класс")
    return p_o


def kdni(sample_index: int, dsel, k: int = DEFAULT_KDN_K, epsilon: float = DEFAULT_EPSILON) -> float:
    p_o = opposite_proportion(sample_index, dsel)
    return bound((kdn(sample_index, dsel, k) + epsilon) / p_o)


def local_set_size(sample_index: int, dsel) -> int:
    features, labels = _features_labels(dsel)
    distances = distance_row(features, features[sample_index])
    enemies = labels != labels[sample_index]
    if not np.any(enemies):
        raise ValueError(f"Образец {sample_index}: в DSEL нет образцов другого класса")

    nearest_enemy = distances[enemies].min()
    closer = distances < nearest_enemy
    # Сам образец в свой local set не входит
    closer[sample_index] = False
    return int(np.count_nonzero(closer))


def lsc(sample_index: int, dsel) -> float:
    n_samples = np.asarray(dsel.labels).shape[0]
    return 1.0 - local_set_size(sample_index, dsel) / n_samples


def lsci(sample_index: int, dsel) -> float:
    _, labels = _features_labels(dsel)
    same_class = int(np.count_nonzero(labels == labels[sample_index]))
    return 1.0 - local_set_size(sample_index, dsel) / same_class


def estimate_all(dsel, measure, kdn_k: int = DEFAULT_KDN_K, epsilon: float = DEFAULT_EPSILON) -> HardnessProfile:
    measure = Measure.parse(measure) if not isinstance(measure, Measure) else measure
    _, labels = _features_labels(dsel)
    n_samples = labels.shape[0]

    if measure is Measure.KDN:
        scores = [kdn(i, dsel, kdn_k) for i in range(n_samples)]
    elif measure is Measure.KDNI:
        scores = [kdni(i, dsel, kdn_k, epsilon) for i in range(n_samples)]
    elif measure is Measure.LSC:
        scores = [lsc(i, dsel) for i in range(n_samples)]
    else:
        scores = [lsci(i, dsel) for i in range(n_samples)]

    profile = HardnessProfile(measure=measure, scores=np.array(scores, dtype=np.float64), kdn_k=kdn_k, epsilon=epsilon)
    logger.debug(f"{measure.value}: средняя сложность {profile.scores.mean():.4f} на {n_samples} образцах")
    return profile


def profile_from_scores(scores: Sequence[float], measure: Optional[Measure] = None) -> HardnessProfile:
    scores = np.asarray(scores, dtype=np.float64)
    if np.any(scores < 0) or np.any(scores > 1):
        raise ValueError("Оценки сложности должны лежать в [0, 1]")
    return HardnessProfile(measure=measure, scores=scores)


def export_profile_csv(profile: HardnessProfile, labels: Sequence[int], path: str):
    if len(labels) != len(profile):
        raise ValueError(f"{len(labels)} меток на {len(profile)} оценок")
    frame = pd.DataFrame({"index": np.arange(len(profile)), "label": np.asarray(labels, dtype=np.int64), "score": profile.scores})
    frame.to_csv(path, index=False, float_format="%.17g")
