import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from datasets import NEGATIVE, POSITIVE
from hardness import HardnessProfile, Measure
from neighborhood import RegionOfCompetence, knn, remove_member

logger = logging.getLogger(__name__)

DEFAULT_ROC_SIZE = 7


class Technique(str, Enum):
    KNORA_E = "KNORA-E"
    KNORA_U = "KNORA-U"
    KNORA_B = "KNORA-B"
    KNORA_BI = "KNORA-BI"
    PROPOSED = "PROPOSED"

    @classmethod
    def parse(cls, value: str) -> "Technique":
        normalized = str(value).strip().upper().replace("_", "-")
        for technique in cls:
            if technique.value == normalized:
                return technique
        if normalized in ("PROP", "PROPOSED"):
            return cls.PROPOSED
        raise ValueError(f"Неизвестная техника: {value!r}")


@dataclass(frozen=True)
class SelectorConfig:
    technique: Technique
    k: int = DEFAULT_ROC_SIZE
    measure: Optional[Measure] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"Размер региона компетентности должен быть >= 1, получено {self.k}")
        if self.technique is Technique.PROPOSED and self.measure is None:
            raise ValueError("Для PROPOSED нужна мера сложности")
        if self.technique is not Technique.PROPOSED and self.measure is not None:
            raise ValueError(f"{self.technique.value} не использует меру сложности")

    @property
    def label(self) -> str:
        if self.technique is Technique.PROPOSED:
            return f"PROP-{self.measure.value}"
        return self.technique.value

    @classmethod
    def parse(cls, value: Union[str, Dict], default_k: int = DEFAULT_ROC_SIZE) -> "SelectorConfig":
        """
        Принимает "KNORA-E", "PROP-LSCi" / "PROPOSED:KDN" или
        {"technique": "PROPOSED", "measure": "LSCi", "k": 7}.
        """
        if isinstance(value, dict):
            technique = Technique.parse(value["technique"])
            measure = value.get("measure")
            return cls(
                technique=technique,
                k=int(value.get("k", default_k)),
                measure=Measure.parse(measure) if measure is not None else None,
            )

        text = str(value).strip()
        for separator in (":", "-"):
            head, _, tail = text.partition(separator)
            if head.strip().upper() in ("PROP", "PROPOSED") and tail:
                return cls(technique=Technique.PROPOSED, k=default_k, measure=Measure.parse(tail))
        return cls(technique=Technique.parse(text), k=default_k)


@dataclass(frozen=True, eq=False)
class SelectionResult:
    selected: np.ndarray
    removal_trace: List[int]
    fallback_used: bool
    region: Optional[RegionOfCompetence] = None
    # Голоса KNORA-U, выровнены с selected; для остальных техник - None (по одному голосу)
    weights: Optional[np.ndarray] = None


# Матрица (N, M): член j верно классифицирует образец DSEL i
def oracle_matrix(pool, dsel) -> np.ndarray:
    return pool.predict(dsel.features) == np.asarray(dsel.labels)[:, None]


def _hits(pool, dsel, hits: Optional[np.ndarray]) -> np.ndarray:
    return oracle_matrix(pool, dsel) if hits is None else hits


def _oracles_from_hits(hits: np.ndarray, roc: RegionOfCompetence) -> np.ndarray:
    if len(roc) == 0:
        # Квантор "для всех" над пустым регионом истинен для каждого члена
        return np.arange(hits.shape[1])
    return np.flatnonzero(hits[list(roc.indices)].all(axis=0))


def local_oracles(pool, dsel, roc: RegionOfCompetence, hits: Optional[np.ndarray] = None) -> np.ndarray:
    return _oracles_from_hits(_hits(pool, dsel, hits), roc)


VictimRule = Callable[[RegionOfCompetence], Optional[int]]


def _furthest(roc: RegionOfCompetence) -> Optional[int]:
    return roc.indices[-1] if len(roc) else None


def _hardest(scores: np.ndarray) -> VictimRule:
    def rule(roc: RegionOfCompetence) -> Optional[int]:
        if len(roc) == 0:
            return None
        local = scores[list(roc.indices)]
        # Среди равных максимумов - самый дальний (последний в порядке региона)
        position = int(np.flatnonzero(local == local.max())[-1])
        return roc.indices[position]
    return rule


def _furthest_preserving(labels: np.ndarray, protected: Tuple[int, ...]) -> VictimRule:
    def rule(roc: RegionOfCompetence) -> Optional[int]:
        region_labels = labels[list(roc.indices)]
        for position in range(len(roc) - 1, -1, -1):
            label = region_labels[position]
            if label not in protected or np.count_nonzero(region_labels == label) > 1:
                return roc.indices[position]
        return None
    return rule


def _edit_region(hits: np.ndarray, roc: RegionOfCompetence, victim_rule: VictimRule) -> SelectionResult:
    trace: List[int] = []
    oracles = _oracles_from_hits(hits, roc)
    while oracles.size == 0:
        victim = victim_rule(roc)
        if victim is None:
            # Удалять больше нечего (все оставшиеся защищены) - берём весь пул
            return SelectionResult(np.arange(hits.shape[1]), trace, True, roc)
        roc = remove_member(roc, victim)
        trace.append(victim)
        oracles = _oracles_from_hits(hits, roc)

    return SelectionResult(oracles, trace, len(roc) == 0, roc)


def _region(dsel, query, k: int) -> RegionOfCompetence:
    if k > dsel.n_samples:
        raise ValueError(f"k={k} больше размера DSEL ({dsel.n_samples})")
    return knn(query, dsel, k)


def select_knora_e(pool, dsel, query, k: int = DEFAULT_ROC_SIZE, hits: Optional[np.ndarray] = None) -> SelectionResult:
    return _edit_region(_hits(pool, dsel, hits), _region(dsel, query, k), _furthest)


def select_proposed(pool, dsel, query, k: int, profile: HardnessProfile,
                    hits: Optional[np.ndarray] = None) -> SelectionResult:
    if len(profile) != dsel.n_samples:
        raise ValueError(f"Профиль сложности ({len(profile)}) не выровнен с DSEL ({dsel.n_samples})")
    return _edit_region(_hits(pool, dsel, hits), _region(dsel, query, k), _hardest(profile.scores))


def select_knora_b(pool, dsel, query, k: int = DEFAULT_ROC_SIZE, hits: Optional[np.ndarray] = None) -> SelectionResult:
    rule = _furthest_preserving(np.asarray(dsel.labels), (POSITIVE, NEGATIVE))
    return _edit_region(_hits(pool, dsel, hits), _region(dsel, query, k), rule)


def select_knora_bi(pool, dsel, query, k: int = DEFAULT_ROC_SIZE, hits: Optional[np.ndarray] = None) -> SelectionResult:
    rule = _furthest_preserving(np.asarray(dsel.labels), (POSITIVE,))
    return _edit_region(_hits(pool, dsel, hits), _region(dsel, query, k), rule)


def select_knora_u(pool, dsel, query, k: int = DEFAULT_ROC_SIZE, hits: Optional[np.ndarray] = None) -> SelectionResult:
    hits = _hits(pool, dsel, hits)
    roc = _region(dsel, query, k)
    votes = hits[list(roc.indices)].sum(axis=0).astype(np.int64)
    selected = np.flatnonzero(votes)
    if selected.size == 0:
        return SelectionResult(np.arange(hits.shape[1]), [], True, roc, np.ones(hits.shape[1], dtype=np.int64))
    return SelectionResult(selected, [], False, roc, votes[selected])


def predict(pool, selection: SelectionResult, query) -> Tuple[int, float]:
    """
    Голосование выбранных членов. Ничья по голосам решается суммой сигмоид
    P(positive) против P(negative); точная ничья -> negative.
    Возвращает (метка, взвешенное среднее P(positive)).
    """
    if selection.selected.size == 0:
        raise ValueError("Пустой ансамбль")

    labels = pool.predict(query)[0][selection.selected]
    proba = pool.predict_proba(query)[0][selection.selected]
    weights = np.ones(selection.selected.size) if selection.weights is None else selection.weights.astype(np.float64)

    positive_votes = weights[labels == POSITIVE].sum()
    negative_votes = weights[labels == NEGATIVE].sum()
    positive_support = float(np.sum(weights * proba))
    negative_support = float(np.sum(weights * (1.0 - proba)))
    score = positive_support / weights.sum()

    if positive_votes != negative_votes:
        return (POSITIVE if positive_votes > negative_votes else NEGATIVE), score
    return (POSITIVE if positive_support > negative_support else NEGATIVE), score


def full_removal_order(dsel, roc: RegionOfCompetence, config: SelectorConfig,
                       profile: Optional[HardnessProfile] = None) -> List[int]:
    """Полный порядок удаления всех k членов региона (продолжаем и после нахождения оракула)."""
    labels = np.asarray(dsel.labels)
    if config.technique is Technique.PROPOSED:
        rule = _hardest(profile.scores)
    elif config.technique is Technique.KNORA_B:
        rule = _furthest_preserving(labels, (POSITIVE, NEGATIVE))
    elif config.technique is Technique.KNORA_BI:
        rule = _furthest_preserving(labels, (POSITIVE,))
    else:
        rule = _furthest

    order: List[int] = []
    while len(roc):
        victim = rule(roc)
        if victim is None:
            # Защищённые члены уходят последними, от дальнего к ближнему
            order.extend(roc.removal_order_by_distance())
            break
        roc = remove_member(roc, victim)
        order.append(victim)
    return order


class DynamicSelector:
    """Связывает пул, DSEL, конфигурацию техники и (для PROPOSED) профиль сложности."""

    def __init__(self, pool, dsel, config: SelectorConfig, profile: Optional[HardnessProfile] = None):
        if config.technique is Technique.PROPOSED:
            if profile is None:
                raise ValueError(f"{config.label}: не передан профиль сложности")
            if len(profile) != dsel.n_samples:
                raise ValueError(f"Профиль сложности ({len(profile)}) не выровнен с DSEL ({dsel.n_samples})")
        if config.k > dsel.n_samples:
            raise ValueError(f"k={config.k} больше размера DSEL ({dsel.n_samples})")

        self.pool = pool
        self.dsel = dsel
        self.config = config
        self.profile = profile
        # Матрица попаданий считается один раз на фолд
        self.hits = oracle_matrix(pool, dsel)

    def region(self, query) -> RegionOfCompetence:
        return _region(self.dsel, query, self.config.k)

    def select(self, query) -> SelectionResult:
        technique = self.config.technique
        if technique is Technique.KNORA_E:
            return select_knora_e(self.pool, self.dsel, query, self.config.k, self.hits)
        if technique is Technique.KNORA_U:
            return select_knora_u(self.pool, self.dsel, query, self.config.k, self.hits)
        if technique is Technique.KNORA_B:
            return select_knora_b(self.pool, self.dsel, query, self.config.k, self.hits)
        if technique is Technique.KNORA_BI:
            return select_knora_bi(self.pool, self.dsel, query, self.config.k, self.hits)
        return select_proposed(self.pool, self.dsel, query, self.config.k, self.profile, self.hits)

    def predict(self, query) -> Tuple[int, float, SelectionResult]:
        selection = self.select(query)
        label, score = predict(self.pool, selection, query)
        return label, score, selection

    def removal_order(self, query) -> List[int]:
        return full_removal_order(self.dsel, self.region(query), self.config, self.profile)


def trace_line(query_id: int, technique: str, selection: SelectionResult, **context) -> str:
    # context - привязка к ячейке эксперимента (dataset, fold, seed, enn)
    return json.dumps({
        **context,
        "query_id": int(query_id),
        "technique": technique,
        "removal_trace": [int(i) for i in selection.removal_trace],
        "selected_size": int(selection.selected.size),
        "fallback": bool(selection.fallback_used),
    }, ensure_ascii=False)
