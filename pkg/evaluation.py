import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import norm, rankdata

from catalog import is_safe
from datasets import NEGATIVE, POSITIVE

logger = logging.getLogger(__name__)

METRICS = ("f1", "gmean")
EXACT_WILCOXON_MAX_N = 25
MIN_WILCOXON_N = 5


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError(f"Отрицательные значения в матрице ошибок: {self}")


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionCounts:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"{y_true.shape[0]} истинных меток на {y_pred.shape[0]} предсказаний")
    return ConfusionCounts(
        tp=int(np.count_nonzero((y_true == POSITIVE) & (y_pred == POSITIVE))),
        fp=int(np.count_nonzero((y_true == NEGATIVE) & (y_pred == POSITIVE))),
        tn=int(np.count_nonzero((y_true == NEGATIVE) & (y_pred == NEGATIVE))),
        fn=int(np.count_nonzero((y_true == POSITIVE) & (y_pred == NEGATIVE))),
    )


def f1(c: ConfusionCounts) -> float:
    denominator = 2 * c.tp + c.fp + c.fn
    # Нет ни позитивных предсказаний, ни позитивных образцов: 0 вместо NaN
    return 2 * c.tp / denominator if denominator else 0.0


def gmean(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0 or c.tn + c.fp == 0:
        raise ValueError("G-mean не определён: в тестовой части нет одного из классов")
    return math.sqrt((c.tp / (c.tp + c.fn)) * (c.tn / (c.tn + c.fp)))


@dataclass
class TechniqueScores:
    technique: str
    f1: Dict[str, float] = field(default_factory=dict)
    gmean: Dict[str, float] = field(default_factory=dict)


def scores_from_frame(frame: pd.DataFrame) -> List[TechniqueScores]:
    """Из таблицы (dataset, technique, f1, gmean) со средними по фолдам."""
    scores = []
    for technique, rows in frame.groupby("technique", sort=True):
        scores.append(TechniqueScores(
            technique=str(technique),
            f1=dict(zip(rows["dataset"], rows["f1"].astype(float))),
            gmean=dict(zip(rows["dataset"], rows["gmean"].astype(float))),
        ))
    return scores


def _pivot(scores: Sequence[TechniqueScores], metric: str) -> pd.DataFrame:
    if metric not in METRICS:
        raise ValueError(f"Неизвестная метрика {metric!r}")
    if not scores:
        raise ValueError("Нет техник для сравнения")
    coverage = {t.technique: set(getattr(t, metric)) for t in scores}
    reference = next(iter(coverage.values()))
    for technique, datasets in coverage.items():
        if datasets != reference:
            raise ValueError(f"{technique}: набор датасетов не совпадает с остальными техниками")
    table = pd.DataFrame({t.technique: pd.Series(getattr(t, metric)) for t in scores})
    return table.sort_index()


def rank_table(scores: Sequence[TechniqueScores], metric: str) -> pd.DataFrame:
    table = _pivot(scores, metric)
    # Ранг 1 - лучший; равные значения получают средний ранг
    ranks = np.vstack([rankdata(-row, method="average") for row in table.to_numpy(dtype=np.float64)])
    return pd.DataFrame(ranks, index=table.index, columns=table.columns)


def mean_ranks(scores: Sequence[TechniqueScores], metric: str) -> Dict[str, float]:
    ranks = rank_table(scores, metric)
    return {technique: float(ranks[technique].mean()) for technique in ranks.columns}


def wins(scores: Sequence[TechniqueScores], metrics: Iterable[str] = METRICS) -> Dict[str, float]:
    totals = {t.technique: 0.0 for t in scores}
    for metric in metrics:
        table = _pivot(scores, metric)
        for _, row in table.iterrows():
            best = row.max()
            leaders = [technique for technique, value in row.items() if value == best]
            for technique in leaders:
                totals[technique] += 1.0 / len(leaders)
    return totals


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    verdict: str
    w_plus: float
    w_minus: float
    n: int


def _exact_p_value(ranks: np.ndarray, w_plus: float) -> float:
    # Точное нулевое распределение W+ перебором знаков через производящую функцию (ранги удвоены до целых)
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [1] + [0] * total
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]

    observed = int(round(2 * w_plus))
    lower = sum(counts[:observed + 1])
    upper = sum(counts[observed:])
    return min(1.0, 2 * min(lower, upper) / 2 ** len(doubled))


def _normal_p_value(abs_diff: np.ndarray, ranks: np.ndarray, w_plus: float) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(abs_diff, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(variance)
    return float(min(1.0, 2 * norm.sf(z)))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], alpha: float = 0.05) -> WilcoxonResult:
    """
    Двусторонний знаково-ранговый критерий Уилкоксона.
    Нулевые разности отбрасываются; n <= 25 - точное распределение,
    иначе нормальное приближение с поправками на связки и непрерывность.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Выборки разной длины: {a.shape[0]} и {b.shape[0]}")

    diff = a - b
    diff = diff[diff != 0]
    if diff.size < MIN_WILCOXON_N:
        raise ValueError(f"Слишком мало ненулевых разностей: {diff.size} < {MIN_WILCOXON_N}")

    abs_diff = np.abs(diff)
    ranks = rankdata(abs_diff, method="average")
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())

    if diff.size <= EXACT_WILCOXON_MAX_N:
        p_value = _exact_p_value(ranks, w_plus)
    else:
        p_value = _normal_p_value(abs_diff, ranks, w_plus)

    if p_value < alpha:
        verdict = "superior" if w_plus > w_minus else "inferior"
    else:
        verdict = "indistinguishable"
    return WilcoxonResult(p_value=p_value, verdict=verdict, w_plus=w_plus, w_minus=w_minus, n=int(diff.size))


def group_split(metas: Sequence) -> Tuple[List, List]:
    safe = [meta for meta in metas if is_safe(meta.safe_pct)]
    unsafe = [meta for meta in metas if not is_safe(meta.safe_pct)]
    return safe, unsafe


def divergence_fraction(traces_proposed: Sequence[Sequence[int]], traces_baseline: Sequence[Sequence[int]]) -> float:
    if len(traces_proposed) != len(traces_baseline):
        raise ValueError(f"Непарные трассы: {len(traces_proposed)} и {len(traces_baseline)}")
    if not traces_proposed:
        raise ValueError("Нет трасс для сравнения")
    differing = sum(1 for p, b in zip(traces_proposed, traces_baseline) if list(p) != list(b))
    return differing / len(traces_proposed)


# Таблица в духе "среднее и средний ранг": technique, f1_mean, f1_rank, gmean_mean, gmean_rank, wins
def summary_table(scores: Sequence[TechniqueScores]) -> pd.DataFrame:
    ranks = {metric: mean_ranks(scores, metric) for metric in METRICS}
    won = wins(scores)
    rows = []
    for t in scores:
        rows.append({
            "technique": t.technique,
            "f1_mean": float(np.mean(list(t.f1.values()))),
            "f1_rank": ranks["f1"][t.technique],
            "gmean_mean": float(np.mean(list(t.gmean.values()))),
            "gmean_rank": ranks["gmean"][t.technique],
            "wins": won[t.technique],
        })
    return pd.DataFrame(rows, columns=["technique", "f1_mean", "f1_rank", "gmean_mean", "gmean_rank", "wins"])


def wilcoxon_matrix(scores: Sequence[TechniqueScores], metric: str, columns: Optional[Sequence[str]] = None,
                    rows: Optional[Sequence[str]] = None, alpha: float = 0.05) -> pd.DataFrame:
    """
    Попарные p-значения: строки - техники сравнения, столбцы - проверяемые техники.
    sign "+" - столбец статистически лучше строки, "-" - хуже.
    """
    table = _pivot(scores, metric)
    columns = list(columns) if columns is not None else list(table.columns)
    rows = list(rows) if rows is not None else list(table.columns)

    records = []
    for row in rows:
        for column in columns:
            if row == column:
                continue
            try:
                result = wilcoxon_signed_rank(table[column].to_numpy(), table[row].to_numpy(), alpha)
                p_value, verdict, n = result.p_value, result.verdict, result.n
            except ValueError as e:
                logger.warning(f"Уилкоксон {column} vs {row} ({metric}): {e}")
                p_value, verdict, n = 1.0, "indistinguishable", 0
            sign = {"superior": "+", "inferior": "-"}.get(verdict, "")
            records.append({"row": row, "column": column, "metric": metric,
                            "p_value": p_value, "sign": sign, "n": n})
    return pd.DataFrame(records, columns=["row", "column", "metric", "p_value", "sign", "n"])


def baseline_difference(scores: Sequence[TechniqueScores], safe_pct: Dict[str, float], baseline: str,
                        range_size: int = 16) -> pd.DataFrame:
    """
    Разница средних метрик каждой техники и базовой (например, KNORA-E) по последовательным
    диапазонам датасетов, упорядоченных по убыванию S%.
    """
    if range_size < 1:
        raise ValueError(f"Размер диапазона должен быть >= 1, получено {range_size}")
    records = []
    for metric in METRICS:
        table = _pivot(scores, metric)
        if baseline not in table.columns:
            raise ValueError(f"Базовая техника {baseline!r} отсутствует в таблице")
        missing = [name for name in table.index if name not in safe_pct]
        if missing:
            raise ValueError(f"Нет S% для датасетов: {missing}")

        ordered = sorted(table.index, key=lambda name: (-safe_pct[name], name))
        for start in range(0, len(ordered), range_size):
            chunk = ordered[start:start + range_size]
            label = f"{start + 1}-{start + len(chunk)}"
            for technique in table.columns:
                if technique == baseline:
                    continue
                difference = float(table.loc[chunk, technique].mean() - table.loc[chunk, baseline].mean())
                records.append({"range": label, "technique": technique, "metric": metric, "difference": difference})
    return pd.DataFrame(records, columns=["range", "technique", "metric", "difference"])
