import argparse
import asyncio
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from dotenv import load_dotenv
from sklearn.preprocessing import StandardScaler

import db
from catalog import SAFE_THRESHOLD, lookup, ordered_names
from datasets import Dataset, DatasetMeta, FoldSplit, compute_meta, load_keel_dir, stratified_folds
from evaluation import (METRICS, TechniqueScores, baseline_difference, confusion, divergence_fraction, f1, gmean,
                        summary_table, wilcoxon_matrix)
from hardness import HardnessProfile, Measure, estimate_all
from neighborhood import knn
from pool import TrainedPool, bagging_pool, fingerprint
from preprocessing import apply_edit, enn_edit
from selection import DynamicSelector, SelectorConfig, Technique, full_removal_order, trace_line

# Загрузка настроек окружения
load_dotenv()
LOG_LEVEL = os.getenv("DES_LOG_LEVEL", "INFO")
DB_PATH = os.getenv("DES_DB_PATH")
WORKERS = int(os.getenv("DES_WORKERS", "1"))
KEEL_DIR = os.getenv("DES_KEEL_DIR")

# Настройка логирования
logging.basicConfig(
    level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

BASELINE = Technique.KNORA_E.value

REPORT_COLUMNS = [
    "config", "dataset", "fold", "seed", "technique", "enn", "k", "n_test",
    "tp", "fp", "tn", "fn", "f1", "gmean", "metric_flag",
    "fallback_rate", "mean_ensemble_size", "divergence", "pool_fingerprint", "trace_ref",
]
AGGREGATE_VALUES = ["f1", "gmean", "fallback_rate", "mean_ensemble_size", "divergence"]
META_COLUMNS = [
    "ref", "name", "instances", "features", "imbalance_ratio", "safe_pct", "borderline_pct", "rare_pct",
    "outlier_pct", "ref_instances", "ref_features", "ref_imbalance_ratio", "ref_safe_pct", "safe_pct_delta",
]


@dataclass
class ExperimentConfig:
    dataset_dir: str
    techniques: List[SelectorConfig]
    dataset_names: Union[str, List[str]] = "all"
    enn_enabled: bool = False
    enn_compare: bool = False
    pool_size: int = 100
    roc_k: int = 7
    kdn_k: int = 5
    epsilon: float = 1e-3
    enn_k: int = 3
    learning_rate: float = 0.001
    epochs: int = 100
    seeds: List[int] = field(default_factory=lambda: [0])
    use_official_partitions: bool = True
    n_folds: int = 5
    standardize: bool = False
    output_dir: str = "results"
    trace_log: bool = False
    alpha: float = 0.05
    range_size: int = 16

    def __post_init__(self):
        if not self.techniques:
            raise ValueError("techniques: нужна хотя бы одна техника")
        labels = [t.label for t in self.techniques]
        if len(set(labels)) != len(labels):
            raise ValueError(f"techniques: повторяющиеся техники {labels}")
        if not self.seeds:
            raise ValueError("seeds: нужен хотя бы один сид")
        if self.dataset_names != "all" and not isinstance(self.dataset_names, list):
            raise ValueError(f"dataset_names: ожидался список или \"all\", получено {self.dataset_names!r}")
        for name in ("pool_size", "roc_k", "kdn_k", "enn_k", "epochs", "range_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}: должно быть >= 1, получено {getattr(self, name)}")
        if self.n_folds < 2:
            raise ValueError(f"n_folds: должно быть >= 2, получено {self.n_folds}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate: должно быть > 0, получено {self.learning_rate}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon: должно быть >= 0, получено {self.epsilon}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha: должно лежать в (0, 1), получено {self.alpha}")

    def enn_variants(self) -> List[bool]:
        if self.enn_compare:
            return [False, True]
        return [self.enn_enabled]

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["techniques"] = [
            {"technique": t.technique.value, "measure": t.measure.value if t.measure else None, "k": t.k}
            for t in self.techniques
        ]
        return data

    def fingerprint(self) -> str:
        # Каталог вывода и журнал трасс на результаты не влияют
        data = self.to_dict()
        data.pop("output_dir")
        data.pop("trace_log")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def config_from_dict(data: Dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"Неизвестные ключи конфигурации: {unknown}")
    if "dataset_dir" not in data:
        raise ValueError("dataset_dir: обязательный ключ")
    if "techniques" not in data:
        raise ValueError("techniques: обязательный ключ")

    values = dict(data)
    roc_k = int(values.get("roc_k", 7))
    values["techniques"] = [SelectorConfig.parse(t, default_k=roc_k) for t in data["techniques"]]
    if isinstance(values.get("seeds"), int):
        values["seeds"] = [values["seeds"]]
    return ExperimentConfig(**values)


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as stream:
        data = json.load(stream)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: ожидался JSON-объект")
    cfg = config_from_dict(data)
    logger.info(f"Конфигурация {path}: {len(cfg.techniques)} техник, сиды {cfg.seeds}, отпечаток {cfg.fingerprint()[:12]}")
    return cfg


# Мастер-сид ячейки из устойчивого хеша: порядок выполнения ячеек не влияет на результат
def cell_seed(dataset: str, fold: int, seed: int) -> int:
    digest = hashlib.sha256(f"{dataset}|{fold}|{seed}".encode("utf-8")).hexdigest()
    return int(digest[:8], 16)


@dataclass
class FoldResult:
    dataset: str
    fold: int
    seed: int
    records: List[Dict] = field(default_factory=list)
    traces: List[str] = field(default_factory=list)


@dataclass
class ExperimentReport:
    records: pd.DataFrame
    aggregate: pd.DataFrame
    summaries: Dict[str, pd.DataFrame] = field(default_factory=dict)
    wilcoxon: Dict[str, pd.DataFrame] = field(default_factory=dict)
    divergence: Optional[pd.DataFrame] = None
    plots: Optional[pd.DataFrame] = None
    failures: List[Dict] = field(default_factory=list)


def _with_features(d: Dataset, features: np.ndarray) -> Dataset:
    return Dataset(name=d.name, features=features, labels=d.labels,
                   feature_names=list(d.feature_names), class_names=d.class_names)


def split_fold(cfg: ExperimentConfig, dataset: Dataset, fold: FoldSplit) -> Tuple[Dataset, Dataset]:
    train = dataset.subset(fold.train_indices)
    test = dataset.subset(fold.test_indices)
    if cfg.standardize:
        # Масштаб оценивается только по обучающей части
        scaler = StandardScaler().fit(train.features)
        train = _with_features(train, scaler.transform(train.features))
        test = _with_features(test, scaler.transform(test.features))
    return train, test


def prepare_dsel(cfg: ExperimentConfig, train: Dataset, enn: bool) -> Dataset:
    if not enn:
        return train
    return apply_edit(train, enn_edit(train, cfg.enn_k))


def build_profiles(cfg: ExperimentConfig, dsel: Dataset) -> Dict[Measure, HardnessProfile]:
    measures = sorted({t.measure for t in cfg.techniques if t.measure is not None}, key=lambda m: m.value)
    return {measure: estimate_all(dsel, measure, cfg.kdn_k, cfg.epsilon) for measure in measures}


def removal_divergence(dsel: Dataset, queries: np.ndarray, config: SelectorConfig, profile: HardnessProfile) -> float:
    baseline = SelectorConfig(Technique.KNORA_E, k=config.k)
    proposed_orders = []
    baseline_orders = []
    for query in queries:
        roc = knn(query, dsel, config.k)
        proposed_orders.append(full_removal_order(dsel, roc, config, profile))
        baseline_orders.append(full_removal_order(dsel, roc, baseline))
    return divergence_fraction(proposed_orders, baseline_orders)


def run_fold(cfg: ExperimentConfig, dataset: Dataset, fold: FoldSplit, seed: int,
             pool: Optional[TrainedPool] = None) -> FoldResult:
    """
    Один фолд: пул на обучающей части, DSEL = обучающая часть (после ENN, если включён),
    профили сложности на DSEL, выбор и предсказание для каждого тестового запроса.
    Пул общий для всех техник и обоих вариантов ENN.
    """
    train, test = split_fold(cfg, dataset, fold)
    if pool is None:
        pool = bagging_pool(train, cfg.pool_size, seed=cell_seed(dataset.name, fold.fold_id, seed),
                            learning_rate=cfg.learning_rate, epochs=cfg.epochs)

    result = FoldResult(dataset=dataset.name, fold=fold.fold_id, seed=seed)
    config_fp = cfg.fingerprint()
    context = dict(dataset=dataset.name, fold=fold.fold_id, seed=seed)

    for enn in cfg.enn_variants():
        dsel = prepare_dsel(cfg, train, enn)
        profiles = build_profiles(cfg, dsel)

        for technique in cfg.techniques:
            profile = profiles.get(technique.measure)
            selector = DynamicSelector(pool, dsel, technique, profile)

            predictions = np.empty(test.n_samples, dtype=np.int64)
            fallbacks = 0
            sizes = []
            for q in range(test.n_samples):
                label, _, selection = selector.predict(test.features[q])
                predictions[q] = label
                fallbacks += int(selection.fallback_used)
                sizes.append(selection.selected.size)
                if cfg.trace_log:
                    result.traces.append(trace_line(int(fold.test_indices[q]), technique.label, selection,
                                                    enn=enn, **context))

            counts = confusion(test.labels, predictions)
            record = {
                "config": config_fp,
                **context,
                "technique": technique.label,
                "enn": enn,
                "k": technique.k,
                "n_test": test.n_samples,
                "tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn,
                "f1": f1(counts),
                "metric_flag": "",
                "fallback_rate": fallbacks / test.n_samples,
                "mean_ensemble_size": float(np.mean(sizes)),
                "divergence": None,
                "pool_fingerprint": selector.pool.train_fingerprint,
                "trace_ref": "traces.jsonl" if cfg.trace_log else "",
            }
            try:
                record["gmean"] = gmean(counts)
            except ValueError as e:
                logger.warning(f"{dataset.name}, фолд {fold.fold_id}, {technique.label}: {e}")
                record["gmean"] = float("nan")
                record["metric_flag"] = "gmean_undefined"

            if technique.technique is Technique.PROPOSED:
                record["divergence"] = removal_divergence(dsel, test.features, technique, profile)
            result.records.append(record)

    pool_prints = {r["pool_fingerprint"] for r in result.records}
    if len(pool_prints) == 1:
        logger.info(f"{dataset.name}, фолд {fold.fold_id}, сид {seed}: все техники на пуле {pool.train_fingerprint[:12]}")
    else:
        logger.error(f"{dataset.name}, фолд {fold.fold_id}, сид {seed}: техники получили разные пулы {pool_prints}")
    return result


def present_names(dataset_dir: str) -> List[str]:
    if not os.path.isdir(dataset_dir):
        raise FileNotFoundError(f"Каталог наборов не найден: {dataset_dir}")
    present = {entry for entry in os.listdir(dataset_dir) if os.path.isdir(os.path.join(dataset_dir, entry))}
    known = [name for name in ordered_names() if name in present]
    return known + sorted(present - set(known))


def resolve_dataset_names(cfg: ExperimentConfig) -> List[str]:
    if cfg.dataset_names == "all":
        return present_names(cfg.dataset_dir)
    return list(cfg.dataset_names)


def dataset_folds(cfg: ExperimentConfig, dataset: Dataset, official: Optional[List[FoldSplit]], seed: int) -> List[FoldSplit]:
    if official is not None:
        if len(official) != cfg.n_folds:
            logger.warning(f"{dataset.name}: официальных фолдов {len(official)}, в конфигурации n_folds={cfg.n_folds}")
        return official
    return stratified_folds(dataset, cfg.n_folds, seed=cell_seed(dataset.name, 0, seed))


def dataset_meta(dataset: Dataset) -> DatasetMeta:
    content = fingerprint(dataset.features, dataset.labels)
    cached = db.get_dataset_meta(dataset.name)
    if cached and cached.get("fingerprint") == content:
        return DatasetMeta(**{f.name: cached[f.name] for f in fields(DatasetMeta)})
    meta = compute_meta(dataset)
    db.insert_dataset_meta({**asdict(meta), "fingerprint": content})
    return meta


def cell_finished(cfg: ExperimentConfig, config_fp: str, dataset: str, fold: int, seed: int, expected: int) -> bool:
    if len(db.get_cell_records(config_fp, dataset, fold, seed)) != expected:
        return False
    # Ячейка без сохранённых трасс пересчитывается, если журнал трасс включён
    return not cfg.trace_log or db.get_cell_traces(config_fp, dataset, fold, seed) is not None


async def _run_cells(cfg: ExperimentConfig, cells: Sequence[Tuple[Dataset, FoldSplit, int]], workers: int) -> List:
    if workers > 1:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [loop.run_in_executor(executor, run_fold, cfg, dataset, fold, seed) for dataset, fold, seed in cells]
            return await asyncio.gather(*futures, return_exceptions=True)

    results = []
    for dataset, fold, seed in cells:
        try:
            results.append(run_fold(cfg, dataset, fold, seed))
        except Exception as e:
            results.append(e)
    return results


def _records_frame(records: List[Dict]) -> pd.DataFrame:
    frame = pd.DataFrame([dict(r) for r in records], columns=REPORT_COLUMNS)
    for column in ("f1", "gmean", "fallback_rate", "mean_ensemble_size", "divergence"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    return frame.sort_values(["dataset", "seed", "fold", "enn", "technique"], kind="mergesort").reset_index(drop=True)


def aggregate_records(frame: pd.DataFrame, metas: Dict[str, DatasetMeta]) -> pd.DataFrame:
    """Средние по фолдам и сидам для каждой пары (набор, техника); NaN пропускаются."""
    grouped = frame.groupby(["enn", "dataset", "technique"], sort=True)[AGGREGATE_VALUES].mean().reset_index()
    grouped.insert(2, "safe_pct", grouped["dataset"].map(lambda name: metas[name].safe_pct))
    grouped.insert(3, "group", np.where(grouped["safe_pct"] >= SAFE_THRESHOLD, "safe", "unsafe"))
    return grouped


def technique_scores(aggregate: pd.DataFrame, techniques: List[str]) -> List[TechniqueScores]:
    f1_table = aggregate.pivot(index="dataset", columns="technique", values="f1").reindex(columns=techniques)
    gmean_table = aggregate.pivot(index="dataset", columns="technique", values="gmean").reindex(columns=techniques)
    complete = f1_table.notna().all(axis=1) & gmean_table.notna().all(axis=1)
    dropped = sorted(f1_table.index[~complete])
    if dropped:
        logger.warning(f"Наборы без полного покрытия техник исключены из сравнения: {dropped}")
    if not complete.any():
        return []
    return [
        TechniqueScores(technique=t, f1=f1_table.loc[complete, t].to_dict(), gmean=gmean_table.loc[complete, t].to_dict())
        for t in techniques
    ]


def _variant_suffix(cfg: ExperimentConfig, enn: bool) -> str:
    return "_enn" if cfg.enn_compare and enn else ""


def _group_rows(aggregate: pd.DataFrame, group: str) -> pd.DataFrame:
    return aggregate if group == "all" else aggregate[aggregate["group"] == group]


def divergence_rows(cfg: ExperimentConfig, aggregate: pd.DataFrame) -> Tuple[pd.DataFrame, List[Dict]]:
    proposed = [t.label for t in cfg.techniques if t.technique is Technique.PROPOSED]
    table = aggregate[aggregate["technique"].isin(proposed)][["enn", "dataset", "safe_pct", "group", "technique", "divergence"]]
    table = table.reset_index(drop=True)

    plots = []
    for enn in cfg.enn_variants():
        rows = table[table["enn"] == enn]
        for (group, technique), chunk in rows.groupby(["group", "technique"], sort=True):
            plots.append({"figure": f"divergence{_variant_suffix(cfg, enn)}", "group": group, "technique": technique,
                          "metric": "divergence", "value": float(chunk["divergence"].mean())})
    return table, plots


def build_report(cfg: ExperimentConfig, records: List[Dict], metas: Dict[str, DatasetMeta],
                 failures: List[Dict]) -> ExperimentReport:
    frame = _records_frame(records)
    report = ExperimentReport(records=frame, aggregate=pd.DataFrame(), failures=failures)
    if frame.empty:
        logger.error("Нет ни одной записи для отчёта")
        return report

    aggregate = aggregate_records(frame, metas)
    report.aggregate = aggregate
    labels = [t.label for t in cfg.techniques]
    safe_pct = {name: meta.safe_pct for name, meta in metas.items()}
    plots: List[Dict] = []

    for enn in cfg.enn_variants():
        suffix = _variant_suffix(cfg, enn)
        variant = aggregate[aggregate["enn"] == enn]
        for group in ("all", "safe", "unsafe"):
            rows = _group_rows(variant, group)
            scores = technique_scores(rows, labels) if not rows.empty else []
            if not scores:
                continue
            name = f"{group}{suffix}"
            report.summaries[name] = summary_table(scores)
            if len(labels) > 1:
                for metric in METRICS:
                    report.wilcoxon[f"{name}_{metric}"] = wilcoxon_matrix(scores, metric, alpha=cfg.alpha)
            if group != "all":
                for t in scores:
                    for metric in METRICS:
                        plots.append({"figure": f"performance{suffix}", "group": group, "technique": t.technique,
                                      "metric": metric, "value": float(np.mean(list(getattr(t, metric).values())))})

        scores = technique_scores(variant, labels) if not variant.empty else []
        if BASELINE in labels and len(labels) > 1 and scores:
            difference = baseline_difference(scores, safe_pct, BASELINE, cfg.range_size)
            for row in difference.itertuples(index=False):
                plots.append({"figure": f"baseline_difference{suffix}", "group": row.range, "technique": row.technique,
                              "metric": row.metric, "value": row.difference})

    report.divergence, divergence_plots = divergence_rows(cfg, aggregate)
    report.plots = pd.DataFrame(divergence_plots + plots, columns=["figure", "group", "technique", "metric", "value"])
    return report


def _format_summary(summary: pd.DataFrame) -> str:
    return summary.to_string(index=False, float_format=lambda v: f"{v:.3f}") + "\n"


def write_report(cfg: ExperimentConfig, report: ExperimentReport, traces: List[str]):
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    report.records.to_csv(os.path.join(out, "report.csv"), index=False)

    for name, summary in report.summaries.items():
        group = name[:-len("_enn")] if cfg.enn_compare and name.endswith("_enn") else name
        enn_value = name.endswith("_enn") if cfg.enn_compare else cfg.enn_enabled
        rows = report.aggregate[report.aggregate["enn"] == enn_value]
        _group_rows(rows, group).to_csv(os.path.join(out, f"aggregate_{name}.csv"), index=False)
        with open(os.path.join(out, f"summary_{name}.txt"), "w", encoding="utf-8") as stream:
            stream.write(_format_summary(summary))

    for name, matrix in report.wilcoxon.items():
        matrix.to_csv(os.path.join(out, f"wilcoxon_{name}.csv"), index=False)
    if report.divergence is not None:
        report.divergence.to_csv(os.path.join(out, "divergence.csv"), index=False)
    if report.plots is not None:
        report.plots.to_csv(os.path.join(out, "plots_long.csv"), index=False)
    if report.failures:
        pd.DataFrame(report.failures, columns=["dataset", "fold", "seed", "reason"]).to_csv(
            os.path.join(out, "failures.csv"), index=False)
    if cfg.trace_log:
        with open(os.path.join(out, "traces.jsonl"), "w", encoding="utf-8") as stream:
            stream.writelines(line + "\n" for line in traces)
    logger.info(f"Отчёт записан в {out}")


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    os.makedirs(cfg.output_dir, exist_ok=True)
    db.init_db(DB_PATH or os.path.join(cfg.output_dir, "records.json"))
    config_fp = cfg.fingerprint()
    expected = len(cfg.techniques) * len(cfg.enn_variants())

    failures: List[Dict] = []
    metas: Dict[str, DatasetMeta] = {}
    cells: List[Tuple[Dataset, FoldSplit, int]] = []
    resumed = 0
    for name in resolve_dataset_names(cfg):
        try:
            dataset, official = load_keel_dir(cfg.dataset_dir, name, with_partitions=cfg.use_official_partitions)
            metas[name] = dataset_meta(dataset)
            for seed in cfg.seeds:
                for fold in dataset_folds(cfg, dataset, official, seed):
                    if cell_finished(cfg, config_fp, name, fold.fold_id, seed, expected):
                        resumed += 1
                        continue
                    cells.append((dataset, fold, seed))
        except Exception as e:
            logger.error(f"Не удалось подготовить набор {name}: {e}")
            failures.append({"dataset": name, "fold": None, "seed": None, "reason": str(e)})
            metas.pop(name, None)

    logger.info(f"Ячеек к запуску: {len(cells)}, уже посчитано: {resumed}, воркеров: {WORKERS}")
    results = asyncio.run(_run_cells(cfg, cells, WORKERS))

    for (dataset, fold, seed), outcome in zip(cells, results):
        if isinstance(outcome, Exception):
            logger.error(f"Ошибка в ячейке {dataset.name}, фолд {fold.fold_id}, сид {seed}: {outcome}")
            failures.append({"dataset": dataset.name, "fold": fold.fold_id, "seed": seed, "reason": str(outcome)})
            continue
        for record in outcome.records:
            db.insert_fold_record(record)
        if cfg.trace_log:
            db.insert_cell_traces(config_fp, dataset.name, fold.fold_id, seed, outcome.traces)

    # trace_ref не входит в отпечаток: берётся из текущей конфигурации
    trace_ref = "traces.jsonl" if cfg.trace_log else ""
    records = [dict(r, trace_ref=trace_ref) for r in db.get_fold_records(config_fp) if r["dataset"] in metas]
    traces = db.get_traces(config_fp, list(metas)) if cfg.trace_log else []
    db.close_db()

    report = build_report(cfg, records, metas, failures)
    write_report(cfg, report, traces)
    return report


def run_divergence(cfg: ExperimentConfig) -> pd.DataFrame:
    """Расхождение порядка удаления с KNORA-E; пул не нужен, порядок зависит только от DSEL и профиля."""
    proposed = [t for t in cfg.techniques if t.technique is Technique.PROPOSED]
    if not proposed:
        raise ValueError("Для trace нужна хотя бы одна техника PROPOSED")

    rows = []
    metas: Dict[str, DatasetMeta] = {}
    for name in resolve_dataset_names(cfg):
        try:
            dataset, official = load_keel_dir(cfg.dataset_dir, name, with_partitions=cfg.use_official_partitions)
            metas[name] = compute_meta(dataset)
            for seed in cfg.seeds:
                for fold in dataset_folds(cfg, dataset, official, seed):
                    train, test = split_fold(cfg, dataset, fold)
                    for enn in cfg.enn_variants():
                        dsel = prepare_dsel(cfg, train, enn)
                        profiles = build_profiles(cfg, dsel)
                        for technique in proposed:
                            rows.append({
                                "enn": enn, "dataset": name, "fold": fold.fold_id, "seed": seed,
                                "technique": technique.label,
                                "divergence": removal_divergence(dsel, test.features, technique, profiles[technique.measure]),
                            })
        except Exception as e:
            logger.error(f"Ошибка при расчёте расхождения для {name}: {e}")
            metas.pop(name, None)
            rows = [row for row in rows if row["dataset"] != name]

    frame = pd.DataFrame(rows, columns=["enn", "dataset", "fold", "seed", "technique", "divergence"])
    if frame.empty:
        raise ValueError("Не удалось посчитать расхождение ни для одного набора")

    grouped = frame.groupby(["enn", "dataset", "technique"], sort=True)["divergence"].mean().reset_index()
    grouped.insert(2, "safe_pct", grouped["dataset"].map(lambda n: metas[n].safe_pct))
    grouped.insert(3, "group", np.where(grouped["safe_pct"] >= SAFE_THRESHOLD, "safe", "unsafe"))
    table, plots = divergence_rows(cfg, grouped)

    os.makedirs(cfg.output_dir, exist_ok=True)
    table.to_csv(os.path.join(cfg.output_dir, "divergence.csv"), index=False)
    pd.DataFrame(plots, columns=["figure", "group", "technique", "metric", "value"]).to_csv(
        os.path.join(cfg.output_dir, "plots_long.csv"), index=False)
    for plot in plots:
        logger.info(f"{plot['figure']} / {plot['group']} / {plot['technique']}: {plot['value']:.3f}")
    return table


def run_meta(dataset_dir: str, names: Optional[List[str]] = None, output: Optional[str] = None) -> pd.DataFrame:
    """Характеристики наборов (I, F, IR, S%) рядом со справочными значениями."""
    names = names or present_names(dataset_dir)
    rows = []
    for name in names:
        try:
            dataset, _ = load_keel_dir(dataset_dir, name, with_partitions=False)
            meta = compute_meta(dataset)
        except Exception as e:
            logger.error(f"Ошибка при расчёте характеристик {name}: {e}")
            continue

        row = asdict(meta)
        reference = lookup(name)
        row.update({
            "ref": reference.ref if reference else None,
            "ref_instances": reference.instances if reference else None,
            "ref_features": reference.features if reference else None,
            "ref_imbalance_ratio": reference.imbalance_ratio if reference else None,
            "ref_safe_pct": reference.safe_pct if reference else None,
            "safe_pct_delta": meta.safe_pct - reference.safe_pct if reference else None,
        })
        rows.append(row)

    frame = pd.DataFrame(rows, columns=META_COLUMNS)
    if output:
        frame.to_csv(output, index=False)
        logger.info(f"Характеристики {len(frame)} наборов записаны в {output}")
    else:
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.2f}"))
    return frame


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Стенд динамического выбора ансамблей на наборах KEEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="полный эксперимент по конфигурации")
    run_parser.add_argument("--config", required=True)

    meta_parser = commands.add_parser("meta", help="характеристики наборов (I, F, IR, S%%)")
    meta_parser.add_argument("--dataset-dir", default=KEEL_DIR)
    meta_parser.add_argument("--names", nargs="*")
    meta_parser.add_argument("--output")

    trace_parser = commands.add_parser("trace", help="расхождение порядка удаления с KNORA-E")
    trace_parser.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            report = run_experiment(load_config(args.config))
            if report.failures:
                logger.warning(f"Завершено с ошибками: {len(report.failures)}")
            return 1 if report.records.empty else 0
        if args.command == "meta":
            if not args.dataset_dir:
                raise ValueError("Не задан --dataset-dir и переменная DES_KEEL_DIR")
            run_meta(args.dataset_dir, args.names, args.output)
            return 0
        run_divergence(load_config(args.config))
        return 0
    except Exception as e:
        logger.error(f"Ошибка при выполнении команды {args.command}: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
