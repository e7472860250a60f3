import logging
import os
import re
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.model_selection import StratifiedKFold

from neighborhood import loo_neighbors

logger = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 0

MISSING_MARKERS = {"?", ""}
NUMERIC_TYPES = {"real", "integer", "numeric"}
KNOWN_DIRECTIVES = {"relation", "attribute", "inputs", "input", "outputs", "output", "data"}

attribute_pattern = re.compile(r"^@attribute\s+('[^']*'|\"[^\"]*\"|[^\s\[{]+)\s*(.*)$", re.IGNORECASE)
# Тип может идти вплотную к диапазону: real[0.0,1.0]
type_separator = re.compile(r"[\s\[{]")


# Двухклассовый набор данных: positive - всегда миноритарный класс
@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    feature_names: List[str]
    class_names: Tuple[str, str] = ("positive", "negative")

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError(f"{self.name}: матрица признаков должна быть двумерной, получено {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError(f"{self.name}: {labels.shape[0]} меток на {features.shape[0]} строк")
        if len(self.feature_names) != features.shape[1]:
            raise ValueError(f"{self.name}: {len(self.feature_names)} имён на {features.shape[1]} признаков")
        if not np.all(np.isfinite(features)):
            raise ValueError(f"{self.name}: в признаках есть нечисловые значения")
        if not np.all(np.isin(labels, (POSITIVE, NEGATIVE))):
            raise ValueError(f"{self.name}: метки должны быть 0/1")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.labels == POSITIVE))

    @property
    def n_negative(self) -> int:
        return int(np.count_nonzero(self.labels == NEGATIVE))

    def has_both_classes(self) -> bool:
        return self.n_positive > 0 and self.n_negative > 0

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            name=name or self.name,
            features=self.features[indices],
            labels=self.labels[indices],
            feature_names=list(self.feature_names),
            class_names=self.class_names,
        )


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    instances: int
    features: int
    imbalance_ratio: float
    safe_pct: float
    borderline_pct: float = 0.0
    rare_pct: float = 0.0
    outlier_pct: float = 0.0


@dataclass(frozen=True, eq=False)
class FoldSplit:
    train_indices: np.ndarray
    test_indices: np.ndarray
    fold_id: int


# Сырое содержимое .dat файла до нормализации меток
@dataclass
class KeelTable:
    relation: str
    feature_names: List[str]
    rows: np.ndarray
    raw_labels: List[str]
    dropped: int = 0
    class_attribute: str = ""
    line_numbers: List[int] = field(default_factory=list)


def _strip_quotes(name: str) -> str:
    if len(name) >= 2 and name[0] == name[-1] and name[0] in "'\"":
        return name[1:-1]
    return name


def parse_keel(text_stream: Iterable[str]) -> KeelTable:
    """
    Разбирает KEEL .dat поток:
        @relation ecoli-0_vs_1
        @attribute Mcg real [0.0, 0.89]
        ...
        @attribute Class {positive, negative}
        @data
        0.49, 0.29, ..., negative
    Атрибут класса - последний. Строки с пропусками (?) отбрасываются.
    """
    relation = ""
    attributes: List[Tuple[str, str]] = []
    output_name: Optional[str] = None
    in_data = False
    rows: List[List[float]] = []
    labels: List[str] = []
    line_numbers: List[int] = []
    dropped = 0

    for line_no, raw_line in enumerate(text_stream, start=1):
        line = raw_line.strip()
        if not line or line.startswith("%"):
            continue

        if not in_data:
            if not line.startswith("@"):
                raise ValueError(f"Строка {line_no}: ожидался заголовок '@...', получено: {line[:40]!r}")
            directive = line[1:].split(None, 1)[0].lower()
            if directive not in KNOWN_DIRECTIVES:
                raise ValueError(f"Строка {line_no}: неизвестная директива @{directive}")

            if directive == "relation":
                parts = line.split(None, 1)
                relation = _strip_quotes(parts[1].strip()) if len(parts) > 1 else ""
            elif directive == "attribute":
                match = attribute_pattern.match(line)
                if not match or not match.group(2):
                    raise ValueError(f"Строка {line_no}: некорректное описание атрибута")
                name = _strip_quotes(match.group(1))
                spec = match.group(2).strip()
                attr_type = "nominal" if spec.startswith("{") else type_separator.split(spec, 1)[0].lower()
                attributes.append((name, attr_type))
            elif directive in ("outputs", "output"):
                parts = line.split(None, 1)
                if len(parts) < 2:
                    raise ValueError(f"Строка {line_no}: @{directive} без имени атрибута")
                output_name = _strip_quotes(parts[1].strip())
            elif directive == "data":
                in_data = True
            continue

        fields = [value.strip() for value in line.split(",")]
        if len(fields) != len(attributes):
            raise ValueError(f"Строка {line_no}: {len(fields)} значений при {len(attributes)} атрибутах")
        if any(value in MISSING_MARKERS for value in fields):
            dropped += 1
            continue

        try:
            values = [float(value) for value in fields[:-1]]
        except ValueError:
            raise ValueError(f"Строка {line_no}: нечисловое значение признака в {line[:60]!r}")
        rows.append(values)
        labels.append(fields[-1])
        line_numbers.append(line_no)

    if not in_data:
        raise ValueError("Нет секции @data")
    if len(attributes) < 2:
        raise ValueError("Нужно хотя бы два атрибута: признак и класс")

    class_attribute = attributes[-1][0]
    if output_name is not None and output_name != class_attribute:
        raise ValueError(f"Атрибут класса {output_name!r} должен быть последним, последний - {class_attribute!r}")
    for name, attr_type in attributes[:-1]:
        if attr_type not in NUMERIC_TYPES:
            raise ValueError(f"Признак {name!r} имеет нечисловой тип {attr_type!r}")

    if dropped:
        logger.warning(f"{relation or 'набор'}: отброшено {dropped} строк с пропусками")

    n_features = len(attributes) - 1
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), n_features)
    return KeelTable(
        relation=relation,
        feature_names=[name for name, _ in attributes[:-1]],
        rows=matrix,
        raw_labels=labels,
        dropped=dropped,
        class_attribute=class_attribute,
        line_numbers=line_numbers,
    )


def _normalize_label(label: str) -> str:
    return label.strip().lower()


# Редкий класс -> positive; при равенстве частот - метка "positive" или лексикографически первая
def class_mapping(raw_labels: Sequence[str]) -> Tuple[str, str]:
    counts = Counter(_normalize_label(label) for label in raw_labels)
    if len(counts) < 2:
        raise ValueError(f"Найден только {len(counts)} класс, нужны два")
    if len(counts) > 2:
        raise ValueError(f"Поддерживаются только бинарные задачи, найдено классов: {len(counts)}")

    def rarity(name: str) -> Tuple[int, int, str]:
        return (counts[name], 0 if name == "positive" else 1, name)

    positive_name, negative_name = sorted(counts, key=rarity)
    return positive_name, negative_name


def _encode_labels(raw_labels: Sequence[str], class_names: Tuple[str, str]) -> np.ndarray:
    positive_name, negative_name = class_names
    encoded = np.empty(len(raw_labels), dtype=np.int64)
    for i, label in enumerate(raw_labels):
        name = _normalize_label(label)
        if name == positive_name:
            encoded[i] = POSITIVE
        elif name == negative_name:
            encoded[i] = NEGATIVE
        else:
            raise ValueError(f"Неизвестная метка класса {label!r}")
    return encoded


def load_keel(text_stream: Iterable[str], name: Optional[str] = None) -> Dataset:
    table = parse_keel(text_stream)
    class_names = class_mapping(table.raw_labels)
    dataset = Dataset(
        name=name or table.relation or "dataset",
        features=table.rows,
        labels=_encode_labels(table.raw_labels, class_names),
        feature_names=table.feature_names,
        class_names=class_names,
    )
    if dataset.n_samples < 2:
        raise ValueError(f"{dataset.name}: нужно хотя бы 2 образца")
    logger.info(
        f"Загружен {dataset.name}: N={dataset.n_samples}, F={dataset.n_features}, "
        f"positive={dataset.n_positive} ({class_names[0]!r})"
    )
    return dataset


# Типизация миноритарных образцов по 5 соседям: safe / borderline / rare / outlier
def minority_types(d: Dataset, k: int = 5) -> List[str]:
    if d.n_samples <= k:
        raise ValueError(f"{d.name}: N={d.n_samples} должно быть больше k={k}")

    neighbors = loo_neighbors(d.features, k)
    types = []
    for i in np.flatnonzero(d.labels == POSITIVE):
        same = int(np.count_nonzero(d.labels[neighbors[i]] == POSITIVE))
        if 5 * same >= 4 * k:
            types.append("safe")
        elif 5 * same >= 2 * k:
            types.append("borderline")
        elif same > 0:
            types.append("rare")
        else:
            types.append("outlier")
    return types


def compute_meta(d: Dataset, k_type: int = 5) -> DatasetMeta:
    if d.n_positive == 0:
        raise ValueError(f"{d.name}: нет миноритарных образцов")

    types = minority_types(d, k_type)
    counts = Counter(types)
    total = len(types)

    def pct(kind: str) -> float:
        return 100.0 * counts[kind] / total

    return DatasetMeta(
        name=d.name,
        instances=d.n_samples,
        features=d.n_features,
        imbalance_ratio=d.n_negative / d.n_positive,
        safe_pct=pct("safe"),
        borderline_pct=pct("borderline"),
        rare_pct=pct("rare"),
        outlier_pct=pct("outlier"),
    )


def _check_split(d: Dataset, fold: FoldSplit):
    train = set(fold.train_indices.tolist())
    test = set(fold.test_indices.tolist())
    if train & test:
        raise ValueError(f"{d.name}, фолд {fold.fold_id}: обучающая и тестовая части пересекаются")
    if len(train) + len(test) != d.n_samples:
        raise ValueError(f"{d.name}, фолд {fold.fold_id}: части не покрывают весь набор")
    train_labels = d.labels[fold.train_indices]
    if not (np.any(train_labels == POSITIVE) and np.any(train_labels == NEGATIVE)):
        raise ValueError(f"{d.name}, фолд {fold.fold_id}: в обучающей части нет одного из классов")


def stratified_folds(d: Dataset, k: int = 5, seed: int = 0) -> List[FoldSplit]:
    smallest = min(d.n_positive, d.n_negative)
    if smallest < 2:
        raise ValueError(f"{d.name}: класс из {smallest} образцов нельзя сохранить во всех обучающих частях")
    if smallest < k:
        logger.warning(f"{d.name}: класс из {smallest} образцов меньше числа фолдов {k}")

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    folds = []
    for fold_id, (train_idx, test_idx) in enumerate(splitter.split(d.features, d.labels), start=1):
        fold = FoldSplit(
            train_indices=np.sort(train_idx).astype(np.int64),
            test_indices=np.sort(test_idx).astype(np.int64),
            fold_id=fold_id,
        )
        _check_split(d, fold)
        folds.append(fold)
    return folds


def _row_key(features: np.ndarray, label: int) -> Tuple:
    return tuple(features.tolist()) + (int(label),)


def load_keel_partitions(d: Dataset, base_stream_pair_list: Sequence[Tuple[Iterable[str], Iterable[str]]]) -> List[FoldSplit]:
    """
    Восстанавливает фолды по официальным разбиениям KEEL (пары tra/tst).
    Строки сопоставляются с полным набором как мультимножество (признаки + метка).
    """
    full_index: Dict[Tuple, List[int]] = defaultdict(list)
    for i in range(d.n_samples):
        full_index[_row_key(d.features[i], d.labels[i])].append(i)
    full_counts = {key: len(rows) for key, rows in full_index.items()}

    # Общая очередь для тестовых частей: каждый индекс попадает в тест ровно один раз
    test_queues: Dict[Tuple, Deque[int]] = {key: deque(rows) for key, rows in full_index.items()}

    folds = []
    for fold_id, (train_stream, test_stream) in enumerate(base_stream_pair_list, start=1):
        train_table = parse_keel(train_stream)
        test_table = parse_keel(test_stream)
        train_labels = _encode_labels(train_table.raw_labels, d.class_names)
        test_labels = _encode_labels(test_table.raw_labels, d.class_names)

        test_counts: Counter = Counter()
        test_indices = []
        for row, label in zip(test_table.rows, test_labels):
            key = _row_key(row, label)
            queue = test_queues.get(key)
            if not queue:
                raise ValueError(f"{d.name}, фолд {fold_id}: тестовая строка не найдена в полном наборе")
            test_indices.append(queue.popleft())
            test_counts[key] += 1

        train_counts = Counter(_row_key(row, label) for row, label in zip(train_table.rows, train_labels))
        for key, count in train_counts.items():
            if key not in full_counts:
                raise ValueError(f"{d.name}, фолд {fold_id}: обучающая строка не найдена в полном наборе")
        for key, total in full_counts.items():
            if train_counts[key] + test_counts[key] != total:
                raise ValueError(f"{d.name}, фолд {fold_id}: число копий строки не сходится с полным набором")

        test_set = set(test_indices)
        fold = FoldSplit(
            train_indices=np.array([i for i in range(d.n_samples) if i not in test_set], dtype=np.int64),
            test_indices=np.array(sorted(test_indices), dtype=np.int64),
            fold_id=fold_id,
        )
        _check_split(d, fold)
        folds.append(fold)

    leftover = sum(len(queue) for queue in test_queues.values())
    if leftover:
        raise ValueError(f"{d.name}: {leftover} строк не попали ни в одну тестовую часть")
    return folds


def partition_paths(base_dir: str, name: str, k: int = 5) -> List[Tuple[str, str]]:
    folder = os.path.join(base_dir, name)
    return [
        (os.path.join(folder, f"{name}-{k}-{i}tra.dat"), os.path.join(folder, f"{name}-{k}-{i}tst.dat"))
        for i in range(1, k + 1)
    ]


def load_keel_dir(base_dir: str, name: str, with_partitions: bool = True) -> Tuple[Dataset, Optional[List[FoldSplit]]]:
    """
    Каталог вида <base_dir>/<name>/<name>.dat (+ <name>-5-<i>tra.dat / tst.dat).
    Если полного файла нет, набор собирается из тестовых частей по порядку фолдов.
    """
    full_path = os.path.join(base_dir, name, f"{name}.dat")
    pairs = partition_paths(base_dir, name)
    has_partitions = all(os.path.exists(tra) and os.path.exists(tst) for tra, tst in pairs)

    if os.path.exists(full_path):
        with open(full_path, encoding="utf-8") as stream:
            dataset = load_keel(stream, name=name)
    elif has_partitions:
        lines: List[str] = []
        for i, (_, tst) in enumerate(pairs):
            with open(tst, encoding="utf-8") as stream:
                content = stream.read().splitlines()
            if i > 0:
                # Заголовок берём только из первого файла
                content = content[next(j for j, line in enumerate(content) if line.strip().lower().startswith("@data")) + 1:]
            lines.extend(content)
        logger.info(f"{name}: полный файл не найден, набор собран из тестовых частей")
        dataset = load_keel(lines, name=name)
    else:
        raise FileNotFoundError(f"Не найден набор {name} в {base_dir}")

    if not (with_partitions and has_partitions):
        return dataset, None

    streams = []
    try:
        for tra, tst in pairs:
            streams.append((open(tra, encoding="utf-8"), open(tst, encoding="utf-8")))
        folds = load_keel_partitions(dataset, streams)
    finally:
        for tra_stream, tst_stream in streams:
            tra_stream.close()
            tst_stream.close()
    return dataset, folds
