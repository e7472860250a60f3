import hashlib
import logging
import re
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import expit

from datasets import NEGATIVE, POSITIVE

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATE = 0.001
DEFAULT_EPOCHS = 100
DEFAULT_POOL_SIZE = 100
MAX_BOOTSTRAP_RETRIES = 1000
PROBA_CLIP = 1e-12


# Линейный классификатор: positive тогда и только тогда, когда w·x + b > 0
@dataclass(frozen=True, eq=False)
class LinearClassifier:
    weights: np.ndarray
    bias: float

    def decision_function(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.weights.shape[0]:
            raise ValueError(f"Размерность {x.shape[-1]} не совпадает с {self.weights.shape[0]}")
        return np.sum(x * self.weights, axis=-1) + self.bias

    def predict(self, x) -> np.ndarray:
        return np.where(self.decision_function(x) > 0, POSITIVE, NEGATIVE)


def predict_proba(c: LinearClassifier, x) -> np.ndarray:
    """P(positive) = сигмоида от решающей функции, обрезанная до [1e-12, 1 - 1e-12]."""
    return np.clip(expit(c.decision_function(x)), PROBA_CLIP, 1.0 - PROBA_CLIP)


@dataclass(frozen=True, eq=False)
class TrainedPool:
    weights: np.ndarray
    biases: np.ndarray
    seed: int
    train_fingerprint: str

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def members(self) -> List[LinearClassifier]:
        return [LinearClassifier(weights=self.weights[m], bias=float(self.biases[m])) for m in range(len(self))]

    def decision_function(self, X) -> np.ndarray:
        # (n, M); каждый член считается тем же выражением, что и в LinearClassifier
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.weights.shape[1]:
            raise ValueError(f"Размерность {X.shape[1]} не совпадает с {self.weights.shape[1]}")
        return np.column_stack([np.sum(X * self.weights[m], axis=-1) + self.biases[m] for m in range(len(self))])

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, POSITIVE, NEGATIVE)

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(expit(self.decision_function(X)), PROBA_CLIP, 1.0 - PROBA_CLIP)


def _fit_batch(features: np.ndarray, labels: np.ndarray, sample_index: np.ndarray,
               rngs: Sequence[np.random.Generator], learning_rate: float, epochs: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Классический перцептрон для M членов сразу: строка m - ровно последовательный прогон члена m.
    w <- w + a * (y - y_hat) * x, y из {0, 1}, веса с нуля, порядок обхода перемешивается каждую эпоху.
    """
    n_members, n_rows = sample_index.shape
    weights = np.zeros((n_members, features.shape[1]), dtype=np.float64)
    biases = np.zeros(n_members, dtype=np.float64)
    targets = labels.astype(np.float64)

    for _ in range(epochs):
        orders = np.stack([rng.permutation(n_rows) for rng in rngs])
        visits = np.take_along_axis(sample_index, orders, axis=1)
        for t in range(n_rows):
            rows = visits[:, t]
            x = features[rows]
            decision = np.sum(x * weights, axis=1) + biases
            error = targets[rows] - (decision > 0).astype(np.float64)
            weights += (learning_rate * error)[:, None] * x
            biases += learning_rate * error
    return weights, biases


def _require_both_classes(labels: np.ndarray, what: str):
    if not (np.any(labels == POSITIVE) and np.any(labels == NEGATIVE)):
        raise ValueError(f"{what}: нужны образцы обоих классов")


def train_perceptron(data, learning_rate: float = DEFAULT_LEARNING_RATE, epochs: int = DEFAULT_EPOCHS, seed=0) -> LinearClassifier:
    features = np.asarray(data.features, dtype=np.float64)
    labels = np.asarray(data.labels)
    _require_both_classes(labels, "Перцептрон")

    index = np.arange(features.shape[0])[None, :]
    weights, biases = _fit_batch(features, labels, index, [np.random.default_rng(seed)], learning_rate, epochs)
    return LinearClassifier(weights=weights[0], bias=float(biases[0]))


def fingerprint(features: np.ndarray, labels: np.ndarray, *params) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(features, dtype=np.float64).tobytes())
    digest.update(np.ascontiguousarray(labels, dtype=np.int64).tobytes())
    digest.update("|".join(str(p) for p in params).encode("utf-8"))
    return digest.hexdigest()


def _draw_bootstrap(labels: np.ndarray, rng: np.random.Generator, member: int) -> np.ndarray:
    n_rows = labels.shape[0]
    for attempt in range(MAX_BOOTSTRAP_RETRIES):
        sample = rng.integers(0, n_rows, size=n_rows)
        drawn = labels[sample]
        if np.any(drawn == POSITIVE) and np.any(drawn == NEGATIVE):
            if attempt:
                logger.debug(f"Член {member}: бутстрэп перевыбран {attempt} раз")
            return sample
    raise ValueError(f"Член {member}: за {MAX_BOOTSTRAP_RETRIES} попыток не удалось получить выборку с обоими классами")


def bagging_pool(train, M: int = DEFAULT_POOL_SIZE, seed: int = 0,
                 learning_rate: float = DEFAULT_LEARNING_RATE, epochs: int = DEFAULT_EPOCHS) -> TrainedPool:
    features = np.asarray(train.features, dtype=np.float64)
    labels = np.asarray(train.labels)
    _require_both_classes(labels, "Бэггинг")
    if M < 1:
        raise ValueError(f"Размер пула должен быть >= 1, получено {M}")

    # Сиды членов выводятся заранее: результат не зависит от порядка обучения
    member_seeds = np.random.SeedSequence(seed).spawn(M)
    samples = []
    fit_rngs = []
    for member, member_seed in enumerate(member_seeds):
        boot_seed, fit_seed = member_seed.spawn(2)
        samples.append(_draw_bootstrap(labels, np.random.default_rng(boot_seed), member))
        fit_rngs.append(np.random.default_rng(fit_seed))

    weights, biases = _fit_batch(features, labels, np.stack(samples), fit_rngs, learning_rate, epochs)
    pool = TrainedPool(
        weights=weights,
        biases=biases,
        seed=seed,
        train_fingerprint=fingerprint(features, labels, M, seed, learning_rate, epochs),
    )
    logger.info(f"Пул из {M} перцептронов обучен на {features.shape[0]} образцах, отпечаток {pool.train_fingerprint[:12]}")
    return pool


def save_pool_csv(pool: TrainedPool, path: str):
    frame = pd.DataFrame(pool.weights, columns=[f"w{j}" for j in range(pool.weights.shape[1])])
    frame.insert(0, "bias", pool.biases)
    frame.insert(0, "member", np.arange(len(pool)))
    frame["seed"] = pool.seed
    frame["fingerprint"] = pool.train_fingerprint
    frame.to_csv(path, index=False)


def load_pool_csv(path: str) -> TrainedPool:
    frame = pd.read_csv(path, float_precision="round_trip", dtype={"fingerprint": str}).sort_values("member")
    weight_columns = [column for column in frame.columns if re.fullmatch(r"w\d+", column)]
    return TrainedPool(
        weights=frame[weight_columns].to_numpy(dtype=np.float64),
        biases=frame["bias"].to_numpy(dtype=np.float64),
        seed=int(frame["seed"].iloc[0]),
        train_fingerprint=str(frame["fingerprint"].iloc[0]),
    )
