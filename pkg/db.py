# db.py
import logging
import os
from typing import Dict, List, Optional

from dotenv import load_dotenv
from tinydb import Query, TinyDB

load_dotenv()

logger = logging.getLogger(__name__)

RECORD_KEY = ("config", "dataset", "fold", "seed", "technique", "enn")

_db: Optional[TinyDB] = None


def init_db(path: Optional[str] = None) -> TinyDB:
    global _db
    path = path or os.getenv("DES_DB_PATH", "records.json")
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    if _db is not None:
        _db.close()
    _db = TinyDB(path, sort_keys=True)
    logger.info(f"Хранилище записей: {path}")
    return _db


def close_db():
    global _db
    if _db is not None:
        _db.close()
        _db = None


def _table(name: str):
    if _db is None:
        raise RuntimeError("Хранилище не инициализировано, вызовите init_db()")
    return _db.table(name)


def _key_condition(record: Dict):
    Record = Query()
    condition = None
    for name in RECORD_KEY:
        part = Record[name] == record[name]
        condition = part if condition is None else condition & part
    return condition


def insert_fold_record(record: Dict):
    try:
        missing = [name for name in RECORD_KEY if name not in record]
        if missing:
            raise ValueError(f"в записи нет ключевых полей {missing}")
        _table("fold_records").upsert(record, _key_condition(record))
    except Exception as e:
        logger.error(f"Ошибка при сохранении записи фолда: {e}")


def search_fold_record(config: str, dataset: str, fold: int, seed: int, technique: str, enn: bool) -> Optional[Dict]:
    try:
        key = dict(config=config, dataset=dataset, fold=fold, seed=seed, technique=technique, enn=enn)
        return _table("fold_records").get(_key_condition(key))
    except Exception as e:
        logger.error(f"Ошибка при поиске записи фолда: {e}")
        return None


def get_cell_records(config: str, dataset: str, fold: int, seed: int) -> List[Dict]:
    try:
        Record = Query()
        return _table("fold_records").search(
            (Record.config == config) & (Record.dataset == dataset) & (Record.fold == fold) & (Record.seed == seed)
        )
    except Exception as e:
        logger.error(f"Ошибка при получении записей ячейки: {e}")
        return []


def get_fold_records(config: str) -> List[Dict]:
    try:
        Record = Query()
        records = _table("fold_records").search(Record.config == config)
        return sorted(records, key=lambda r: (r["dataset"], r["seed"], r["fold"], r["enn"], r["technique"]))
    except Exception as e:
        logger.error(f"Ошибка при получении записей фолдов: {e}")
        return []


def insert_dataset_meta(meta: Dict):
    try:
        Meta = Query()
        _table("dataset_meta").upsert(meta, Meta.name == meta["name"])
    except Exception as e:
        logger.error(f"Ошибка при сохранении характеристик набора: {e}")


def get_dataset_meta(name: str) -> Optional[Dict]:
    try:
        Meta = Query()
        return _table("dataset_meta").get(Meta.name == name)
    except Exception as e:
        logger.error(f"Ошибка при получении характеристик набора: {e}")
        return None


def _cell_condition(config: str, dataset: str, fold: int, seed: int):
    Trace = Query()
    return (Trace.config == config) & (Trace.dataset == dataset) & (Trace.fold == fold) & (Trace.seed == seed)


def insert_cell_traces(config: str, dataset: str, fold: int, seed: int, lines: List[str]):
    try:
        entry = dict(config=config, dataset=dataset, fold=fold, seed=seed, lines=list(lines))
        _table("traces").upsert(entry, _cell_condition(config, dataset, fold, seed))
    except Exception as e:
        logger.error(f"Ошибка при сохранении трасс ячейки: {e}")


def get_cell_traces(config: str, dataset: str, fold: int, seed: int) -> Optional[List[str]]:
    try:
        entry = _table("traces").get(_cell_condition(config, dataset, fold, seed))
        return None if entry is None else list(entry["lines"])
    except Exception as e:
        logger.error(f"Ошибка при получении трасс ячейки: {e}")
        return None


def get_traces(config: str, datasets: Optional[List[str]] = None) -> List[str]:
    try:
        Trace = Query()
        entries = _table("traces").search(Trace.config == config)
        if datasets is not None:
            entries = [entry for entry in entries if entry["dataset"] in datasets]
        entries = sorted(entries, key=lambda t: (t["dataset"], t["seed"], t["fold"]))
        return [line for entry in entries for line in entry["lines"]]
    except Exception as e:
        logger.error(f"Ошибка при получении трасс: {e}")
        return []
