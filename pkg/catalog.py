from typing import Dict, List, NamedTuple, Optional


# Справочная характеристика 64 бинарных наборов KEEL
class CatalogEntry(NamedTuple):
    ref: int
    name: str
    instances: int
    features: int
    imbalance_ratio: float
    safe_pct: float


# Порог "безопасного" набора: не меньше половины позитивных образцов безопасны
SAFE_THRESHOLD = 50.0

_ROWS = [
    (1, "ecoli-0_vs_1", 220, 7, 1.86, 99.30),
    (2, "shuttle-c0-vs-c4", 1829, 9, 13.87, 99.19),
    (3, "vowel0", 988, 13, 9.98, 98.89),
    (4, "iris0", 150, 4, 2.00, 98.00),
    (5, "segment0", 2308, 19, 6.02, 96.35),
    (6, "wisconsin", 683, 9, 1.86, 91.21),
    (7, "vehicle2", 846, 18, 2.88, 89.45),
    (8, "page-blocks-1-3_vs_4", 472, 10, 15.86, 82.14),
    (9, "ecoli2", 336, 7, 5.46, 76.92),
    (10, "vehicle0", 846, 18, 3.25, 75.38),
    (11, "ecoli-0-3-4-6_vs_5", 205, 7, 9.25, 75.00),
    (12, "ecoli-0-4-6_vs_5", 203, 6, 9.15, 75.00),
    (13, "ecoli-0-3-4_vs_5", 200, 7, 9.00, 75.00),
    (14, "newthyroid2", 215, 5, 5.14, 74.29),
    (15, "glass6", 214, 9, 6.38, 72.41),
    (16, "ecoli-0-1-4-7_vs_5-6", 332, 6, 12.28, 72.00),
    (17, "ecoli-0-1-3-7_vs_2-6", 281, 7, 39.14, 71.43),
    (18, "page-blocks0", 5472, 10, 8.79, 70.30),
    (19, "ecoli-0-2-3-4_vs_5", 202, 7, 9.10, 70.00),
    (20, "ecoli4", 336, 7, 15.80, 70.00),
    (21, "ecoli-0-1-4-6_vs_5", 280, 6, 13.00, 70.00),
    (22, "ecoli-0-1_vs_5", 240, 6, 11.00, 70.00),
    (23, "new-thyroid1", 215, 5, 5.14, 68.57),
    (24, "yeast-0-2-5-7-9_vs_3-6-8", 1004, 8, 9.14, 67.68),
    (25, "glass-0-1-2-3_vs_4-5-6", 214, 9, 3.20, 66.67),
    (26, "ecoli-0-1-4-7_vs_2-3-5-6", 336, 7, 10.59, 65.52),
    (27, "ecoli-0-3-4-7_vs_5-6", 257, 7, 9.28, 64.00),
    (28, "glass0", 214, 9, 2.06, 58.57),
    (29, "ecoli-0-1_vs_2-3-5", 244, 7, 9.17, 58.33),
    (30, "ecoli1", 336, 7, 3.36, 57.14),
    (31, "yeast3", 1484, 8, 8.10, 55.83),
    (32, "glass-0-6_vs_5", 108, 9, 11.00, 55.56),
    (33, "yeast-2_vs_8", 482, 8, 23.10, 55.00),
    (34, "yeast-2_vs_4", 514, 8, 9.08, 54.90),
    (35, "led7digit-0-2-4-5-6-7-8-9_vs_1", 443, 7, 10.97, 51.35),
    (36, "shuttle-c2-vs-c4", 129, 9, 20.50, 50.00),
    (37, "glass1", 214, 9, 1.82, 48.68),
    (38, "ecoli-0-2-6-7_vs_3-5", 224, 7, 9.18, 45.45),
    (39, "glass-0-1-6_vs_5", 184, 9, 19.44, 44.44),
    (40, "glass-0-4_vs_5", 92, 9, 9.22, 44.44),
    (41, "ecoli-0-6-7_vs_3-5", 222, 7, 9.09, 40.91),
    (42, "ecoli-0-6-7_vs_5", 220, 6, 10.00, 40.00),
    (43, "yeast6", 1484, 8, 41.40, 37.14),
    (44, "yeast-0-2-5-6_vs_3-7-8-9", 1004, 8, 9.14, 34.34),
    (45, "yeast5", 1484, 8, 32.73, 34.09),
    (46, "ecoli3", 336, 7, 8.60, 31.43),
    (47, "glass4", 214, 9, 15.46, 30.77),
    (48, "pima", 768, 8, 1.87, 28.73),
    (49, "vehicle1", 846, 18, 2.90, 23.04),
    (50, "glass5", 214, 9, 22.78, 22.22),
    (51, "yeast1", 1484, 8, 2.46, 22.14),
    (52, "vehicle3", 846, 18, 2.99, 17.45),
    (53, "yeast-0-3-5-9_vs_7-8", 506, 8, 9.12, 16.00),
    (54, "cleveland-0_vs_4", 173, 13, 12.31, 15.38),
    (55, "yeast-0-5-6-7-9_vs_4", 528, 8, 9.35, 7.84),
    (56, "yeast4", 1484, 8, 28.10, 7.84),
    (57, "yeast-1_vs_7", 459, 7, 14.30, 6.67),
    (58, "haberman", 306, 3, 2.78, 6.17),
    (59, "yeast-1-2-8-9_vs_7", 947, 8, 30.57, 3.33),
    (60, "glass-0-1-5_vs_2", 172, 9, 9.12, 0.00),
    (61, "glass-0-1-6_vs_2", 192, 9, 10.29, 0.00),
    (62, "glass2", 214, 9, 11.59, 0.00),
    (63, "glass-0-1-4-6_vs_2", 205, 9, 11.06, 0.00),
    (64, "yeast-1-4-5-8_vs_7", 693, 8, 22.10, 0.00),
]

CATALOG: List[CatalogEntry] = [CatalogEntry(*row) for row in _ROWS]
BY_NAME: Dict[str, CatalogEntry] = {entry.name: entry for entry in CATALOG}


def lookup(name: str) -> Optional[CatalogEntry]:
    return BY_NAME.get(name)


def is_safe(safe_pct: float) -> bool:
    return safe_pct >= SAFE_THRESHOLD


# Имена в порядке таблицы (по убыванию S%)
def ordered_names() -> List[str]:
    return [entry.name for entry in CATALOG]
