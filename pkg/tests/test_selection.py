import json

import numpy as np
import pytest

from datasets import Dataset
from hardness import Measure, estimate_all, profile_from_scores
from neighborhood import RegionOfCompetence, knn
from pool import TrainedPool, bagging_pool
from selection import (DynamicSelector, SelectionResult, SelectorConfig, Technique, full_removal_order,
                       local_oracles, oracle_matrix, predict, select_knora_b, select_knora_bi, select_knora_e,
                       select_knora_u, select_proposed, trace_line)

QUERY = np.array([0.0, 0.0])

# c1 ошибается только на x1, c2 - только на x5, c3 - только на x6, BAD - везде
C1 = ((0.0, 1.0), 0.0)
C2 = ((-1.0, 0.0), 4.5)
C3 = ((-1.0, 20.0), 11.5)
BAD = ((1.0, 0.0), -5.5)


def make_pool(*members):
    return TrainedPool(
        weights=np.array([w for w, _ in members], dtype=float),
        biases=np.array([b for _, b in members], dtype=float),
        seed=0,
        train_fingerprint="toy",
    )


@pytest.fixture
def strip_dsel():
    features = np.array([[1.0, -0.3], [2.0, 0.3], [3.0, 0.3], [4.0, 0.2], [5.0, 0.2], [6.0, -0.2], [7.0, -0.3]])
    return Dataset("strip", features, np.array([1, 1, 1, 1, 1, 0, 0]), ["u", "v"])


def test_member_errors(strip_dsel):
    hits = oracle_matrix(make_pool(C1, C2, C3, BAD), strip_dsel)
    assert np.flatnonzero(~hits[:, 0]).tolist() == [0]
    assert np.flatnonzero(~hits[:, 1]).tolist() == [4]
    assert np.flatnonzero(~hits[:, 2]).tolist() == [5]
    assert not hits[:, 3].any()


def test_local_oracles(strip_dsel):
    pool = make_pool(C1, C2)
    roc = knn(QUERY, strip_dsel, 7)
    assert local_oracles(pool, strip_dsel, roc).tolist() == []
    assert local_oracles(pool, strip_dsel, knn(QUERY, strip_dsel, 4)).tolist() == [1]
    empty = RegionOfCompetence(indices=(), distances=(), query=QUERY)
    assert local_oracles(pool, strip_dsel, empty).tolist() == [0, 1]


def test_knora_e_drops_furthest_until_oracle(strip_dsel):
    result = select_knora_e(make_pool(C1, C2), strip_dsel, QUERY, k=7)
    assert result.removal_trace == [6, 5, 4]
    assert result.selected.tolist() == [1]
    assert not result.fallback_used
    assert len(result.region) == 4


def test_proposed_sole_hardest(strip_dsel):
    profile = profile_from_scores([0.9, 0.1, 0.2, 0.2, 0.3, 0.4, 0.1], Measure.KDN)
    result = select_proposed(make_pool(C1, C2), strip_dsel, QUERY, 7, profile)
    assert result.removal_trace == [0]
    assert result.selected.tolist() == [0]


def test_proposed_tie_takes_furthest(strip_dsel):
    profile = profile_from_scores([0.8, 0.1, 0.1, 0.1, 0.1, 0.8, 0.2], Measure.LSC)
    result = select_proposed(make_pool(C1, C2), strip_dsel, QUERY, 7, profile)
    assert result.removal_trace == [5, 0]
    assert result.selected.tolist() == [0]


def test_proposed_double_tie_takes_larger_index():
    features = np.array([[1.0], [-1.0], [3.0], [5.0]])
    dsel = Dataset("twins", features, np.array([1, 0, 1, 0]), ["x"])
    profile = profile_from_scores([0.7, 0.7, 0.1, 0.1])
    # Член ошибается на обоих ближайших: первым уходит индекс 1
    pool = make_pool(((-1.0,), 0.0))
    result = select_proposed(pool, dsel, np.array([0.0]), 4, profile)
    assert result.removal_trace[:2] == [1, 0]


def test_proposed_profile_must_align(strip_dsel):
    with pytest.raises(ValueError):
        select_proposed(make_pool(C1), strip_dsel, QUERY, 7, profile_from_scores([0.5, 0.5]))


def test_global_oracle_needs_no_removal(strip_dsel):
    perfect = ((-1.0, 0.0), 5.5)
    for select in (select_knora_e, select_knora_b, select_knora_bi):
        result = select(make_pool(C1, perfect), strip_dsel, QUERY, 7)
        assert result.removal_trace == []
        assert result.selected.tolist() == [1]
        assert len(result.region) == 7


def test_wrong_everywhere_falls_back(strip_dsel):
    result = select_knora_e(make_pool(BAD, BAD), strip_dsel, QUERY, 7)
    assert result.fallback_used
    assert result.selected.tolist() == [0, 1]
    assert result.removal_trace == [6, 5, 4, 3, 2, 1, 0]
    assert len(result.region) == 0


def test_k_larger_than_dsel(strip_dsel):
    with pytest.raises(ValueError):
        select_knora_e(make_pool(C1), strip_dsel, QUERY, 8)


def test_knora_u_votes(strip_dsel):
    result = select_knora_u(make_pool(C1, C2, BAD), strip_dsel, QUERY, 7)
    assert result.selected.tolist() == [0, 1]
    assert result.weights.tolist() == [6, 6]
    assert not result.fallback_used

    halves = select_knora_u(make_pool(C1, C2), strip_dsel, QUERY, 4)
    assert halves.weights.tolist() == [3, 4]

    nobody = select_knora_u(make_pool(BAD), strip_dsel, QUERY, 7)
    assert nobody.fallback_used
    assert nobody.weights.tolist() == [1]


def test_knora_b_keeps_both_classes(strip_dsel):
    result = select_knora_b(make_pool(C1, C2), strip_dsel, QUERY, 7)
    assert result.removal_trace == [6, 4]
    assert result.selected.tolist() == [1]
    assert 5 in result.region


def test_knora_b_differs_from_knora_e(strip_dsel):
    pool = make_pool(C1, C3)
    by_e = select_knora_e(pool, strip_dsel, QUERY, 7)
    assert by_e.removal_trace == [6, 5]
    assert by_e.selected.tolist() == [1]

    by_b = select_knora_b(pool, strip_dsel, QUERY, 7)
    assert by_b.fallback_used
    assert by_b.removal_trace == [6, 4, 3, 2, 1]
    assert by_b.region.indices == (0, 5)
    assert by_b.selected.tolist() == [0, 1]


def test_knora_bi_never_drops_lone_positive(strip_dsel):
    dsel = Dataset("lone", np.asarray(strip_dsel.features), np.array([1, 0, 0, 0, 0, 0, 0]), ["u", "v"])
    # Предсказывает positive только справа: ошибается на всех семи
    pool = make_pool(((1.0, 0.0), -1.5))
    result = select_knora_bi(pool, dsel, QUERY, 7)
    assert 0 not in result.removal_trace
    assert result.removal_trace == [6, 5, 4, 3, 2, 1]
    assert result.region.indices == (0,)
    assert result.fallback_used
    assert result.selected.tolist() == [0]


def test_all_negative_region_stops_before_emptying():
    features = np.arange(1.0, 8.0).reshape(-1, 1)
    dsel = Dataset("negatives", np.vstack([features, [[100.0]]]), np.array([0] * 7 + [1]), ["x"])
    pool = make_pool(((1.0,), -0.5))
    for select in (select_knora_b, select_knora_bi):
        result = select(pool, dsel, np.array([0.0]), 7)
        assert result.fallback_used
        assert result.selected.tolist() == [0]
    assert select_knora_b(pool, dsel, np.array([0.0]), 7).removal_trace == [6, 5, 4, 3, 2, 1]
    assert select_knora_e(pool, dsel, np.array([0.0]), 7).removal_trace == [6, 5, 4, 3, 2, 1, 0]


def test_predict_single_member():
    pool = make_pool(((1.0,), -0.5))
    label, score = predict(pool, SelectionResult(np.array([0]), [], False), np.array([2.0]))
    assert label == 1
    assert 0.5 < score < 1.0


def test_predict_majority_beats_support():
    pool = make_pool(((1.0,), 0.5), ((1.0,), 0.5), ((1.0,), -3.0))
    label, _ = predict(pool, SelectionResult(np.arange(3), [], False), np.array([0.0]))
    assert label == 1


def test_predict_tie_uses_summed_probabilities():
    query = np.array([0.0])
    selection = SelectionResult(np.arange(4), [], False)
    leaning_positive = make_pool(((1.0,), 3.0), ((1.0,), 0.1), ((1.0,), -0.2), ((1.0,), -0.1))
    assert predict(leaning_positive, selection, query)[0] == 1
    leaning_negative = make_pool(((1.0,), -3.0), ((1.0,), -0.1), ((1.0,), 0.2), ((1.0,), 0.1))
    assert predict(leaning_negative, selection, query)[0] == 0


def test_predict_uses_knora_u_weights():
    pool = make_pool(((1.0,), 1.0), ((1.0,), -1.0))
    weighted = SelectionResult(np.array([0, 1]), [], False, weights=np.array([1, 5]))
    assert predict(pool, weighted, np.array([0.0]))[0] == 0


def test_predict_rejects_empty_selection():
    with pytest.raises(ValueError):
        predict(make_pool(C1), SelectionResult(np.array([], dtype=int), [], True), QUERY)


def test_selector_config_parse():
    assert SelectorConfig.parse("KNORA-E").technique is Technique.KNORA_E
    assert SelectorConfig.parse("knora_bi").technique is Technique.KNORA_BI
    proposed = SelectorConfig.parse("PROP-LSCi")
    assert proposed.technique is Technique.PROPOSED
    assert proposed.measure is Measure.LSCI
    assert proposed.label == "PROP-LSCi"
    assert SelectorConfig.parse("PROPOSED:kdn").measure is Measure.KDN
    from_dict = SelectorConfig.parse({"technique": "PROPOSED", "measure": "KDNi", "k": 5})
    assert (from_dict.k, from_dict.measure) == (5, Measure.KDNI)


@pytest.mark.parametrize("value", ["KNORA-X", "PROPOSED", {"technique": "KNORA-U", "measure": "LSC"}])
def test_selector_config_rejects(value):
    with pytest.raises(ValueError):
        SelectorConfig.parse(value)


def test_selector_config_k_positive():
    with pytest.raises(ValueError):
        SelectorConfig(Technique.KNORA_E, k=0)


def test_full_removal_order(strip_dsel):
    roc = knn(QUERY, strip_dsel, 7)
    assert full_removal_order(strip_dsel, roc, SelectorConfig(Technique.KNORA_E)) == [6, 5, 4, 3, 2, 1, 0]
    assert full_removal_order(strip_dsel, roc, SelectorConfig(Technique.KNORA_B)) == [6, 4, 3, 2, 1, 5, 0]
    profile = profile_from_scores([0.9, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    config = SelectorConfig(Technique.PROPOSED, measure=Measure.LSC)
    assert full_removal_order(strip_dsel, roc, config, profile) == [0, 6, 5, 4, 3, 2, 1]


def test_dynamic_selector_checks_profile(strip_dsel):
    config = SelectorConfig(Technique.PROPOSED, measure=Measure.KDN)
    with pytest.raises(ValueError):
        DynamicSelector(make_pool(C1), strip_dsel, config)
    with pytest.raises(ValueError):
        DynamicSelector(make_pool(C1), strip_dsel, config, profile_from_scores([0.1]))
    with pytest.raises(ValueError):
        DynamicSelector(make_pool(C1), strip_dsel, SelectorConfig(Technique.KNORA_E, k=8))


def _random_setup(blobs, seed):
    dsel = blobs(seed=seed, n_pos=15, n_neg=45, shift=1.0, name=f"blobs{seed}")
    pool = bagging_pool(dsel, M=10, seed=seed, epochs=10)
    queries = np.random.default_rng(seed).normal(loc=0.5, scale=1.5, size=(200, 2))
    return dsel, pool, queries


@pytest.mark.parametrize("seed", range(5))
def test_constant_profile_reproduces_knora_e(blobs, seed):
    dsel, pool, queries = _random_setup(blobs, seed)
    constant = profile_from_scores(np.full(dsel.n_samples, 0.5), Measure.KDN)
    by_distance = DynamicSelector(pool, dsel, SelectorConfig(Technique.KNORA_E))
    by_hardness = DynamicSelector(pool, dsel, SelectorConfig(Technique.PROPOSED, measure=Measure.KDN), constant)
    for query in queries:
        label_e, score_e, selection_e = by_distance.predict(query)
        label_p, score_p, selection_p = by_hardness.predict(query)
        assert selection_p.removal_trace == selection_e.removal_trace
        assert selection_p.selected.tolist() == selection_e.selected.tolist()
        assert (label_p, score_p) == (label_e, score_e)
        assert by_hardness.removal_order(query) == by_distance.removal_order(query)


@pytest.mark.parametrize("seed", range(5))
def test_selected_members_are_sound(blobs, seed):
    dsel, pool, queries = _random_setup(blobs, seed)
    hits = oracle_matrix(pool, dsel)
    profile = estimate_all(dsel, Measure.LSCI)
    techniques = [SelectorConfig(Technique.KNORA_E), SelectorConfig(Technique.KNORA_B),
                  SelectorConfig(Technique.KNORA_BI), SelectorConfig(Technique.PROPOSED, measure=Measure.LSCI)]
    for config in techniques:
        selector = DynamicSelector(pool, dsel, config, profile)
        for query in queries:
            selection = selector.select(query)
            assert selection.selected.size > 0
            assert len(selection.removal_trace) + len(selection.region) == config.k
            if selection.fallback_used:
                continue
            assert len(selection.removal_trace) < config.k
            for member in selection.selected:
                assert hits[list(selection.region.indices), member].all()


def test_trace_line(strip_dsel):
    result = select_knora_e(make_pool(C1, C2), strip_dsel, QUERY, 7)
    record = json.loads(trace_line(3, "KNORA-E", result, dataset="strip", fold=1))
    assert record == {
        "dataset": "strip", "fold": 1, "query_id": 3, "technique": "KNORA-E",
        "removal_trace": [6, 5, 4], "selected_size": 1, "fallback": False,
    }
