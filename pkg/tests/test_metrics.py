import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binsketch.errors import ParseError, ValidationError
from binsketch.metrics import (
    RelevanceJudgment,
    average_precision,
    cliffs_delta,
    format_report,
    judgments_from_results,
    load_class_map,
    map_at_k,
    matching_eval,
    matching_eval_grouped,
    mp_at_k,
    save_class_map,
)


def J(flags, qid="q"):
    return RelevanceJudgment(query_id=qid, ranked_relevance=list(flags))


class TestMapAtK:
    def test_all_relevant_is_one(self):
        assert map_at_k([J([1, 1, 1])], k=3) == 1.0

    def test_hand_case(self):
        # P@1 = 1, P@3 = 2/3, averaged over the two relevant ranks.
        assert map_at_k([J([1, 0, 1])], k=3) == pytest.approx(5 / 6, abs=1e-9)

    def test_no_relevant_is_zero(self):
        assert map_at_k([J([0, 0, 0])], k=3) == 0.0

    def test_mean_over_queries(self):
        assert map_at_k([J([1, 1]), J([0, 0])], k=2) == 0.5

    def test_query_order_does_not_matter(self):
        a = [J([1, 0, 1], "a"), J([0, 1, 0], "b"), J([1, 1, 0], "c")]
        assert map_at_k(a, k=3) == map_at_k(list(reversed(a)), k=3)

    def test_rank_order_matters(self):
        assert map_at_k([J([1, 0, 0])], k=3) > map_at_k([J([0, 0, 1])], k=3)

    def test_truncates_at_k(self):
        assert map_at_k([J([1, 0])], k=2) == average_precision([1, 0])

    def test_empty_judgments_rejected(self):
        with pytest.raises(ValidationError):
            map_at_k([], k=5)

    def test_flags_longer_than_k_rejected(self):
        with pytest.raises(ValidationError):
            map_at_k([J([1, 0, 1, 0])], k=3)

    def test_bad_flag_values_rejected(self):
        with pytest.raises(ValidationError):
            J([1, 2, 0])


class TestMpAtK:
    def test_hand_case(self):
        assert mp_at_k([J([1, 0, 1])], k=3) == pytest.approx(2 / 3, abs=1e-9)

    def test_all_relevant(self):
        assert mp_at_k([J([1, 1, 1])], k=3) == 1.0

    def test_mean_of_two_queries(self):
        assert mp_at_k([J([1, 1]), J([0, 0])], k=2) == 0.5

    def test_short_list_charged_for_missing_ranks(self):
        # Only 2 hits returned but k=4: both relevant gives 2/4.
        assert mp_at_k([J([1, 1])], k=4) == 0.5

    def test_insensitive_to_rank_order(self):
        assert mp_at_k([J([1, 0, 0])], k=3) == mp_at_k([J([0, 0, 1])], k=3)


@settings(max_examples=60)
@given(
    st.lists(
        st.lists(st.integers(min_value=0, max_value=1), min_size=0, max_size=6),
        min_size=1,
        max_size=5,
    )
)
def test_metrics_stay_in_unit_interval(flag_lists):
    judgments = [J(flags, f"q{i}") for i, flags in enumerate(flag_lists)]
    for value in (map_at_k(judgments, k=6), mp_at_k(judgments, k=6)):
        assert 0.0 <= value <= 1.0


class TestMatchingEval:
    def test_perfect_match(self):
        pairs = {("a", "x"), ("b", "y")}
        report = matching_eval(pairs, set(pairs))
        assert report.precision == report.recall == report.f1 == 1.0
        assert report.matched_pairs == 2

    def test_empty_prediction(self):
        report = matching_eval(set(), {("a", "x")})
        assert report.precision == report.recall == report.f1 == 0.0

    def test_hand_case(self):
        report = matching_eval({("a", "x"), ("a", "y")}, {("a", "x")})
        assert report.precision == 0.5
        assert report.recall == 1.0
        assert report.f1 == pytest.approx(2 / 3, abs=1e-12)

    def test_f1_is_harmonic_mean(self):
        report = matching_eval({("a", "x"), ("b", "z")}, {("a", "x"), ("c", "w")})
        p, r = report.precision, report.recall
        assert report.f1 == pytest.approx(2 * p * r / (p + r), abs=1e-12)

    def test_grouped_matches_materialized_sets(self, rng):
        # Oracle: build the explicit cartesian pair sets and compare.
        for trial in range(20):
            q = [(int(rng.integers(0, 4)), int(rng.integers(0, 3))) for _ in range(12)]
            r = [(int(rng.integers(0, 4)), int(rng.integers(0, 3))) for _ in range(15)]
            q_items = [(i, lab, cls) for i, (lab, cls) in enumerate(q)]
            r_items = [(i, lab, cls) for i, (lab, cls) in enumerate(r)]
            predicted = {
                (qi, ri)
                for (qi, ql, _), (ri, rl, _) in itertools.product(q_items, r_items)
                if ql == rl
            }
            truth = {
                (qi, ri)
                for (qi, _, qc), (ri, _, rc) in itertools.product(q_items, r_items)
                if qc == rc
            }
            expect = matching_eval(predicted, truth)
            got = matching_eval_grouped(q, r)
            assert got == expect


class TestCliffsDelta:
    def test_identical_singletons(self):
        assert cliffs_delta([5.0], [5.0]) == 0.0

    def test_total_dominance(self):
        assert cliffs_delta([10, 11], [1, 2]) == 1.0

    def test_hand_case_matches_enumeration(self):
        # Enumerate the four pairs: (1,2) less, (1,3) less, (2,2) tie,
        # (2,3) less. Strict dominance gives (0 - 3) / 4; the tie counts
        # toward neither side.
        assert cliffs_delta([1, 2], [2, 3]) == -0.75

    def test_matches_brute_force_enumeration(self, rng):
        for _ in range(20):
            a = rng.integers(-5, 5, size=int(rng.integers(1, 7))).astype(float)
            b = rng.integers(-5, 5, size=int(rng.integers(1, 7))).astype(float)
            greater = sum(1 for x in a for y in b if x > y)
            less = sum(1 for x in a for y in b if x < y)
            assert cliffs_delta(a, b) == (greater - less) / (len(a) * len(b))

    def test_empty_sample_rejected(self):
        with pytest.raises(ValidationError):
            cliffs_delta([], [1.0])

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(-100, 100), min_size=1, max_size=8),
        st.lists(st.floats(-100, 100), min_size=1, max_size=8),
    )
    def test_antisymmetry_and_range(self, a, b):
        delta = cliffs_delta(a, b)
        assert -1.0 <= delta <= 1.0
        assert delta == -cliffs_delta(b, a)


class TestJudgmentsFromResults:
    def _results(self):
        return [
            ("q0", [("r0", 0.9), ("r1", 0.8), ("r2", 0.7)]),
            ("q1", [("r2", 0.9), ("r0", 0.2)]),
        ]

    def test_flags_follow_class_map(self):
        class_map = {"q0": "A", "q1": "B", "r0": "A", "r1": "B", "r2": "A"}
        judgments, excluded = judgments_from_results(self._results(), class_map, k=3)
        assert excluded == 0
        assert judgments[0].ranked_relevance == [1, 0, 1]
        assert judgments[1].ranked_relevance == [0, 0]

    def test_truncates_hits_at_k(self):
        class_map = {"q0": "A", "q1": "B", "r0": "A", "r1": "B", "r2": "A"}
        judgments, _ = judgments_from_results(self._results(), class_map, k=1)
        assert judgments[0].ranked_relevance == [1]

    def test_unknown_hit_counts_as_irrelevant(self):
        class_map = {"q0": "A", "q1": "A", "r0": "A"}
        judgments, _ = judgments_from_results(self._results(), class_map, k=3)
        assert judgments[0].ranked_relevance == [1, 0, 0]

    def test_query_without_class_members_excluded(self):
        class_map = {"q0": "A", "q1": "LONELY", "r0": "A", "r1": "B", "r2": "A"}
        judgments, excluded = judgments_from_results(self._results(), class_map, k=3)
        assert excluded == 1
        assert [j.query_id for j in judgments] == ["q0"]

    def test_repo_ids_restrict_membership(self):
        # q0's class exists only among query ids; with repo_ids given it
        # must be excluded.
        class_map = {"q0": "A", "q1": "A", "r0": "B", "r1": "B", "r2": "B"}
        judgments, excluded = judgments_from_results(
            self._results(), class_map, k=3, repo_ids=["r0", "r1", "r2"]
        )
        assert excluded == 2
        assert judgments == []

    def test_missing_query_class_rejected(self):
        with pytest.raises(ValidationError, match="missing"):
            judgments_from_results(self._results(), {"r0": "A"}, k=3)


class TestClassMapIO:
    def test_round_trip(self, tmp_path):
        mapping = {"p0": "A", "p1": "B", "weird id": "C"}
        path = tmp_path / "classes.tsv"
        save_class_map(mapping, str(path))
        assert load_class_map(str(path)) == mapping

    def test_conflicting_entries_rejected(self, tmp_path):
        path = tmp_path / "classes.tsv"
        path.write_bytes(b"p0\tA\np0\tB\n")
        with pytest.raises(ParseError, match="conflicting"):
            load_class_map(str(path))

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "classes.tsv"
        path.write_bytes(b"p0\n")
        with pytest.raises(ParseError):
            load_class_map(str(path))


class TestFormatReport:
    def test_floats_get_six_decimals(self):
        text = format_report({"map_at_k": 5 / 6, "queries": 3, "status": "pass"})
        assert text == "map_at_k=0.833333\nqueries=3\nstatus=pass\n"
