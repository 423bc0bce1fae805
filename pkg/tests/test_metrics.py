import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advicemaze.metrics import (
    CSV_HEADER,
    EpisodeRecord,
    VisitHeatmap,
    censored_median,
    corridor_second_half_mass,
    episodes_to_stable_goal,
    expected_score,
    kl_divergence,
    moving_average,
    parse_records,
    records_to_csv,
)


def _record(episode, score=100.0, steps=10, goal=False, offered=0, used=0):
    return EpisodeRecord(
        session=1, episode=episode, score=score, steps=steps,
        advice_offered=offered, advice_used=used, reached_goal=goal,
    )


class TestEpisodeRecord:
    def test_used_cannot_exceed_offered(self):
        with pytest.raises(ValueError):
            _record(1, offered=2, used=3)

    def test_csv_round_trip(self):
        records = [
            _record(1, score=-12.5, steps=25, offered=3, used=1),
            _record(2, score=17995.0, steps=10, goal=True, offered=2, used=2),
        ]
        text = records_to_csv(records)
        assert text.splitlines()[0] == CSV_HEADER
        assert parse_records(text) == records

    def test_expected_score_components(self):
        assert expected_score(True, True, True, 14) == pytest.approx(17993.0)
        assert expected_score(False, True, False, 100) == pytest.approx(1450.0)
        assert expected_score(False, False, False, 4) == pytest.approx(-2.0)


class TestMovingAverage:
    def test_constant_series(self):
        out = moving_average([5.0] * 7, window=3)
        np.testing.assert_allclose(out, 5.0)

    def test_one_through_ten(self):
        out = moving_average(list(range(1, 11)), window=10)
        assert out[-1] == pytest.approx(5.5)

    def test_window_one_is_identity(self):
        series = [3.0, -1.0, 4.0]
        np.testing.assert_allclose(moving_average(series, window=1), series)

    def test_partial_windows_lead_in(self):
        out = moving_average([2.0, 4.0, 6.0], window=2)
        np.testing.assert_allclose(out, [2.0, 3.0, 5.0])

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            moving_average([], window=3)

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            moving_average([1.0], window=0)


class TestKlDivergence:
    def test_identical_counts_zero(self):
        counts = np.array([[3, 0], [2, 7]])
        assert kl_divergence(counts, counts) == 0.0

    def test_two_cell_closed_form(self):
        # counts (5,5) vs (9,1): smoothed (6,6) and (10,2)
        p = np.array([[5, 5]])
        q = np.array([[9, 1]])
        expected = 0.5 * math.log(0.5 / (10 / 12)) + 0.5 * math.log(0.5 / (2 / 12))
        got = kl_divergence(p, q)
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(0.2939, abs=2e-4)

    def test_asymmetry(self):
        p = np.array([[5, 5]])
        q = np.array([[9, 1]])
        assert kl_divergence(p, q) != kl_divergence(q, p)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kl_divergence(np.zeros((2, 2)), np.zeros((3, 2)))

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(0, 50), min_size=6, max_size=6),
        st.lists(st.integers(0, 50), min_size=6, max_size=6),
    )
    def test_non_negative(self, p_counts, q_counts):
        p = np.array(p_counts).reshape(2, 3)
        q = np.array(q_counts).reshape(2, 3)
        assert kl_divergence(p, q) >= 0.0


class TestHeatmap:
    def test_total_tracks_records(self):
        hm = VisitHeatmap(3, 2)
        for x, y in ((0, 0), (2, 1), (2, 1)):
            hm.record(x, y)
        assert hm.total == 3
        assert hm.counts[1, 2] == 2

    def test_csv_round_trip(self):
        hm = VisitHeatmap(3, 2, np.array([[1, 2, 3], [4, 5, 6]]))
        again = VisitHeatmap.from_csv(hm.to_csv())
        np.testing.assert_array_equal(again.counts, hm.counts)

    def test_addition(self):
        a = VisitHeatmap(2, 2, np.array([[1, 0], [0, 1]]))
        b = VisitHeatmap(2, 2, np.array([[0, 2], [0, 0]]))
        np.testing.assert_array_equal((a + b).counts, [[1, 2], [0, 1]])

    def test_addition_requires_matching_shape(self):
        with pytest.raises(ValueError):
            VisitHeatmap(2, 2) + VisitHeatmap(3, 2)


class TestConvergenceMetrics:
    def test_streak_detection(self):
        flags = [False, True, True, False, True, True, True, False]
        records = [_record(i + 1, goal=f) for i, f in enumerate(flags)]
        assert episodes_to_stable_goal(records, k=3) == 5

    def test_streak_at_start(self):
        records = [_record(i + 1, goal=True) for i in range(3)]
        assert episodes_to_stable_goal(records, k=3) == 1

    def test_no_streak(self):
        records = [_record(i + 1, goal=(i % 2 == 0)) for i in range(10)]
        assert episodes_to_stable_goal(records, k=3) is None

    def test_censored_median(self):
        assert censored_median([5, None, 3], ceiling=80) == 5.0
        assert censored_median([None, None], ceiling=80) == 81.0
        assert censored_median([2, 4], ceiling=80) == 3.0
        with pytest.raises(ValueError):
            censored_median([], ceiling=10)


def test_corridor_second_half_mass():
    from advicemaze.harness import packaged_map_path
    from advicemaze.world import load_map_file

    gmap = load_map_file(packaged_map_path("desk12.map"))
    hm = VisitHeatmap.for_map(gmap)
    hm.record(2, 7)  # outside the corridor span
    hm.record(5, 6)  # corridor first half
    hm.record(6, 6)  # corridor second half (x in [6, 8) given entry 4, exit 8)
    hm.record(7, 5)  # corridor second half
    assert corridor_second_half_mass(hm, gmap) == pytest.approx(0.5)
