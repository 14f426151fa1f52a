import datetime as dt

import numpy as np
import pytest

from ltvkit.data import UserSeries, read_panel_csv, write_panel_csv
from ltvkit.errors import DataError, UsageError
from ltvkit.numeric import RngStream
from ltvkit.pipeline import (
    ACQUISITION_FEATURES,
    ROLLING_FEATURES,
    ROLLING_LOG_COLUMNS,
    apply_normalizer,
    build_acquisition_labels,
    build_acquisition_sequences,
    build_rolling_labels,
    build_rolling_sequences,
    calendar_features,
    fit_normalizer,
    invert_targets,
    load_sequences,
    rolling_sums,
    save_sequences,
    split_dataset,
    subsample_zero_records,
    transform_targets,
)

# the daily value row used throughout: six observed daily values
ROW_128 = np.array([0.82, 0.96, 0.77, 0.00, 0.78, 1.00])


def series(values, cohort=dt.date(2021, 1, 29), uid=128, region=0):
    return UserSeries(uid, cohort, np.asarray(values, dtype=np.float64), region)


class TestAcquisitionLabels:
    def test_worked_example_reproduced_exactly(self):
        labels = build_acquisition_labels(series(ROW_128), graduation_age=5)
        assert labels.remaining[2] == 1.78
        assert labels.realized[2] == 2.55
        assert labels.total == 4.33
        assert labels.mask.all()

    def test_identity_holds_per_age(self):
        labels = build_acquisition_labels(series(ROW_128), graduation_age=5)
        for a in range(6):
            assert labels.realized[a] + labels.remaining[a] == pytest.approx(
                labels.total, rel=1e-12
            )

    def test_graduation_boundary(self):
        labels = build_acquisition_labels(series(ROW_128), graduation_age=5)
        assert labels.remaining[5] == 0.0

    def test_all_zero_series(self):
        labels = build_acquisition_labels(series(np.zeros(8)), graduation_age=7)
        assert np.all(labels.remaining == 0) and labels.total == 0

    def test_short_series_fully_masked(self):
        labels = build_acquisition_labels(series(ROW_128), graduation_age=10)
        assert not labels.mask.any()

    def test_direct_summation_oracle(self):
        rng = RngStream(3)
        z = np.round(rng.gamma(1.0, 2.0, 40) * (rng.random(40) < 0.4), 2)
        labels = build_acquisition_labels(series(z), graduation_age=39)
        for a in range(40):
            # plain python summation as the oracle
            expected = sum(float(v) for v in z[a + 1 : 40])
            assert labels.remaining[a] == pytest.approx(expected, abs=1e-9)

    def test_negative_values_rejected_at_construction(self):
        with pytest.raises(DataError):
            series([0.5, -0.1])


class TestRollingLabels:
    def test_worked_example(self):
        targets, mask = build_rolling_labels(series(ROW_128), [1], [2])
        assert mask[0, 0]
        assert targets[0, 0] == pytest.approx(0.77, abs=1e-12)

    def test_window_past_cutoff_is_masked(self):
        targets, mask = build_rolling_labels(series(ROW_128), [3], [2, 3])
        assert mask[0, 0] and not mask[0, 1]

    def test_zero_user(self):
        targets, mask = build_rolling_labels(series(np.zeros(10)), [0, 2], [1, 4])
        assert np.all(targets[mask] == 0)

    def test_monotone_in_horizon(self):
        rng = RngStream(5)
        values = rng.gamma(1.0, 3.0, 60) * (rng.random(60) < 0.3)
        targets, mask = rolling_sums(values, np.arange(30), [1, 2, 4, 8, 13, 26])
        for j in range(5):
            both = mask[:, j] & mask[:, j + 1]
            assert np.all(targets[both, j] <= targets[both, j + 1])

    def test_bad_horizons_rejected(self):
        with pytest.raises(UsageError):
            rolling_sums(np.ones(5), [0], [2, 2])
        with pytest.raises(UsageError):
            rolling_sums(np.ones(5), [0], [0, 1])


class TestSubsampling:
    def test_hand_case_p_zero(self):
        kept, gaps = subsample_zero_records(
            np.array([0.0, 0, 5, 0, 0, 0, 2]), 0.0, RngStream(1)
        )
        np.testing.assert_array_equal(kept, [0, 2, 6])
        np.testing.assert_array_equal(gaps, [0, 2, 4])

    def test_p_one_keeps_everything(self):
        kept, gaps = subsample_zero_records(np.zeros(9), 1.0, RngStream(1))
        np.testing.assert_array_equal(kept, np.arange(9))
        np.testing.assert_array_equal(gaps, [0] + [1] * 8)

    def test_nonzero_records_always_kept(self):
        rng = RngStream(2)
        values = rng.gamma(1.0, 1.0, 500) * (rng.random(500) < 0.5)
        kept, _ = subsample_zero_records(values, 0.05, RngStream(3))
        nonzero = set(np.flatnonzero(values > 0))
        assert nonzero.issubset(set(kept.tolist()))

    def test_kept_zero_rate_within_binomial_interval(self):
        p = 0.2
        n = 100_000
        rng = RngStream(4)
        values = (rng.random(n) < 0.5).astype(float)  # half zeros
        kept, _ = subsample_zero_records(values, p, RngStream(5))
        zero_idx = np.flatnonzero(values == 0)
        # exclude the forced first/last steps from the rate estimate
        interior = zero_idx[(zero_idx != 0) & (zero_idx != n - 1)]
        rate = np.isin(interior, kept).mean()
        half_width = 2.576 * np.sqrt(p * (1 - p) / interior.size)
        assert abs(rate - p) < half_width

    def test_gap_telescoping(self):
        rng = RngStream(6)
        values = rng.gamma(1.0, 1.0, 300) * (rng.random(300) < 0.3)
        kept, gaps = subsample_zero_records(values, 0.15, RngStream(7))
        assert gaps.sum() == kept[-1] - kept[0]

    def test_bad_probability(self):
        with pytest.raises(UsageError):
            subsample_zero_records(np.ones(3), 1.5, RngStream(0))


class TestCalendarFeatures:
    def test_paper_date(self):
        cal = calendar_features(dt.date(2021, 1, 29))
        assert cal.iso_week == 4
        assert cal.day_of_week == 4  # Friday

    def test_iso_anchor_rule(self):
        assert calendar_features(dt.date(2021, 1, 4)).iso_week == 1

    def test_unit_circle_identity(self):
        rng = RngStream(8)
        day0 = dt.date(2020, 1, 1)
        for _ in range(50):
            cal = calendar_features(day0 + dt.timedelta(days=int(rng.integers(0, 1500))))
            assert cal.week_sin**2 + cal.week_cos**2 == pytest.approx(1.0, abs=1e-12)

    def test_invalid_input(self):
        with pytest.raises(DataError):
            calendar_features("2021-01-29")
        with pytest.raises(DataError):
            calendar_features(dt.datetime(2021, 1, 29, 12, 0))


def make_panel(n_users=30, seed=0, days=120):
    rng = RngStream(seed)
    users = []
    start = dt.date(2021, 1, 4)
    for uid in range(n_users):
        offset = int(rng.integers(0, 28))
        n = days - offset
        values = rng.gamma(1.5, 4.0, n) * (rng.random(n) < 0.25)
        users.append(UserSeries(uid, start + dt.timedelta(days=offset), values))
    return users


class TestNormalizer:
    def make_sequences(self):
        users = make_panel()
        return build_rolling_sequences(
            users,
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4],
            keep_zero_prob=0.3,
            seed=9,
        )

    def test_constant_feature_dropped_with_warning(self):
        seqs = self.make_sequences()
        gap_col = ROLLING_FEATURES.index("gap")
        for s in seqs:
            s.features[:, gap_col] = 7.0
        with pytest.warns(UserWarning, match="gap"):
            stats = fit_normalizer(seqs, ROLLING_FEATURES, ROLLING_LOG_COLUMNS)
        assert "gap" in stats.dropped_columns
        assert stats.n_features == len(ROLLING_FEATURES) - 1

    def test_train_split_standardized(self):
        seqs = self.make_sequences()
        stats = fit_normalizer(seqs, ROLLING_FEATURES, ROLLING_LOG_COLUMNS)
        normed = apply_normalizer(stats, seqs)
        stacked = np.vstack([s.features for s in normed])
        np.testing.assert_allclose(stacked.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(stacked.std(axis=0), 1.0, atol=1e-8)

    def test_target_round_trip(self):
        seqs = self.make_sequences()
        stats = fit_normalizer(seqs, ROLLING_FEATURES, ROLLING_LOG_COLUMNS)
        y = np.abs(RngStream(10).gamma(2.0, 30.0, (40, 2)))
        back = invert_targets(stats, transform_targets(stats, y))
        np.testing.assert_allclose(back, y, atol=1e-10)

    def test_json_round_trip(self):
        from ltvkit.pipeline import NormStats

        seqs = self.make_sequences()
        stats = fit_normalizer(seqs, ROLLING_FEATURES, ROLLING_LOG_COLUMNS)
        stats2 = NormStats.from_dict(stats.to_dict())
        np.testing.assert_array_equal(stats.means, stats2.means)
        np.testing.assert_array_equal(stats.target_sds, stats2.target_sds)
        assert stats2.kept_columns == stats.kept_columns


class TestSequenceBuilders:
    def test_rolling_masks_and_gaps(self):
        users = make_panel(10)
        seqs = build_rolling_sequences(
            users,
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4, 13],
            keep_zero_prob=0.2,
            seed=1,
        )
        assert len(seqs) == 10
        for s in seqs:
            assert s.mode == "rolling"
            assert s.features.shape == (s.n_steps, len(ROLLING_FEATURES))
            assert s.targets.shape == (s.n_steps, 3)
            assert s.gaps[0] == 0 and np.all(s.gaps[1:] >= 1)
            # weekly aggregation: targets are sums of future weekly values
            assert np.all(s.targets[s.mask] >= 0)

    def test_rolling_subsampling_is_user_keyed(self):
        users = make_panel(10)
        kw = dict(
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4],
            keep_zero_prob=0.3,
            seed=1,
        )
        a = build_rolling_sequences(users, **kw)
        b = build_rolling_sequences(list(reversed(users)), **kw)
        b_by_uid = {s.user_id: s for s in b}
        for s in a:
            np.testing.assert_array_equal(s.features, b_by_uid[s.user_id].features)

    def test_label_end_masks_crossing_windows(self):
        users = make_panel(10)
        kw = dict(
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4],
            keep_zero_prob=1.0,
            seed=1,
        )
        open_seqs = build_rolling_sequences(users, **kw)
        cut = dt.date(2021, 3, 1)
        cut_seqs = build_rolling_sequences(users, label_end=cut, **kw)
        start = dt.date(2021, 1, 4)
        for so, sc in zip(open_seqs, cut_seqs):
            for t in range(sc.n_steps):
                for j, h in enumerate([1, 4]):
                    window_end = sc.step_dates[t] + dt.timedelta(days=7 * h + 6)
                    if window_end > cut:
                        assert not sc.mask[t, j]
                    else:
                        assert sc.mask[t, j] == so.mask[t, j]

    def test_eval_date_truncates_and_marks(self):
        users = make_panel(10)
        eval_date = dt.date(2021, 3, 8)
        seqs = build_rolling_sequences(
            users,
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4],
            keep_zero_prob=0.2,
            seed=1,
            eval_date=eval_date,
        )
        eval_week = (eval_date - dt.date(2021, 1, 4)).days // 7
        for s in seqs:
            assert s.eval_step == s.n_steps - 1
            assert s.step_dates[-1] == dt.date(2021, 1, 4) + dt.timedelta(
                days=7 * eval_week
            )

    def test_acquisition_sequences(self):
        users = make_panel(8)
        seqs = build_acquisition_sequences(
            users, graduation_age=60, keep_zero_prob=0.3, seed=2
        )
        for s in seqs:
            assert s.mode == "acquisition"
            assert s.features.shape[1] == len(ACQUISITION_FEATURES)
            assert s.targets.shape[1] == 1
        steps = list(seqs[0].steps())
        assert steps[0].masks.shape == (1,)
        assert steps[0].rolling_targets.size == 0

    def test_labeled_step_views_rolling(self):
        users = make_panel(3)
        seqs = build_rolling_sequences(
            users,
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4],
            keep_zero_prob=0.5,
            seed=3,
        )
        s = seqs[0]
        steps = list(s.steps())
        assert len(steps) == s.n_steps
        st = steps[0]
        assert st.masks.shape == (3,)  # acquisition slot + 2 horizons
        assert not st.masks[0]
        assert np.isnan(st.acquisition_target)
        np.testing.assert_array_equal(st.rolling_targets, s.targets[0])


class TestSplit:
    def test_partition(self):
        users = make_panel(40)
        split = split_dataset(
            users, (dt.date(2021, 1, 15), dt.date(2021, 1, 25)), (None, None)
        )
        ids = (
            [u.user_id for u in split.train]
            + [u.user_id for u in split.val]
            + [u.user_id for u in split.test]
        )
        assert sorted(ids) == sorted(u.user_id for u in users)
        for u in split.train:
            assert u.cohort_date < dt.date(2021, 1, 15)
        for u in split.val:
            assert dt.date(2021, 1, 15) <= u.cohort_date < dt.date(2021, 1, 25)
        for u in split.test:
            assert u.cohort_date >= dt.date(2021, 1, 25)

    def test_degenerate_cutoff_puts_everything_in_train(self):
        users = [series(ROW_128, uid=i) for i in range(5)]
        split = split_dataset(users, (dt.date(2022, 1, 1), dt.date(2022, 1, 1)))
        assert len(split.train) == 5 and not split.val and not split.test

    def test_empty_train_rejected(self):
        users = [series(ROW_128, uid=i) for i in range(5)]
        with pytest.raises(UsageError):
            split_dataset(users, (dt.date(2020, 1, 1), dt.date(2022, 1, 1)))

    def test_unordered_cutoffs_rejected(self):
        users = [series(ROW_128)]
        with pytest.raises(UsageError):
            split_dataset(users, (dt.date(2021, 2, 1), dt.date(2021, 1, 1)))


class TestSequenceFiles:
    def test_round_trip(self, tmp_path):
        users = make_panel(6)
        seqs = build_rolling_sequences(
            users,
            panel_start=dt.date(2021, 1, 4),
            n_weeks=17,
            horizons_weeks=[1, 4],
            keep_zero_prob=0.3,
            seed=2,
            eval_date=dt.date(2021, 3, 8),
        )
        save_sequences(tmp_path, "test", seqs)
        loaded = load_sequences(tmp_path, "test", "rolling")
        assert len(loaded) == len(seqs)
        by_uid = {s.user_id: s for s in loaded}
        for s in seqs:
            l = by_uid[s.user_id]
            np.testing.assert_array_equal(l.features, s.features)
            np.testing.assert_array_equal(l.targets, s.targets)
            np.testing.assert_array_equal(l.mask, s.mask)
            assert l.eval_step == s.eval_step
            assert l.step_dates == s.step_dates
            assert l.ids == s.ids


class TestPanelCsv:
    def test_round_trip(self, tmp_path):
        users = make_panel(5)
        path = tmp_path / "panel.csv"
        write_panel_csv(users, path)
        loaded = read_panel_csv(path)
        assert len(loaded) == 5
        for a, b in zip(users, loaded):
            assert a.user_id == b.user_id
            assert a.cohort_date == b.cohort_date
            assert a.region_id == b.region_id
            np.testing.assert_array_equal(a.values, b.values)
