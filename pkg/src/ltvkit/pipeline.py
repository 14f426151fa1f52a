"""From raw user-day panels to training-ready sequences.

Covers label construction (remaining-value targets to a graduation age, and
forward-window sums per horizon), zero-record subsampling with gap
features, calendar features, feature/target normalization fitted on the
training split only, and leakage-safe cohort/date splits.

Rolling mode aggregates days into calendar-aligned weeks before labeling;
acquisition mode stays daily.
"""

from __future__ import annotations

import datetime as dt
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data import UserSeries
from .errors import DataError, UsageError
from .numeric import RngStream

__all__ = [
    "calendar_features",
    "build_acquisition_labels",
    "build_rolling_labels",
    "rolling_sums",
    "subsample_zero_records",
    "LabeledStep",
    "LabeledSequence",
    "build_rolling_sequences",
    "build_acquisition_sequences",
    "NormStats",
    "fit_normalizer",
    "apply_normalizer",
    "transform_targets",
    "invert_targets",
    "SplitPanel",
    "split_dataset",
    "save_sequences",
    "load_sequences",
    "ROLLING_FEATURES",
    "ACQUISITION_FEATURES",
]

WEEKS_PER_YEAR = 52.1775

# trailing windows (weeks) summarized as features at every rolling step
TRAILING_WINDOWS = [4, 13, 26]
ROLLING_FEATURES = [
    "value",
    "cum_value",
    "trail4",
    "trail13",
    "trail26",
    "age",
    "gap",
    "woy_sin",
    "woy_cos",
]
ROLLING_LOG_COLUMNS = [0, 1, 2, 3, 4]
ACQUISITION_FEATURES = [
    "value",
    "cum_value",
    "age",
    "gap",
    "woy_sin",
    "woy_cos",
    "dow_sin",
    "dow_cos",
]
ACQUISITION_LOG_COLUMNS = [0, 1]
# monetary columns get log1p before standardization
LOG_COLUMNS = [0, 1]


@dataclass
class CalendarFeatures:
    iso_week: int
    day_of_week: int
    week_sin: float
    week_cos: float


def calendar_features(date: dt.date) -> CalendarFeatures:
    """ISO week of year, day of week (Monday=0), and the cyclic week pair."""
    if not isinstance(date, dt.date) or isinstance(date, dt.datetime):
        raise DataError(f"calendar_features needs a datetime.date, got {date!r}")
    week = date.isocalendar()[1]
    angle = 2.0 * np.pi * week / WEEKS_PER_YEAR
    return CalendarFeatures(
        iso_week=week,
        day_of_week=date.weekday(),
        week_sin=float(np.sin(angle)),
        week_cos=float(np.cos(angle)),
    )


# ---------------------------------------------------------------------------
# labels


@dataclass
class AcquisitionLabels:
    remaining: np.ndarray  # Z+_a for a = 0..T0
    realized: np.ndarray  # Z-_a
    total: float  # Z
    mask: np.ndarray  # label observability


def build_acquisition_labels(series: UserSeries, graduation_age: int) -> AcquisitionLabels:
    """Remaining-value labels: at age a, the sum of values over ages
    (a, graduation_age]. realized[a] + remaining[a] == total for every a.
    """
    if graduation_age < 0:
        raise UsageError(f"graduation age must be >= 0, got {graduation_age}")
    z = series.values
    if np.any(z < 0):
        raise DataError(f"user {series.user_id}: negative value in series")
    T0 = graduation_age
    if series.n_days <= T0:
        # label needs values through the graduation age
        n = T0 + 1
        return AcquisitionLabels(
            remaining=np.zeros(n),
            realized=np.zeros(n),
            total=0.0,
            mask=np.zeros(n, dtype=bool),
        )
    head = z[: T0 + 1]
    realized = np.cumsum(head)
    remaining = np.zeros(T0 + 1)
    if T0 > 0:
        remaining[:T0] = np.cumsum(head[1:][::-1])[::-1]
    total = float(realized[-1])
    return AcquisitionLabels(
        remaining=remaining,
        realized=realized,
        total=total,
        mask=np.ones(T0 + 1, dtype=bool),
    )


def rolling_sums(values: np.ndarray, t0_indices, horizons) -> tuple[np.ndarray, np.ndarray]:
    """Forward-window sums: target[s, j] = sum of values over
    (t0_s, t0_s + H_j]; masked where the window leaves the observed range.
    """
    horizons = list(horizons)
    if any(h2 <= h1 for h1, h2 in zip(horizons, horizons[1:])) or any(
        h < 1 for h in horizons
    ):
        raise UsageError(f"horizons must be strictly increasing and >= 1: {horizons}")
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    csum = np.concatenate([[0.0], np.cumsum(values)])  # csum[i] = sum(values[:i])
    t0 = np.asarray(t0_indices, dtype=np.int64)
    K = len(horizons)
    targets = np.zeros((t0.size, K))
    mask = np.zeros((t0.size, K), dtype=bool)
    for j, h in enumerate(horizons):
        end = t0 + h
        ok = end <= n - 1
        mask[:, j] = ok
        targets[ok, j] = csum[end[ok] + 1] - csum[t0[ok] + 1]
    return targets, mask


def build_rolling_labels(series: UserSeries, t0_ages, horizons_days):
    """Rolling labels on the daily series: sums over (t0, t0 + T_j] days."""
    return rolling_sums(series.values, t0_ages, horizons_days)


def subsample_zero_records(values, keep_zero_prob: float, rng: RngStream):
    """Keep every step with a positive value; keep zero steps independently
    with the given probability; always keep the first and last step. The
    gap feature counts elapsed periods since the previous kept step (0 for
    the first).
    """
    if not 0.0 <= keep_zero_prob <= 1.0:
        raise UsageError(f"keep_zero_prob must be in [0, 1], got {keep_zero_prob}")
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    if n == 0:
        raise UsageError("cannot subsample an empty series")
    draws = rng.random(n)
    keep = (values > 0) | (draws < keep_zero_prob)
    keep[0] = True
    keep[-1] = True
    kept = np.flatnonzero(keep)
    gaps = np.empty(kept.size, dtype=np.int64)
    gaps[0] = 0
    gaps[1:] = np.diff(kept)
    return kept, gaps


# ---------------------------------------------------------------------------
# sequences


@dataclass
class LabeledStep:
    features: np.ndarray
    ids: tuple
    acquisition_target: float
    rolling_targets: np.ndarray
    masks: np.ndarray  # length K+1: [acquisition, rolling...]
    gap: int


@dataclass
class LabeledSequence:
    user_id: int
    ids: tuple
    features: np.ndarray  # (T, F) raw features
    targets: np.ndarray  # (T, K) currency targets (0 where masked)
    mask: np.ndarray  # (T, K) bool
    gaps: np.ndarray  # (T,)
    step_dates: list
    mode: str  # "acquisition" | "rolling"
    eval_step: int | None = None

    @property
    def n_steps(self) -> int:
        return self.features.shape[0]

    def steps(self):
        """Per-step views with the unified target layout."""
        rolling = self.mode == "rolling"
        for t in range(self.n_steps):
            if rolling:
                masks = np.concatenate([[False], self.mask[t]])
                yield LabeledStep(
                    features=self.features[t],
                    ids=self.ids,
                    acquisition_target=float("nan"),
                    rolling_targets=self.targets[t],
                    masks=masks,
                    gap=int(self.gaps[t]),
                )
            else:
                yield LabeledStep(
                    features=self.features[t],
                    ids=self.ids,
                    acquisition_target=float(self.targets[t, 0]),
                    rolling_targets=np.zeros(0),
                    masks=np.array([self.mask[t, 0]]),
                    gap=int(self.gaps[t]),
                )


def _weekly_values(user: UserSeries, panel_start: dt.date, n_weeks: int):
    """Sum the user's daily values into calendar-aligned weeks; returns
    (first_week, weekly array over [first_week, n_weeks))."""
    d0 = (user.cohort_date - panel_start).days
    if d0 < 0:
        raise DataError(f"user {user.user_id} onboarded before the panel start")
    first_week = d0 // 7
    weeks = (d0 + np.arange(user.n_days)) // 7
    in_range = weeks < n_weeks
    weekly = np.bincount(
        weeks[in_range] - first_week,
        weights=user.values[in_range],
        minlength=n_weeks - first_week,
    )
    return first_week, weekly


def build_rolling_sequences(
    users: list[UserSeries],
    panel_start: dt.date,
    n_weeks: int,
    horizons_weeks,
    keep_zero_prob: float,
    seed: int,
    label_end: dt.date | None = None,
    dense: bool = False,
    eval_date: dt.date | None = None,
) -> list[LabeledSequence]:
    """Weekly rolling sequences. Training sequences are subsampled (keyed by
    user id, so output is order-independent); evaluation sequences pass
    dense=True and an eval_date whose week becomes the single labeled step.
    """
    horizons_weeks = list(horizons_weeks)
    eval_week = None
    if eval_date is not None:
        eval_week = (eval_date - panel_start).days // 7
    out = []
    for user in users:
        first_week, weekly = _weekly_values(user, panel_start, n_weeks)
        n_user_weeks = weekly.size
        if n_user_weeks == 0:
            continue
        if eval_week is not None and first_week > eval_week:
            continue  # no history at the evaluation date
        steps = np.arange(n_user_weeks)
        if eval_week is not None:
            steps = steps[: eval_week - first_week + 1]
            if steps.size == 0:
                continue
        targets, mask = rolling_sums(weekly, steps, horizons_weeks)
        if label_end is not None:
            for j, h in enumerate(horizons_weeks):
                end_dates_ok = np.array(
                    [
                        panel_start
                        + dt.timedelta(days=7 * (first_week + int(s) + h) + 6)
                        <= label_end
                        for s in steps
                    ]
                )
                mask[:, j] &= end_dates_ok
        if dense:
            kept = steps
            gaps = np.concatenate([[0], np.ones(steps.size - 1, dtype=np.int64)])
        else:
            rng = RngStream(seed, user.user_id)
            kept, gaps = subsample_zero_records(
                weekly[steps], keep_zero_prob, rng
            )
        c0 = np.concatenate([[0.0], np.cumsum(weekly)])
        feats = np.empty((kept.size, len(ROLLING_FEATURES)))
        dates = []
        for i, s in enumerate(kept):
            s = int(s)
            w = first_week + s
            week_start = panel_start + dt.timedelta(days=7 * w)
            cal = calendar_features(week_start)
            trails = [c0[s + 1] - c0[max(s + 1 - L, 0)] for L in TRAILING_WINDOWS]
            feats[i] = (
                weekly[s],
                c0[s + 1],
                *trails,
                float(s),
                float(gaps[i]),
                cal.week_sin,
                cal.week_cos,
            )
            dates.append(week_start)
        seq = LabeledSequence(
            user_id=user.user_id,
            ids=(user.region_id,),
            features=feats,
            targets=targets[kept],
            mask=mask[kept],
            gaps=gaps,
            step_dates=dates,
            mode="rolling",
            eval_step=(kept.size - 1) if eval_week is not None else None,
        )
        out.append(seq)
    return out


def build_acquisition_sequences(
    users: list[UserSeries],
    graduation_age: int,
    keep_zero_prob: float,
    seed: int,
    label_end: dt.date | None = None,
    dense: bool = False,
    eval_age: int | None = None,
) -> list[LabeledSequence]:
    """Daily acquisition sequences with remaining-value targets. With an
    eval_age, steps stop there and it becomes the marked evaluation step."""
    out = []
    for user in users:
        labels = build_acquisition_labels(user, graduation_age)
        n_steps = min(graduation_age, user.n_days - 1) + 1
        if eval_age is not None:
            if eval_age > n_steps - 1:
                continue  # not observed through the evaluation age
            n_steps = eval_age + 1
        z = user.values[:n_steps]
        observable = bool(labels.mask.any())
        if label_end is not None and user.date_at(graduation_age) > label_end:
            observable = False
        if dense:
            kept = np.arange(n_steps)
            gaps = np.concatenate([[0], np.ones(n_steps - 1, dtype=np.int64)])
        else:
            rng = RngStream(seed, user.user_id)
            kept, gaps = subsample_zero_records(z, keep_zero_prob, rng)
        csum = np.cumsum(z)
        feats = np.empty((kept.size, len(ACQUISITION_FEATURES)))
        dates = []
        targets = np.zeros((kept.size, 1))
        mask = np.zeros((kept.size, 1), dtype=bool)
        for i, a in enumerate(kept):
            day = user.date_at(int(a))
            cal = calendar_features(day)
            dow_angle = 2.0 * np.pi * cal.day_of_week / 7.0
            feats[i] = (
                z[a],
                csum[a],
                float(a),
                float(gaps[i]),
                cal.week_sin,
                cal.week_cos,
                np.sin(dow_angle),
                np.cos(dow_angle),
            )
            dates.append(day)
            if observable:
                targets[i, 0] = labels.remaining[a]
                mask[i, 0] = True
        out.append(
            LabeledSequence(
                user_id=user.user_id,
                ids=(user.region_id,),
                features=feats,
                targets=targets,
                mask=mask,
                gaps=gaps,
                step_dates=dates,
                mode="acquisition",
                eval_step=(kept.size - 1) if eval_age is not None else None,
            )
        )
    return out


# ---------------------------------------------------------------------------
# normalization


@dataclass
class NormStats:
    feature_names: list[str]
    log_columns: list[int]
    kept_columns: list[int]
    dropped_columns: list[str]
    means: np.ndarray
    sds: np.ndarray
    target_means: np.ndarray
    target_sds: np.ndarray

    def to_dict(self) -> dict:
        return {
            "feature_names": self.feature_names,
            "log_columns": self.log_columns,
            "kept_columns": self.kept_columns,
            "dropped_columns": self.dropped_columns,
            "means": self.means.tolist(),
            "sds": self.sds.tolist(),
            "target_means": self.target_means.tolist(),
            "target_sds": self.target_sds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(
            feature_names=list(d["feature_names"]),
            log_columns=list(d["log_columns"]),
            kept_columns=list(d["kept_columns"]),
            dropped_columns=list(d["dropped_columns"]),
            means=np.asarray(d["means"], dtype=np.float64),
            sds=np.asarray(d["sds"], dtype=np.float64),
            target_means=np.asarray(d["target_means"], dtype=np.float64),
            target_sds=np.asarray(d["target_sds"], dtype=np.float64),
        )

    @property
    def n_features(self) -> int:
        return len(self.kept_columns)


def _log_transform(features: np.ndarray, log_columns) -> np.ndarray:
    out = features.astype(np.float64, copy=True)
    for c in log_columns:
        out[:, c] = np.log1p(out[:, c])
    return out


def fit_normalizer(
    sequences: list[LabeledSequence],
    feature_names: list[str],
    log_columns=LOG_COLUMNS,
) -> NormStats:
    """Standardization statistics from training sequences only. Constant
    features are dropped and recorded."""
    if not sequences:
        raise UsageError("fit_normalizer needs at least one sequence")
    stacked = np.vstack([s.features for s in sequences])
    stacked = _log_transform(stacked, log_columns)
    means = stacked.mean(axis=0)
    sds = stacked.std(axis=0)
    kept, dropped = [], []
    for c in range(stacked.shape[1]):
        if sds[c] > 1e-12:
            kept.append(c)
        else:
            dropped.append(feature_names[c])
    if dropped:
        warnings.warn(f"dropping zero-variance features: {dropped}")

    K = sequences[0].targets.shape[1]
    t_means = np.zeros(K)
    t_sds = np.ones(K)
    all_targets = np.vstack([s.targets for s in sequences])
    all_mask = np.vstack([s.mask for s in sequences])
    for k in range(K):
        vals = np.log1p(all_targets[all_mask[:, k], k])
        if vals.size:
            t_means[k] = vals.mean()
            sd = vals.std()
            t_sds[k] = sd if sd > 1e-12 else 1.0
    return NormStats(
        feature_names=list(feature_names),
        log_columns=list(log_columns),
        kept_columns=kept,
        dropped_columns=dropped,
        means=means[kept],
        sds=sds[kept],
        target_means=t_means,
        target_sds=t_sds,
    )


def apply_normalizer(stats: NormStats, sequences: list[LabeledSequence]):
    """Transform features (log1p on monetary columns, then standardize,
    dropping recorded constant columns) and targets (log1p + standardize)."""
    out = []
    for s in sequences:
        feats = _log_transform(s.features, stats.log_columns)
        feats = (feats[:, stats.kept_columns] - stats.means) / stats.sds
        out.append(
            LabeledSequence(
                user_id=s.user_id,
                ids=s.ids,
                features=feats,
                targets=transform_targets(stats, s.targets),
                mask=s.mask.copy(),
                gaps=s.gaps.copy(),
                step_dates=list(s.step_dates),
                mode=s.mode,
                eval_step=s.eval_step,
            )
        )
    return out


def transform_targets(stats: NormStats, targets: np.ndarray) -> np.ndarray:
    return (np.log1p(targets) - stats.target_means) / stats.target_sds


def invert_targets(stats: NormStats, transformed: np.ndarray) -> np.ndarray:
    return np.expm1(transformed * stats.target_sds + stats.target_means)


# ---------------------------------------------------------------------------
# splits


@dataclass
class SplitPanel:
    train: list[UserSeries]
    val: list[UserSeries]
    test: list[UserSeries]
    cohort_cutoffs: tuple
    date_cutoffs: tuple


def split_dataset(
    users: list[UserSeries],
    cohort_cutoffs: tuple[dt.date, dt.date],
    date_cutoffs: tuple[dt.date | None, dt.date | None] = (None, None),
) -> SplitPanel:
    """Partition users by cohort date: cohorts before the first cutoff are
    training, before the second validation, the rest test. The date cutoffs
    are the label-window ends enforced later by the sequence builders
    (train labels whose windows cross the first date cutoff are masked).
    """
    val_start, test_start = cohort_cutoffs
    if test_start < val_start:
        raise UsageError(f"cohort cutoffs out of order: {val_start} > {test_start}")
    d_train, d_val = date_cutoffs
    if d_train is not None and d_val is not None and d_val < d_train:
        raise UsageError(f"date cutoffs out of order: {d_train} > {d_val}")
    train = [u for u in users if u.cohort_date < val_start]
    val = [u for u in users if val_start <= u.cohort_date < test_start]
    test = [u for u in users if u.cohort_date >= test_start]
    if not train:
        raise UsageError("training split is empty; move the cohort cutoffs")
    return SplitPanel(
        train=train,
        val=val,
        test=test,
        cohort_cutoffs=(val_start, test_start),
        date_cutoffs=(d_train, d_val),
    )


# ---------------------------------------------------------------------------
# processed-sequence files (columnar text plus sidecar JSON)


def save_sequences(directory, split_name: str, sequences: list[LabeledSequence]) -> None:
    if not sequences:
        raise UsageError(f"no sequences to save for split {split_name!r}")
    n_feat = sequences[0].features.shape[1]
    K = sequences[0].targets.shape[1]
    n_ids = len(sequences[0].ids)
    n_rows = sum(s.n_steps for s in sequences)

    user_id = np.empty(n_rows, dtype=np.int64)
    step = np.empty(n_rows, dtype=np.int64)
    date = np.empty(n_rows, dtype=object)
    gap = np.empty(n_rows, dtype=np.int64)
    is_eval = np.zeros(n_rows, dtype=np.int64)
    feats = np.empty((n_rows, n_feat))
    ids = np.empty((n_rows, n_ids), dtype=np.int64)
    targets = np.empty((n_rows, K))
    masks = np.empty((n_rows, K), dtype=np.int64)
    pos = 0
    for s in sequences:
        n = s.n_steps
        sl = slice(pos, pos + n)
        user_id[sl] = s.user_id
        step[sl] = np.arange(n)
        date[sl] = [d.isoformat() for d in s.step_dates]
        gap[sl] = s.gaps
        if s.eval_step is not None:
            is_eval[pos + s.eval_step] = 1
        feats[sl] = s.features
        if n_ids:
            ids[sl] = s.ids
        targets[sl] = s.targets
        masks[sl] = s.mask
        pos += n

    columns = {
        "user_id": user_id,
        "step": step,
        "date": date,
        "gap": gap,
        "is_eval_step": is_eval,
    }
    for i in range(n_feat):
        columns[f"f{i}"] = feats[:, i]
    for i in range(n_ids):
        columns[f"id{i}"] = ids[:, i]
    for k in range(K):
        columns[f"target{k}"] = targets[:, k]
    for k in range(K):
        columns[f"mask{k}"] = masks[:, k]
    frame = pd.DataFrame(columns)
    path = os.path.join(directory, f"{split_name}.csv")
    tmp = f"{path}.tmp"
    frame.to_csv(tmp, index=False, float_format="%.17g")
    os.replace(tmp, path)


def load_sequences(directory, split_name: str, mode: str) -> list[LabeledSequence]:
    path = os.path.join(directory, f"{split_name}.csv")
    frame = pd.read_csv(path, float_precision="round_trip")
    cols_f = sorted(
        (c for c in frame.columns if c.startswith("f") and c[1:].isdigit()),
        key=lambda c: int(c[1:]),
    )
    cols_id = sorted(
        (c for c in frame.columns if c.startswith("id") and c[2:].isdigit()),
        key=lambda c: int(c[2:]),
    )
    cols_t = sorted(
        (c for c in frame.columns if c.startswith("target")),
        key=lambda c: int(c[6:]),
    )
    cols_m = sorted(
        (c for c in frame.columns if c.startswith("mask")), key=lambda c: int(c[4:])
    )
    frame = frame.sort_values(["user_id", "step"], kind="stable")
    uid_arr = frame["user_id"].to_numpy()
    feats = frame[cols_f].to_numpy(dtype=np.float64)
    ids_arr = frame[cols_id].to_numpy(dtype=np.int64) if cols_id else None
    targets = frame[cols_t].to_numpy(dtype=np.float64)
    masks = frame[cols_m].to_numpy(dtype=np.int64).astype(bool)
    gaps = frame["gap"].to_numpy(dtype=np.int64)
    evals = frame["is_eval_step"].to_numpy(dtype=np.int64)
    dates = [dt.date.fromisoformat(d) for d in frame["date"]]
    out = []
    bounds = np.concatenate(
        [[0], np.flatnonzero(np.diff(uid_arr)) + 1, [uid_arr.size]]
    )
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        eval_rows = np.flatnonzero(evals[lo:hi])
        out.append(
            LabeledSequence(
                user_id=int(uid_arr[lo]),
                ids=tuple(int(v) for v in ids_arr[lo]) if ids_arr is not None else (),
                features=feats[lo:hi],
                targets=targets[lo:hi],
                mask=masks[lo:hi],
                gaps=gaps[lo:hi],
                step_dates=dates[lo:hi],
                mode=mode,
                eval_step=int(eval_rows[0]) if eval_rows.size else None,
            )
        )
    return out
