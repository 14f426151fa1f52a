"""User-day panel data model and the canonical CSV interchange format.

A UserSeries is one user's dense daily value stream: day i of the values
array is calendar date cohort_date + i, i.e. age-in-system i days. The
canonical CSV has one row per user-day with columns
user_id, cohort_date, date, age_days, value, region_id.
"""

from __future__ import annotations

import datetime as dt
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError

__all__ = ["UserSeries", "write_panel_csv", "read_panel_csv", "PANEL_COLUMNS"]

PANEL_COLUMNS = ["user_id", "cohort_date", "date", "age_days", "value", "region_id"]


@dataclass
class UserSeries:
    """One user's daily value stream from the cohort date onward."""

    user_id: int
    cohort_date: dt.date
    values: np.ndarray
    region_id: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise DataError(
                f"user {self.user_id}: values must be a nonempty 1-D array"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"user {self.user_id}: non-finite value in series")
        if np.any(self.values < 0):
            raise DataError(f"user {self.user_id}: negative value in series")

    @property
    def n_days(self) -> int:
        return int(self.values.size)

    @property
    def cutoff_date(self) -> dt.date:
        """Last observed calendar date."""
        return self.cohort_date + dt.timedelta(days=self.n_days - 1)

    def date_at(self, age_days: int) -> dt.date:
        return self.cohort_date + dt.timedelta(days=int(age_days))

    def age_of(self, date: dt.date) -> int:
        return (date - self.cohort_date).days


def write_panel_csv(users: list[UserSeries], path) -> None:
    """Write the canonical user-day CSV (atomically)."""
    n_rows = sum(u.n_days for u in users)
    user_id = np.empty(n_rows, dtype=np.int64)
    age = np.empty(n_rows, dtype=np.int64)
    value = np.empty(n_rows, dtype=np.float64)
    region = np.empty(n_rows, dtype=np.int64)
    cohort = np.empty(n_rows, dtype=object)
    date = np.empty(n_rows, dtype=object)

    # panels revisit the same few hundred dates millions of times; format
    # each panel day once and index into the strings
    day0 = min(u.cohort_date for u in users)
    n_panel_days = max((u.cutoff_date - day0).days for u in users) + 1
    day_strings = np.array(
        [(day0 + dt.timedelta(days=i)).isoformat() for i in range(n_panel_days)],
        dtype=object,
    )
    pos = 0
    for u in users:
        n = u.n_days
        d0 = (u.cohort_date - day0).days
        user_id[pos : pos + n] = u.user_id
        age[pos : pos + n] = np.arange(n)
        value[pos : pos + n] = u.values
        region[pos : pos + n] = u.region_id
        cohort[pos : pos + n] = day_strings[d0]
        date[pos : pos + n] = day_strings[d0 : d0 + n]
        pos += n
    frame = pd.DataFrame(
        {
            "user_id": user_id,
            "cohort_date": cohort,
            "date": date,
            "age_days": age,
            "value": value,
            "region_id": region,
        }
    )
    tmp = f"{path}.tmp"
    # 17 significant digits round-trips float64 exactly
    frame.to_csv(tmp, index=False, float_format="%.17g")
    os.replace(tmp, path)


def read_panel_csv(path) -> list[UserSeries]:
    """Read the canonical user-day CSV back into per-user series."""
    frame = pd.read_csv(
        path, dtype={"cohort_date": str, "date": str}, float_precision="round_trip"
    )
    missing = [c for c in PANEL_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"panel CSV missing columns {missing}")
    frame = frame.sort_values(["user_id", "age_days"], kind="stable")
    uid_arr = frame["user_id"].to_numpy()
    ages_arr = frame["age_days"].to_numpy()
    values_arr = frame["value"].to_numpy(dtype=np.float64)
    region_arr = frame["region_id"].to_numpy()
    cohort_arr = frame["cohort_date"].to_numpy()
    date_arr = frame["date"].to_numpy()
    users = []
    bounds = np.concatenate(
        [[0], np.flatnonzero(np.diff(uid_arr)) + 1, [uid_arr.size]]
    )
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        uid = int(uid_arr[lo])
        ages = ages_arr[lo:hi]
        if not np.array_equal(ages, np.arange(hi - lo)):
            raise DataError(f"user {uid}: ages are not consecutive from 0")
        cohort = dt.date.fromisoformat(cohort_arr[lo])
        first_date = dt.date.fromisoformat(date_arr[lo])
        if first_date != cohort:
            raise DataError(f"user {uid}: first date {first_date} != cohort {cohort}")
        users.append(
            UserSeries(
                user_id=uid,
                cohort_date=cohort,
                values=values_arr[lo:hi],
                region_id=int(region_arr[lo]),
            )
        )
    return users
