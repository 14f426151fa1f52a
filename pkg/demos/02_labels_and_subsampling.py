"""Label construction and zero-record subsampling on a single user.

Walks the remaining-value identity on the six-day example row, rolling
window sums over multiple horizons, and what subsampling keeps.
"""

import datetime as dt

import numpy as np

from ltvkit import UserSeries, build_acquisition_labels, build_rolling_labels
from ltvkit.numeric import RngStream
from ltvkit.pipeline import subsample_zero_records

row = UserSeries(128, dt.date(2021, 1, 29), np.array([0.82, 0.96, 0.77, 0.00, 0.78, 1.00]))

labels = build_acquisition_labels(row, graduation_age=5)
print("age  realized  remaining  sum")
for a in range(6):
    print(
        f"  {a}     {labels.realized[a]:5.2f}      {labels.remaining[a]:5.2f}"
        f"  {labels.realized[a] + labels.remaining[a]:5.2f}"
    )
print(f"total value through graduation: {labels.total}")

targets, mask = build_rolling_labels(row, t0_ages=[0, 1, 2], horizons_days=[1, 2, 4])
print("\nrolling sums over (t0, t0+h] days:")
for i, t0 in enumerate([0, 1, 2]):
    cells = [
        f"h={h}: {targets[i, j]:5.2f}" if mask[i, j] else f"h={h}:  --  "
        for j, h in enumerate([1, 2, 4])
    ]
    print(f"  t0={t0}  " + "  ".join(cells))

values = np.array([0.0, 0, 5, 0, 0, 0, 2, 0, 3, 0, 0, 0, 0, 1])
kept, gaps = subsample_zero_records(values, keep_zero_prob=0.25, rng=RngStream(3))
print("\nsubsampling a sparse stream (keep_zero_prob=0.25):")
print(f"  values : {values.tolist()}")
print(f"  kept   : {kept.tolist()}  (every nonzero step survives)")
print(f"  gaps   : {gaps.tolist()}  (periods since the previous kept step)")
