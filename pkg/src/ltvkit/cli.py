"""Command-line surface tying simulation, preprocessing, training, and
evaluation together.

Subcommands communicate only through files: the canonical user-day CSV,
prepared-sequence directories (columnar CSV splits + meta/normstats JSON),
the versioned network model format, and metric report JSON. Every output is
written atomically; failures leave no partial files and exit nonzero with a
single-line error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import os
import sys

import numpy as np

from . import baselines, metrics, network as net, pipeline, training
from .data import read_panel_csv, write_panel_csv
from .errors import LtvkitError, UsageError
from .numeric import RngStream, finite_diff_gradient, max_relative_error
from .simulate import SimConfig, simulate_cohorts

DEFAULT_HORIZONS_WEEKS = [1, 4, 13, 26]
DEFAULT_GRADUATION_AGE = 90
DEFAULT_KEEP_ZERO_PROB = 0.2
DEFAULT_FLOOR = 1.0


def _write_json(path, obj) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _date(s: str) -> dt.date:
    return dt.date.fromisoformat(s)


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    with open(args.config) as fh:
        cfg = SimConfig.from_json(fh.read())
    users = simulate_cohorts(cfg)
    write_panel_csv(users, args.out)
    sidecar = f"{args.out}.config.json"
    tmp = f"{sidecar}.tmp"
    with open(tmp, "w") as fh:
        fh.write(cfg.to_json() + "\n")
    os.replace(tmp, sidecar)
    print(f"wrote {sum(u.n_days for u in users)} user-days for {len(users)} users to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# prepare


def _fingerprint(parts: list[str]) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode())
        h.update(b"\x00")
    return "sha256:" + h.hexdigest()


def cmd_prepare(args) -> int:
    users = read_panel_csv(args.inp)
    if not users:
        raise UsageError("panel is empty")
    cohorts = sorted(u.cohort_date for u in users)
    panel_start = cohorts[0]
    panel_end = max(u.cutoff_date for u in users)
    span = (panel_end - panel_start).days + 1
    n_weeks = span // 7

    val_cohort = _date(args.val_cohort) if args.val_cohort else cohorts[
        int(len(cohorts) * 0.7)
    ]
    test_cohort = _date(args.test_cohort) if args.test_cohort else cohorts[
        int(len(cohorts) * 0.85)
    ]
    label_end = _date(args.label_end) if args.label_end else None
    split = pipeline.split_dataset(
        users, (val_cohort, test_cohort), (label_end, label_end)
    )
    if not split.test:
        raise UsageError("test split is empty; move --test-cohort earlier")

    sidecar = f"{args.inp}.config.json"
    sim_config_text = ""
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            sim_config_text = fh.read()

    mode = args.mode
    horizons = [int(h) for h in args.horizons.split(",")] if mode == "rolling" else []
    if mode == "rolling":
        if args.eval_date:
            eval_date = _date(args.eval_date)
        else:
            eval_date = panel_start + dt.timedelta(days=7 * (n_weeks // 2))
        build = lambda us, dense, ev: pipeline.build_rolling_sequences(
            us,
            panel_start=panel_start,
            n_weeks=n_weeks,
            horizons_weeks=horizons,
            keep_zero_prob=args.keep_zero_prob,
            seed=args.seed,
            label_end=label_end,
            dense=dense,
            eval_date=ev,
        )
        # test histories get the same subsampling policy as training, so the
        # cadence the network sees at the evaluation step is in-distribution
        train_seqs = build(split.train, False, None)
        val_seqs = build(split.val, False, None) if split.val else []
        test_seqs = build(split.test, False, eval_date)
        feature_names = pipeline.ROLLING_FEATURES
        log_columns = pipeline.ROLLING_LOG_COLUMNS
        K = len(horizons)
        horizon_labels = [f"{h}w" for h in horizons]
        eval_meta = eval_date.isoformat()
    else:
        T0 = args.graduation_age
        eval_age = args.eval_age
        build = lambda us, dense, ev: pipeline.build_acquisition_sequences(
            us,
            graduation_age=T0,
            keep_zero_prob=args.keep_zero_prob,
            seed=args.seed,
            label_end=label_end,
            dense=dense,
            eval_age=ev,
        )
        train_seqs = build(split.train, False, None)
        val_seqs = build(split.val, False, None) if split.val else []
        test_seqs = build(split.test, False, eval_age)
        feature_names = pipeline.ACQUISITION_FEATURES
        log_columns = pipeline.ACQUISITION_LOG_COLUMNS
        K = 1
        horizon_labels = [f"to_age_{T0}"]
        eval_meta = eval_age

    train_seqs = [s for s in train_seqs if s.mask.any()]
    if not train_seqs:
        raise UsageError("no trainable labels; check --label-end and the panel span")
    test_seqs = [s for s in test_seqs if s.mask[s.eval_step].any()]
    if not test_seqs:
        raise UsageError("no evaluable test labels; move the evaluation point earlier")

    stats = pipeline.fit_normalizer(train_seqs, feature_names, log_columns)
    id_vocabs = [
        int(max(max(s.ids[j] for s in train_seqs + val_seqs + test_seqs), 0)) + 1
        for j in range(len(train_seqs[0].ids))
    ]

    os.makedirs(args.out, exist_ok=True)
    pipeline.save_sequences(args.out, "train", train_seqs)
    if val_seqs:
        pipeline.save_sequences(args.out, "val", val_seqs)
    pipeline.save_sequences(args.out, "test", test_seqs)
    prep_params = {
        "mode": mode,
        "horizons_weeks": horizons,
        "horizon_labels": horizon_labels,
        "graduation_age": args.graduation_age if mode == "acquisition" else None,
        "keep_zero_prob": args.keep_zero_prob,
        "seed": args.seed,
        "panel_start": panel_start.isoformat(),
        "panel_end": panel_end.isoformat(),
        "n_weeks": n_weeks,
        "val_cohort": val_cohort.isoformat(),
        "test_cohort": test_cohort.isoformat(),
        "label_end": label_end.isoformat() if label_end else None,
        "eval_point": eval_meta,
        "feature_names": list(feature_names),
        "id_vocabs": id_vocabs,
        "K": K,
        "has_val": bool(val_seqs),
    }
    prep_params["fingerprint"] = _fingerprint(
        [sim_config_text, json.dumps(prep_params, sort_keys=True)]
    )
    _write_json(os.path.join(args.out, "meta.json"), prep_params)
    _write_json(os.path.join(args.out, "normstats.json"), stats.to_dict())
    print(
        f"prepared {len(train_seqs)} train / {len(val_seqs)} val / "
        f"{len(test_seqs)} test sequences in {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    meta = _read_json(os.path.join(args.data, "meta.json"))
    stats = pipeline.NormStats.from_dict(
        _read_json(os.path.join(args.data, "normstats.json"))
    )
    mode = meta["mode"]
    train_raw = pipeline.load_sequences(args.data, "train", mode)
    val_raw = (
        pipeline.load_sequences(args.data, "val", mode) if meta["has_val"] else []
    )
    train_seqs = pipeline.apply_normalizer(stats, train_raw)
    val_seqs = pipeline.apply_normalizer(stats, val_raw) if val_raw else None

    K = meta["K"]
    if args.spec:
        spec = net.NetworkSpec.from_dict(_read_json(args.spec))
        if spec.feature_dim != stats.n_features or spec.adaptor_dim != K:
            raise UsageError(
                f"spec file expects {spec.feature_dim} features / K={spec.adaptor_dim}, "
                f"data has {stats.n_features} / K={K}"
            )
    else:
        embeddings = [
            net.EmbeddingSpec(vocab=v, dim=args.embedding_dim)
            for v in meta["id_vocabs"]
            if v > 1
        ]
        spec = net.default_spec(
            feature_dim=stats.n_features,
            adaptor_dim=K,
            embeddings=embeddings,
            kind=args.cell,
            width=args.width,
        )
    if not spec.embeddings:
        # ids carry no information (single category); drop them from batches
        for s in train_seqs + (val_seqs or []):
            s.ids = ()

    config = training.TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        clip_norm=args.clip_norm,
        patience=args.patience,
    )
    params, trace = training.train(
        spec, train_seqs, config, RngStream(args.seed), val_seqs
    )
    extra = {
        "normstats": stats.to_dict(),
        "mode": mode,
        "horizon_labels": meta["horizon_labels"],
        "fingerprint": meta["fingerprint"],
        "train_seed": args.seed,
        "trace": trace,
    }
    net.save_network(args.out, spec, params, extra)
    last = trace[-1]
    print(
        f"trained {len(trace)} epochs; final train loss {last['train']:.5f}"
        + (f", val loss {last['val']:.5f}" if last["val"] is not None else "")
    )
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _eval_grid(sequences):
    """Actuals, masks, and row order at each sequence's evaluation step."""
    actuals = np.array([s.targets[s.eval_step] for s in sequences])
    mask = np.array([s.mask[s.eval_step] for s in sequences])
    return actuals, mask


def cmd_evaluate(args) -> int:
    meta = _read_json(os.path.join(args.data, "meta.json"))
    spec, params, extra = net.load_network(args.model)
    stats = pipeline.NormStats.from_dict(extra["normstats"])
    mode = meta["mode"]
    test_raw = pipeline.load_sequences(args.data, args.split, mode)
    test_raw = [s for s in test_raw if s.eval_step is not None]
    if not test_raw:
        raise UsageError(f"split {args.split!r} has no evaluation steps")
    test_seqs = pipeline.apply_normalizer(stats, test_raw)
    if not spec.embeddings:
        for s in test_seqs:
            s.ids = ()
    preds = training.predict_sequences(spec, params, test_seqs)
    fc = np.array(
        [pipeline.invert_targets(stats, p[s.eval_step]) for p, s in zip(preds, test_raw)]
    )
    fc = np.clip(fc, 0.0, None)
    actuals, mask = _eval_grid(test_raw)
    report = metrics.compare(
        {args.model_name: fc},
        actuals,
        meta["horizon_labels"],
        floor=args.floor,
        seed=meta["seed"],
        config_fingerprint=meta["fingerprint"],
        mask=mask,
    )
    report.save(args.report)
    row = report.models[args.model_name]
    print(
        f"{args.model_name}: "
        + "  ".join(f"{h}: aSMAPE {row[h]['asmape']:.4f}" for h in meta["horizon_labels"])
    )
    return 0


# ---------------------------------------------------------------------------
# baselines


def _weekly_panel(users, panel_start, n_weeks):
    out = {}
    for u in users:
        first_week, weekly = pipeline._weekly_values(u, panel_start, n_weeks)
        out[u.user_id] = (first_week, weekly, u)
    return out


def cmd_baseline(args) -> int:
    meta = _read_json(os.path.join(args.data, "meta.json"))
    if meta["mode"] != "rolling":
        raise UsageError("baselines support rolling mode only")
    users = read_panel_csv(args.panel)
    panel_start = _date(meta["panel_start"])
    n_weeks = meta["n_weeks"]
    horizons = meta["horizons_weeks"]
    eval_date = _date(meta["eval_point"])
    eval_week = (eval_date - panel_start).days // 7
    label_end = _date(meta["label_end"]) if meta["label_end"] else None
    split = pipeline.split_dataset(
        users,
        (_date(meta["val_cohort"]), _date(meta["test_cohort"])),
        (label_end, label_end),
    )
    test_map = _weekly_panel(split.test, panel_start, n_weeks)

    # actuals at the evaluation week for test users (aligned with `evaluate`)
    rows = []
    for uid in sorted(test_map):
        first_week, weekly, u = test_map[uid]
        if first_week > eval_week:
            continue
        s = eval_week - first_week
        targets, mask = pipeline.rolling_sums(weekly, [s], horizons)
        if not mask[0].any():
            continue
        rows.append((uid, first_week, weekly, targets[0], mask[0]))
    if not rows:
        raise UsageError("no evaluable test users at the evaluation week")
    actuals = np.array([r[3] for r in rows])
    masks = np.array([r[4] for r in rows])

    if args.kind == "btyd":
        fit_users = split.train + split.val
        summaries = [
            baselines.rfm_summarize(u, cutoff=eval_date, period_days=7.0)
            for u in fit_users
            if u.cohort_date <= eval_date
        ]
        bg = baselines.fit_bgnbd(summaries)
        gg = baselines.fit_gamma_gamma(summaries)
        if args.params_out:
            baselines.save_btyd_params(args.params_out, bg, gg)
        fc = np.zeros_like(actuals)
        test_rfm = [
            baselines.rfm_summarize(test_map[uid][2], cutoff=eval_date, period_days=7.0)
            for uid, *_ in rows
        ]
        for k, h in enumerate(horizons):
            counts = baselines.bgnbd_expected_transactions(bg, test_rfm, float(h))
            values = np.array([baselines.expected_monetary(gg, s) for s in test_rfm])
            fc[:, k] = counts * values
        name = args.model_name or "btyd"
    else:
        # lag-feature ridge: rows from all training-user weekly steps
        X_rows, Y_rows, M_rows = [], [], []
        for u in split.train + split.val:
            first_week, weekly = pipeline._weekly_values(u, panel_start, n_weeks)
            if weekly.size == 0:
                continue
            steps = np.arange(weekly.size)
            targets, mask = pipeline.rolling_sums(weekly, steps, horizons)
            if label_end is not None:
                for j, h in enumerate(horizons):
                    ok = np.array(
                        [
                            panel_start
                            + dt.timedelta(days=7 * (first_week + int(s) + h) + 6)
                            <= label_end
                            for s in steps
                        ]
                    )
                    mask[:, j] &= ok
            keep = mask.any(axis=1)
            if not keep.any():
                continue
            X_rows.append(
                baselines.build_lag_features(weekly, steps[keep], first_week, panel_start)
            )
            Y_rows.append(targets[keep])
            M_rows.append(mask[keep])
        X = baselines.log_lag_columns(np.vstack(X_rows))
        Y = np.log1p(np.vstack(Y_rows))
        M = np.vstack(M_rows)
        coef = baselines.ridge_lag_fit(X, Y, args.penalty, M)
        Xt = baselines.log_lag_columns(
            np.vstack(
                [
                    baselines.build_lag_features(
                        weekly, [eval_week - first_week], first_week, panel_start
                    )
                    for _, first_week, weekly, _, _ in rows
                ]
            )
        )
        fc = np.clip(np.expm1(baselines.ridge_lag_predict(coef, Xt)), 0.0, None)
        name = args.model_name or "ridge-lag"

    report = metrics.compare(
        {name: fc},
        actuals,
        meta["horizon_labels"],
        floor=args.floor,
        seed=meta["seed"],
        config_fingerprint=meta["fingerprint"],
        mask=masks,
    )
    report.save(args.report)
    row = report.models[name]
    print(
        f"{name}: "
        + "  ".join(f"{h}: aSMAPE {row[h]['asmape']:.4f}" for h in meta["horizon_labels"])
    )
    return 0


# ---------------------------------------------------------------------------
# compare / gradcheck


def cmd_compare(args) -> int:
    reports = [metrics.MetricsReport.load(p) for p in args.reports]
    base = reports[0]
    merged = metrics.MetricsReport(
        floor=base.floor,
        horizon_labels=base.horizon_labels,
        n_users=base.n_users,
        seed=base.seed,
        config_fingerprint=base.config_fingerprint,
    )
    for rep in reports:
        if rep.horizon_labels != base.horizon_labels or rep.floor != base.floor:
            raise UsageError("reports disagree on horizons or floor; cannot merge")
        for name, rows in rep.models.items():
            merged.models[name] = rows
    for label in merged.horizon_labels:
        merged.best[label] = min(
            merged.models, key=lambda m: merged.models[m][label]["asmape"]
        )
    merged.save(args.out)
    for label in merged.horizon_labels:
        ranking = sorted(merged.models, key=lambda m: merged.models[m][label]["asmape"])
        print(
            f"{label}: "
            + "  ".join(f"{m}={merged.models[m][label]['asmape']:.4f}" for m in ranking)
        )
    return 0


def cmd_gradcheck(args) -> int:
    rng = RngStream(args.seed)
    worst = 0.0
    for kind in ("drnn", "lstm", "gru"):
        if args.spec:
            spec = net.NetworkSpec.from_dict(_read_json(args.spec))
        else:
            spec = net.NetworkSpec(
                feature_dim=3,
                adaptor_dim=1,
                blocks=[
                    net.BlockSpec(
                        [
                            net.LayerSpec(kind, 1, 2, 2),
                            net.LayerSpec(kind, 2, 2, 2),
                        ]
                    )
                ],
            )
        spec.validate()
        params = net.init_network_params(spec, rng)
        T = 12
        feats = rng.normal(0, 1, size=(T, spec.feature_dim))
        ids = tuple(0 for _ in spec.embeddings) or None
        targets = rng.normal(0, 1, size=(T, spec.adaptor_dim))

        def loss(vec):
            probe = net.init_network_params(spec, RngStream(0))
            net.set_params_from_vector(probe, vec)
            preds, _ = net.forward_sequence(spec, probe, feats, ids)
            return float(np.sum((preds - targets) ** 2))

        preds, cache = net.forward_sequence(spec, params, feats, ids)
        grads = net.backward_sequence(spec, params, cache, 2.0 * (preds - targets))
        ga = net.params_to_vector(grads)
        gn = finite_diff_gradient(loss, net.params_to_vector(params), 1e-5)
        err = max_relative_error(ga, gn)
        worst = max(worst, err)
        print(f"{kind}: {ga.size} parameters, max relative error {err:.3e}")
        if args.spec:
            break
    if worst < 1e-4:
        print(f"gradcheck PASS (worst {worst:.3e} < 1e-4)")
        return 0
    print(f"gradcheck FAIL (worst {worst:.3e} >= 1e-4)")
    return 3


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ltvkit", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic user-day panel")
    p.add_argument("--config", required=True, help="SimConfig JSON path")
    p.add_argument("--out", required=True, help="output panel CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prepare", help="panel CSV -> training-ready sequences")
    p.add_argument("--in", dest="inp", required=True, help="panel CSV")
    p.add_argument("--mode", required=True, choices=["acquisition", "rolling"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--horizons", default="1,4,13,26", help="rolling horizons in weeks")
    p.add_argument("--graduation-age", type=int, default=DEFAULT_GRADUATION_AGE)
    p.add_argument("--eval-age", type=int, default=7, help="acquisition eval age")
    p.add_argument("--keep-zero-prob", type=float, default=DEFAULT_KEEP_ZERO_PROB)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-cohort", default=None, help="first validation cohort date")
    p.add_argument("--test-cohort", default=None, help="first test cohort date")
    p.add_argument("--eval-date", default=None, help="rolling evaluation date")
    p.add_argument("--label-end", default=None, help="mask label windows past this date")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="fit the recurrent network")
    p.add_argument("--data", required=True, help="prepared directory")
    p.add_argument("--spec", default=None, help="NetworkSpec JSON (default topology otherwise)")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--cell", default="drnn", choices=["drnn", "lstm", "gru"])
    p.add_argument("--width", type=int, default=12)
    p.add_argument("--embedding-dim", type=int, default=2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model on a split")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--model-name", default="drnn")
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="fit and score a baseline model")
    p.add_argument("--kind", required=True, choices=["btyd", "ridge"])
    p.add_argument("--data", required=True, help="prepared directory (for meta)")
    p.add_argument("--panel", required=True, help="panel CSV")
    p.add_argument("--report", required=True)
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR)
    p.add_argument("--penalty", type=float, default=1.0, help="ridge penalty")
    p.add_argument("--model-name", default=None)
    p.add_argument("--params-out", default=None, help="save fitted parameters JSON")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("compare", help="merge model reports into one ranking")
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("gradcheck", help="finite-difference gradient acceptance check")
    p.add_argument("--spec", default=None, help="NetworkSpec JSON")
    p.add_argument("--seed", type=int, default=20260810)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (LtvkitError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
