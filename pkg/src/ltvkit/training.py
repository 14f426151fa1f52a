"""Minibatch training for the dilated recurrent network.

Sequences are shuffled per epoch with a seeded stream, padded per batch,
and the loss is the mean squared error over unmasked steps and horizons of
the (already transformed) targets. Gradients are clipped at a global norm
and applied with Adam; the parameters at the best validation loss are
returned (early stopping on patience).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import network as net
from .errors import TrainingError, UsageError
from .numeric import AdamState, RngStream, adam_step, clip_global_norm
from .pipeline import LabeledSequence

__all__ = ["TrainConfig", "train", "predict_sequences"]


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    lr: float = 1e-3
    clip_norm: float = 5.0
    patience: int = 10
    # group shuffled sequences by length before batching (less padding);
    # batch order is reshuffled, everything stays seed-deterministic
    bucket_by_length: bool = True


def _batch_arrays(batch: list[LabeledSequence], n_tables: int):
    B = len(batch)
    T = max(s.n_steps for s in batch)
    F = batch[0].features.shape[1]
    K = batch[0].targets.shape[1]
    features = np.zeros((B, T, F))
    targets = np.zeros((B, T, K))
    mask = np.zeros((B, T, K), dtype=bool)
    ids = np.zeros((B, n_tables), dtype=np.int64)
    for i, s in enumerate(batch):
        n = s.n_steps
        features[i, :n] = s.features
        targets[i, :n] = s.targets
        mask[i, :n] = s.mask
        if n_tables:
            ids[i] = s.ids[:n_tables]
    return features, targets, mask, (ids if n_tables else None)


def _forward_loss(spec, params, batch, n_tables):
    features, targets, mask, ids = _batch_arrays(batch, n_tables)
    preds, cache = net.forward_batch(spec, params, features, ids)
    resid = np.where(mask, preds - targets, 0.0)
    sq = float(np.sum(resid * resid))
    count = int(mask.sum())
    return resid, sq, count, cache


def train(
    spec: net.NetworkSpec,
    data: list[LabeledSequence],
    config: TrainConfig,
    rng: RngStream,
    val_data: list[LabeledSequence] | None = None,
):
    """Fit the network; returns (params at best validation loss, trace).

    The trace is a list of per-epoch dicts with train and validation loss.
    When no validation data is given, the training loss drives early
    stopping.
    """
    if not data:
        raise UsageError("training data is empty")
    spec.validate()
    n_tables = len(spec.embeddings)
    params = net.init_network_params(spec, rng)
    adam = AdamState(lr=config.lr)
    best_loss = np.inf
    best_params = copy.deepcopy(params)
    bad_epochs = 0
    trace = []

    n = len(data)
    lengths = np.array([s.n_steps for s in data])
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        if config.bucket_by_length:
            order = order[np.argsort(lengths[order], kind="stable")]
            starts = np.arange(0, n, config.batch_size)
            starts = starts[rng.permutation(starts.size)]
        else:
            starts = np.arange(0, n, config.batch_size)
        total_sq = 0.0
        total_count = 0
        for bi, start in enumerate(starts):
            batch = [data[j] for j in order[start : start + config.batch_size]]
            resid, sq, count, cache = _forward_loss(spec, params, batch, n_tables)
            if not np.isfinite(sq):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {bi}")
            if count == 0:
                continue
            total_sq += sq
            total_count += count
            dpreds = (2.0 / count) * resid
            grads = net.backward_batch(spec, params, cache, dpreds)
            gvec = clip_global_norm(net.params_to_vector(grads), config.clip_norm)
            pvec = adam_step(net.params_to_vector(params), gvec, adam)
            net.set_params_from_vector(params, pvec)
        if total_count == 0:
            raise UsageError("no unmasked targets in the training data")
        train_loss = total_sq / total_count

        if val_data:
            val_loss = evaluate_loss(spec, params, val_data)
            monitor = val_loss
        else:
            val_loss = None
            monitor = train_loss
        trace.append({"epoch": epoch, "train": train_loss, "val": val_loss})

        if monitor < best_loss - 1e-12:
            best_loss = monitor
            best_params = copy.deepcopy(params)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                break
    return best_params, trace


def evaluate_loss(
    spec, params, data: list[LabeledSequence], batch_size: int = 256
) -> float:
    """Mean squared error over unmasked entries, without parameter updates."""
    n_tables = len(spec.embeddings)
    by_len = sorted(range(len(data)), key=lambda j: data[j].n_steps)
    total_sq = 0.0
    total_count = 0
    for start in range(0, len(data), batch_size):
        batch = [data[j] for j in by_len[start : start + batch_size]]
        _, sq, count, _ = _forward_loss(spec, params, batch, n_tables)
        total_sq += sq
        total_count += count
    if total_count == 0:
        raise UsageError("no unmasked targets to evaluate")
    return total_sq / total_count


def predict_sequences(
    spec, params, data: list[LabeledSequence], batch_size: int = 256
) -> list[np.ndarray]:
    """Per-sequence prediction arrays (n_steps, K), in input order."""
    n_tables = len(spec.embeddings)
    by_len = sorted(range(len(data)), key=lambda j: data[j].n_steps)
    out = [None] * len(data)
    for start in range(0, len(data), batch_size):
        idx = by_len[start : start + batch_size]
        batch = [data[j] for j in idx]
        features, _, _, ids = _batch_arrays(batch, n_tables)
        preds, _ = net.forward_batch(spec, params, features, ids)
        for i, j in enumerate(idx):
            out[j] = preds[i, : batch[i].n_steps].copy()
    return out
