"""Multi-block dilated recurrent network.

Layers are grouped into blocks; a block may carry a residual shortcut that
adds the block input to the block output at every step. Static categorical
ids are embedded and concatenated to the per-step features before the first
layer. A final linear adaptor maps the top block's output to the K forecast
targets at every step.

forward/backward are written batch-first over padded sequences; the
single-sequence wrappers required by callers simply use a batch of one.
Backward is exact reverse-mode accumulation through both the h_{t-1} and
h_{t-d} paths and both c-state branches of the fusion gate.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import cells
from .errors import DataError, ShapeError, UsageError
from .numeric import RngStream

__all__ = [
    "LayerSpec",
    "BlockSpec",
    "EmbeddingSpec",
    "NetworkSpec",
    "NetworkParams",
    "init_network_params",
    "embed_lookup",
    "forward_batch",
    "backward_batch",
    "forward_sequence",
    "backward_sequence",
    "params_to_vector",
    "set_params_from_vector",
    "save_network",
    "load_network",
    "default_spec",
]

FORMAT_HEADER = "ltvkit-network v1"


@dataclass
class LayerSpec:
    kind: str
    dilation: int
    n_y: int
    n_h: int


@dataclass
class BlockSpec:
    layers: list[LayerSpec]
    shortcut: bool = False


@dataclass
class EmbeddingSpec:
    vocab: int
    dim: int


@dataclass
class NetworkSpec:
    feature_dim: int
    adaptor_dim: int
    blocks: list[BlockSpec]
    embeddings: list[EmbeddingSpec] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.feature_dim + sum(e.dim for e in self.embeddings)

    def all_layers(self) -> list[LayerSpec]:
        return [layer for block in self.blocks for layer in block.layers]

    @property
    def output_dim(self) -> int:
        return self.blocks[-1].layers[-1].n_y

    def validate(self) -> None:
        if self.adaptor_dim < 1:
            raise ShapeError(f"adaptor output dim must be >= 1, got {self.adaptor_dim}")
        if not self.blocks or any(not b.layers for b in self.blocks):
            raise ShapeError("network needs at least one block with one layer")
        n_in = self.input_dim
        for bi, block in enumerate(self.blocks):
            block_in = n_in
            for layer in block.layers:
                if layer.dilation < 1:
                    raise ShapeError(f"dilation must be >= 1, got {layer.dilation}")
                if layer.kind not in cells.CELL_KINDS:
                    raise ShapeError(f"unknown cell kind {layer.kind!r}")
                if layer.kind in ("lstm", "gru") and layer.n_y != layer.n_h:
                    raise ShapeError(
                        f"{layer.kind} layer needs n_y == n_h, got "
                        f"{layer.n_y} != {layer.n_h}"
                    )
                n_in = layer.n_y
            if block.shortcut and block_in != n_in:
                raise ShapeError(
                    f"shortcut over block {bi} needs input dim == output dim, "
                    f"got {block_in} != {n_in}"
                )

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "adaptor_dim": self.adaptor_dim,
            "blocks": [
                {
                    "shortcut": b.shortcut,
                    "layers": [
                        {
                            "kind": l.kind,
                            "dilation": l.dilation,
                            "n_y": l.n_y,
                            "n_h": l.n_h,
                        }
                        for l in b.layers
                    ],
                }
                for b in self.blocks
            ],
            "embeddings": [{"vocab": e.vocab, "dim": e.dim} for e in self.embeddings],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        spec = cls(
            feature_dim=int(d["feature_dim"]),
            adaptor_dim=int(d["adaptor_dim"]),
            blocks=[
                BlockSpec(
                    layers=[
                        LayerSpec(
                            kind=l["kind"],
                            dilation=int(l["dilation"]),
                            n_y=int(l["n_y"]),
                            n_h=int(l["n_h"]),
                        )
                        for l in b["layers"]
                    ],
                    shortcut=bool(b["shortcut"]),
                )
                for b in d["blocks"]
            ],
            embeddings=[
                EmbeddingSpec(vocab=int(e["vocab"]), dim=int(e["dim"]))
                for e in d.get("embeddings", [])
            ],
        )
        spec.validate()
        return spec


def default_spec(
    feature_dim: int,
    adaptor_dim: int,
    embeddings: list[EmbeddingSpec] | None = None,
    kind: str = "drnn",
    width: int = 12,
) -> NetworkSpec:
    """Default topology: 2 blocks x 2 layers, dilations (1,2) and (4,8),
    shortcut over the second block."""
    mk = lambda d: LayerSpec(kind=kind, dilation=d, n_y=width, n_h=width)
    spec = NetworkSpec(
        feature_dim=feature_dim,
        adaptor_dim=adaptor_dim,
        blocks=[
            BlockSpec(layers=[mk(1), mk(2)], shortcut=False),
            BlockSpec(layers=[mk(4), mk(8)], shortcut=True),
        ],
        embeddings=list(embeddings or []),
    )
    spec.validate()
    return spec


@dataclass
class NetworkParams:
    layers: list
    embeddings: list[np.ndarray]
    adaptor_W: np.ndarray
    adaptor_b: np.ndarray

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for li, layer in enumerate(self.layers):
            for name, arr in layer.named_arrays():
                out.append((f"layer{li}.{name}", arr))
        for ei, table in enumerate(self.embeddings):
            out.append((f"emb{ei}", table))
        out.append(("adaptor.W", self.adaptor_W))
        out.append(("adaptor.b", self.adaptor_b))
        return out

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams(
            layers=[l.zeros_like() for l in self.layers],
            embeddings=[np.zeros_like(t) for t in self.embeddings],
            adaptor_W=np.zeros_like(self.adaptor_W),
            adaptor_b=np.zeros_like(self.adaptor_b),
        )

    @property
    def n_params(self) -> int:
        return sum(a.size for _, a in self.named_arrays())


def init_network_params(spec: NetworkSpec, rng: RngStream) -> NetworkParams:
    spec.validate()
    layers = []
    n_in = spec.input_dim
    for layer in spec.all_layers():
        layers.append(cells.make_cell_params(layer.kind, rng, n_in, layer.n_y, layer.n_h))
        n_in = layer.n_y
    embeddings = [
        rng.normal(0.0, 0.1, size=(e.vocab, e.dim)) for e in spec.embeddings
    ]
    top = spec.output_dim
    bound = np.sqrt(1.0 / top)
    adaptor_W = rng.uniform(-bound, bound, size=(spec.adaptor_dim, top))
    adaptor_b = np.zeros(spec.adaptor_dim)
    return NetworkParams(layers, embeddings, adaptor_W, adaptor_b)


def embed_lookup(table: np.ndarray, idx: int) -> np.ndarray:
    """Row idx of an embedding table; the backward pass accumulates the
    output gradient into exactly that row."""
    vocab = table.shape[0]
    if not 0 <= int(idx) < vocab:
        raise DataError(f"embedding id {idx} out of range for vocabulary size {vocab}")
    return table[int(idx)]


# ---------------------------------------------------------------------------
# forward / backward


@dataclass
class ForwardCache:
    batch: int
    steps: int
    ids: np.ndarray
    layer_caches: list
    adaptor_input: np.ndarray


def _assemble_input(spec: NetworkSpec, params: NetworkParams, features, ids):
    B, T, F = features.shape
    if F != spec.feature_dim:
        raise ShapeError(
            f"feature dim {F} does not match network feature dim {spec.feature_dim}"
        )
    if not spec.embeddings:
        return np.ascontiguousarray(features, dtype=np.float64)
    if ids is None or ids.shape != (B, len(spec.embeddings)):
        got = None if ids is None else ids.shape
        raise ShapeError(
            f"ids shape {got} does not match (batch, n_tables) = "
            f"({B}, {len(spec.embeddings)})"
        )
    parts = [np.asarray(features, dtype=np.float64)]
    for j, espec in enumerate(spec.embeddings):
        col = ids[:, j]
        if col.min() < 0 or col.max() >= espec.vocab:
            bad = col[(col < 0) | (col >= espec.vocab)][0]
            raise DataError(
                f"embedding id {bad} out of range for vocabulary size {espec.vocab}"
            )
        vecs = params.embeddings[j][col]  # (B, dim)
        parts.append(np.broadcast_to(vecs[:, None, :], (B, T, espec.dim)))
    return np.concatenate(parts, axis=2)


def forward_batch(spec: NetworkSpec, params: NetworkParams, features, ids=None):
    """Run the network over a padded batch.

    features: (B, T, feature_dim); ids: (B, n_tables) static categorical ids.
    Returns (preds (B, T, K), cache). Steps with index < d see the all-zero
    delayed state.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ShapeError(f"features must be (B, T, F), got shape {features.shape}")
    B, T, _ = features.shape
    if T == 0:
        raise UsageError("empty sequence: steps must be nonempty")
    x = _assemble_input(spec, params, features, ids)

    layer_caches = []
    li = 0
    for block in spec.blocks:
        block_in = x
        for layer_spec in block.layers:
            x, layer_cache = cells.layer_forward(
                params.layers[li], x, layer_spec.dilation
            )
            layer_caches.append(layer_cache)
            li += 1
        if block.shortcut:
            x = x + block_in

    preds = x @ params.adaptor_W.T + params.adaptor_b
    cache = ForwardCache(
        batch=B,
        steps=T,
        ids=ids,
        layer_caches=layer_caches,
        adaptor_input=x,
    )
    return preds, cache


def backward_batch(
    spec: NetworkSpec,
    params: NetworkParams,
    cache: ForwardCache,
    dpreds: np.ndarray,
) -> NetworkParams:
    """Exact gradients of sum(dpreds * preds) w.r.t. every parameter.

    dpreds must be zero at masked/padded steps.
    """
    if cache is None:
        raise UsageError("backward called without a forward cache")
    dpreds = np.asarray(dpreds, dtype=np.float64)
    B, T = cache.batch, cache.steps
    if dpreds.shape != (B, T, spec.adaptor_dim):
        raise ShapeError(
            f"loss gradient shape {dpreds.shape} does not match predictions "
            f"shape {(B, T, spec.adaptor_dim)}"
        )
    grads = params.zeros_like()
    grads.adaptor_W += np.einsum("btk,btn->kn", dpreds, cache.adaptor_input)
    grads.adaptor_b += dpreds.sum(axis=(0, 1))
    dY = dpreds @ params.adaptor_W  # (B, T, n_top)

    layer_offsets = []
    li = 0
    for block in spec.blocks:
        layer_offsets.append(li)
        li += len(block.layers)

    for bi in range(len(spec.blocks) - 1, -1, -1):
        block = spec.blocks[bi]
        d_skip = dY if block.shortcut else None
        off = layer_offsets[bi]
        for lj in range(len(block.layers) - 1, -1, -1):
            li = off + lj
            dY = cells.layer_backward(
                params.layers[li], cache.layer_caches[li], dY, grads.layers[li]
            )
        if d_skip is not None:
            dY = dY + d_skip

    # dY is now the gradient w.r.t. the assembled input; scatter the
    # embedding slices into their tables, summing over time and batch
    offset = spec.feature_dim
    for j, espec in enumerate(spec.embeddings):
        slice_grad = dY[:, :, offset : offset + espec.dim].sum(axis=1)  # (B, dim)
        np.add.at(grads.embeddings[j], cache.ids[:, j], slice_grad)
        offset += espec.dim
    return grads


def forward_sequence(spec: NetworkSpec, params: NetworkParams, features, ids=None):
    """Run one sequence: features (T, feature_dim), ids a tuple of static
    categorical ids. Returns (preds (T, K), cache)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError(f"features must be (T, F), got shape {features.shape}")
    ids_arr = None
    if spec.embeddings:
        if ids is None:
            raise UsageError("network has embedding tables but no ids were given")
        ids_arr = np.asarray(ids, dtype=np.int64).reshape(1, -1)
    preds, cache = forward_batch(spec, params, features[None], ids_arr)
    return preds[0], cache


def backward_sequence(spec, params, cache, loss_grads) -> NetworkParams:
    """Gradients for a single sequence; loss_grads is (T, K), zero at
    masked steps."""
    loss_grads = np.asarray(loss_grads, dtype=np.float64)
    if loss_grads.ndim != 2:
        raise ShapeError(f"loss grads must be (T, K), got shape {loss_grads.shape}")
    return backward_batch(spec, params, cache, loss_grads[None])


# ---------------------------------------------------------------------------
# flat-vector view (optimizer steps, gradient checks)


def params_to_vector(params: NetworkParams) -> np.ndarray:
    return np.concatenate([a.ravel() for _, a in params.named_arrays()])


def set_params_from_vector(params: NetworkParams, vec: np.ndarray) -> None:
    vec = np.asarray(vec, dtype=np.float64)
    pos = 0
    for _, arr in params.named_arrays():
        n = arr.size
        arr.ravel()[:] = vec[pos : pos + n]
        pos += n
    if pos != vec.size:
        raise ShapeError(
            f"vector length {vec.size} does not match parameter count {pos}"
        )


# ---------------------------------------------------------------------------
# serialization: versioned human-readable text, exact round trip


def _fmt(x: float) -> str:
    return repr(float(x))


def save_network(path, spec: NetworkSpec, params: NetworkParams, extra: dict | None = None):
    """Write spec + params (+ an optional JSON extra section) as text.

    Floats are written with shortest-roundtrip decimal repr, so loading
    recovers every value bit-exactly.
    """
    lines = [FORMAT_HEADER]
    lines.append("spec " + json.dumps(spec.to_dict(), sort_keys=True))
    if extra is not None:
        lines.append("extra " + json.dumps(extra, sort_keys=True))
    for name, arr in params.named_arrays():
        shape = " ".join(str(s) for s in arr.shape)
        lines.append(f"array {name} {arr.ndim} {shape}")
        mat = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(1, -1)
        for row in mat:
            lines.append(" ".join(_fmt(v) for v in row))
    lines.append("end")
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_network(path):
    """Read a file written by save_network; returns (spec, params, extra)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise DataError(f"not a ltvkit network file: {path}")
    spec = None
    extra = None
    arrays: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line == "end":
            break
        if line.startswith("spec "):
            spec = NetworkSpec.from_dict(json.loads(line[5:]))
            i += 1
        elif line.startswith("extra "):
            extra = json.loads(line[6:])
            i += 1
        elif line.startswith("array "):
            parts = line.split()
            name, ndim = parts[1], int(parts[2])
            shape = tuple(int(s) for s in parts[3 : 3 + ndim])
            n_rows = shape[0] if ndim == 2 else 1
            rows = []
            for r in range(n_rows):
                rows.append([float(v) for v in lines[i + 1 + r].split()])
            arrays[name] = np.array(rows, dtype=np.float64).reshape(shape)
            i += 1 + n_rows
        else:
            raise DataError(f"unrecognized line in network file: {line[:60]!r}")
    if spec is None:
        raise DataError(f"network file has no spec section: {path}")
    rng = RngStream(0)
    params = init_network_params(spec, rng)
    for name, arr in params.named_arrays():
        if name not in arrays:
            raise DataError(f"network file missing array {name}")
        stored = arrays[name]
        if stored.shape != arr.shape:
            raise ShapeError(
                f"array {name} has shape {stored.shape}, expected {arr.shape}"
            )
        arr[...] = stored
    return spec, params, extra
