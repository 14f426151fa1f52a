"""Recurrent cells: the dilated-memory cell with a fusion gate and split
output, plus plain LSTM and GRU cells operated with a delayed recurrent
state.

Every cell has a hand-derived backward pass. The layer-level functions run
a whole (batch, time) block with one stacked-gate matmul per step and a
single weight-gradient contraction per layer; the *_step functions are the
single-vector API.

Cell equations (dilated-memory cell, dilation d):
    u   = concat(x_t, h_{t-1}, h_{t-d})
    f   = sigmoid(W_f u + b_f)                  fusion gate
    c~  = c_{t-d} + f * (c_{t-1} - c_{t-d})     blend of old c-states
    i   = sigmoid(W_i u + b_i)                  update gate
    g   = tanh(W_g u + b_g)                     candidate
    c_t = (1 - i) * c~ + i * g
    o   = sigmoid(W_o u + b_o)                  output gate
    v   = o * tanh(c_t)
    y_t = v[:n_y]   (real output, to the next layer)
    h_t = v[n_y:]   (controlling output, to future gates)

The blend is written as c_del + f*(c_prev - c_del) so that equal c-states
pass through bit-exactly for any gate value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numeric import RngStream, dsigmoid, dtanh, sigmoid, uniform_init

__all__ = [
    "CellState",
    "DrnnParams",
    "LstmParams",
    "GruParams",
    "drnn_step",
    "lstm_step",
    "gru_step",
    "make_cell_params",
    "fuse_states",
    "layer_forward",
    "layer_backward",
    "CELL_KINDS",
]


@dataclass
class CellState:
    """Per-layer recurrent state: cell vector c and controlling vector h.

    GRU layers carry no separate cell vector; c has length 0 there.
    """

    c: np.ndarray
    h: np.ndarray


# ---------------------------------------------------------------------------
# parameter containers


class _GatedParams:
    """Shared plumbing for cells with stacked sigmoid/tanh gates."""

    def named_arrays(self):
        return [(n, getattr(self, n)) for n in self.ARRAY_FIELDS]

    def zeros_like(self):
        kw = {n: np.zeros_like(getattr(self, n)) for n in self.ARRAY_FIELDS}
        kw.update(self._size_fields())
        return type(self)(**kw)


@dataclass
class DrnnParams(_GatedParams):
    W_f: np.ndarray
    W_i: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    n_x: int
    n_y: int
    n_h: int

    kind = "drnn"
    ARRAY_FIELDS = ("W_f", "W_i", "W_g", "W_o", "b_f", "b_i", "b_g", "b_o")

    def _size_fields(self):
        return {"n_x": self.n_x, "n_y": self.n_y, "n_h": self.n_h}

    @property
    def n_c(self) -> int:
        return self.n_y + self.n_h

    @classmethod
    def init(cls, rng: RngStream, n_x: int, n_y: int, n_h: int) -> "DrnnParams":
        n_c = n_y + n_h
        n_u = n_x + 2 * n_h
        # b_i = -1 biases the update gate toward keeping the blended c-state
        return cls(
            W_f=uniform_init(rng, n_c, n_u),
            W_i=uniform_init(rng, n_c, n_u),
            W_g=uniform_init(rng, n_c, n_u),
            W_o=uniform_init(rng, n_c, n_u),
            b_f=np.zeros(n_c),
            b_i=np.full(n_c, -1.0),
            b_g=np.zeros(n_c),
            b_o=np.zeros(n_c),
            n_x=n_x,
            n_y=n_y,
            n_h=n_h,
        )


@dataclass
class LstmParams(_GatedParams):
    W_f: np.ndarray
    W_i: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    n_x: int
    n_h: int

    kind = "lstm"
    ARRAY_FIELDS = ("W_f", "W_i", "W_g", "W_o", "b_f", "b_i", "b_g", "b_o")

    def _size_fields(self):
        return {"n_x": self.n_x, "n_h": self.n_h}

    @property
    def n_y(self) -> int:
        return self.n_h

    @property
    def n_c(self) -> int:
        return self.n_h

    @classmethod
    def init(cls, rng: RngStream, n_x: int, n_h: int) -> "LstmParams":
        n_u = n_x + n_h
        return cls(
            W_f=uniform_init(rng, n_h, n_u),
            W_i=uniform_init(rng, n_h, n_u),
            W_g=uniform_init(rng, n_h, n_u),
            W_o=uniform_init(rng, n_h, n_u),
            b_f=np.full(n_h, 1.0),
            b_i=np.zeros(n_h),
            b_g=np.zeros(n_h),
            b_o=np.zeros(n_h),
            n_x=n_x,
            n_h=n_h,
        )


@dataclass
class GruParams(_GatedParams):
    W_z: np.ndarray
    W_r: np.ndarray
    W_g: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_g: np.ndarray
    n_x: int
    n_h: int

    kind = "gru"
    ARRAY_FIELDS = ("W_z", "W_r", "W_g", "b_z", "b_r", "b_g")

    def _size_fields(self):
        return {"n_x": self.n_x, "n_h": self.n_h}

    @property
    def n_y(self) -> int:
        return self.n_h

    @property
    def n_c(self) -> int:
        return 0

    @classmethod
    def init(cls, rng: RngStream, n_x: int, n_h: int) -> "GruParams":
        n_u = n_x + n_h
        # b_z = -1 biases the update gate toward carrying the old state
        return cls(
            W_z=uniform_init(rng, n_h, n_u),
            W_r=uniform_init(rng, n_h, n_u),
            W_g=uniform_init(rng, n_h, n_u),
            b_z=np.full(n_h, -1.0),
            b_r=np.zeros(n_h),
            b_g=np.zeros(n_h),
            n_x=n_x,
            n_h=n_h,
        )


CELL_KINDS = {"drnn": DrnnParams, "lstm": LstmParams, "gru": GruParams}


def fuse_states(f, c_prev, c_del):
    """Fusion-gate blend of the two old c-states.

    Written as c_del + f*(c_prev - c_del) so equal states pass through
    bit-exactly regardless of the gate value.
    """
    return c_del + f * (c_prev - c_del)


def make_cell_params(kind: str, rng: RngStream, n_x: int, n_y: int, n_h: int):
    """Initialize parameters for one layer of the given cell kind."""
    if kind == "drnn":
        return DrnnParams.init(rng, n_x, n_y, n_h)
    if kind == "lstm":
        if n_y != n_h:
            raise ShapeError(f"lstm layer needs n_y == n_h, got {n_y} != {n_h}")
        return LstmParams.init(rng, n_x, n_h)
    if kind == "gru":
        if n_y != n_h:
            raise ShapeError(f"gru layer needs n_y == n_h, got {n_y} != {n_h}")
        return GruParams.init(rng, n_x, n_h)
    raise ValueError(f"unknown cell kind {kind!r}")


# ---------------------------------------------------------------------------
# layer-level forward/backward over a (batch, time) block


def _drnn_layer_forward(p: DrnnParams, X, d: int):
    # gates stacked sigmoid-first (f, i, o, g); the input-side preactivation
    # is one big gemm over all steps, the loop carries only the recurrence
    B, T, _ = X.shape
    n_c, n_h, n_y, n_x = p.n_c, p.n_h, p.n_y, p.n_x
    W = np.vstack([p.W_f, p.W_i, p.W_o, p.W_g])  # (4n_c, n_x + 2n_h)
    b = np.concatenate([p.b_f, p.b_i, p.b_o, p.b_g])
    W_x = np.ascontiguousarray(W[:, :n_x])
    W_h = np.ascontiguousarray(W[:, n_x:])
    AX = (X.reshape(-1, n_x) @ W_x.T + b).reshape(B, T, 4 * n_c)
    UH = np.zeros((T, B, 2 * n_h))
    SIG = np.empty((T, B, 3 * n_c))  # f, i, o
    G = np.empty((T, B, n_c))
    CT = np.empty((T, B, n_c))  # blended state
    C = np.empty((T, B, n_c))
    TC = np.empty((T, B, n_c))  # tanh of new state
    H = np.empty((T, B, n_h))
    Y = np.empty((B, T, n_y))
    zc = np.zeros((B, n_c))
    for t in range(T):
        if t >= 1:
            UH[t, :, :n_h] = H[t - 1]
        if t >= d:
            UH[t, :, n_h:] = H[t - d]
        a = UH[t] @ W_h.T
        a += AX[:, t]
        sig = sigmoid(a[:, : 3 * n_c])
        f = sig[:, :n_c]
        i = sig[:, n_c : 2 * n_c]
        o = sig[:, 2 * n_c :]
        g = np.tanh(a[:, 3 * n_c :])
        c_prev = C[t - 1] if t >= 1 else zc
        c_del = C[t - d] if t >= d else zc
        c_tilde = fuse_states(f, c_prev, c_del)
        c = (1.0 - i) * c_tilde + i * g
        tc = np.tanh(c)
        v = o * tc
        SIG[t], G[t] = sig, g
        CT[t], C[t], TC[t] = c_tilde, c, tc
        Y[:, t] = v[:, :n_y]
        H[t] = v[:, n_y:]
    cache = (X, UH, SIG, G, CT, C, TC, d)
    return Y, cache


def _drnn_layer_backward(p: DrnnParams, cache, dY, grads):
    X, UH, SIG, G, CT, C, TC, d = cache
    B, T, _ = dY.shape
    n_c, n_h, n_y, n_x = p.n_c, p.n_h, p.n_y, p.n_x
    W = np.vstack([p.W_f, p.W_i, p.W_o, p.W_g])
    W_x = np.ascontiguousarray(W[:, :n_x])
    W_h = np.ascontiguousarray(W[:, n_x:])
    dA = np.empty((T, B, 4 * n_c))
    dH = np.zeros((T, B, n_h))
    dC = np.zeros((T, B, n_c))
    dv = np.empty((B, n_c))
    zc = np.zeros((B, n_c))
    for t in range(T - 1, -1, -1):
        dv[:, :n_y] = dY[:, t]
        dv[:, n_y:] = dH[t]
        sig, g, tc = SIG[t], G[t], TC[t]
        f = sig[:, :n_c]
        i = sig[:, n_c : 2 * n_c]
        o = sig[:, 2 * n_c :]
        do = dv * tc
        dc = dv * o * dtanh(tc) + dC[t]
        di = dc * (g - CT[t])
        dg = dc * i
        dct = dc * (1.0 - i)
        c_prev = C[t - 1] if t >= 1 else zc
        c_del = C[t - d] if t >= d else zc
        df = dct * (c_prev - c_del)
        da = dA[t]
        da[:, :n_c] = df
        da[:, n_c : 2 * n_c] = di
        da[:, 2 * n_c : 3 * n_c] = do
        da[:, : 3 * n_c] *= dsigmoid(sig)
        da[:, 3 * n_c :] = dg * dtanh(g)
        if t >= 1 or t >= d:
            duh = da @ W_h
            if t >= 1:
                dH[t - 1] += duh[:, :n_h]
                dC[t - 1] += dct * f
            if t >= d:
                dH[t - d] += duh[:, n_h:]
                dC[t - d] += dct * (1.0 - f)
    dA2 = dA.reshape(-1, 4 * n_c)
    dX = np.ascontiguousarray((dA2 @ W_x).reshape(T, B, n_x).transpose(1, 0, 2))
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(-1, n_x)
    dW_x = dA2.T @ Xt
    dW_h = dA2.T @ UH.reshape(-1, 2 * n_h)
    db = dA.sum(axis=(0, 1))
    for j, name in enumerate(("W_f", "W_i", "W_o", "W_g")):
        sl = slice(j * n_c, (j + 1) * n_c)
        getattr(grads, name)[:, :n_x] += dW_x[sl]
        getattr(grads, name)[:, n_x:] += dW_h[sl]
    grads.b_f += db[:n_c]
    grads.b_i += db[n_c : 2 * n_c]
    grads.b_o += db[2 * n_c : 3 * n_c]
    grads.b_g += db[3 * n_c :]
    return dX


def _lstm_layer_forward(p: LstmParams, X, d: int):
    B, T, _ = X.shape
    n_h, n_x = p.n_h, p.n_x
    W = np.vstack([p.W_f, p.W_i, p.W_o, p.W_g])
    b = np.concatenate([p.b_f, p.b_i, p.b_o, p.b_g])
    W_x = np.ascontiguousarray(W[:, :n_x])
    W_h = np.ascontiguousarray(W[:, n_x:])
    AX = (X.reshape(-1, n_x) @ W_x.T + b).reshape(B, T, 4 * n_h)
    SIG = np.empty((T, B, 3 * n_h))  # f, i, o
    G = np.empty((T, B, n_h))
    C = np.empty((T, B, n_h))
    TC = np.empty((T, B, n_h))
    H = np.zeros((T, B, n_h))
    Y = np.empty((B, T, n_h))
    zc = np.zeros((B, n_h))
    zh = np.zeros((B, n_h))
    for t in range(T):
        h_del = H[t - d] if t >= d else zh
        a = h_del @ W_h.T
        a += AX[:, t]
        sig = sigmoid(a[:, : 3 * n_h])
        f = sig[:, :n_h]
        i = sig[:, n_h : 2 * n_h]
        o = sig[:, 2 * n_h :]
        g = np.tanh(a[:, 3 * n_h :])
        c_del = C[t - d] if t >= d else zc
        c = f * c_del + i * g
        tc = np.tanh(c)
        SIG[t], G[t], C[t], TC[t] = sig, g, c, tc
        H[t] = o * tc
        Y[:, t] = H[t]
    cache = (X, H, SIG, G, C, TC, d)
    return Y, cache


def _lstm_layer_backward(p: LstmParams, cache, dY, grads):
    X, H, SIG, G, C, TC, d = cache
    B, T, _ = dY.shape
    n_h, n_x = p.n_h, p.n_x
    W = np.vstack([p.W_f, p.W_i, p.W_o, p.W_g])
    W_x = np.ascontiguousarray(W[:, :n_x])
    W_h = np.ascontiguousarray(W[:, n_x:])
    dA = np.empty((T, B, 4 * n_h))
    dH = np.zeros((T, B, n_h))
    dC = np.zeros((T, B, n_h))
    zc = np.zeros((B, n_h))
    for t in range(T - 1, -1, -1):
        sig, g, tc = SIG[t], G[t], TC[t]
        f = sig[:, :n_h]
        i = sig[:, n_h : 2 * n_h]
        o = sig[:, 2 * n_h :]
        dh = dY[:, t] + dH[t]
        do = dh * tc
        dc = dh * o * dtanh(tc) + dC[t]
        c_del = C[t - d] if t >= d else zc
        da = dA[t]
        da[:, :n_h] = dc * c_del
        da[:, n_h : 2 * n_h] = dc * g
        da[:, 2 * n_h : 3 * n_h] = do
        da[:, : 3 * n_h] *= dsigmoid(sig)
        da[:, 3 * n_h :] = dc * i * dtanh(g)
        if t >= d:
            dH[t - d] += da @ W_h
            dC[t - d] += dc * f
    dA2 = dA.reshape(-1, 4 * n_h)
    dX = np.ascontiguousarray((dA2 @ W_x).reshape(T, B, n_x).transpose(1, 0, 2))
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(-1, n_x)
    dW_x = dA2.T @ Xt
    # delayed hidden inputs: step t saw H[t-d]; steps < d saw zeros
    if T > d:
        dW_h = dA[d:].reshape(-1, 4 * n_h).T @ H[: T - d].reshape(-1, n_h)
    db = dA.sum(axis=(0, 1))
    for j, name in enumerate(("W_f", "W_i", "W_o", "W_g")):
        sl = slice(j * n_h, (j + 1) * n_h)
        getattr(grads, name)[:, :n_x] += dW_x[sl]
        if T > d:
            getattr(grads, name)[:, n_x:] += dW_h[sl]
    grads.b_f += db[:n_h]
    grads.b_i += db[n_h : 2 * n_h]
    grads.b_o += db[2 * n_h : 3 * n_h]
    grads.b_g += db[3 * n_h :]
    return dX


def _gru_layer_forward(p: GruParams, X, d: int):
    B, T, _ = X.shape
    n_h, n_x = p.n_h, p.n_x
    W2 = np.vstack([p.W_z, p.W_r])
    b2 = np.concatenate([p.b_z, p.b_r])
    W2_x = np.ascontiguousarray(W2[:, :n_x])
    W2_h = np.ascontiguousarray(W2[:, n_x:])
    Wg_x = np.ascontiguousarray(p.W_g[:, :n_x])
    Wg_h = np.ascontiguousarray(p.W_g[:, n_x:])
    X2 = X.reshape(-1, n_x)
    A2X = (X2 @ W2_x.T + b2).reshape(B, T, 2 * n_h)
    AGX = (X2 @ Wg_x.T + p.b_g).reshape(B, T, n_h)
    Z = np.empty((T, B, n_h))
    R = np.empty((T, B, n_h))
    G = np.empty((T, B, n_h))
    RH = np.empty((T, B, n_h))  # reset-scaled delayed state
    H = np.zeros((T, B, n_h))
    Y = np.empty((B, T, n_h))
    zh = np.zeros((B, n_h))
    for t in range(T):
        h_del = H[t - d] if t >= d else zh
        a = h_del @ W2_h.T
        a += A2X[:, t]
        z = sigmoid(a[:, :n_h])
        r = sigmoid(a[:, n_h:])
        rh = r * h_del
        ag = rh @ Wg_h.T
        ag += AGX[:, t]
        g = np.tanh(ag)
        Z[t], R[t], G[t], RH[t] = z, r, g, rh
        H[t] = h_del + z * (g - h_del)
        Y[:, t] = H[t]
    cache = (X, Z, R, G, RH, H, d)
    return Y, cache


def _gru_layer_backward(p: GruParams, cache, dY, grads):
    X, Z, R, G, RH, H, d = cache
    B, T, _ = dY.shape
    n_h, n_x = p.n_h, p.n_x
    W2 = np.vstack([p.W_z, p.W_r])
    W2_x = np.ascontiguousarray(W2[:, :n_x])
    W2_h = np.ascontiguousarray(W2[:, n_x:])
    Wg_x = np.ascontiguousarray(p.W_g[:, :n_x])
    Wg_h = np.ascontiguousarray(p.W_g[:, n_x:])
    dA2 = np.empty((T, B, 2 * n_h))
    dAg = np.empty((T, B, n_h))
    dH = np.zeros((T, B, n_h))
    zh = np.zeros((B, n_h))
    for t in range(T - 1, -1, -1):
        z, r, g = Z[t], R[t], G[t]
        h_del = H[t - d] if t >= d else zh
        dh = dY[:, t] + dH[t]
        dz = dh * (g - h_del)
        dg = dh * z
        dAg[t] = dg * dtanh(g)
        da2 = dA2[t]
        if t >= d:
            dh_del = dh * (1.0 - z)
            drh = dAg[t] @ Wg_h
            dr = drh * h_del
            dh_del += drh * r
            da2[:, :n_h] = dz * dsigmoid(z)
            da2[:, n_h:] = dr * dsigmoid(r)
            dh_del += da2 @ W2_h
            dH[t - d] += dh_del
        else:
            # zero delayed state: the reset path contributes nothing
            da2[:, :n_h] = dz * dsigmoid(z)
            da2[:, n_h:] = 0.0
    dA2f = dA2.reshape(-1, 2 * n_h)
    dAgf = dAg.reshape(-1, n_h)
    dX = np.ascontiguousarray(
        (dA2f @ W2_x + dAgf @ Wg_x).reshape(T, B, n_x).transpose(1, 0, 2)
    )
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(-1, n_x)
    dW2_x = dA2f.T @ Xt
    dWg_x = dAgf.T @ Xt
    db2 = dA2.sum(axis=(0, 1))
    grads.W_z[:, :n_x] += dW2_x[:n_h]
    grads.W_r[:, :n_x] += dW2_x[n_h:]
    grads.W_g[:, :n_x] += dWg_x
    if T > d:
        dW2_h = dA2[d:].reshape(-1, 2 * n_h).T @ H[: T - d].reshape(-1, n_h)
        grads.W_z[:, n_x:] += dW2_h[:n_h]
        grads.W_r[:, n_x:] += dW2_h[n_h:]
    grads.W_g[:, n_x:] += dAgf.T @ RH.reshape(-1, n_h)
    grads.b_z += db2[:n_h]
    grads.b_r += db2[n_h:]
    grads.b_g += dAg.sum(axis=(0, 1))
    return dX


def layer_forward(p, X, d: int):
    """Run one layer over inputs X (B, T, n_x) with dilation d; steps with
    index < d see the all-zero delayed state. Returns (Y (B, T, n_y), cache)."""
    if p.kind == "drnn":
        return _drnn_layer_forward(p, X, d)
    if p.kind == "lstm":
        return _lstm_layer_forward(p, X, d)
    return _gru_layer_forward(p, X, d)


def layer_backward(p, cache, dY, grads):
    """Reverse-mode gradients through one layer; accumulates parameter
    gradients into grads and returns dX (B, T, n_x)."""
    if p.kind == "drnn":
        return _drnn_layer_backward(p, cache, dY, grads)
    if p.kind == "lstm":
        return _lstm_layer_backward(p, cache, dY, grads)
    return _gru_layer_backward(p, cache, dY, grads)


# ---------------------------------------------------------------------------
# single-vector API


def _check_vec(name: str, v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ShapeError(f"{name} has shape {v.shape}, expected ({n},)")
    return v


def drnn_step(p: DrnnParams, x_t, s_prev: CellState, s_delayed: CellState):
    """One step of the dilated-memory cell: returns (y_t, new state)."""
    x_t = _check_vec("x_t", x_t, p.n_x)
    c_prev = _check_vec("s_prev.c", s_prev.c, p.n_c)
    h_prev = _check_vec("s_prev.h", s_prev.h, p.n_h)
    c_del = _check_vec("s_delayed.c", s_delayed.c, p.n_c)
    h_del = _check_vec("s_delayed.h", s_delayed.h, p.n_h)
    u = np.concatenate([x_t, h_prev, h_del])
    f = sigmoid(p.W_f @ u + p.b_f)
    c_tilde = fuse_states(f, c_prev, c_del)
    i = sigmoid(p.W_i @ u + p.b_i)
    g = np.tanh(p.W_g @ u + p.b_g)
    c = (1.0 - i) * c_tilde + i * g
    o = sigmoid(p.W_o @ u + p.b_o)
    v = o * np.tanh(c)
    return v[: p.n_y], CellState(c=c, h=v[p.n_y :])


def lstm_step(p: LstmParams, x_t, s_delayed: CellState):
    """One LSTM step using the delayed state; y_t is the full hidden vector."""
    x_t = _check_vec("x_t", x_t, p.n_x)
    c_del = _check_vec("s_delayed.c", s_delayed.c, p.n_h)
    h_del = _check_vec("s_delayed.h", s_delayed.h, p.n_h)
    u = np.concatenate([x_t, h_del])
    f = sigmoid(p.W_f @ u + p.b_f)
    i = sigmoid(p.W_i @ u + p.b_i)
    g = np.tanh(p.W_g @ u + p.b_g)
    c = f * c_del + i * g
    o = sigmoid(p.W_o @ u + p.b_o)
    h = o * np.tanh(c)
    return h, CellState(c=c, h=h)


def gru_step(p: GruParams, x_t, s_delayed: CellState):
    """One GRU step using the delayed state; y_t is the full hidden vector."""
    x_t = _check_vec("x_t", x_t, p.n_x)
    h_del = _check_vec("s_delayed.h", s_delayed.h, p.n_h)
    u = np.concatenate([x_t, h_del])
    z = sigmoid(p.W_z @ u + p.b_z)
    r = sigmoid(p.W_r @ u + p.b_r)
    g = np.tanh(p.W_g @ np.concatenate([x_t, r * h_del]) + p.b_g)
    h = h_del + z * (g - h_del)
    return h, CellState(c=np.zeros(0), h=h)


def zero_state(params, batch: int | None = None) -> CellState:
    """The all-zero initial state for a layer's cell kind."""
    if batch is None:
        return CellState(c=np.zeros(params.n_c), h=np.zeros(params.n_h))
    return CellState(c=np.zeros((batch, params.n_c)), h=np.zeros((batch, params.n_h)))
