"""Deterministic numerical substrate: dense linear algebra, activations,
Adam updates, seeded counter-based RNG streams, and the central-difference
gradient oracle used by every gradient test.

All floating point work is float64. Matrices are plain 2-D numpy arrays in
row-major layout; vectors are 1-D arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, TrainingError

__all__ = [
    "affine",
    "sigmoid",
    "dsigmoid",
    "dtanh",
    "AdamState",
    "adam_step",
    "clip_global_norm",
    "finite_diff_gradient",
    "max_relative_error",
    "RngStream",
    "uniform_init",
]


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic sigmoid, stabilized by branching on the sign of x: the
    exponential only ever sees -|x|, so it cannot overflow."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    s = z / (1.0 + z)  # sigmoid(-|x|)
    return np.where(x >= 0, 1.0 - s, s)


def dsigmoid(s: np.ndarray) -> np.ndarray:
    """Derivative of the sigmoid expressed in terms of its output s."""
    return s * (1.0 - s)


def dtanh(t: np.ndarray) -> np.ndarray:
    """Derivative of tanh expressed in terms of its output t."""
    return 1.0 - t * t


def affine(W: np.ndarray, b: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Compute W @ u + b for a 2-D weight matrix and 1-D vectors."""
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if W.ndim != 2:
        raise ShapeError(f"weight matrix must be 2-D, got shape {W.shape}")
    if W.shape[1] != u.shape[-1]:
        raise ShapeError(
            f"matrix shape {W.shape} incompatible with input shape {u.shape}"
        )
    if b.shape != (W.shape[0],):
        raise ShapeError(
            f"bias shape {b.shape} incompatible with matrix shape {W.shape}"
        )
    return W @ u + b


@dataclass
class AdamState:
    """Optimizer state for a single flat parameter vector."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: np.ndarray = field(default=None)
    second_moment: np.ndarray = field(default=None)

    def ensure_shape(self, n: int) -> None:
        if self.first_moment is None:
            self.first_moment = np.zeros(n)
            self.second_moment = np.zeros(n)
        elif self.first_moment.shape != (n,):
            raise ShapeError(
                f"Adam moments shape {self.first_moment.shape} does not match "
                f"parameter shape ({n},)"
            )


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """One Adam update with bias correction; mutates state, returns new params."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ShapeError(
            f"params shape {params.shape} does not match grads shape {grads.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(grads))
    if bad.size:
        raise TrainingError(f"non-finite gradient at index {int(bad[0])}")
    state.ensure_shape(params.size)
    state.step_count += 1
    t = state.step_count
    m, v = state.first_moment, state.second_moment
    m *= state.beta1
    m += (1.0 - state.beta1) * grads
    v *= state.beta2
    v += (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)


def clip_global_norm(grads: np.ndarray, max_norm: float) -> np.ndarray:
    """Scale a flat gradient vector so its L2 norm is at most max_norm."""
    norm = float(np.linalg.norm(grads))
    if norm > max_norm > 0.0:
        return grads * (max_norm / norm)
    return grads


def finite_diff_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function at x.

    This is the oracle every analytic backward pass is checked against; it
    must never share code with the paths it validates.
    """
    x = np.asarray(x, dtype=np.float64)
    if h <= 0:
        raise ValueError("step size h must be positive")
    grad = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        hi = f(x + step)
        lo = f(x - step)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"non-finite oracle evaluation at coordinate {i}")
        grad[i] = (hi - lo) / (2.0 * h)
    return grad


def max_relative_error(ga: np.ndarray, gn: np.ndarray, floor: float = 1e-4) -> float:
    """Worst per-coordinate relative disagreement between two gradients.

    The denominator is floored so that coordinates whose true gradient sits
    below the central-difference noise floor (~1e-10 absolute for O(1)
    losses) cannot dominate the comparison.
    """
    ga = np.asarray(ga, dtype=np.float64)
    gn = np.asarray(gn, dtype=np.float64)
    if ga.shape != gn.shape:
        raise ShapeError(f"gradient shapes differ: {ga.shape} vs {gn.shape}")
    denom = np.maximum(np.abs(ga) + np.abs(gn), floor)
    return float(np.max(np.abs(ga - gn) / denom))


class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Identical keys reproduce identical draw sequences; distinct stream ids
    give statistically independent sequences, so per-user simulation streams
    are order-independent.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(
            np.random.Philox(key=[self.seed, self.stream_id])
        )

    def substream(self, stream_id: int) -> "RngStream":
        """A fresh independent stream under the same seed."""
        return RngStream(self.seed, stream_id)

    def random(self, size=None):
        return self._gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def lognormal(self, mean=0.0, sigma=1.0, size=None):
        return self._gen.lognormal(mean, sigma, size)

    def gamma(self, shape, scale=1.0, size=None):
        return self._gen.gamma(shape, scale, size)

    def exponential(self, scale=1.0, size=None):
        return self._gen.exponential(scale, size)

    def beta(self, a, b, size=None):
        return self._gen.beta(a, b, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def poisson(self, lam, size=None):
        return self._gen.poisson(lam, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)


def uniform_init(rng: RngStream, rows: int, cols: int) -> np.ndarray:
    """Weight matrix drawn uniformly in +-sqrt(1/fan_in), fan_in = cols."""
    bound = np.sqrt(1.0 / cols)
    return rng.uniform(-bound, bound, size=(rows, cols))
