"""Dense numeric core for the character-level translator.

Plain numpy, no autodiff graph: every backward pass is hand-derived and
checked against central finite differences.  Parameters live in float32;
gradient verification runs everything in float64, since the 1e-4 relative
tolerance is out of reach in single precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as _sigmoid

# GradSet: parameter name -> gradient array with the parameter's shape.
GradSet = dict


def check_finite(arr: np.ndarray, name: str = "tensor") -> None:
    """Raise if ``arr`` contains NaN or Inf (the validity contract)."""
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul inner dimensions disagree: {a.shape} vs {b.shape}")
    return a @ b


def softmax_rows(x: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    x = np.asarray(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits: np.ndarray, targets) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over rows, plus d(loss)/d(logits).

    The gradient is ``(softmax - one_hot) / m``.
    """
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise ValueError("cross_entropy expects 2-D logits")
    m, v = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (m,):
        raise ValueError("one target id per logits row required")
    if np.any(targets < 0) or np.any(targets >= v):
        raise IndexError("target id out of range")
    logp = log_softmax_rows(logits)
    rows = np.arange(m)
    loss = float(-logp[rows, targets].mean())
    dlogits = np.exp(logp)
    dlogits[rows, targets] -= 1.0
    dlogits /= m
    return loss, dlogits.astype(logits.dtype, copy=False)


@dataclass
class LstmCellParams:
    """Single LSTM cell: gate weights stacked as [i; f; o; g] along axis 0.

    W has shape (4*hidden, input+hidden) and acts on concat(x, h_prev);
    b has shape (4*hidden,).
    """

    W: np.ndarray
    b: np.ndarray

    @property
    def hidden_dim(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_dim(self) -> int:
        return self.W.shape[1] - self.hidden_dim

    def __post_init__(self):
        if self.W.ndim != 2 or self.W.shape[0] % 4 != 0:
            raise ValueError(f"bad LSTM weight shape {self.W.shape}")
        if self.b.shape != (self.W.shape[0],):
            raise ValueError(f"bias shape {self.b.shape} does not match W {self.W.shape}")
        if self.W.shape[1] <= self.hidden_dim:
            raise ValueError("W must cover input and hidden columns")

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: np.random.Generator,
             scale: float = 0.08, forget_bias: float = 1.0,
             dtype=np.float32) -> "LstmCellParams":
        W = rng.uniform(-scale, scale, size=(4 * hidden_dim, input_dim + hidden_dim))
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim:2 * hidden_dim] = forget_bias
        return cls(W.astype(dtype), b.astype(dtype))


@dataclass
class LstmStepCache:
    """Forward activations needed by the exact backward pass (2-D, batch-first)."""

    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    single: bool


def _as2d(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    return a[None, :] if a.ndim == 1 else a


def lstm_step(p: LstmCellParams, x, h_prev, c_prev):
    """One LSTM step.  Accepts (dim,) vectors or (batch, dim) matrices.

    c = f*c_prev + i*g, h = o*tanh(c) with sigmoid gates i, f, o and tanh
    candidate g.
    """
    single = np.asarray(x).ndim == 1
    x2, h2, c2 = _as2d(x), _as2d(h_prev), _as2d(c_prev)
    hd = p.hidden_dim
    if x2.shape[1] != p.input_dim or h2.shape[1] != hd or c2.shape[1] != hd:
        raise ValueError(
            f"lstm_step shape mismatch: x {x2.shape}, h {h2.shape}, c {c2.shape} "
            f"vs input_dim {p.input_dim}, hidden_dim {hd}")
    a = np.concatenate([x2, h2], axis=1) @ p.W.T + p.b
    i = _sigmoid(a[:, :hd])
    f = _sigmoid(a[:, hd:2 * hd])
    o = _sigmoid(a[:, 2 * hd:3 * hd])
    g = np.tanh(a[:, 3 * hd:])
    c = f * c2 + i * g
    h = o * np.tanh(c)
    cache = LstmStepCache(x2, h2, c2, i, f, o, g, c, single)
    if single:
        return h[0], c[0], cache
    return h, c, cache


def lstm_step_backward(p: LstmCellParams, cache: LstmStepCache, dh, dc):
    """Exact gradients of one lstm_step; returns (dx, dh_prev, dc_prev, grads)."""
    dh2, dc2 = _as2d(dh), _as2d(dc)
    if dh2.shape != cache.h_prev.shape or dc2.shape != cache.c_prev.shape:
        raise ValueError("upstream gradient shapes do not match the forward cache")
    tanh_c = np.tanh(cache.c)
    do = dh2 * tanh_c
    dc_total = dc2 + dh2 * cache.o * (1.0 - tanh_c * tanh_c)
    di = dc_total * cache.g
    df = dc_total * cache.c_prev
    dg = dc_total * cache.i
    dc_prev = dc_total * cache.f
    da = np.concatenate([
        di * cache.i * (1.0 - cache.i),
        df * cache.f * (1.0 - cache.f),
        do * cache.o * (1.0 - cache.o),
        dg * (1.0 - cache.g * cache.g),
    ], axis=1)
    xh = np.concatenate([cache.x, cache.h_prev], axis=1)
    dW = da.T @ xh
    db = da.sum(axis=0)
    dxh = da @ p.W
    dx = dxh[:, :p.input_dim]
    dh_prev = dxh[:, p.input_dim:]
    if cache.single:
        dx, dh_prev, dc_prev = dx[0], dh_prev[0], dc_prev[0]
    return dx, dh_prev, dc_prev, {"W": dW, "b": db}


def global_norm(grads: GradSet) -> float:
    total = 0.0
    for g in grads.values():
        total += float(np.sum(np.asarray(g, dtype=np.float64) ** 2))
    return float(np.sqrt(total))


def clip_global_norm(grads: GradSet, max_norm: float) -> GradSet:
    """Scale all gradients by max_norm/norm when the global L2 norm exceeds it."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


def sgd_step(params: dict, grads: GradSet, lr: float) -> dict:
    """In-place p <- p - lr*g for every parameter.  Mutates the arrays."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    for name, p in params.items():
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        p -= lr * g
    return params


def momentum_step(params: dict, grads: GradSet, velocity: dict, lr: float,
                  momentum: float = 0.9) -> dict:
    """Classical momentum update: v <- m*v + g, p <- p - lr*v, in place.

    ``velocity`` is lazily populated with zero buffers per parameter name.
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must be in [0, 1)")
    for name, p in params.items():
        if name not in grads:
            raise KeyError(f"missing gradient for parameter {name!r}")
        v = velocity.setdefault(name, np.zeros_like(p))
        v *= momentum
        v += grads[name]
        p -= lr * v
    return params


def grad_check(f, params: dict, h: float = 1e-4, order: int = 2) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f(params) -> (loss, GradSet)`` must be a pure scalar function of the
    float64 parameter arrays in ``params``; each element is perturbed in turn.
    Relative error uses the 1e-8-floored denominator |a| + |fd|.  ``order``
    selects the 2-point or, for near-zero gradient entries where rounding
    noise dominates, the 5-point central stencil (with a larger ``h``).
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    for name, p in params.items():
        if p.dtype != np.float64:
            raise ValueError(f"grad_check requires float64 parameters, {name!r} is {p.dtype}")
    _, analytic = f(params)

    def loss_at():
        return f(params)[0]

    max_err = 0.0
    for name, p in params.items():
        a = np.asarray(analytic[name]).reshape(-1)
        flat = p.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            if order == 2:
                flat[idx] = orig + h
                lp = loss_at()
                flat[idx] = orig - h
                lm = loss_at()
                fd = (lp - lm) / (2.0 * h)
            else:
                vals = {}
                for m in (-2, -1, 1, 2):
                    flat[idx] = orig + m * h
                    vals[m] = loss_at()
                fd = (8.0 * (vals[1] - vals[-1]) - (vals[2] - vals[-2])) / (12.0 * h)
            flat[idx] = orig
            err = abs(a[idx] - fd) / max(1e-8, abs(a[idx]) + abs(fd))
            max_err = max(max_err, err)
    return max_err
