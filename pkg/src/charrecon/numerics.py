"""Dense building blocks with hand-written backward passes.

Everything runs in float64. Vectors are 1-D numpy arrays, matrices 2-D; shapes
are checked at the public entry points and raise ``DimensionError``.

LSTM gate rows are stacked in the order input, forget, output, candidate.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

DTYPE = np.float64


def make_rng(seed, *stream):
    """Independent generator for ``(seed, *stream)``.

    Every random draw in the package goes through here: the master seed plus a
    tuple of small integers naming the stream (e.g. ``(seed, SHUFFLE, epoch)``).
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def check_vec(v, n, name="vector"):
    if v.ndim != 1 or v.shape[0] != n:
        raise DimensionError(f"{name}: expected shape ({n},), got {v.shape}")


def check_mat(m, rows, cols, name="matrix"):
    if m.ndim != 2 or m.shape != (rows, cols):
        raise DimensionError(f"{name}: expected shape ({rows}, {cols}), got {m.shape}")


def glorot_uniform(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def rel_error(a, b):
    """Symmetric relative error ``|a - b| / (|a| + |b|)`` in the 2-norm, 0 if both vanish."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    denom = np.linalg.norm(a) + np.linalg.norm(b)
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def finite_diff_grad(f, x, eps=1e-5):
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape).

    ``x`` is perturbed in place and restored, so ``f`` may close over it.
    """
    x = np.asarray(x)
    grad = np.zeros(x.shape, dtype=DTYPE)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


# ---------------------------------------------------------------- LSTM

@dataclass
class LstmParams:
    W: np.ndarray  # (4H, I)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    def __post_init__(self):
        four_h = self.b.shape[0]
        if four_h % 4:
            raise DimensionError("bias length must be a multiple of 4")
        h = four_h // 4
        check_mat(self.U, four_h, h, "U")
        if self.W.ndim != 2 or self.W.shape[0] != four_h:
            raise DimensionError(f"W: expected ({four_h}, I), got {self.W.shape}")

    @property
    def hidden_size(self):
        return self.U.shape[1]

    @property
    def input_size(self):
        return self.W.shape[1]

    def tensors(self, prefix=""):
        return {prefix + "W": self.W, prefix + "U": self.U, prefix + "b": self.b}

    @classmethod
    def init(cls, rng, input_size, hidden_size, forget_bias=1.0):
        H = hidden_size
        W = np.vstack([glorot_uniform(rng, H, input_size) for _ in range(4)])
        U = np.vstack([glorot_uniform(rng, H, H) for _ in range(4)])
        b = np.zeros(4 * H)
        b[H:2 * H] = forget_bias
        return cls(W, U, b)

    @classmethod
    def zeros(cls, input_size, hidden_size):
        H = hidden_size
        return cls(np.zeros((4 * H, input_size)), np.zeros((4 * H, H)), np.zeros(4 * H))


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size):
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


def _step(p, x, h_prev, c_prev):
    H = p.U.shape[1]
    a = p.W @ x + p.U @ h_prev + p.b
    i = sigmoid(a[:H])
    f = sigmoid(a[H:2 * H])
    o = sigmoid(a[2 * H:3 * H])
    g = np.tanh(a[3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, i, f, o, g, tc)


def _step_backward(p, cache, dh, dc, grads):
    x, h_prev, c_prev, i, f, o, g, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    da = np.concatenate([
        dc * g * i * (1.0 - i),
        dc * c_prev * f * (1.0 - f),
        do * o * (1.0 - o),
        dc * i * (1.0 - g * g),
    ])
    grads["W"] += np.outer(da, x)
    grads["U"] += np.outer(da, h_prev)
    grads["b"] += da
    return p.W.T @ da, p.U.T @ da, dc * f


def lstm_step(params, x, prev):
    """One LSTM transition ``(x, prev) -> next`` state."""
    H = params.hidden_size
    check_vec(x, params.input_size, "x")
    check_vec(prev.h, H, "prev.h")
    check_vec(prev.c, H, "prev.c")
    h, c, _ = _step(params, x, prev.h, prev.c)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
        raise FloatingPointError("non-finite LSTM state")
    return LstmState(h, c)


def lstm_step_backward(params, x, prev, dh, dc):
    """Gradients of one step given upstream ``dh``, ``dc`` on the new state.

    Returns ``(dx, dprev: LstmState, grads)`` with ``grads`` keyed W/U/b.
    """
    _, _, cache = _step(params, x, prev.h, prev.c)
    grads = {k: np.zeros_like(v) for k, v in params.tensors().items()}
    dx, dh_prev, dc_prev = _step_backward(params, cache, dh, dc, grads)
    return dx, LstmState(dh_prev, dc_prev), grads


def lstm_sequence(params, xs):
    """Run from the zero state over the rows of ``xs``; returns ``(hs, caches)``."""
    H = params.hidden_size
    if xs.ndim != 2 or xs.shape[1] != params.input_size:
        raise DimensionError(f"xs: expected (n, {params.input_size}), got {xs.shape}")
    h = np.zeros(H)
    c = np.zeros(H)
    hs = np.empty((xs.shape[0], H))
    caches = []
    for t in range(xs.shape[0]):
        h, c, cache = _step(params, xs[t], h, c)
        hs[t] = h
        caches.append(cache)
    return hs, caches


def lstm_sequence_backward(params, caches, dhs, grads):
    """Backprop through :func:`lstm_sequence`.

    ``dhs`` holds the loss gradient on every output row; parameter gradients are
    accumulated into ``grads`` (keys W/U/b). Returns the input gradients.
    """
    H = params.hidden_size
    dxs = np.empty((len(caches), params.input_size))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(len(caches) - 1, -1, -1):
        dxs[t], dh_next, dc_next = _step_backward(params, caches[t], dhs[t] + dh_next, dc_next, grads)
    return dxs


# ------------------------------------------------------------- highway

def highway_combine(W_hw, b_hw, h, z):
    """``t*h + (1-t)*z`` with gate ``t = sigmoid(W_hw h + b_hw)``."""
    d = h.shape[0]
    check_mat(W_hw, d, d, "W_hw")
    check_vec(b_hw, d, "b_hw")
    check_vec(z, d, "z")
    t = sigmoid(W_hw @ h + b_hw)
    return t * h + (1.0 - t) * z


def highway_backward(W_hw, b_hw, h, z, dout):
    """Returns ``(dW, db, dh, dz)``."""
    t = sigmoid(W_hw @ h + b_hw)
    da = dout * (h - z) * t * (1.0 - t)
    return np.outer(da, h), da, dout * t + W_hw.T @ da, dout * (1.0 - t)


# ------------------------------------------------------------- dropout

def dropout_mask(shape, rate, rng):
    """Inverted-dropout multiplier: 0 with probability ``rate``, else ``1/(1-rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout_apply(v, rate, rng, training):
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return v
    return v * dropout_mask(v.shape, rate, rng)


# ---------------------------------------------------------------- Adam

@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads, lr):
    """Bias-corrected Adam update, applied in place.

    ``params`` and ``grads`` are dicts of arrays with matching keys; parameter
    arrays are modified in place and ``state.t`` advances by one. Updates are
    lazy: entries whose gradient is exactly zero (or keys missing from
    ``grads``) keep both their value and their moment estimates, so an all-zero
    gradient never moves a parameter whatever momentum has built up.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for k, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {k!r}")
        if g.shape != params[k].shape:
            raise DimensionError(f"gradient {k!r}: shape {g.shape} != {params[k].shape}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for k, g in grads.items():
        p = params[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        nz = g != 0
        if not nz.any():
            continue
        m = np.where(nz, b1 * state.m[k] + (1.0 - b1) * g, state.m[k])
        v = np.where(nz, b2 * state.v[k] + (1.0 - b2) * (g * g), state.v[k])
        state.m[k][...] = m
        state.v[k][...] = v
        p -= np.where(nz, lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps), 0.0)


def clip_global_norm(grads, max_norm):
    """Scale all gradients in place so their joint 2-norm is at most ``max_norm``."""
    total = np.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total
