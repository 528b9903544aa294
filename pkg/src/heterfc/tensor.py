"""Dense tensors with a reverse-mode tape, plus a finite-difference checker.

The op set is exactly what the model needs: matmul, elementwise add/mul (with
bias-row broadcasting only), gather/scatter over rows, segment pooling over
spans, the usual activations and a numerically stable softmax. Recording
happens on a module-global tape whenever an input requires grad; ``backward``
replays it once in reverse and then clears it.
"""
from __future__ import annotations

import numpy as np

from .errors import DetachedLoss, EmptySegment, NotScalar, ShapeMismatch


class Tape:
    """Ordered op record; topological by construction (ops append as they run)."""

    def __init__(self):
        self.entries: list[tuple["Tensor", tuple["Tensor", ...], callable]] = []

    def record(self, out, inputs, backward_fn):
        self.entries.append((out, inputs, backward_fn))


_TAPE = Tape()


def active_tape() -> Tape:
    return _TAPE


def reset_tape() -> None:
    global _TAPE
    _TAPE = Tape()


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_on_tape")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.asarray(data, dtype=dtype if dtype is not None else None)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._on_tape = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x, dtype=None) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x, dtype=dtype)


def _record(out: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> Tensor:
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._on_tape = True
        _TAPE.record(out, inputs, backward_fn)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


# --- primitives ------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def bwd(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)
    return _record(out, (a, b), bwd)


def _broadcast_check(a: Tensor, b: Tensor) -> bool:
    """True when b is a bias row broadcast over a's rows."""
    return (a.data.ndim == 2 and b.data.ndim == 2
            and b.shape[0] == 1 and b.shape[1] == a.shape[1])


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        out = Tensor(a.data + b.data)

        def bwd(g):
            _accum(a, g)
            _accum(b, g)
    elif _broadcast_check(a, b):
        out = Tensor(a.data + b.data)

        def bwd(g):
            _accum(a, g)
            _accum(b, g.sum(axis=0, keepdims=True))
    else:
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")
    return _record(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        out = Tensor(a.data * b.data)

        def bwd(g):
            _accum(a, g * b.data)
            _accum(b, g * a.data)
    elif _broadcast_check(a, b):
        out = Tensor(a.data * b.data)

        def bwd(g):
            _accum(a, g * b.data)
            _accum(b, (g * a.data).sum(axis=0, keepdims=True))
    else:
        raise ShapeMismatch(f"mul {a.shape} * {b.shape}")
    return _record(out, (a, b), bwd)


def smul(a: Tensor, s: float) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data * s)

    def bwd(g):
        _accum(a, g * s)
    return _record(out, (a,), bwd)


def neg(a: Tensor) -> Tensor:
    return smul(a, -1.0)


def scale_rows(a: Tensor, s: np.ndarray) -> Tensor:
    """Multiply each row of a [N,d] tensor by a constant per-row factor."""
    a = _as_tensor(a)
    s = np.asarray(s, dtype=a.dtype).reshape(-1, 1)
    if a.data.ndim != 2 or s.shape[0] != a.shape[0]:
        raise ShapeMismatch(f"scale_rows {a.shape} by {s.shape}")
    out = Tensor(a.data * s)

    def bwd(g):
        _accum(a, g * s)
    return _record(out, (a,), bwd)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if axis not in (0, 1):
        raise ShapeMismatch(f"concat axis {axis}")
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis))
    sizes = [t.shape[axis] for t in ts]

    def bwd(g):
        start = 0
        for t, n in zip(ts, sizes):
            sl = (slice(start, start + n),) if axis == 0 else (slice(None), slice(start, start + n))
            _accum(t, g[sl])
            start += n
    return _record(out, tuple(ts), bwd)


def slice_rows(a: Tensor, i: int, j: int) -> Tensor:
    """Rows i..j-1 of a 2-D tensor."""
    a = _as_tensor(a)
    out = Tensor(a.data[i:j])

    def bwd(g):
        full = np.zeros_like(a.data)
        full[i:j] = g
        _accum(a, full)
    return _record(out, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.reshape(shape))

    def bwd(g):
        _accum(a, g.reshape(a.data.shape))
    return _record(out, (a,), bwd)


def gather_rows(a: Tensor, idx) -> Tensor:
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(a.data[idx])

    def bwd(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accum(a, full)
    return _record(out, (a,), bwd)


def scatter_add(a: Tensor, idx, num_rows: int) -> Tensor:
    """Sum rows of a [E,d] tensor into a [num_rows,d] output at idx[e]."""
    a = _as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2 or idx.shape[0] != a.shape[0]:
        raise ShapeMismatch(f"scatter_add {a.shape} with {idx.shape} indices")
    data = np.zeros((num_rows, a.shape[1]), dtype=a.dtype)
    np.add.at(data, idx, a.data)
    out = Tensor(data)

    def bwd(g):
        _accum(a, g[idx])
    return _record(out, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0))

    def bwd(g):
        _accum(a, g * mask)
    return _record(out, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    val = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(val)

    def bwd(g):
        _accum(a, g * val * (1.0 - val))
    return _record(out, (a,), bwd)


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(np.log(a.data))

    def bwd(g):
        _accum(a, g / a.data)
    return _record(out, (a,), bwd)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only through the interior."""
    a = _as_tensor(a)
    mask = (a.data >= lo) & (a.data <= hi)
    out = Tensor(np.clip(a.data, lo, hi))

    def bwd(g):
        _accum(a, g * mask)
    return _record(out, (a,), bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    val = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(val)

    def bwd(g):
        dot = (g * val).sum(axis=axis, keepdims=True)
        _accum(a, val * (g - dot))
    return _record(out, (a,), bwd)


def _check_spans(spans, n_rows):
    for i, j in spans:
        if i > j or i < 0 or j >= n_rows:
            raise EmptySegment(f"bad span ({i},{j}) for {n_rows} rows")


def segment_mean(a: Tensor, spans) -> Tensor:
    """Mean-pool rows per inclusive span [i,j]."""
    a = _as_tensor(a)
    _check_spans(spans, a.shape[0])
    val = np.stack([a.data[i:j + 1].mean(axis=0) for i, j in spans])
    out = Tensor(val)

    def bwd(g):
        full = np.zeros_like(a.data)
        for row, (i, j) in enumerate(spans):
            full[i:j + 1] += g[row] / (j - i + 1)
        _accum(a, full)
    return _record(out, (a,), bwd)


def segment_max(a: Tensor, spans) -> Tensor:
    """Max-pool rows per inclusive span; gradient goes to the first argmax row."""
    a = _as_tensor(a)
    _check_spans(spans, a.shape[0])
    argmaxes = [i + a.data[i:j + 1].argmax(axis=0) for i, j in spans]
    val = np.stack([a.data[am, np.arange(a.shape[1])] for am in argmaxes])
    out = Tensor(val)

    def bwd(g):
        full = np.zeros_like(a.data)
        cols = np.arange(a.shape[1])
        for row, am in enumerate(argmaxes):
            np.add.at(full, (am, cols), g[row])
        _accum(a, full)
    return _record(out, (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    out = Tensor(a.data.sum())

    def bwd(g):
        _accum(a, np.full_like(a.data, float(g)))
    return _record(out, (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size
    out = Tensor(a.data.sum() / n)

    def bwd(g):
        _accum(a, np.full_like(a.data, float(g) / n))
    return _record(out, (a,), bwd)


def broadcast_row(v: Tensor, m: int) -> Tensor:
    """Tile a [1,d] row into [m,d]; backward sums over rows."""
    v = _as_tensor(v)
    if v.data.ndim != 2 or v.shape[0] != 1:
        raise ShapeMismatch(f"broadcast_row expects [1,d], got {v.shape}")
    out = Tensor(np.repeat(v.data, m, axis=0))

    def bwd(g):
        _accum(v, g.sum(axis=0, keepdims=True))
    return _record(out, (v,), bwd)


# --- backward --------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad leaf reachable from loss.

    Consumes the tape: a second backward without re-recording raises.
    """
    if loss.data.size != 1:
        raise NotScalar(f"loss must be scalar, got shape {loss.shape}")
    if not loss._on_tape:
        raise DetachedLoss("loss is not on the active tape (already consumed?)")
    loss.grad = np.ones_like(loss.data)
    for out, inputs, bwd in reversed(_TAPE.entries):
        if out.grad is None:
            continue
        bwd(out.grad)
    for out, _, _ in _TAPE.entries:
        out._on_tape = False
        if out is not loss:
            out.grad = None
    reset_tape()


# --- gradient checking -------------------------------------------------------

def grad_check(f, params: dict[str, Tensor], eps: float = 1e-5,
               skip: dict[str, np.ndarray] | None = None) -> float:
    """Central-difference check of autodiff gradients.

    ``f`` maps the params dict to a scalar Tensor. Returns the maximum
    relative error over all coordinates; ``skip`` masks coordinates excluded
    from the check (e.g. segment_max ties). Run with float64 params.
    """
    reset_tape()
    for p in params.values():
        p.zero_grad()
    loss = f(params)
    backward(loss)
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    max_err = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        mask = None if skip is None or name not in skip else skip[name].reshape(-1)
        for i in range(flat.size):
            if mask is not None and mask[i]:
                continue
            orig = flat[i]
            flat[i] = orig + eps
            reset_tape()
            hi = f(params).item()
            flat[i] = orig - eps
            reset_tape()
            lo = f(params).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = a_flat[i]
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            max_err = max(max_err, err)
    reset_tape()
    return max_err
