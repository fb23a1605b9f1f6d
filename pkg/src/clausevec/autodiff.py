"""Small dense reverse-mode autodiff on top of numpy.

Only what the graph encoders need: 2-D matmul, broadcasting elementwise
arithmetic, concatenation, row gather, scatter reductions by segment id,
a few activations, Xavier init, Adam and a stable BCE-with-logits loss.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

DTYPES = {"f32": np.float32, "f64": np.float64}


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


def as_dtype(dtype) -> np.dtype:
    if isinstance(dtype, str) and dtype in DTYPES:
        return np.dtype(DTYPES[dtype])
    return np.dtype(dtype)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, dtype=None, _parents=(), _backward=None, op=""):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, op={self.op or 'leaf'})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def backward(self, grad: Optional[np.ndarray] = None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every leaf that requires it."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topo_order(self)
        grads = {id(self): np.asarray(grad, dtype=self.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else prev + pg

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _wrap(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=like.dtype if like is not None else None)


def _result(data, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, None, tuple(parents), backward, op)
    return Tensor(data, op=op)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _check_broadcast(a, b, "add")
    return _result(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add",
    )


def sub(a, b) -> Tensor:
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _check_broadcast(a, b, "sub")
    return _result(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)), "sub",
    )


def mul(a, b) -> Tensor:
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _check_broadcast(a, b, "mul")
    return _result(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)), "mul",
    )


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _result(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,), "relu")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _result(y, (x,), lambda g: (g * (1 - y * y),), "tanh")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return _result(y, (x,), lambda g: (g * y * (1 - y),), "sigmoid")


ACTIVATIONS = {"relu": relu, "tanh": tanh, "sigmoid": sigmoid, "identity": lambda x: x}


# ---------------------------------------------------------------------------
# Linear algebra and shape ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _result(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def concat(xs: Sequence[Tensor], axis: int = 1) -> Tensor:
    xs = list(xs)
    try:
        data = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[x.shape for x in xs]} along axis {axis}") from None
    bounds = np.cumsum([0] + [x.shape[axis] for x in xs])

    def backward(g):
        idx = [slice(None)] * g.ndim
        out = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx[axis] = slice(lo, hi)
            out.append(g[tuple(idx)])
        return out

    return _result(data, xs, backward, "concat")


def gather(x: Tensor, index) -> Tensor:
    """Rows ``x[index]``; repeated indices accumulate gradient."""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ShapeError(f"gather: index out of range for {x.shape[0]} rows")

    def backward(g):
        out = np.zeros_like(x.data)
        np.add.at(out, index, g)
        return (out,)

    return _result(x.data[index], (x,), backward, "gather")


def _check_segments(x: Tensor, segments: np.ndarray, n: int, op: str):
    if segments.shape != (x.shape[0],):
        raise ShapeError(f"{op}: {segments.shape[0]} segment ids for {x.shape[0]} rows")
    if segments.size and (segments.min() < 0 or segments.max() >= n):
        raise ShapeError(f"{op}: segment id outside [0, {n})")


def segment_sum(x: Tensor, segments, n: int) -> Tensor:
    """``out[s] = sum of rows i with segments[i] == s``; empty segments are zero."""
    segments = np.asarray(segments, dtype=np.int64)
    _check_segments(x, segments, n, "segment_sum")
    # accumulate in float64 so low-precision sums do not depend on row order
    acc = np.zeros((n,) + x.shape[1:], dtype=np.float64)
    np.add.at(acc, segments, x.data.astype(np.float64, copy=False))
    return _result(acc.astype(x.dtype), (x,), lambda g: (g[segments],), "segment_sum")


def segment_max(x: Tensor, segments, n: int) -> Tensor:
    """Column-wise max per segment; gradient goes to the first maximal row. Empty segments are zero."""
    segments = np.asarray(segments, dtype=np.int64)
    _check_segments(x, segments, n, "segment_max")
    out = np.full((n,) + x.shape[1:], -np.inf, dtype=x.dtype)
    np.maximum.at(out, segments, x.data)
    empty = np.isneginf(out)
    out[empty] = 0
    rows = np.arange(x.shape[0]).reshape((-1,) + (1,) * (x.data.ndim - 1))
    hit = x.data == out[segments]
    first = np.full(out.shape, x.shape[0], dtype=np.int64)
    np.minimum.at(first, segments, np.where(hit, rows, x.shape[0]))
    winner = hit & (rows == first[segments])

    def backward(g):
        return (np.where(winner, g[segments], 0).astype(x.dtype),)

    return _result(out, (x,), backward, "segment_max")


def sum_all(x: Tensor) -> Tensor:
    return _result(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, x.shape).copy(),), "sum")


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    return _result(
        np.asarray(x.data.mean()), (x,),
        lambda g: (np.broadcast_to(g / n, x.shape).astype(x.dtype),), "mean",
    )


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy, ``max(z,0) - z*y + log1p(exp(-|z|))`` per element."""
    y = np.asarray(labels)
    if y.shape != logits.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs labels {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("bce_with_logits: labels must be 0 or 1")
    y = y.astype(logits.dtype)
    z = logits.data
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    return _result(
        np.asarray(loss.mean()), (logits,),
        lambda g: (g * (_sigmoid(z) - y) / n,), "bce_with_logits",
    )


# ---------------------------------------------------------------------------
# Parameters, initialisation, optimiser
# ---------------------------------------------------------------------------


def xavier_init(shape, seed, dtype="f64") -> Tensor:
    """Uniform on +-sqrt(6 / (fan_in + fan_out)); ``seed`` may be an int or a Generator."""
    shape = tuple(shape)
    if len(shape) != 2:
        raise ShapeError(f"xavier_init needs a 2-D shape, got {shape}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    bound = np.sqrt(6.0 / (shape[0] + shape[1]))
    data = rng.uniform(-bound, bound, size=shape).astype(as_dtype(dtype))
    return Tensor(data, requires_grad=True)


class ParamStore:
    """Named parameters in insertion order."""

    def __init__(self, seed: int = 0, dtype="f64"):
        self.seed = seed
        self.dtype = as_dtype(dtype)
        self._params: dict[str, Tensor] = {}

    def _put(self, name: str, t: Tensor) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        self._params[name] = t
        return t

    def xavier(self, name: str, shape) -> Tensor:
        # per-parameter stream: stable no matter what else is registered
        ss = np.random.SeedSequence([self.seed, len(self._params)])
        return self._put(name, xavier_init(shape, np.random.default_rng(ss), self.dtype))

    def zeros(self, name: str, shape) -> Tensor:
        return self._put(name, Tensor(np.zeros(shape, dtype=self.dtype), requires_grad=True))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def values(self):
        return self._params.values()

    def n_scalars(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def zero_grad(self):
        for p in self._params.values():
            p.grad = np.zeros_like(p.data)

    def astype(self, dtype) -> "ParamStore":
        out = ParamStore(self.seed, dtype)
        for k, v in self._params.items():
            out._params[k] = Tensor(v.data.astype(out.dtype), requires_grad=True)
        return out

    def copy(self) -> "ParamStore":
        return self.astype(self.dtype)

    def load_state(self, other: "ParamStore"):
        for k, v in other.items():
            self._params[k].data = v.data.astype(self.dtype).copy()

    def save(self, path):
        """Write ``<path>.json`` (manifest) and ``<path>.bin`` (little-endian blob)."""
        manifest = {"dtype": "f32" if self.dtype == np.float32 else "f64", "seed": self.seed, "tensors": []}
        blob = bytearray()
        le = self.dtype.newbyteorder("<")
        for name, t in self._params.items():
            raw = t.data.astype(le).tobytes()
            manifest["tensors"].append(
                {"name": name, "shape": list(t.shape), "offset": len(blob), "nbytes": len(raw)}
            )
            blob += raw
        Path(f"{path}.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
        Path(f"{path}.bin").write_bytes(bytes(blob))

    @classmethod
    def load(cls, path) -> "ParamStore":
        manifest = json.loads(Path(f"{path}.json").read_text())
        blob = Path(f"{path}.bin").read_bytes()
        store = cls(manifest.get("seed", 0), manifest["dtype"])
        le = store.dtype.newbyteorder("<")
        for entry in manifest["tensors"]:
            raw = blob[entry["offset"]: entry["offset"] + entry["nbytes"]]
            data = np.frombuffer(raw, dtype=le).astype(store.dtype).reshape(entry["shape"])
            store._params[entry["name"]] = Tensor(data.copy(), requires_grad=True)
        return store


class AdamState:
    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: ParamStore, state: AdamState, names: Optional[Iterable[str]] = None):
    """One bias-corrected Adam update from each parameter's ``.grad``."""
    names = list(params) if names is None else list(names)
    for name in names:
        if params[name].grad is None:
            raise ValueError(f"adam_step: missing gradient for parameter {name!r}")
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1 ** t
    c2 = 1 - state.beta2 ** t
    for name in names:
        p = params[name]
        g = p.grad
        if g.shape != p.shape:
            raise ShapeError(f"adam_step: gradient {g.shape} vs parameter {p.shape} for {name!r}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p.data = p.data - (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


def gradcheck(
    f: Callable[[ParamStore], Tensor],
    params: ParamStore,
    h: float = 1e-5,
    max_coords: int = 256,
    seed: int = 0,
) -> float:
    """Max of ``|a - n| / max(1, |a|, |n|)`` between backprop and central differences.

    Checks every coordinate when there are at most ``max_coords`` of them,
    otherwise a seeded random subset of that size (clamped to at least 200).
    """
    if params.dtype != np.float64:
        raise ValueError("gradcheck needs a float64 ParamStore")
    params.zero_grad()
    out = f(params)
    if not np.isfinite(out.data).all():
        raise NumericError("gradcheck: non-finite function value")
    out.backward()
    coords = [(name, i) for name, p in params.items() for i in range(p.data.size)]
    n_pick = max(max_coords, 200)
    if len(coords) > n_pick:
        rng = np.random.default_rng(seed)
        coords = [coords[k] for k in sorted(rng.choice(len(coords), n_pick, replace=False))]
    worst = 0.0
    for name, i in coords:
        p = params[name]
        flat = p.data.reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        up = float(f(params).data)
        flat[i] = orig - h
        down = float(f(params).data)
        flat[i] = orig
        numeric = (up - down) / (2 * h)
        analytic = float(p.grad.reshape(-1)[i])
        if not (np.isfinite(numeric) and np.isfinite(analytic)):
            raise NumericError(f"gradcheck: non-finite gradient at {name}[{i}]")
        err = abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))
        worst = max(worst, err)
    return worst
