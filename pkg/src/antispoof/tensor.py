"""Dense float64 tensors with reverse-mode automatic differentiation.

Everything is double precision: the whole point of a desk-scale engine is
that analytical gradients can be checked against central finite differences
to tight tolerances, and fp32/fp16 would drown that signal in rounding noise.

Operations record onto a tape (define-by-run: the tape is rebuilt on every
forward pass). ``backward(loss)`` walks the active tape in reverse and
accumulates gradients into every ``requires_grad`` tensor that the loss
depends on, then clears the tape.
"""

from __future__ import annotations

import math
import struct
from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the operation."""


class DomainError(ValueError):
    """A value is outside the operation's documented domain."""


class ContractError(RuntimeError):
    """An operation was called in a way that violates its contract."""


class Tensor:
    """A dense n-dimensional float64 array, optionally tracked for autodiff.

    ``data`` is row-major and owned by the tensor; treat it as immutable
    after creation (optimizers mutate parameter ``data`` in place between
    forward/backward phases, which is the one sanctioned exception).
    ``grad`` is allocated lazily by ``backward`` and has the same shape.
    """

    __slots__ = ("data", "requires_grad", "grad", "_is_leaf")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._is_leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A view of the same values that does not participate in autodiff."""
        return Tensor(self.data.copy(), requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{req})"

    # Operator sugar; everything delegates to the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of differentiable operations.

    Entries are appended in execution order, so every operation's inputs
    precede it and a single reverse sweep computes all gradients. Use as a
    context manager to record onto a private tape; otherwise ops record
    onto the module-level default tape.
    """

    def __init__(self):
        self._entries: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __len__(self) -> int:
        return len(self._entries)

    def clear(self) -> None:
        self._entries.clear()

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> None:
        self._entries.append((out, inputs, backward_fn))

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _TAPE_STACK.pop()


_TAPE_STACK: list[Tape] = [Tape()]
_GRAD_ENABLED: bool = True


def active_tape() -> Tape:
    return _TAPE_STACK[-1]


class no_grad:
    """Context manager that disables tape recording (e.g. teacher/eval passes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev


def _trace(out: Tensor, inputs: tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    if _GRAD_ENABLED and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out._is_leaf = False
        active_tape().record(out, inputs, backward_fn)
    return out


def backward(loss: Tensor, tape: Tape | None = None) -> None:
    """Populate ``grad`` on every requires_grad tensor the loss depends on.

    ``loss`` must be a scalar recorded on ``tape`` (default: the active
    tape). The tape is cleared afterwards; re-running backward requires
    re-running the forward pass.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = tape if tape is not None else active_tape()

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for out, inputs, backward_fn in reversed(tape._entries):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for inp, ig in zip(inputs, backward_fn(g)):
            if ig is None or not inp.requires_grad:
                continue
            if inp._is_leaf:
                if inp.grad is None:
                    inp.grad = np.zeros_like(inp.data)
                inp.grad += ig
            else:
                acc = grads.get(id(inp))
                if acc is None:
                    grads[id(inp)] = ig.copy()
                else:
                    acc += ig
    # Leaf loss (no recorded ops): still seed its own grad.
    if loss._is_leaf and loss.requires_grad and loss.grad is None:
        loss.grad = np.ones_like(loss.data)
    tape.clear()


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.grad = None


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product with backward dA = dC·Bᵀ, dB = Aᵀ·dC."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)

    def bwd(g):
        return g @ b.data.T, a.data.T @ g

    return _trace(out, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)
    return _trace(out, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data - b.data)
    return _trace(out, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data)
    return _trace(out, (a, b), lambda g: (g * b.data, g * a.data))


def scale(x: Tensor, c: float) -> Tensor:
    x = _as_tensor(x)
    c = float(c)
    out = Tensor(x.data * c)
    return _trace(out, (x,), lambda g: (g * c,))


def transpose(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {x.shape}")
    out = Tensor(x.data.T.copy())
    return _trace(out, (x,), lambda g: (g.T,))


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    shape = tuple(int(s) for s in shape)
    out = Tensor(x.data.reshape(shape).copy())
    return _trace(out, (x,), lambda g: (g.reshape(x.shape),))


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat needs at least one tensor")
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def bwd(g):
        return tuple(
            np.take(g, range(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(parts))
        )

    return _trace(out, tuple(parts), bwd)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice along one axis; backward scatters into zeros."""
    x = _as_tensor(x)
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = Tensor(x.data[idx].copy())

    def bwd(g):
        full = np.zeros_like(x.data)
        full[idx] = g
        return (full,)

    return _trace(out, (x,), bwd)


def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001 - numpy precedent
    x = _as_tensor(x)
    out = Tensor(x.data.sum(axis=axis))

    def bwd(g):
        if axis is None:
            return (np.full_like(x.data, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return _trace(out, (x,), bwd)


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    out = Tensor(x.data.mean(axis=axis))

    def bwd(g):
        if axis is None:
            return (np.full_like(x.data, float(g) / n),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape) / n,)

    return _trace(out, (x,), bwd)


def exp(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    y = np.exp(x.data)
    out = Tensor(y)
    return _trace(out, (x,), lambda g: (g * y,))


def log(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if np.any(x.data <= 0):
        raise DomainError("log needs strictly positive inputs")
    out = Tensor(np.log(x.data))
    return _trace(out, (x,), lambda g: (g / x.data,))


def power(x: Tensor, p: float) -> Tensor:
    """Elementwise x**p for a scalar exponent; x must be >= 0 for fractional p."""
    x = _as_tensor(x)
    p = float(p)
    if p != int(p) and np.any(x.data < 0):
        raise DomainError("power with fractional exponent needs non-negative base")
    y = np.power(x.data, p)
    out = Tensor(y)

    def bwd(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = p * np.power(x.data, p - 1.0)
        d = np.where(np.isfinite(d), d, 0.0)
        return (g * d,)

    return _trace(out, (x,), bwd)


def softmax(x: Tensor, temperature: float = 1.0) -> Tensor:
    """Softmax along the last axis at the given temperature.

    The running maximum is subtracted before exponentiation; this is part
    of the contract (softmax([1000, 0]) must not overflow), not an
    optimization. Rows sum to 1 within 1e-12 and are strictly positive:
    entries that underflow are floored at the smallest subnormal, which
    perturbs row sums by far less than the 1e-12 budget.
    """
    x = _as_tensor(x)
    if temperature <= 0:
        raise DomainError(f"softmax temperature must be positive, got {temperature}")
    z = x.data / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = np.maximum(e / e.sum(axis=-1, keepdims=True), 5e-324)
    out = Tensor(y)

    def bwd(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot) / temperature,)

    return _trace(out, (x,), bwd)


def log_softmax(x: Tensor, temperature: float = 1.0) -> Tensor:
    """Log of softmax along the last axis, computed stably via logsumexp."""
    x = _as_tensor(x)
    if temperature <= 0:
        raise DomainError(f"log_softmax temperature must be positive, got {temperature}")
    z = x.data / temperature
    m = z.max(axis=-1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True))
    out = Tensor(z - lse)
    y = np.exp(out.data)

    def bwd(g):
        return ((g - y * g.sum(axis=-1, keepdims=True)) / temperature,)

    return _trace(out, (x,), bwd)


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(f"layernorm affine shapes {gamma.shape}/{beta.shape} != ({d},)")
    if eps <= 0:
        raise DomainError("layernorm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = Tensor(xhat * gamma.data + beta.data)

    def bwd(g):
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        axes = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        return dx, dgamma, dbeta

    return _trace(out, (x, gamma, beta), bwd)


# tanh-approximation constants, documented in the README
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def gelu(x: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation:

    gelu(x) = 0.5·x·(1 + tanh(√(2/π)·(x + 0.044715·x³)))
    """
    x = _as_tensor(x)
    u = _GELU_C * (x.data + _GELU_A * x.data**3)
    t = np.tanh(u)
    out = Tensor(0.5 * x.data * (1.0 + t))

    def bwd(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * x.data**2)
        d = 0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t**2) * du
        return (g * d,)

    return _trace(out, (x,), bwd)


def cross_entropy(pred_logprobs: Tensor, target_probs: Tensor) -> Tensor:
    """−Σ target·logprob for a single distribution pair.

    ``target_probs`` must sum to 1 (within 1e-9); ``pred_logprobs`` are
    assumed to be the log of a distribution (e.g. from log_softmax).
    """
    p, t = _as_tensor(pred_logprobs), _as_tensor(target_probs)
    if p.shape != t.shape or p.data.ndim != 1:
        raise ShapeError(f"cross_entropy needs matching 1-D shapes, got {p.shape}/{t.shape}")
    total = t.data.sum()
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"target_probs must sum to 1, got {total!r}")
    out = Tensor(-(t.data * p.data).sum())
    return _trace(out, (p, t), lambda g: (-g * t.data, -g * p.data))


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------


def finite_diff_grad(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar-valued tensor function.

    Evaluates (f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h per coordinate with the
    forward path disabled for recording, so the oracle never touches the
    tape it is used to check.
    """
    base = x.data.copy()
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)
    with no_grad():
        for i in range(base.size):
            pert = base.copy().reshape(-1)
            pert[i] += h
            hi = f(Tensor(pert.reshape(base.shape))).item()
            pert[i] -= 2 * h
            lo = f(Tensor(pert.reshape(base.shape))).item()
            flat[i] = (hi - lo) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Flat binary serialization (checkpoint building block)
# ---------------------------------------------------------------------------

_MAGIC = b"TNS1"


def write_tensor(fp, arr: np.ndarray) -> None:
    """Write magic, rank and extents as u64 LE, then row-major f64 LE values."""
    arr = np.asarray(arr, dtype=np.float64)
    fp.write(_MAGIC)
    fp.write(struct.pack("<Q", arr.ndim))
    for extent in arr.shape:
        fp.write(struct.pack("<Q", extent))
    fp.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def read_tensor(fp) -> np.ndarray:
    magic = fp.read(4)
    if magic != _MAGIC:
        raise ContractError(f"bad tensor magic {magic!r}")
    (rank,) = struct.unpack("<Q", fp.read(8))
    shape = tuple(struct.unpack("<Q", fp.read(8))[0] for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    payload = fp.read(8 * count)
    if len(payload) != 8 * count:
        raise ContractError("truncated tensor payload")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
