"""Minimal reverse-mode automatic differentiation on float64 arrays.

A Tape records operations in creation order; backward replays the records
in reverse, accumulating vector-Jacobian products into a gradient per node.
Tensors without a tape are constants: they participate in arithmetic but
record nothing and receive no gradient. Every primitive checks its output
for NaN/Inf and raises NumericalError naming the operation, so numerical
blowups fail loudly at their source instead of corrupting a training run.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation, NumericalError

__all__ = [
    "Tensor",
    "Tape",
    "Adam",
    "matmul",
    "add",
    "mul",
    "neg",
    "scale",
    "relu",
    "log",
    "exp",
    "dot",
    "row_sum",
    "row_mean",
    "l2_normalize",
    "concat",
    "stack_rows",
    "transpose",
    "reshape",
    "logsumexp",
    "dropout",
    "softmax_cross_entropy",
]


class Tensor:
    """A float64 array, optionally tracked on a tape.

    Constants (tape=None) are legal inputs to any operation; they are not
    recorded and cannot be differentiated against.
    """

    __slots__ = ("data", "tape", "node_id")

    def __init__(self, data, tape: "Tape | None" = None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ContractViolation("tensor data must be finite")
        self.data = arr
        self.tape = tape
        self.node_id = tape._register() if tape is not None else None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        kind = "const" if self.tape is None else f"node {self.node_id}"
        return f"Tensor({kind}, shape={self.data.shape})"


class Tape:
    """Operation log for one forward pass.

    Records are (op_name, output_id, input_ids, vjp) tuples appended in
    creation order; backward walks them once in reverse.
    """

    def __init__(self):
        self._next_id = 0
        self._records = []

    def _register(self) -> int:
        nid = self._next_id
        self._next_id += 1
        return nid

    def leaf(self, data) -> Tensor:
        """A differentiable input: registered on the tape, no producing op."""
        return Tensor(data, tape=self)

    def _record(self, op: str, out: Tensor, inputs, vjp) -> None:
        in_ids = tuple(t.node_id for t in inputs)
        self._records.append((op, out.node_id, in_ids, vjp))

    def backward(self, loss: Tensor) -> dict:
        """Gradient of a scalar loss with respect to every reachable node.

        Returns {node_id: ndarray}; look up a leaf's gradient by its
        node_id. Nodes that do not influence the loss are absent.
        """
        if loss.tape is not self:
            raise ContractViolation("loss does not belong to this tape")
        if loss.data.ndim != 0:
            raise ContractViolation("backward requires a scalar loss")
        grads: dict = {loss.node_id: np.ones(())}
        for op, out_id, in_ids, vjp in reversed(self._records):
            g = grads.pop(out_id, None)
            if g is None:
                continue
            for in_id, gin in zip(in_ids, vjp(g)):
                if in_id is None or gin is None:
                    continue
                if not np.all(np.isfinite(gin)):
                    raise NumericalError(f"{op} backward produced non-finite values")
                if in_id in grads:
                    grads[in_id] = grads[in_id] + gin
                else:
                    grads[in_id] = gin
        return grads


def _common_tape(op: str, inputs) -> "Tape | None":
    tape = None
    for t in inputs:
        if t.tape is None:
            continue
        if tape is None:
            tape = t.tape
        elif tape is not t.tape:
            raise ContractViolation(f"{op}: inputs live on different tapes")
    return tape


def _emit(op: str, data, inputs, vjp) -> Tensor:
    arr = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{op} produced non-finite values")
    tape = _common_tape(op, inputs)
    out = Tensor.__new__(Tensor)
    out.data = arr
    out.tape = tape
    out.node_id = tape._register() if tape is not None else None
    if tape is not None:
        tape._record(op, out, inputs, vjp)
    return out


# ---------------------------------------------------------------------------
# Primitives
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product for 2-D x 2-D, 1-D x 2-D and 2-D x 1-D operands."""
    A, B = a.data, b.data
    if A.ndim == 2 and B.ndim == 2:
        if A.shape[1] != B.shape[0]:
            raise ContractViolation(f"matmul: {A.shape} @ {B.shape}")

        def vjp(g):
            return (g @ B.T, A.T @ g)

    elif A.ndim == 1 and B.ndim == 2:
        if A.shape[0] != B.shape[0]:
            raise ContractViolation(f"matmul: {A.shape} @ {B.shape}")

        def vjp(g):
            return (B @ g, np.outer(A, g))

    elif A.ndim == 2 and B.ndim == 1:
        if A.shape[1] != B.shape[0]:
            raise ContractViolation(f"matmul: {A.shape} @ {B.shape}")

        def vjp(g):
            return (np.outer(g, B), A.T @ g)

    else:
        raise ContractViolation(
            f"matmul supports 1-D/2-D operands, got {A.ndim}-D and {B.ndim}-D"
        )
    return _emit("matmul", A @ B, (a, b), vjp)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also allows the bias pattern (n, d) + (d,)."""
    A, B = a.data, b.data
    if A.shape == B.shape:

        def vjp(g):
            return (g, g)

    elif A.ndim == 2 and B.ndim == 1 and A.shape[1] == B.shape[0]:

        def vjp(g):
            return (g, g.sum(axis=0))

    else:
        raise ContractViolation(f"add: incompatible shapes {A.shape} + {B.shape}")
    return _emit("add", A + B, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of equal-shape tensors."""
    A, B = a.data, b.data
    if A.shape != B.shape:
        raise ContractViolation(f"mul: incompatible shapes {A.shape} * {B.shape}")

    def vjp(g):
        return (g * B, g * A)

    return _emit("mul", A * B, (a, b), vjp)


def neg(x: Tensor) -> Tensor:
    return _emit("neg", -x.data, (x,), lambda g: (-g,))


def scale(x: Tensor, s: float) -> Tensor:
    """Multiply by a python float (not differentiated against s)."""
    s = float(s)
    return _emit("scale", s * x.data, (x,), lambda g: (s * g,))


def relu(x: Tensor) -> Tensor:
    gate = x.data > 0.0
    return _emit("relu", np.where(gate, x.data, 0.0), (x,), lambda g: (g * gate,))


def log(x: Tensor) -> Tensor:
    X = x.data
    if np.any(X <= 0.0):
        raise NumericalError("log received non-positive input")
    return _emit("log", np.log(X), (x,), lambda g: (g / X,))


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(x.data)
    return _emit("exp", out, (x,), lambda g: (g * out,))


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two equal-length vectors; yields a scalar."""
    A, B = a.data, b.data
    if A.ndim != 1 or B.ndim != 1 or A.shape != B.shape:
        raise ContractViolation(f"dot: need equal-length vectors, got {A.shape}, {B.shape}")

    def vjp(g):
        return (g * B, g * A)

    return _emit("dot", A @ B, (a, b), vjp)


def row_sum(x: Tensor) -> Tensor:
    """Sum over the row axis: (n, d) -> (d,); 1-D input -> scalar."""
    X = x.data
    if X.ndim == 2:
        out = X.sum(axis=0)
    elif X.ndim == 1:
        out = X.sum()
    else:
        raise ContractViolation(f"row_sum: need 1-D or 2-D input, got {X.ndim}-D")

    def vjp(g):
        return (np.broadcast_to(g, X.shape).copy(),)

    return _emit("row_sum", out, (x,), vjp)


def row_mean(x: Tensor) -> Tensor:
    """Mean over the row axis: (n, d) -> (d,); 1-D input -> scalar."""
    X = x.data
    if X.ndim == 2:
        n = X.shape[0]
        out = X.mean(axis=0)
    elif X.ndim == 1:
        n = X.shape[0]
        out = X.mean()
    else:
        raise ContractViolation(f"row_mean: need 1-D or 2-D input, got {X.ndim}-D")
    if n == 0:
        raise ContractViolation("row_mean of an empty axis")

    def vjp(g):
        return (np.broadcast_to(g / n, X.shape).copy(),)

    return _emit("row_mean", out, (x,), vjp)


def l2_normalize(x: Tensor) -> Tensor:
    """Project a vector onto the unit sphere."""
    X = x.data
    if X.ndim != 1:
        raise ContractViolation("l2_normalize expects a 1-D vector")
    norm = float(np.sqrt(X @ X))
    if norm < 1e-12:
        raise NumericalError("l2_normalize received a (near-)zero vector")
    out = X / norm

    def vjp(g):
        return ((g - out * (out @ g)) / norm,)

    return _emit("l2_normalize", out, (x,), vjp)


def concat(parts) -> Tensor:
    """Concatenate 1-D tensors into one vector."""
    parts = tuple(parts)
    if not parts:
        raise ContractViolation("concat of nothing")
    for p in parts:
        if p.data.ndim != 1:
            raise ContractViolation("concat expects 1-D tensors")
    sizes = [p.data.shape[0] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _emit("concat", np.concatenate([p.data for p in parts]), parts, vjp)


def stack_rows(parts) -> Tensor:
    """Stack equal-length vectors as the rows of a matrix."""
    parts = tuple(parts)
    if not parts:
        raise ContractViolation("stack_rows of nothing")
    d = parts[0].data.shape
    for p in parts:
        if p.data.ndim != 1 or p.data.shape != d:
            raise ContractViolation("stack_rows expects equal-length 1-D tensors")

    def vjp(g):
        return tuple(g[i] for i in range(len(parts)))

    return _emit("stack_rows", np.stack([p.data for p in parts]), parts, vjp)


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise ContractViolation("transpose expects a 2-D tensor")
    return _emit("transpose", x.data.T.copy(), (x,), lambda g: (g.T,))


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ContractViolation(f"cannot reshape {x.data.shape} to {shape}")
    return _emit("reshape", out.copy(), (x,),
                 lambda g: (np.asarray(g).reshape(x.data.shape),))


def logsumexp(x: Tensor) -> Tensor:
    """Stabilized log-sum-exp over the last axis; 1-D input -> scalar."""
    X = x.data
    if X.ndim not in (1, 2):
        raise ContractViolation("logsumexp expects a 1-D or 2-D tensor")
    m = X.max(axis=-1, keepdims=True)
    z = np.exp(X - m)
    total = z.sum(axis=-1, keepdims=True)
    out = (m + np.log(total)).reshape(X.shape[:-1])
    soft = z / total

    def vjp(g):
        return (soft * np.expand_dims(g, -1),)

    return _emit("logsumexp", out, (x,), vjp)


def dropout(x: Tensor, mask: np.ndarray, rate: float) -> Tensor:
    """Inverted dropout with an externally drawn 0/1 mask.

    The mask is supplied by the caller so a forward pass can be replayed
    bit-for-bit (finite-difference checks, determinism tests).
    """
    if not (0.0 <= rate < 1.0):
        raise ContractViolation(f"dropout rate must lie in [0, 1), got {rate}")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.data.shape:
        raise ContractViolation("dropout mask shape does not match input")
    keep = mask / (1.0 - rate)

    def vjp(g):
        return (g * keep,)

    return _emit("dropout", x.data * keep, (x,), vjp)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross entropy of row-wise softmax against integer labels."""
    X = logits.data
    if X.ndim != 2:
        raise ContractViolation("softmax_cross_entropy expects (batch, classes) logits")
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ContractViolation("labels must be a vector matching the batch")
    if np.any(y < 0) or np.any(y >= X.shape[1]):
        raise ContractViolation("label out of range")
    n = X.shape[0]
    m = X.max(axis=1, keepdims=True)
    z = np.exp(X - m)
    total = z.sum(axis=1, keepdims=True)
    lse = (m + np.log(total)).ravel()
    picked = X[np.arange(n), y]
    out = float(np.mean(lse - picked))
    soft = z / total

    def vjp(g):
        grad = soft.copy()
        grad[np.arange(n), y] -= 1.0
        return (grad * (float(g) / n),)

    return _emit("softmax_cross_entropy", out, (logits,), vjp)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Adam with bias-corrected moment estimates, acting on a named
    parameter dict in place."""

    def __init__(self, params: dict, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ContractViolation("learning rate must be positive")
        self.params = params
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m = {k: np.zeros_like(v) for k, v in params.items()}
        self._v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict) -> None:
        """Apply one update from {name: gradient}; missing names are
        treated as zero gradient (their moments still decay)."""
        self.t += 1
        b1t = 1.0 - self.beta1**self.t
        b2t = 1.0 - self.beta2**self.t
        for name, value in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(value)
            if g.shape != value.shape:
                raise ContractViolation(f"gradient shape mismatch for {name}")
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"non-finite gradient for {name}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            value -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
