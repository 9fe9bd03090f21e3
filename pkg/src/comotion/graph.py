"""Tape-based computational graph with reverse-mode differentiation.

Every objective, constraint and dynamics function in this package is recorded
on a :class:`Tape` so that exact gradients with respect to all decision
variables are available from a single backward pass.  A tape is built eagerly:
each primitive evaluates immediately and appends one node.  After recording,
the tape is immutable; :meth:`Tape.forward` re-executes the node list with new
leaf values (bit-exact replay for identical leaves) and :func:`backward`
propagates a seed gradient to every leaf.

All values are 64-bit float arrays.  Scalars are 0-d arrays.

Subgradient conventions at non-smooth points:
  * min/max reductions send the full gradient to the first attaining index
    (row-major order).
  * clamp passes the gradient through on the closed interval [lo, hi].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "GraphError",
    "Tensor",
    "Ref",
    "Tape",
    "Evaluation",
    "record",
    "backward",
    "gradient_check",
]


class GraphError(RuntimeError):
    """Raised on malformed graph construction or numeric overflow."""


@dataclass(frozen=True)
class Tensor:
    """Immutable value container: a shape and flat row-major float64 data."""

    data: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        """Flat row-major view of the data."""
        return self.data.reshape(-1)

    @staticmethod
    def of(value) -> "Tensor":
        return Tensor(np.ascontiguousarray(value, dtype=np.float64))


def _as_array(value) -> np.ndarray:
    a = np.asarray(value, dtype=np.float64)
    if a.ndim and not a.flags["C_CONTIGUOUS"]:
        a = np.ascontiguousarray(a)
    return a


# ---------------------------------------------------------------------------
# Primitive table.  Each op has a forward (vals, arg_ids, param) -> ndarray and
# a backward (grad_out, vals, arg_ids, param, out_val) -> tuple of input grads
# aligned with arg_ids (None for no gradient).
# ---------------------------------------------------------------------------

_NORM_EPS = 1e-12  # keeps sqrt differentiable at the origin


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _f_add(vals, a, p):
    return vals[a[0]] + vals[a[1]]


def _b_add(g, vals, a, p, out):
    return (_unbroadcast(g, vals[a[0]].shape), _unbroadcast(g, vals[a[1]].shape))


def _f_sub(vals, a, p):
    return vals[a[0]] - vals[a[1]]


def _b_sub(g, vals, a, p, out):
    return (_unbroadcast(g, vals[a[0]].shape), _unbroadcast(-g, vals[a[1]].shape))


def _f_mul(vals, a, p):
    return vals[a[0]] * vals[a[1]]


def _b_mul(g, vals, a, p, out):
    x, y = vals[a[0]], vals[a[1]]
    return (_unbroadcast(g * y, x.shape), _unbroadcast(g * x, y.shape))


def _f_div(vals, a, p):
    return vals[a[0]] / vals[a[1]]


def _b_div(g, vals, a, p, out):
    x, y = vals[a[0]], vals[a[1]]
    return (_unbroadcast(g / y, x.shape), _unbroadcast(-g * x / (y * y), y.shape))


def _f_matmul(vals, a, p):
    return np.asarray(vals[a[0]] @ vals[a[1]])


def _b_matmul(g, vals, a, p, out):
    x, y = vals[a[0]], vals[a[1]]
    if x.ndim == 2 and y.ndim == 2:
        return (g @ y.T, x.T @ g)
    if x.ndim == 2 and y.ndim == 1:
        return (np.outer(g, y), x.T @ g)
    if x.ndim == 1 and y.ndim == 2:
        return (y @ g, np.outer(x, g))
    return (g * y, g * x)  # 1-D dot, g is 0-d


def _f_concat(vals, a, p):
    return np.concatenate([vals[i] for i in a], axis=0)


def _b_concat(g, vals, a, p, out):
    grads = []
    pos = 0
    for i in a:
        n = vals[i].shape[0]
        grads.append(g[pos : pos + n])
        pos += n
    return tuple(grads)


def _f_slice(vals, a, p):
    return vals[a[0]][p[0] : p[1]]


def _b_slice(g, vals, a, p, out):
    full = np.zeros_like(vals[a[0]])
    full[p[0] : p[1]] = g
    return (full,)


def _f_reshape(vals, a, p):
    return vals[a[0]].reshape(p)


def _b_reshape(g, vals, a, p, out):
    return (g.reshape(vals[a[0]].shape),)


def _f_sum(vals, a, p):
    return np.asarray(np.sum(vals[a[0]]))


def _b_sum(g, vals, a, p, out):
    return (np.full_like(vals[a[0]], float(g)),)


def sigmoid_array(x: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic; shared by the tape op and plain-numpy paths."""
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _f_sigmoid(vals, a, p):
    return sigmoid_array(vals[a[0]])


def _b_sigmoid(g, vals, a, p, out):
    return (g * out * (1.0 - out),)


def _f_tanh(vals, a, p):
    return np.tanh(vals[a[0]])


def _b_tanh(g, vals, a, p, out):
    return (g * (1.0 - out * out),)


def _f_sin(vals, a, p):
    return np.sin(vals[a[0]])


def _b_sin(g, vals, a, p, out):
    return (g * np.cos(vals[a[0]]),)


def _f_cos(vals, a, p):
    return np.cos(vals[a[0]])


def _b_cos(g, vals, a, p, out):
    return (-g * np.sin(vals[a[0]]),)


def _f_sqrt(vals, a, p):
    return np.sqrt(vals[a[0]])


def _b_sqrt(g, vals, a, p, out):
    return (g / (2.0 * out),)


def _f_square(vals, a, p):
    x = vals[a[0]]
    return x * x


def _b_square(g, vals, a, p, out):
    return (2.0 * g * vals[a[0]],)


def _f_abs(vals, a, p):
    return np.abs(vals[a[0]])


def _b_abs(g, vals, a, p, out):
    return (g * np.sign(vals[a[0]]),)  # subgradient 0 at the kink


def _f_norm(vals, a, p):
    x = vals[a[0]]
    return np.asarray(np.sqrt(np.dot(x.reshape(-1), x.reshape(-1)) + _NORM_EPS))


def _b_norm(g, vals, a, p, out):
    return (float(g) * vals[a[0]] / float(out),)


def _f_minr(vals, a, p):
    return np.asarray(np.min(vals[a[0]]))


def _b_minr(g, vals, a, p, out):
    x = vals[a[0]]
    full = np.zeros_like(x)
    full.reshape(-1)[int(np.argmin(x))] = float(g)
    return (full,)


def _f_maxr(vals, a, p):
    return np.asarray(np.max(vals[a[0]]))


def _b_maxr(g, vals, a, p, out):
    x = vals[a[0]]
    full = np.zeros_like(x)
    full.reshape(-1)[int(np.argmax(x))] = float(g)
    return (full,)


def _f_lse(vals, a, p):
    x = vals[a[0]]
    tau = p
    m = np.max(x)
    return np.asarray(m + tau * np.log(np.sum(np.exp((x - m) / tau))))


def _b_lse(g, vals, a, p, out):
    x = vals[a[0]]
    w = np.exp((x - float(out)) / p)
    return (float(g) * w,)


def _f_clamp(vals, a, p):
    return np.clip(vals[a[0]], p[0], p[1])


def _b_clamp(g, vals, a, p, out):
    x = vals[a[0]]
    return (g * ((x >= p[0]) & (x <= p[1])),)


def _interp2_setup(point, param):
    values, origin, res = param
    nx, ny = values.shape
    s = (point - origin) / res
    sx = min(max(float(s[0]), 0.0), nx - 1.0)
    sy = min(max(float(s[1]), 0.0), ny - 1.0)
    cx = float(s[0]) == sx
    cy = float(s[1]) == sy
    ix = min(int(sx), nx - 2)
    iy = min(int(sy), ny - 2)
    fx = sx - ix
    fy = sy - iy
    return values, res, ix, iy, fx, fy, cx, cy


def interp2_value(point, values, origin, resolution) -> float:
    """Bilinear interpolation of a dense grid at a planar point (clamped)."""
    _, _, ix, iy, fx, fy, _, _ = _interp2_setup(
        np.asarray(point, dtype=np.float64), (values, np.asarray(origin), resolution)
    )
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    return float(
        v00 * (1 - fx) * (1 - fy)
        + v10 * fx * (1 - fy)
        + v01 * (1 - fx) * fy
        + v11 * fx * fy
    )


def interp2_gradient(point, values, origin, resolution) -> np.ndarray:
    """Analytic gradient of the bilinear patch; zero along clamped axes."""
    _, res, ix, iy, fx, fy, cx, cy = _interp2_setup(
        np.asarray(point, dtype=np.float64), (values, np.asarray(origin), resolution)
    )
    v00 = values[ix, iy]
    v10 = values[ix + 1, iy]
    v01 = values[ix, iy + 1]
    v11 = values[ix + 1, iy + 1]
    dx = ((v10 - v00) * (1 - fy) + (v11 - v01) * fy) / res if cx else 0.0
    dy = ((v01 - v00) * (1 - fx) + (v11 - v10) * fx) / res if cy else 0.0
    return np.array([dx, dy])


def _f_interp2(vals, a, p):
    return np.asarray(interp2_value(vals[a[0]], p[0], p[1], p[2]))


def _b_interp2(g, vals, a, p, out):
    return (float(g) * interp2_gradient(vals[a[0]], p[0], p[1], p[2]),)


OP_LEAF = 0
OP_CONST = 1

_FWD = {}
_BWD = {}
_OP_NAMES = {OP_LEAF: "leaf", OP_CONST: "const"}


def _register(name, fwd, bwd):
    code = len(_OP_NAMES)
    _OP_NAMES[code] = name
    _FWD[code] = fwd
    _BWD[code] = bwd
    return code


OP_ADD = _register("add", _f_add, _b_add)
OP_SUB = _register("subtract", _f_sub, _b_sub)
OP_MUL = _register("multiply", _f_mul, _b_mul)
OP_DIV = _register("divide", _f_div, _b_div)
OP_MATMUL = _register("matmul", _f_matmul, _b_matmul)
OP_CONCAT = _register("concat", _f_concat, _b_concat)
OP_SLICE = _register("slice", _f_slice, _b_slice)
OP_RESHAPE = _register("reshape", _f_reshape, _b_reshape)
OP_SUM = _register("sum", _f_sum, _b_sum)
OP_SIGMOID = _register("sigmoid", _f_sigmoid, _b_sigmoid)
OP_TANH = _register("tanh", _f_tanh, _b_tanh)
OP_SIN = _register("sin", _f_sin, _b_sin)
OP_COS = _register("cos", _f_cos, _b_cos)
OP_SQRT = _register("sqrt", _f_sqrt, _b_sqrt)
OP_SQUARE = _register("square", _f_square, _b_square)
OP_ABS = _register("abs", _f_abs, _b_abs)
OP_NORM = _register("l2_norm", _f_norm, _b_norm)
OP_MINR = _register("min_reduce", _f_minr, _b_minr)
OP_MAXR = _register("max_reduce", _f_maxr, _b_maxr)
OP_LSE = _register("logsumexp", _f_lse, _b_lse)
OP_CLAMP = _register("clamp", _f_clamp, _b_clamp)
OP_INTERP2 = _register("grid_interp", _f_interp2, _b_interp2)


class Ref:
    """Handle to one node of a tape.  Supports arithmetic sugar."""

    __slots__ = ("tape", "idx", "shape")

    def __init__(self, tape: "Tape", idx: int, shape: tuple[int, ...]):
        self.tape = tape
        self.idx = idx
        self.shape = shape

    def _coerce(self, other) -> "Ref":
        if isinstance(other, Ref):
            if other.tape is not self.tape:
                raise GraphError("operands recorded on different tapes")
            return other
        return self.tape.const(other)

    def __add__(self, other):
        return self.tape.add(self, self._coerce(other))

    def __radd__(self, other):
        return self.tape.add(self._coerce(other), self)

    def __sub__(self, other):
        return self.tape.sub(self, self._coerce(other))

    def __rsub__(self, other):
        return self.tape.sub(self._coerce(other), self)

    def __mul__(self, other):
        return self.tape.mul(self, self._coerce(other))

    def __rmul__(self, other):
        return self.tape.mul(self._coerce(other), self)

    def __truediv__(self, other):
        return self.tape.div(self, self._coerce(other))

    def __rtruediv__(self, other):
        return self.tape.div(self._coerce(other), self)

    def __matmul__(self, other):
        return self.tape.matmul(self, self._coerce(other))

    def __neg__(self):
        return self.tape.mul(self, self.tape.const(-1.0))

    def __getitem__(self, key):
        if not isinstance(key, slice) or key.step not in (None, 1):
            raise GraphError("only contiguous slices are supported")
        start = 0 if key.start is None else key.start
        stop = self.shape[0] if key.stop is None else key.stop
        return self.tape.slice(self, start, stop)

    @property
    def value(self) -> np.ndarray:
        return self.tape.vals[self.idx]


class Evaluation:
    """Result of one forward replay: per-node values, read-only afterwards."""

    __slots__ = ("tape", "values")

    def __init__(self, tape: "Tape", values: list):
        self.tape = tape
        self.values = values

    @property
    def output(self) -> np.ndarray:
        return self.values[self.tape.output_index]

    def value_of(self, ref: Ref) -> np.ndarray:
        return self.values[ref.idx]


class Tape:
    """Ordered list of primitive nodes plus a registry of named leaves.

    Single-writer while recording; replay (:meth:`forward`) and
    :func:`backward` do not mutate recorded state and are safe to run
    concurrently.
    """

    def __init__(self, check_finite: bool = True):
        self.ops: list[int] = []
        self.args: list[tuple[int, ...]] = []
        self.params: list = []
        self.vals: list[np.ndarray] = []
        self.shapes: list[tuple[int, ...]] = []
        self.leaves: dict[str, int] = {}
        self.output_index: int | None = None
        self.check_finite = check_finite
        self._const_cache: dict = {}

    def __len__(self) -> int:
        return len(self.ops)

    # -- node construction --------------------------------------------------

    def _push(self, op: int, args: tuple[int, ...], param, value: np.ndarray) -> Ref:
        idx = len(self.ops)
        if self.check_finite and not np.all(np.isfinite(value)):
            raise GraphError(f"numeric overflow at node {idx} ({_OP_NAMES[op]})")
        self.ops.append(op)
        self.args.append(args)
        self.params.append(param)
        self.vals.append(value)
        self.shapes.append(value.shape)
        return Ref(self, idx, value.shape)

    def leaf(self, name: str, value) -> Ref:
        if name in self.leaves:
            raise GraphError(f"duplicate leaf name {name!r}")
        ref = self._push(OP_LEAF, (), name, _as_array(value))
        self.leaves[name] = ref.idx
        return ref

    def const(self, value) -> Ref:
        arr = _as_array(value)
        if arr.ndim == 0:  # scalars recur constantly; share them
            key = float(arr)
            hit = self._const_cache.get(key)
            if hit is not None:
                return hit
            ref = self._push(OP_CONST, (), None, arr)
            self._const_cache[key] = ref
            return ref
        return self._push(OP_CONST, (), None, arr)

    def _apply(self, op: int, refs: tuple[Ref, ...], param=None) -> Ref:
        for r in refs:
            if r.tape is not self:
                raise GraphError("operands recorded on different tapes")
        args = tuple(r.idx for r in refs)
        with np.errstate(all="ignore"):
            value = _FWD[op](self.vals, args, param)
        return self._push(op, args, param, np.asarray(value))

    # -- primitives ----------------------------------------------------------

    def add(self, a: Ref, b: Ref) -> Ref:
        return self._apply(OP_ADD, (a, b))

    def sub(self, a: Ref, b: Ref) -> Ref:
        return self._apply(OP_SUB, (a, b))

    def mul(self, a: Ref, b: Ref) -> Ref:
        return self._apply(OP_MUL, (a, b))

    def div(self, a: Ref, b: Ref) -> Ref:
        return self._apply(OP_DIV, (a, b))

    def matmul(self, a: Ref, b: Ref) -> Ref:
        if a.shape[-1] != b.shape[0]:
            raise GraphError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        return self._apply(OP_MATMUL, (a, b))

    def concat(self, parts: list[Ref]) -> Ref:
        if not parts:
            raise GraphError("concat of no tensors")
        return self._apply(OP_CONCAT, tuple(parts))

    def slice(self, x: Ref, start: int, stop: int) -> Ref:
        if not (0 <= start <= stop <= x.shape[0]):
            raise GraphError(f"slice [{start}:{stop}] out of range for {x.shape}")
        return self._apply(OP_SLICE, (x,), (start, stop))

    def reshape(self, x: Ref, shape: tuple[int, ...]) -> Ref:
        if int(np.prod(shape)) != int(np.prod(x.shape)):
            raise GraphError(f"cannot reshape {x.shape} to {shape}")
        return self._apply(OP_RESHAPE, (x,), tuple(shape))

    def sum(self, x: Ref) -> Ref:
        return self._apply(OP_SUM, (x,))

    def sigmoid(self, x: Ref) -> Ref:
        return self._apply(OP_SIGMOID, (x,))

    def tanh(self, x: Ref) -> Ref:
        return self._apply(OP_TANH, (x,))

    def sin(self, x: Ref) -> Ref:
        return self._apply(OP_SIN, (x,))

    def cos(self, x: Ref) -> Ref:
        return self._apply(OP_COS, (x,))

    def sqrt(self, x: Ref) -> Ref:
        return self._apply(OP_SQRT, (x,))

    def square(self, x: Ref) -> Ref:
        return self._apply(OP_SQUARE, (x,))

    def abs(self, x: Ref) -> Ref:
        return self._apply(OP_ABS, (x,))

    def norm(self, x: Ref) -> Ref:
        """Euclidean norm, regularized: sqrt(sum(x*x) + 1e-12)."""
        return self._apply(OP_NORM, (x,))

    def min_reduce(self, x: Ref) -> Ref:
        return self._apply(OP_MINR, (x,))

    def max_reduce(self, x: Ref) -> Ref:
        return self._apply(OP_MAXR, (x,))

    def logsumexp(self, x: Ref, temperature: float) -> Ref:
        """Smooth maximum: temperature * log(sum(exp(x / temperature)))."""
        if temperature <= 0:
            raise GraphError("logsumexp temperature must be positive")
        return self._apply(OP_LSE, (x,), float(temperature))

    def clamp(self, x: Ref, lo: float, hi: float) -> Ref:
        return self._apply(OP_CLAMP, (x,), (float(lo), float(hi)))

    def grid_interp(self, point: Ref, values: np.ndarray, origin, resolution: float) -> Ref:
        """Bilinear lookup of a dense 2-D grid at a planar point.

        The grid itself is a constant; only the query point is differentiated.
        Queries outside the node hull are clamped (zero gradient in the
        clamped axis).
        """
        if point.shape != (2,):
            raise GraphError("grid_interp expects a 2-vector point")
        param = (
            np.ascontiguousarray(values, dtype=np.float64),
            _as_array(origin),
            float(resolution),
        )
        return self._apply(OP_INTERP2, (point,), param)

    # -- convenience composites (no new primitives) ---------------------------

    def dot(self, a: Ref, b: Ref) -> Ref:
        return self.sum(self.mul(a, b))

    def sum_squares(self, x: Ref) -> Ref:
        return self.sum(self.square(x))

    def smooth_min(self, x: Ref, temperature: float) -> Ref:
        """Lower-bounding soft minimum: -logsumexp(-x, temperature)."""
        neg = self.mul(x, self.const(-1.0))
        return self.mul(self.logsumexp(neg, temperature), self.const(-1.0))

    # -- execution -----------------------------------------------------------

    def set_output(self, ref: Ref) -> None:
        if ref.tape is not self:
            raise GraphError("output belongs to a different tape")
        self.output_index = ref.idx

    @property
    def output_value(self) -> np.ndarray:
        if self.output_index is None:
            raise GraphError("tape has no recorded output")
        return self.vals[self.output_index]

    def forward(self, leaf_values: dict[str, np.ndarray] | None = None) -> Evaluation:
        """Replay the tape; leaves default to their recorded values."""
        overrides = {}
        if leaf_values:
            for name, v in leaf_values.items():
                idx = self.leaves.get(name)
                if idx is None:
                    raise GraphError(f"unknown leaf {name!r}")
                arr = _as_array(v)
                if arr.shape != self.shapes[idx]:
                    raise GraphError(
                        f"leaf {name!r} expects shape {self.shapes[idx]}, got {arr.shape}"
                    )
                overrides[idx] = arr
        n = len(self.ops)
        vals: list = [None] * n
        ops, args, params, rec = self.ops, self.args, self.params, self.vals
        fwd = _FWD
        with np.errstate(all="ignore"):
            for i in range(n):
                op = ops[i]
                if op <= OP_CONST:
                    v = overrides.get(i, rec[i]) if op == OP_LEAF else rec[i]
                else:
                    v = np.asarray(fwd[op](vals, args[i], params[i]))
                vals[i] = v
        return Evaluation(self, vals)


def record(fn, leaves: dict[str, np.ndarray], check_finite: bool = True):
    """Record ``fn`` applied to named leaf values.

    ``fn(tape, refs)`` receives the fresh tape and a dict of leaf refs and
    returns the output ref.  Returns the tape and its output tensor.
    """
    tape = Tape(check_finite=check_finite)
    refs = {name: tape.leaf(name, value) for name, value in leaves.items()}
    out = fn(tape, refs)
    tape.set_output(out)
    return tape, Tensor(tape.output_value.copy())


def backward(
    tape: Tape,
    seed,
    at: Evaluation | None = None,
    output: Ref | None = None,
    wrt: list[str] | None = None,
) -> dict[str, Tensor]:
    """Propagate ``seed`` from the output back to every leaf.

    Returns the gradient of ``seed . output`` for each named leaf; leaves with
    no path to the output get zero tensors.  ``at`` selects a replayed
    evaluation (defaults to the values captured while recording).  ``wrt``
    restricts the result to the named leaves; subgraphs feeding none of them
    are skipped entirely.
    """
    out_idx = output.idx if output is not None else tape.output_index
    if out_idx is None:
        raise GraphError("tape has no recorded output")
    vals = at.values if at is not None else tape.vals
    seed = _as_array(seed)
    if seed.shape != vals[out_idx].shape:
        raise GraphError(
            f"seed shape {seed.shape} does not match output shape {vals[out_idx].shape}"
        )
    ops, args, params = tape.ops, tape.args, tape.params
    if wrt is None:
        wanted = tape.leaves
    else:
        wanted = {name: tape.leaves[name] for name in wrt}
    # a node needs a gradient iff it transitively depends on a wanted leaf
    needed = bytearray(out_idx + 1)
    for idx in wanted.values():
        if idx <= out_idx:
            needed[idx] = 1
    for i in range(out_idx + 1):
        if ops[i] > OP_CONST and not needed[i]:
            for j in args[i]:
                if needed[j]:
                    needed[i] = 1
                    break
    grads: list = [None] * (out_idx + 1)
    grads[out_idx] = seed
    bwd = _BWD
    with np.errstate(all="ignore"):
        for i in range(out_idx, -1, -1):
            g = grads[i]
            if g is None or ops[i] <= OP_CONST or not needed[i]:
                continue
            a = args[i]
            if ops[i] == OP_MATMUL:  # skip costly outer products nobody wants
                contribs = _b_matmul_pruned(g, vals, a, vals[i], needed)
            else:
                contribs = bwd[ops[i]](g, vals, a, params[i], vals[i])
            for j, c in zip(a, contribs):
                if c is None or not needed[j]:
                    continue
                prev = grads[j]
                grads[j] = c if prev is None else prev + c
    result = {}
    for name, idx in wanted.items():
        g = grads[idx] if idx <= out_idx else None
        if g is None:
            g = np.zeros(tape.shapes[idx])
        result[name] = Tensor(np.asarray(g, dtype=np.float64))
    return result


def _b_matmul_pruned(g, vals, a, out, needed):
    x, y = vals[a[0]], vals[a[1]]
    gx = gy = None
    if needed[a[0]]:
        if x.ndim == 2 and y.ndim == 2:
            gx = g @ y.T
        elif x.ndim == 2 and y.ndim == 1:
            gx = np.outer(g, y)
        elif x.ndim == 1 and y.ndim == 2:
            gx = y @ g
        else:
            gx = g * y
    if needed[a[1]]:
        if y.ndim == 2 and x.ndim == 2:
            gy = x.T @ g
        elif y.ndim == 1 and x.ndim == 2:
            gy = x.T @ g
        elif y.ndim == 2 and x.ndim == 1:
            gy = np.outer(x, g)
        else:
            gy = g * x
    return (gx, gy)


def gradient_check(
    fn,
    point: dict[str, np.ndarray],
    step: float = 1e-5,
    coords_per_leaf: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Compare recorded gradients of a scalar function with central differences.

    Returns max over checked coordinates of
    ``|analytic - central| / max(1, |analytic|)``; non-finite differences
    report as +inf.  ``coords_per_leaf`` subsamples coordinates of large
    leaves to bound runtime (all coordinates when None).
    """
    if not (0.0 < step <= 1e-3):
        raise ValueError("step must be in (0, 1e-3]")
    point = {k: _as_array(v).copy() for k, v in point.items()}
    tape, out = record(fn, point)
    if out.data.shape != ():
        raise GraphError("gradient_check requires a scalar-valued function")
    grads = backward(tape, np.asarray(1.0))
    worst = 0.0
    for name, x in point.items():
        flat = x.reshape(-1)
        n = flat.shape[0]
        if coords_per_leaf is not None and coords_per_leaf < n:
            gen = rng if rng is not None else np.random.default_rng(0)
            coords = gen.choice(n, size=coords_per_leaf, replace=False)
        else:
            coords = range(n)
        analytic = grads[name].values
        for i in coords:
            saved = flat[i]
            flat[i] = saved + step
            hi = float(tape.forward({name: x}).output)
            flat[i] = saved - step
            lo = float(tape.forward({name: x}).output)
            flat[i] = saved
            diff = (hi - lo) / (2.0 * step)
            if not np.isfinite(diff):
                return float("inf")
            err = abs(analytic[i] - diff) / max(1.0, abs(analytic[i]))
            if err > worst:
                worst = err
    return worst
