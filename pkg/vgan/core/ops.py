"""
Primitive Ops

Elementwise, reduction and view primitives. Every backward rule is expressed
with these same primitives so gradients stay differentiable.
"""

from typing import Sequence, Tuple, Union

import numpy as np

from .errors import ShapeError
from .tensor import Function, Tensor


Axes = Union[int, Sequence[int], None]


def _require_same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _normalize_axes(axes: Axes, ndim: int) -> Tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    normalized = []
    for axis in axes:
        if not -ndim <= axis < ndim:
            raise ShapeError(f"axis {axis} out of range for {ndim}-d tensor")
        normalized.append(axis % ndim)
    if len(set(normalized)) != len(normalized):
        raise ShapeError(f"repeated axis in {tuple(axes)}")
    return tuple(sorted(normalized))


def _kept_shape(shape: Tuple[int, ...], axes: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(1 if axis in axes else extent for axis, extent in enumerate(shape))


# ---------------------------------------------------------------------------
# Elementwise
# ---------------------------------------------------------------------------

class Add(Function):
    name = "add"

    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    name = "sub"

    def forward(self, a, b):
        return a - b

    def backward(self, grad):
        return grad, scale(grad, -1.0)


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        return a * b

    def backward(self, grad):
        a, b = self.inputs
        grad_a = mul(grad, b) if self.needs_input_grad[0] else None
        grad_b = mul(grad, a) if self.needs_input_grad[1] else None
        return grad_a, grad_b


class Scale(Function):
    name = "scale"

    def forward(self, a):
        return a * self.params["factor"]

    def backward(self, grad):
        return (scale(grad, self.params["factor"]),)


class AddScalar(Function):
    name = "add_scalar"

    def forward(self, a):
        return a + self.params["value"]

    def backward(self, grad):
        return (grad,)


class LeakySlopeApply(Function):
    """a where ref > 0, slope * a elsewhere; ref only selects the branch"""

    name = "leaky_slope_apply"

    def forward(self, a, ref):
        return np.where(ref > 0, a, a * self.params["slope"])

    def backward(self, grad):
        _, ref = self.inputs
        return leaky_slope_apply(grad, ref, self.params["slope"]), None


class Power(Function):
    name = "power"

    def forward(self, a):
        return np.power(a, self.params["exponent"])

    def backward(self, grad):
        (a,) = self.inputs
        exponent = self.params["exponent"]
        return (mul(grad, scale(power(a, exponent - 1.0), exponent)),)


class Sqrt(Function):
    """Square root whose gradient at exactly 0 is taken as 0"""

    name = "sqrt"

    def forward(self, a):
        return np.sqrt(a)

    def backward(self, grad):
        return (mul(grad, scale(safe_reciprocal(self.output), 0.5)),)


class SafeReciprocal(Function):
    name = "safe_reciprocal"

    def forward(self, a):
        out = np.zeros_like(a)
        np.divide(1.0, a, out=out, where=a != 0)
        return out

    def backward(self, grad):
        r = self.output
        return (mul(grad, scale(mul(r, r), -1.0)),)


# ---------------------------------------------------------------------------
# Reductions and shape ops
# ---------------------------------------------------------------------------

class Sum(Function):
    name = "sum"

    def forward(self, a):
        return np.asarray(a.sum(axis=self.params["axes"], keepdims=self.params["keepdims"]))

    def backward(self, grad):
        (a,) = self.inputs
        kept = reshape(grad, _kept_shape(a.shape, self.params["axes"]))
        return (expand(kept, a.shape),)


class Mean(Function):
    name = "mean"

    def forward(self, a):
        return np.asarray(a.mean(axis=self.params["axes"], keepdims=self.params["keepdims"]))

    def backward(self, grad):
        (a,) = self.inputs
        axes = self.params["axes"]
        count = int(np.prod([a.shape[axis] for axis in axes]))
        kept = reshape(grad, _kept_shape(a.shape, axes))
        return (scale(expand(kept, a.shape), 1.0 / count),)


class Reshape(Function):
    """View when the source is contiguous"""

    name = "reshape"

    def forward(self, a):
        return a.reshape(self.params["shape"])

    def backward(self, grad):
        (a,) = self.inputs
        return (reshape(grad, a.shape),)


class Expand(Function):
    """Repeat size-1 axes up to the target shape (explicit, same rank)"""

    name = "expand"

    def forward(self, a):
        return np.ascontiguousarray(np.broadcast_to(a, self.params["shape"]))

    def backward(self, grad):
        (a,) = self.inputs
        axes = tuple(axis for axis, (src, dst) in enumerate(zip(a.shape, self.params["shape"]))
                     if src != dst)
        if not axes:
            return (grad,)
        return (reshape(sum(grad, axes, keepdims=True), a.shape),)


class Concat(Function):
    name = "concat"

    def forward(self, *arrays):
        return np.concatenate(arrays, axis=self.params["axis"])

    def backward(self, grad):
        axis = self.params["axis"]
        grads = []
        offset = 0
        for tensor, needed in zip(self.inputs, self.needs_input_grad):
            length = tensor.shape[axis]
            grads.append(narrow(grad, axis, offset, length) if needed else None)
            offset += length
        return tuple(grads)


class Narrow(Function):
    """View of [start, start + length) along one axis"""

    name = "narrow"

    def forward(self, a):
        index = [slice(None)] * a.ndim
        index[self.params["axis"]] = slice(self.params["start"], self.params["start"] + self.params["length"])
        return a[tuple(index)]

    def backward(self, grad):
        (a,) = self.inputs
        axis, start, length = self.params["axis"], self.params["start"], self.params["length"]
        pieces = []
        if start > 0:
            pieces.append(_zeros_like_along(grad, axis, start))
        pieces.append(grad)
        tail = a.shape[axis] - start - length
        if tail > 0:
            pieces.append(_zeros_like_along(grad, axis, tail))
        return (concat(pieces, axis) if len(pieces) > 1 else grad,)


class Transpose(Function):
    """2-d transpose view"""

    name = "transpose"

    def forward(self, a):
        return a.T

    def backward(self, grad):
        return (transpose(grad),)


class MatMul(Function):
    name = "matmul"

    def forward(self, a, b):
        return a @ b

    def backward(self, grad):
        a, b = self.inputs
        grad_a = matmul(grad, transpose(b)) if self.needs_input_grad[0] else None
        grad_b = matmul(transpose(a), grad) if self.needs_input_grad[1] else None
        return grad_a, grad_b


def _zeros_like_along(reference: Tensor, axis: int, length: int) -> Tensor:
    shape = list(reference.shape)
    shape[axis] = length
    return Tensor(np.zeros(shape, dtype=reference.dtype))


# ---------------------------------------------------------------------------
# Public functions
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("add", a, b)
    return Add.apply(a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("sub", a, b)
    return Sub.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape("mul", a, b)
    return Mul.apply(a, b)


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=float(factor))


def add_scalar(a: Tensor, value: float) -> Tensor:
    return AddScalar.apply(a, value=float(value))


def leaky_slope_apply(a: Tensor, ref: Tensor, slope: float = 0.2) -> Tensor:
    _require_same_shape("leaky_slope_apply", a, ref)
    return LeakySlopeApply.apply(a, ref, slope=float(slope))


def power(a: Tensor, exponent: float) -> Tensor:
    return Power.apply(a, exponent=float(exponent))


def sqrt(a: Tensor) -> Tensor:
    return Sqrt.apply(a)


def safe_reciprocal(a: Tensor) -> Tensor:
    return SafeReciprocal.apply(a)


def sum(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axes, a.ndim)
    return Sum.apply(a, axes=axes, keepdims=keepdims)


def mean(a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axes, a.ndim)
    return Mean.apply(a, axes=axes, keepdims=keepdims)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(extent) for extent in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    return Reshape.apply(a, shape=shape)


def expand(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(extent) for extent in shape)
    if len(shape) != a.ndim or any(src not in (1, dst) for src, dst in zip(a.shape, shape)):
        raise ShapeError(f"expand: cannot expand {a.shape} to {shape}")
    return Expand.apply(a, shape=shape)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = list(tensors)
    reference = tensors[0].shape
    for tensor in tensors[1:]:
        if tensor.ndim != len(reference) or any(
                src != dst for i, (src, dst) in enumerate(zip(reference, tensor.shape)) if i != axis):
            raise ShapeError(f"concat: incompatible shapes {reference} and {tensor.shape} on axis {axis}")
    return Concat.apply(*tensors, axis=axis)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    if start < 0 or length <= 0 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow: [{start}, {start + length}) outside axis {axis} of {a.shape}")
    return Narrow.apply(a, axis=axis, start=start, length=length)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a 2-d tensor, got {a.shape}")
    return Transpose.apply(a)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    return MatMul.apply(a, b)


_ELEMENTWISE = {
    "add": add,
    "sub": sub,
    "mul": mul,
}


def elementwise(op: str, a: Tensor, b: Union[Tensor, float], slope: float = 0.2) -> Tensor:
    """Dispatch add | sub | mul | scale | leaky_slope_apply

    A scalar b is accepted by add, sub, mul and scale.
    """
    if op == "leaky_slope_apply":
        return leaky_slope_apply(a, b, slope)
    if op == "scale":
        return scale(a, float(b))
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op '{op}'")
    if isinstance(b, Tensor):
        return _ELEMENTWISE[op](a, b)
    if op == "add":
        return add_scalar(a, float(b))
    if op == "sub":
        return add_scalar(a, -float(b))
    return scale(a, float(b))


def reduce(op: str, a: Tensor, axes: Axes = None, keepdims: bool = False) -> Tensor:
    """Dispatch mean | sum over the given axes"""
    if op == "mean":
        return mean(a, axes, keepdims)
    if op == "sum":
        return sum(a, axes, keepdims)
    raise ValueError(f"unknown reduction '{op}'")


def constant(data, dtype=np.float32) -> Tensor:
    """Tensor outside any graph"""
    return Tensor(np.asarray(data, dtype=dtype))
