"""
Gradient Check

Compares tape gradients against central finite differences. Both sides are
evaluated on a float64 replay of the input so the numeric reference is stable.
"""

from typing import Callable

import numpy as np

from .errors import NonFiniteError, ShapeError
from .tensor import Tape, Tensor, backward, no_grad


def _scalar_value(result: Tensor) -> float:
    if result.size != 1:
        raise ShapeError(f"grad_check needs a scalar-valued function, got shape {result.shape}")
    return result.item()


def numeric_gradient(f: Callable[[Tensor], Tensor], point: np.ndarray, step: float) -> np.ndarray:
    """Central differences of f at point, one element at a time"""
    base = np.array(point, dtype=np.float64, copy=True)
    numeric = np.empty_like(base)
    with no_grad():
        for index in range(base.size):
            shifted = base.copy()
            shifted.flat[index] = base.flat[index] + step
            upper = _scalar_value(f(Tensor(shifted)))
            shifted.flat[index] = base.flat[index] - step
            lower = _scalar_value(f(Tensor(shifted)))
            numeric.flat[index] = (upper - lower) / (2.0 * step)
    return numeric


def analytic_gradient(f: Callable[[Tensor], Tensor], point: np.ndarray, dtype=np.float64) -> np.ndarray:
    """Tape gradient of f at point"""
    with Tape() as tape:
        x = Tensor(np.array(point, dtype=dtype, copy=True), requires_grad=True)
        result = f(x)
        _scalar_value(result)
        backward(result, tape=tape, inputs=[x])
    return x.grad.astype(np.float64)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """max |a - n| / max(|a|, |n|, floor) over elements"""
    denominator = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denominator))


def grad_check(f: Callable[[Tensor], Tensor], input: Tensor, step: float = 1e-3,
               dtype=np.float64, scale_floor: float = 0.0) -> float:
    """
    Max relative error between the analytic and numeric gradient of f at input.

    The denominator is max(|a|, |n|, 1e-8) per element. A positive scale_floor
    raises that floor to scale_floor times the largest gradient magnitude.
    """
    if scale_floor < 0:
        raise ValueError(f"grad_check scale_floor must be non-negative, got {scale_floor}")
    if step <= 0:
        raise ValueError(f"grad_check step must be positive, got {step}")
    point = np.asarray(input.data, dtype=np.float64)
    if not np.all(np.isfinite(point)):
        raise NonFiniteError("grad_check input contains non-finite values")

    analytic = analytic_gradient(f, point, dtype=dtype)
    numeric = numeric_gradient(f, point, step)

    if not np.all(np.isfinite(analytic)):
        raise NonFiniteError("grad_check analytic gradient is not finite")
    if not np.all(np.isfinite(numeric)):
        raise NonFiniteError("grad_check numeric gradient is not finite")
    floor = 1e-8
    if scale_floor > 0:
        scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))))
        floor = max(floor, scale_floor * scale)
    return relative_error(analytic, numeric, floor=floor)
