"""
3D Convolution

Same-padded, stride-1 3D convolution as differentiable primitives. The input
gradient is itself a convolution with the flipped, channel-transposed kernel
and the weight gradient is a separate primitive, so the three functions are
closed under differentiation.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple


from vgan.core import ops
from vgan.core.errors import ShapeError
from vgan.core.tensor import Function, Tensor
from . import kernels


class Conv3d(Function):
    name = "conv3d"

    def forward(self, x, weight):
        return kernels.conv3d_kernel(x, weight)

    def backward(self, grad):
        x, weight = self.inputs
        grad_x = conv3d_raw(grad, flip_transpose_kernel(weight)) if self.needs_input_grad[0] else None
        grad_w = conv3d_weight_grad(x, grad, weight.shape[2]) if self.needs_input_grad[1] else None
        return grad_x, grad_w


class Conv3dWeightGrad(Function):
    name = "conv3d_weight_grad"

    def forward(self, x, grad_out):
        return kernels.conv3d_weight_grad_kernel(x, grad_out, self.params["kernel"])

    def backward(self, grad):
        x, grad_out = self.inputs
        grad_x = conv3d_raw(grad_out, flip_transpose_kernel(grad)) if self.needs_input_grad[0] else None
        grad_g = conv3d_raw(x, grad) if self.needs_input_grad[1] else None
        return grad_x, grad_g


class FlipTransposeKernel(Function):
    name = "flip_transpose_kernel"

    def forward(self, weight):
        return kernels.flip_transpose_kernel(weight)

    def backward(self, grad):
        return (flip_transpose_kernel(grad),)


def _check_conv_shapes(x: Tensor, weight: Tensor):
    if x.ndim != 5:
        raise ShapeError(f"conv3d expects input [B,C,D,H,W], got {x.shape}")
    if weight.ndim != 5 or not (weight.shape[2] == weight.shape[3] == weight.shape[4]):
        raise ShapeError(f"conv3d expects a cubic kernel [O,C,k,k,k], got {weight.shape}")
    if weight.shape[2] % 2 == 0:
        raise ShapeError(f"conv3d kernel size must be odd, got {weight.shape[2]}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv3d channel mismatch: input {x.shape} vs weight {weight.shape}")


def conv3d_raw(x: Tensor, weight: Tensor) -> Tensor:
    """Convolution with the weight as given (no bias, no runtime scaling)"""
    _check_conv_shapes(x, weight)
    return Conv3d.apply(x, weight)


def conv3d_weight_grad(x: Tensor, grad_out: Tensor, kernel: int) -> Tensor:
    if grad_out.ndim != 5 or grad_out.shape[0] != x.shape[0] or grad_out.shape[2:] != x.shape[2:]:
        raise ShapeError(f"conv3d weight grad: grad {grad_out.shape} does not match input {x.shape}")
    return Conv3dWeightGrad.apply(x, grad_out, kernel=int(kernel))


def flip_transpose_kernel(weight: Tensor) -> Tensor:
    return FlipTransposeKernel.apply(weight)


def equalized_scale(fan_in: int) -> float:
    """Runtime He scale sqrt(2 / fan_in)"""
    return math.sqrt(2.0 / fan_in)


def add_channel_bias(y: Tensor, bias: Tensor) -> Tensor:
    """Add a per-channel bias along axis 1"""
    if bias.ndim != 1 or bias.shape[0] != y.shape[1]:
        raise ShapeError(f"bias {bias.shape} does not match {y.shape[1]} channels")
    shape = [1] * y.ndim
    shape[1] = bias.shape[0]
    return ops.add(y, ops.expand(ops.reshape(bias, shape), y.shape))


@dataclass
class Conv3dParams:
    """Weight [out_ch, in_ch, k, k, k] and bias [out_ch]; same padding, stride 1"""

    weight: Tensor
    bias: Optional[Tensor] = None

    def __post_init__(self):
        shape = self.weight.shape
        if len(shape) != 5 or not (shape[2] == shape[3] == shape[4]) or shape[2] % 2 == 0:
            raise ShapeError(f"conv weight must be [O,C,k,k,k] with odd k, got {shape}")
        if self.bias is not None and self.bias.shape != (shape[0],):
            raise ShapeError(f"conv bias must be [{shape[0]}], got {self.bias.shape}")

    @property
    def kernel(self) -> int:
        return self.weight.shape[2]

    @property
    def padding(self) -> int:
        return (self.kernel - 1) // 2

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]

    @property
    def fan_in(self) -> int:
        return self.in_channels * self.kernel ** 3

    def effective_weight(self, use_equalized: bool) -> Tensor:
        if not use_equalized:
            return self.weight
        return ops.scale(self.weight, equalized_scale(self.fan_in))


def conv3d_forward(input: Tensor, params: Conv3dParams, use_equalized: bool = True) -> Tensor:
    """[B,C,D,H,W] -> [B,O,D,H,W]; equalized weights are c * weight with c = sqrt(2 / fan_in)"""
    output = conv3d_raw(input, params.effective_weight(use_equalized))
    if params.bias is not None:
        output = add_channel_bias(output, params.bias)
    return output


def conv3d_backward(grad_out: Tensor, saved_input: Tensor,
                    params: Conv3dParams) -> Tuple[Tensor, Tensor, Optional[Tensor]]:
    """(grad_input, grad_weight, grad_bias) of an unscaled conv3d_forward call"""
    _check_conv_shapes(saved_input, params.weight)
    expected = (saved_input.shape[0], params.out_channels) + saved_input.shape[2:]
    if grad_out.shape != expected:
        raise ShapeError(f"conv3d_backward: grad {grad_out.shape} does not match output {expected}")
    grad_input = conv3d_raw(grad_out, flip_transpose_kernel(params.weight))
    grad_weight = conv3d_weight_grad(saved_input, grad_out, params.kernel)
    grad_bias = ops.sum(grad_out, axes=(0, 2, 3, 4)) if params.bias is not None else None
    return grad_input, grad_weight, grad_bias
