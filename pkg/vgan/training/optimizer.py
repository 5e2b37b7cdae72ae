"""
Adam Optimizer

Bias-corrected Adam over named parameters. Moments are created lazily per
name, so a parameter that joins at a later stage starts from zero moments.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from vgan.core.errors import NonFiniteError, ShapeError
from vgan.core.tensor import Tensor


@dataclass
class OptimizerState:
    """First/second moments per parameter name plus the step count"""

    beta1: float = 0.0
    beta2: float = 0.99
    epsilon: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def reset(self):
        """Drop all moments and restart the step count"""
        self.t = 0
        self.m.clear()
        self.v.clear()

    def scalars(self) -> Dict[str, float]:
        return {"beta1": self.beta1, "beta2": self.beta2, "epsilon": self.epsilon, "t": self.t}


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray],
              state: OptimizerState, lr: float):
    """One Adam update of every parameter in params, in place"""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for name, tensor in params.items():
        if name not in grads:
            raise KeyError(f"no gradient for parameter '{name}'")
        if grads[name].shape != tensor.shape:
            raise ShapeError(f"gradient for '{name}' has shape {grads[name].shape}, "
                             f"parameter has {tensor.shape}")
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteError(f"gradient for '{name}' is not finite")

    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t

    for name, tensor in params.items():
        g = grads[name].astype(tensor.dtype, copy=False)
        if name not in state.m:
            state.m[name] = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)

        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        m_hat = m / correction1
        v_hat = v / correction2
        tensor.data -= (lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(tensor.dtype, copy=False)
