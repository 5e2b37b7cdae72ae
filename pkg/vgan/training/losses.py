"""
WGAN-GP Losses

Critic and generator losses of the Wasserstein formulation with a gradient
penalty on interpolates between real and generated volumes, plus a small
drift term that keeps real scores near zero.
"""

from typing import Callable, Optional, Tuple, Union

import numpy as np

from vgan.core import ops
from vgan.core.errors import NonFiniteError, ShapeError
from vgan.core.tensor import Tape, Tensor, current_tape, grad
from vgan.networks.discriminator import discriminator_forward
from vgan.networks.stage import NetworkWeights


GP_LAMBDA = 10.0
DRIFT_EPSILON = 0.001


def _check_finite(term: str, tensor: Tensor):
    if not np.all(np.isfinite(tensor.data)):
        raise NonFiniteError(f"{term} diverged (non-finite value)")


def generator_loss(d_fake: Tensor) -> Tensor:
    """-mean(d_fake)"""
    _check_finite("d_fake", d_fake)
    return ops.scale(ops.mean(d_fake), -1.0)


def wgan_gp_losses(d_real: Tensor, d_fake: Tensor, gp: Union[Tensor, float],
                   lam: float = GP_LAMBDA, drift: float = DRIFT_EPSILON) -> Tuple[Tensor, Tensor]:
    """(loss_d, loss_g)

    loss_d = mean(d_fake) - mean(d_real) + lam * gp + drift * mean(d_real^2)
    loss_g = -mean(d_fake)
    """
    if not isinstance(gp, Tensor):
        gp = ops.constant(gp)
    _check_finite("d_real", d_real)
    _check_finite("d_fake", d_fake)
    _check_finite("gradient penalty", gp)
    if gp.size != 1:
        raise ShapeError(f"gradient penalty must be a scalar, got shape {gp.shape}")

    wasserstein = ops.sub(ops.mean(d_fake), ops.mean(d_real))
    penalty = ops.scale(ops.reshape(gp, ()), lam)
    drift_term = ops.scale(ops.mean(ops.mul(d_real, d_real)), drift)
    loss_d = ops.add(ops.add(wasserstein, penalty), drift_term)
    _check_finite("drift term", drift_term)
    _check_finite("loss_d", loss_d)
    return loss_d, generator_loss(d_fake)


def interpolate(real: np.ndarray, fake: np.ndarray, u: np.ndarray) -> np.ndarray:
    """fake + u * (real - fake); equals real exactly when real == fake"""
    return fake + u * (real - fake)


def gradient_penalty(weights_d: NetworkWeights, real: Tensor, fake: Tensor, stage: int, alpha: float,
                     rng: np.random.Generator,
                     critic: Optional[Callable[[Tensor], Tensor]] = None,
                     use_equalized: bool = True) -> Tensor:
    """mean over the batch of (||grad_x D(x_hat)||_2 - 1)^2

    One u ~ U(0, 1) per sample. The gradient is taken with create_graph so the
    penalty can itself be differentiated w.r.t. the critic weights. critic
    replaces the discriminator forward when given.
    """
    if real.shape != fake.shape:
        raise ShapeError(f"gradient_penalty: real {real.shape} and fake {fake.shape} differ")
    if critic is None:
        def critic(x: Tensor) -> Tensor:
            return discriminator_forward(weights_d, x, stage, alpha, use_equalized)

    batch = real.shape[0]
    u = rng.random((batch,) + (1,) * (real.ndim - 1), dtype=np.float32)
    x_hat = Tensor(interpolate(real.data, fake.data, u).astype(real.dtype, copy=False),
                   requires_grad=True)

    if current_tape() is None:
        with Tape():
            return _penalty(critic, x_hat)
    return _penalty(critic, x_hat)


def _penalty(critic: Callable[[Tensor], Tensor], x_hat: Tensor) -> Tensor:
    score = critic(x_hat)
    (gradient,) = grad(ops.sum(score), [x_hat], create_graph=True)
    flat = ops.reshape(gradient, (x_hat.shape[0], x_hat.size // x_hat.shape[0]))
    norm = ops.sqrt(ops.sum(ops.mul(flat, flat), axes=1))
    if not np.all(np.isfinite(norm.data)):
        raise NonFiniteError("gradient penalty: critic gradient norm is not finite")
    deviation = ops.add_scalar(norm, -1.0)
    return ops.mean(ops.mul(deviation, deviation))
