"""
Progressive Trainer

One WGAN-GP step alternates a discriminator update and a generator update
(1:1). ProgressiveTrainer drives steps through the schedule, resets the
optimizers when a new stage starts fading in, and checkpoints at every phase
end and every checkpoint_every steps.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from vgan.core.base import Component
from vgan.core.errors import CheckpointError, DataError, NonFiniteError, ShapeError
from vgan.core.tensor import Tape, Tensor, grad, no_grad
from vgan.networks.discriminator import build_discriminator, discriminator_forward
from vgan.networks.generator import build_generator, generator_forward
from vgan.networks.stage import NetworkWeights, StageConfig
from .checkpoint import Checkpoint, CheckpointSink, load_checkpoint
from .data import BatchLoader, VolumePyramid, upcoming_keys
from .history import StepHistory, StepReport
from .losses import DRIFT_EPSILON, GP_LAMBDA, generator_loss, gradient_penalty, wgan_gp_losses
from .optimizer import OptimizerState, adam_step
from .schedule import TrainSchedule


# Sub-seeds derived from the run seed
GENERATOR_STREAM = 1
DISCRIMINATOR_STREAM = 2
TRAINING_STREAM = 3
GENERATION_STREAM = 4


@dataclass
class LossSettings:
    gp_lambda: float = GP_LAMBDA
    drift: float = DRIFT_EPSILON
    use_equalized: bool = True
    update_generator: bool = True


def sample_latents(rng: np.random.Generator, batch: int, latent_dim: int) -> Tensor:
    """[batch, latent_dim] i.i.d. standard normal"""
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    return Tensor(rng.standard_normal((batch, latent_dim), dtype=np.float32))


def _update(weights: NetworkWeights, names: List[str], gradients: List[Tensor],
            state: OptimizerState, lr: float):
    adam_step({name: weights[name] for name in names},
              {name: gradient.data for name, gradient in zip(names, gradients)}, state, lr)


def train_step(batch_real: np.ndarray, weights_g: NetworkWeights, weights_d: NetworkWeights,
               opt_g: OptimizerState, opt_d: OptimizerState, schedule: TrainSchedule,
               rng: np.random.Generator, settings: Optional[LossSettings] = None,
               step: int = 0) -> StepReport:
    """One discriminator update, one generator update, then advance the schedule

    Only the parameters active at the current (stage, phase) take part. Random
    draws happen in a fixed order: z for the critic step, the interpolation
    weights u, then z for the generator step.
    """
    settings = settings or LossSettings()
    if schedule.finished:
        raise RuntimeError("schedule already finished")
    stage, fading, alpha = schedule.stage, schedule.fading, schedule.alpha
    resolution = schedule.resolution
    batch = batch_real.shape[0] if batch_real.ndim == 5 else 0
    if batch_real.ndim != 5 or batch_real.shape[1:] != (1, resolution, resolution, resolution):
        raise ShapeError(f"stage {stage} trains on [B,1,{resolution},{resolution},{resolution}] batches, "
                         f"got {batch_real.shape}")
    lr = schedule.learning_rate
    latent = weights_g["g.base.dense.weight"].shape[1]
    equalized = settings.use_equalized

    # Critic step: generator frozen and not recorded
    d_names = weights_d.active_names(stage, fading)
    weights_g.set_trainable([])
    weights_d.set_trainable(d_names)
    real = Tensor(np.asarray(batch_real, dtype=np.float32))
    z = sample_latents(rng, batch, latent)
    with no_grad():
        fake = generator_forward(weights_g, z, stage, alpha, equalized)

    with Tape():
        d_real = discriminator_forward(weights_d, real, stage, alpha, equalized)
        d_fake = discriminator_forward(weights_d, fake, stage, alpha, equalized)
        gp = gradient_penalty(weights_d, real, fake, stage, alpha, rng, use_equalized=equalized)
        loss_d, loss_g = wgan_gp_losses(d_real, d_fake, gp, settings.gp_lambda, settings.drift)
        d_grads = grad(loss_d, [weights_d[name] for name in d_names])
    _update(weights_d, d_names, d_grads, opt_d, lr)

    # Generator step: critic frozen
    weights_d.set_trainable([])
    if settings.update_generator:
        g_names = weights_g.active_names(stage, fading)
        weights_g.set_trainable(g_names)
        z = sample_latents(rng, batch, latent)
        with Tape():
            generated = generator_forward(weights_g, z, stage, alpha, equalized)
            loss_g = generator_loss(discriminator_forward(weights_d, generated, stage, alpha, equalized))
            g_grads = grad(loss_g, [weights_g[name] for name in g_names])
        _update(weights_g, g_names, g_grads, opt_g, lr)
        weights_g.set_trainable([])

    transition = schedule.advance(batch)
    return StepReport(
        step=step, stage=stage, alpha=alpha,
        loss_d=float(loss_d.item()), loss_g=float(loss_g.item()),
        d_real_mean=float(np.mean(d_real.data)), d_fake_mean=float(np.mean(d_fake.data)),
        gradient_penalty=float(gp.item()), transition=transition,
    )


def model_signature(run) -> Dict[str, Any]:
    """Checkpoint fields a resumed run must agree with"""
    return {"seed": run.seed, "target_stage": run.target_stage, "n_filters": run.n_filters,
            "latent_dim": run.latent_dim, "use_equalized": run.use_equalized}


class ProgressiveTrainer(Component):
    """Runs the progressive schedule over a volume pyramid"""

    def __init__(self, run, pyramid: VolumePyramid, sink: CheckpointSink,
                 log_path: Optional[str] = None, resume: Optional[str] = None):
        super().__init__(run.to_dict())
        self.run = run
        self.pyramid = pyramid
        self.sink = sink
        self.settings = LossSettings(gp_lambda=run.gp_lambda, drift=run.drift,
                                     use_equalized=run.use_equalized,
                                     update_generator=run.update_generator)
        self.history = StepHistory(self.config, log_path)

        if pyramid.target_stage < run.target_stage:
            raise DataError(f"dataset pyramid reaches stage {pyramid.target_stage} "
                            f"({4 * 2 ** pyramid.target_stage}^3), below target stage {run.target_stage}")

        if resume:
            self._restore(load_checkpoint(resume), resume)
        else:
            self._fresh()
        self.loader = BatchLoader(pyramid, run.seed, run.prefetch)
        self._last_saved_step: Optional[int] = self.step if resume else None

    def _fresh(self):
        run = self.run
        cfg = StageConfig(run.target_stage, run.n_filters, run.latent_dim)
        self.weights_g = build_generator(cfg, np.random.default_rng([run.seed, GENERATOR_STREAM]))
        self.weights_d = build_discriminator(cfg, np.random.default_rng([run.seed, DISCRIMINATOR_STREAM]))
        self.opt_g = OptimizerState(beta1=run.beta1, beta2=run.beta2, epsilon=run.epsilon)
        self.opt_d = OptimizerState(beta1=run.beta1, beta2=run.beta2, epsilon=run.epsilon)
        self.schedule = run.schedule()
        self.rng = np.random.default_rng([run.seed, TRAINING_STREAM])
        self.step = 0
        self.position = 0
        self._log(f"Fresh run: G {self.weights_g.parameter_count():,} / D "
                  f"{self.weights_d.parameter_count():,} parameters, {self.schedule.planned_steps():,} planned steps")

    def _restore(self, ckpt: Checkpoint, path: str):
        expected = model_signature(self.run)
        mismatched = {key: (ckpt.model.get(key), value) for key, value in expected.items()
                      if ckpt.model.get(key) != value}
        if mismatched:
            details = ", ".join(f"{key}: checkpoint {old!r} vs config {new!r}"
                                for key, (old, new) in mismatched.items())
            raise CheckpointError(f"{path}: checkpoint does not match the configuration ({details})")
        self.weights_g, self.weights_d = ckpt.weights_g, ckpt.weights_d
        self.opt_g, self.opt_d = ckpt.opt_g, ckpt.opt_d
        self.schedule = ckpt.schedule
        self.rng = np.random.default_rng()
        self.rng.bit_generator.state = ckpt.rng_state
        self.step = ckpt.step
        self.position = ckpt.data_position
        self.history.truncate_after(self.step)
        self._log(f"Resumed from {path} at step {self.step}: {self.schedule.describe()}")

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            weights_g=self.weights_g, weights_d=self.weights_d,
            opt_g=self.opt_g, opt_d=self.opt_d,
            schedule=self.schedule, rng_state=self.rng.bit_generator.state,
            step=self.step, data_position=self.position,
            model=model_signature(self.run),
        )

    def _save(self, reason: str) -> str:
        self._last_saved_step = self.step
        return self.sink.save(self.checkpoint(), reason)

    def step_once(self) -> Optional[StepReport]:
        """Run one step; None once the schedule is finished"""
        if self.schedule.finished:
            return None
        stage, batch = self.schedule.stage, self.schedule.batch_size
        upcoming = upcoming_keys(self.schedule.to_dict(), self.position, self.run.prefetch + 1)[1:]
        real = self.loader.get(stage, self.position, batch, upcoming)

        try:
            report = train_step(real, self.weights_g, self.weights_d, self.opt_g, self.opt_d,
                                self.schedule, self.rng, self.settings, step=self.step + 1)
        except NonFiniteError as e:
            self._log_error(f"Step {self.step + 1} diverged: {e}")
            raise NonFiniteError(f"step {self.step + 1}: {e}", checkpoint=self.sink.last_path) from e

        self.step += 1
        self.position += batch
        self.history.add(report)

        if report.transition == "stage_start":
            self.opt_g.reset()
            self.opt_d.reset()
            self._log(f"[STAGE] Growing to {self.schedule.describe()}")
        if report.transition is not None:
            self._log(f"[PHASE] Step {self.step}: {report.transition} -> {self.schedule.describe()}")
            self._save(report.transition)
        elif self.run.checkpoint_every and self.step % self.run.checkpoint_every == 0:
            self._save("periodic")

        if self.run.log_every and self.step % self.run.log_every == 0:
            self._log(f"step {self.step} stage {report.stage} alpha {report.alpha:.3f} "
                      f"loss_d {report.loss_d:.4f} loss_g {report.loss_g:.4f} gp {report.gradient_penalty:.4f}")
        return report

    def train(self, max_steps: int = 0) -> Checkpoint:
        """Step until the schedule finishes or max_steps steps ran (0 = no limit)"""
        ran = 0
        try:
            while not self.schedule.finished and (not max_steps or ran < max_steps):
                self.step_once()
                ran += 1
        finally:
            self.loader.close()
        if self._last_saved_step != self.step:
            self._save("final" if self.schedule.finished else "stopped")
        if self.schedule.finished:
            self._log_success(f"Schedule finished after {self.step} steps")
        else:
            self._log(f"Stopped after {ran} steps at {self.schedule.describe()}")
        return self.checkpoint()

    def get_status(self) -> Dict[str, Any]:
        status = super().get_status()
        status.update({"step": self.step, "position": self.position,
                       "schedule": self.schedule.to_dict(), "history": self.history.get_statistics()})
        return status


def run_schedule(dataset: VolumePyramid, run, sink: CheckpointSink, log_path: Optional[str] = None,
                 resume: Optional[str] = None, max_steps: int = 0) -> Checkpoint:
    """Train stages 0..target over dataset; returns the final checkpoint"""
    trainer = ProgressiveTrainer(run, dataset, sink, log_path=log_path, resume=resume)
    return trainer.train(max_steps)
