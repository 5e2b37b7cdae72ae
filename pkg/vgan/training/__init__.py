"""
vgan Training

Progressive schedule, Adam, WGAN-GP losses, checkpoints, the data pyramid
and the trainer that ties them together.
"""

from .schedule import TrainSchedule, FADE_IN, STABILIZE, FULL_SCALE_LR_TABLE, FULL_SCALE_LATE_LR
from .optimizer import OptimizerState, adam_step
from .losses import wgan_gp_losses, generator_loss, gradient_penalty, interpolate, GP_LAMBDA, DRIFT_EPSILON
from .checkpoint import (
    Checkpoint, CheckpointSink, encode_checkpoint, decode_checkpoint, save_checkpoint, load_checkpoint
)
from .data import VolumePyramid, BatchLoader, batch_indices, epoch_permutation, downsample_to
from .history import StepHistory, StepReport
from .trainer import (
    LossSettings, ProgressiveTrainer, sample_latents, train_step, run_schedule, GENERATION_STREAM
)
from .generation import generate_volumes, diversity_report

__all__ = [
    "TrainSchedule", "FADE_IN", "STABILIZE", "FULL_SCALE_LR_TABLE", "FULL_SCALE_LATE_LR",
    "OptimizerState", "adam_step", "wgan_gp_losses", "generator_loss", "gradient_penalty",
    "interpolate", "GP_LAMBDA", "DRIFT_EPSILON", "Checkpoint", "CheckpointSink",
    "encode_checkpoint", "decode_checkpoint", "save_checkpoint", "load_checkpoint",
    "VolumePyramid", "BatchLoader", "batch_indices", "epoch_permutation", "downsample_to",
    "StepHistory", "StepReport", "LossSettings", "ProgressiveTrainer", "sample_latents",
    "train_step", "run_schedule", "GENERATION_STREAM", "generate_volumes", "diversity_report",
]
