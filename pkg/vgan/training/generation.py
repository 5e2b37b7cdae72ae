"""
Sampling

Draws volumes from a trained generator and summarizes how much they differ
from one another.
"""

from typing import Any, Dict, List

import numpy as np

from vgan.core.tensor import no_grad
from vgan.networks.generator import generator_forward
from vgan.networks.stage import NetworkWeights
from .trainer import sample_latents


def generate_volumes(weights_g: NetworkWeights, stage: int, count: int, rng: np.random.Generator,
                     batch: int = 4, alpha: float = 1.0, use_equalized: bool = True) -> np.ndarray:
    """count volumes [count, R, R, R], generated batch at a time"""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    latent = weights_g["g.base.dense.weight"].shape[1]
    chunks: List[np.ndarray] = []
    remaining = count
    with no_grad():
        while remaining > 0:
            size = min(batch, remaining)
            z = sample_latents(rng, size, latent)
            chunks.append(generator_forward(weights_g, z, stage, alpha, use_equalized).data[:, 0])
            remaining -= size
    return np.concatenate(chunks, axis=0)


def diversity_report(samples: np.ndarray) -> Dict[str, Any]:
    """Spread across samples; a per-voxel std near zero means every latent gives the same volume"""
    samples = np.asarray(samples, dtype=np.float64)
    per_voxel_std = samples.std(axis=0) if samples.shape[0] > 1 else np.zeros(samples.shape[1:])
    return {
        "count": int(samples.shape[0]),
        "mean_voxel_std": float(per_voxel_std.mean()),
        "max_voxel_std": float(per_voxel_std.max()),
        "value_min": float(samples.min()),
        "value_max": float(samples.max()),
        "value_mean": float(samples.mean()),
    }
