"""
Reference Oracles

Deliberately naive float64 implementations used by the tests and the
self-test suites to check the optimized kernels.
"""

from typing import Optional

import numpy as np


def naive_conv3d(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray] = None) -> np.ndarray:
    """Seven nested loops over (b, o, d, h, w) and the kernel/channel window, zero padded"""
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    batch, channels, depth, height, width = x.shape
    out_channels, _, kernel = weight.shape[0], weight.shape[1], weight.shape[2]
    pad = (kernel - 1) // 2
    output = np.zeros((batch, out_channels, depth, height, width), dtype=np.float64)

    for b in range(batch):
        for o in range(out_channels):
            for d in range(depth):
                for h in range(height):
                    for w in range(width):
                        total = 0.0 if bias is None else float(bias[o])
                        for c in range(channels):
                            for kd in range(kernel):
                                sd = d + kd - pad
                                if sd < 0 or sd >= depth:
                                    continue
                                for kh in range(kernel):
                                    sh = h + kh - pad
                                    if sh < 0 or sh >= height:
                                        continue
                                    for kw in range(kernel):
                                        sw = w + kw - pad
                                        if sw < 0 or sw >= width:
                                            continue
                                        total += weight[o, c, kd, kh, kw] * x[b, c, sd, sh, sw]
                        output[b, o, d, h, w] = total
    return output


def naive_block_mean(x: np.ndarray) -> np.ndarray:
    """Mean of every 2x2x2 block over the trailing three axes"""
    x = np.asarray(x, dtype=np.float64)
    depth, height, width = x.shape[-3:]
    output = np.zeros(x.shape[:-3] + (depth // 2, height // 2, width // 2), dtype=np.float64)
    for d in range(depth // 2):
        for h in range(height // 2):
            for w in range(width // 2):
                block = x[..., 2 * d:2 * d + 2, 2 * h:2 * h + 2, 2 * w:2 * w + 2]
                output[..., d, h, w] = block.reshape(block.shape[:-3] + (8,)).mean(axis=-1)
    return output


def two_pass_batch_stddev(x: np.ndarray) -> float:
    """Mean over (c,d,h,w) of the population stddev across the batch axis"""
    x = np.asarray(x, dtype=np.float64)
    mean = x.sum(axis=0) / x.shape[0]
    variance = ((x - mean) ** 2).sum(axis=0) / x.shape[0]
    return float(np.sqrt(variance).mean())
