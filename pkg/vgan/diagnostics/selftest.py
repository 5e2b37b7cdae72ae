"""
Self-Test

Seeded check suites run by `vgan.py selftest`:

    gradient      tape gradients of every layer and of both stage-0 networks
                  against central differences
    conv_oracle   the direct conv3d kernel against the naive seven-loop oracle
    nifti         float32 NIfTI round trips (plain and gzip)
    rotation      rotation orthonormality and the 90 degree index oracle
"""

import gzip
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from vgan.augment.resample import resample_trilinear
from vgan.augment.rotation import Rotation, rotation_matrix, sample_rotation
from vgan.core import ops
from vgan.core.base import Component
from vgan.core.gradcheck import grad_check
from vgan.core.tensor import Tensor
from vgan.networks.discriminator import build_discriminator, discriminator_forward
from vgan.networks.generator import build_generator, generator_forward
from vgan.networks.stage import StageConfig
from vgan.nn import kernels, reference
from vgan.nn.conv import Conv3dParams, conv3d_forward
from vgan.nn.layers import (
    DenseParams, dense_forward, downsample_avg_2x, fade_blend, leaky_relu, minibatch_stddev,
    pixelwise_norm, upsample_nearest_2x
)
from vgan.volio.nifti import decode_nifti, encode_nifti
from vgan.volio.volume import Volume


LAYER_TOLERANCE = 1e-3
NETWORK_TOLERANCE = 1e-2
CONV_TOLERANCE = 1e-5
ROTATION_TOLERANCE = 1e-5

ConvKernel = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    max_error: float = 0.0
    tolerance: float = 0.0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, label: str, error: float, tolerance: Optional[float] = None):
        tolerance = self.tolerance if tolerance is None else tolerance
        self.cases += 1
        self.max_error = max(self.max_error, error)
        if not error <= tolerance:
            self.failures.append(f"{label}: error {error:.3e} > {tolerance:.0e}")

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "cases": self.cases, "max_error": self.max_error,
                "tolerance": self.tolerance, "passed": self.passed, "failures": list(self.failures)}


def _weighted_sum(output: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar readout sum(output * weights)"""
    return ops.sum(ops.mul(output, Tensor(weights.astype(output.dtype))))


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    magnitude = 0.1 + np.abs(rng.standard_normal(shape))
    return np.where(rng.random(shape) < 0.5, -magnitude, magnitude)


class SelfTest(Component):
    """Runs the check suites and reports per-suite maximum errors"""

    def __init__(self, config: Optional[Dict[str, Any]] = None, seed: int = 0,
                 conv_kernel: Optional[ConvKernel] = None):
        super().__init__(config)
        self.seed = seed
        self.grad_cases = int(self.config.get("grad_cases", 20))
        self.conv_cases = int(self.config.get("conv_cases", 50))
        self.conv_kernel = conv_kernel or kernels.conv3d_kernel

    def _rng(self, *stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *stream])

    def gradient_suite(self) -> SuiteResult:
        result = SuiteResult("gradient", tolerance=LAYER_TOLERANCE)
        for case in range(self.grad_cases):
            rng = self._rng(1, case)
            for label, f, point, tolerance, step in self._gradient_cases(rng):
                error = grad_check(f, Tensor(point), step=step)
                result.record(f"case {case} {label}", error, tolerance)
        return result

    def _gradient_cases(self, rng: np.random.Generator):
        batch, channels, out_channels = int(rng.integers(1, 3)), int(rng.integers(1, 4)), int(rng.integers(1, 4))
        extent = int(rng.integers(1, 4))
        kernel = int(rng.choice([1, 3]))
        spatial = (batch, channels, extent, extent + 1, extent)
        params = Conv3dParams(Tensor(rng.standard_normal((out_channels, channels, kernel, kernel, kernel))),
                              Tensor(rng.standard_normal(out_channels)))
        upstream = rng.standard_normal((batch, out_channels) + spatial[2:])
        yield ("conv3d input", lambda x: _weighted_sum(conv3d_forward(x, params), upstream),
               rng.standard_normal(spatial), LAYER_TOLERANCE, 1e-3)

        x_fixed = Tensor(rng.standard_normal(spatial))
        bias = params.bias
        yield ("conv3d weight",
               lambda w: _weighted_sum(conv3d_forward(x_fixed, Conv3dParams(w, bias)), upstream),
               params.weight.data, LAYER_TOLERANCE, 1e-3)

        shape = (batch, 3, 2, 2, 2)
        upstream = rng.standard_normal(shape)
        yield ("leaky_relu", lambda x: _weighted_sum(leaky_relu(x), upstream),
               _away_from_zero(rng, shape), LAYER_TOLERANCE, 1e-3)
        yield ("pixelwise_norm", lambda x: _weighted_sum(pixelwise_norm(x), upstream),
               rng.standard_normal(shape), LAYER_TOLERANCE, 1e-4)

        stats_upstream = rng.standard_normal((3, 4, 2, 2, 2))
        yield ("minibatch_stddev", lambda x: _weighted_sum(minibatch_stddev(x), stats_upstream),
               rng.standard_normal((3, 3, 2, 2, 2)), LAYER_TOLERANCE, 1e-4)

        coarse_upstream = rng.standard_normal((batch, 2, 4, 4, 4))
        yield ("upsample_nearest_2x", lambda x: _weighted_sum(upsample_nearest_2x(x), coarse_upstream),
               rng.standard_normal((batch, 2, 2, 2, 2)), LAYER_TOLERANCE, 1e-3)
        fine_upstream = rng.standard_normal((batch, 2, 2, 2, 2))
        yield ("downsample_avg_2x", lambda x: _weighted_sum(downsample_avg_2x(x), fine_upstream),
               rng.standard_normal((batch, 2, 4, 4, 4)), LAYER_TOLERANCE, 1e-3)

        alpha = float(rng.random())
        coarse_path = Tensor(rng.standard_normal(shape))
        yield ("fade_blend", lambda x: _weighted_sum(fade_blend(alpha, coarse_path, x), upstream),
               rng.standard_normal(shape), LAYER_TOLERANCE, 1e-3)

        dense = DenseParams(Tensor(rng.standard_normal((4, 6))), Tensor(rng.standard_normal(4)))
        dense_upstream = rng.standard_normal((batch, 4))
        yield ("dense", lambda x: _weighted_sum(dense_forward(x, dense), dense_upstream),
               rng.standard_normal((batch, 6)), LAYER_TOLERANCE, 1e-3)

        cfg = StageConfig(0, n_filters=4, latent_dim=8)
        weights_g = build_generator(cfg, rng)
        weights_d = build_discriminator(cfg, rng)
        volume_upstream = rng.standard_normal((2, 1, 4, 4, 4))
        yield ("generator stage 0", lambda z: _weighted_sum(generator_forward(weights_g, z, 0), volume_upstream),
               rng.standard_normal((2, 8)), NETWORK_TOLERANCE, 1e-5)
        score_upstream = rng.standard_normal((2, 1))
        yield ("discriminator stage 0",
               lambda x: _weighted_sum(discriminator_forward(weights_d, x, 0), score_upstream),
               rng.standard_normal((2, 1, 4, 4, 4)), NETWORK_TOLERANCE, 1e-5)

    def conv_oracle_suite(self) -> SuiteResult:
        result = SuiteResult("conv_oracle", tolerance=CONV_TOLERANCE)
        for case in range(self.conv_cases):
            rng = self._rng(2, case)
            batch, channels, out_channels = (int(value) for value in rng.integers(1, 4, size=3))
            dims = tuple(int(value) for value in rng.integers(1, 6, size=3))
            kernel = int(rng.choice([1, 3, 5]))
            if case == 0:
                kernel = 1
            if case == 1:
                dims = (1, 1, 1)
            x = rng.standard_normal((batch, channels) + dims).astype(np.float32)
            weight = rng.standard_normal((out_channels, channels, kernel, kernel, kernel)).astype(np.float32)
            expected = reference.naive_conv3d(x, weight)
            actual = np.asarray(self.conv_kernel(x, weight), dtype=np.float64)
            if actual.shape != expected.shape:
                result.record(f"case {case} shape {actual.shape} vs {expected.shape}", float("inf"))
                continue
            scale = max(float(np.max(np.abs(expected))), 1e-12)
            result.record(f"case {case} x{x.shape} k{kernel}", float(np.max(np.abs(actual - expected))) / scale)
        return result

    def nifti_suite(self) -> SuiteResult:
        result = SuiteResult("nifti", tolerance=0.0)
        rng = self._rng(3)
        for case, dims in enumerate([(5, 6, 7), (1, 1, 1), (8, 3, 4)]):
            volume = Volume(rng.standard_normal(dims).astype(np.float32), voxel_size=(1.0, 1.5, 2.0))
            raw = encode_nifti(volume)
            for label, payload in (("plain", raw), ("gzip", gzip.compress(raw, mtime=0))):
                decoded = decode_nifti(payload)
                if decoded.data.shape != volume.data.shape or decoded.voxel_size != volume.voxel_size:
                    result.record(f"case {case} {label} metadata", float("inf"))
                    continue
                identical = decoded.data.tobytes() == volume.data.tobytes()
                result.record(f"case {case} {label}", 0.0 if identical else float("inf"))
        return result

    def rotation_suite(self) -> SuiteResult:
        result = SuiteResult("rotation", tolerance=ROTATION_TOLERANCE)
        rng = self._rng(4)
        for case in range(10):
            matrix = rotation_matrix(sample_rotation(rng, 30.0))
            result.record(f"orthonormal {case}", float(np.max(np.abs(matrix.T @ matrix - np.eye(3)))))
            result.record(f"determinant {case}", abs(float(np.linalg.det(matrix)) - 1.0))

        for extent in (5, 7):
            source = Volume(rng.standard_normal((extent,) * 3).astype(np.float32))
            rotated = resample_trilinear(source, Rotation(theta_z=90.0))
            expected = np.rot90(source.data, 1, axes=(0, 1))
            result.record(f"90 deg about z on {extent}^3", float(np.max(np.abs(rotated.data - expected))))

        identity = resample_trilinear(source, Rotation())
        result.record("identity", 0.0 if identity.data.tobytes() == source.data.tobytes() else float("inf"))
        return result

    def run(self) -> Dict[str, Any]:
        """Run every suite; 'passed' is False if any case failed"""
        suites = []
        for runner in (self.gradient_suite, self.conv_oracle_suite, self.nifti_suite, self.rotation_suite):
            suite = runner()
            suites.append(suite)
            status = "PASS" if suite.passed else "FAIL"
            message = (f"[{status}] {suite.name}: {suite.cases} checks, max error {suite.max_error:.3e} "
                       f"(tolerance {suite.tolerance:.0e})")
            if suite.passed:
                self._log_success(message)
            else:
                self._log_error(message)
                for failure in suite.failures[:5]:
                    self._log_error(f"  {failure}")
        return {"passed": all(suite.passed for suite in suites),
                "suites": [suite.to_dict() for suite in suites]}

