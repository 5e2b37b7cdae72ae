"""
Stage Plan and Weight Maps

StageConfig describes one resolution of the progressive ladder; NetworkWeights
is the ordered, canonically named parameter map both networks are built into.

Parameter names follow {g|d}.{base|block<s>|final}.{dense|conv1|conv2}.{weight|bias}
for blocks and {g|d}.{to_voxel<s>|from_voxel<s>}.{weight|bias} for the 1x1x1
projections.
"""

import hashlib
import re
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from vgan.core.errors import ShapeError
from vgan.core.tensor import Tensor
from vgan.nn.conv import Conv3dParams
from vgan.nn.layers import DenseParams


BASE_RESOLUTION = 4
MAX_FILTERS = 128

_NAME_PATTERN = re.compile(
    r"^(?P<net>[gd])\.(?P<block>base|final|block(?P<block_stage>\d+)|"
    r"(?P<projection>to_voxel|from_voxel)(?P<projection_stage>\d+))"
    r"(\.(?P<layer>dense|conv1|conv2))?\.(?P<kind>weight|bias)$"
)


def resolution_for(stage: int) -> int:
    """Voxels per side at a stage: 4 * 2^s"""
    if stage < 0:
        raise ValueError(f"stage must be >= 0, got {stage}")
    return BASE_RESOLUTION * 2 ** stage


def stage_for_resolution(resolution: int) -> int:
    stage = 0
    while resolution_for(stage) < resolution:
        stage += 1
    if resolution_for(stage) != resolution:
        raise ShapeError(f"resolution {resolution} is not 4 * 2^s")
    return stage


@dataclass(frozen=True)
class StageConfig:
    """Architecture plan up to stage_index (inclusive)"""

    stage_index: int
    n_filters: int = 128
    latent_dim: int = 128

    def __post_init__(self):
        if self.stage_index < 0:
            raise ValueError(f"stage_index must be >= 0, got {self.stage_index}")
        if not 1 <= self.n_filters <= MAX_FILTERS:
            raise ValueError(f"n_filters must be in [1, {MAX_FILTERS}], got {self.n_filters}")
        if self.latent_dim < 1:
            raise ValueError(f"latent_dim must be >= 1, got {self.latent_dim}")

    @property
    def resolution(self) -> int:
        return resolution_for(self.stage_index)


def parse_name(name: str) -> Dict[str, str]:
    """Split a canonical parameter name into its parts"""
    match = _NAME_PATTERN.match(name)
    if match is None:
        raise ValueError(f"not a canonical parameter name: '{name}'")
    return match.groupdict()


def name_stage(name: str) -> int:
    """Stage a parameter belongs to; base and final belong to stage 0"""
    parts = parse_name(name)
    if parts["block_stage"] is not None:
        return int(parts["block_stage"])
    if parts["projection_stage"] is not None:
        return int(parts["projection_stage"])
    return 0


def is_active(name: str, stage: int, fading: bool) -> bool:
    """Whether a parameter takes part in the forward pass at (stage, phase)"""
    parts = parse_name(name)
    if parts["block_stage"] is not None:
        return int(parts["block_stage"]) <= stage
    if parts["projection_stage"] is not None:
        projection = int(parts["projection_stage"])
        return projection == stage or (fading and stage > 0 and projection == stage - 1)
    return True


class NetworkWeights(OrderedDict):
    """Ordered map of canonical parameter name -> Tensor"""

    def __setitem__(self, name: str, tensor: Tensor):
        parse_name(name)
        if not isinstance(tensor, Tensor):
            raise TypeError(f"parameter '{name}' must be a Tensor, got {type(tensor).__name__}")
        super().__setitem__(name, tensor)

    @property
    def max_stage(self) -> int:
        return max((name_stage(name) for name in self), default=0)

    def parameter_count(self) -> int:
        return sum(tensor.size for tensor in self.values())

    def digest(self) -> str:
        """sha256 over names, shapes and raw little-endian bytes"""
        hasher = hashlib.sha256()
        for name, tensor in self.items():
            hasher.update(name.encode("utf-8"))
            hasher.update(repr(tensor.shape).encode("utf-8"))
            hasher.update(np.ascontiguousarray(tensor.data, dtype="<f4").tobytes())
        return hasher.hexdigest()

    def active_names(self, stage: int, fading: bool) -> List[str]:
        return [name for name in self if is_active(name, stage, fading)]

    def active(self, stage: int, fading: bool) -> List[Tensor]:
        return [self[name] for name in self.active_names(stage, fading)]

    def conv(self, prefix: str) -> Conv3dParams:
        """Conv3dParams for '<prefix>.weight' / '<prefix>.bias'"""
        return Conv3dParams(self[f"{prefix}.weight"], self.get(f"{prefix}.bias"))

    def dense(self, prefix: str) -> DenseParams:
        return DenseParams(self[f"{prefix}.weight"], self.get(f"{prefix}.bias"))

    def require_stage(self, stage: int):
        if stage < 0 or stage > self.max_stage:
            raise ShapeError(f"stage {stage} is beyond the built weights (max stage {self.max_stage})")

    def set_trainable(self, names: List[str]):
        """Mark exactly the given parameters as requiring grad"""
        wanted = set(names)
        for name, tensor in self.items():
            tensor.requires_grad = name in wanted
            tensor.grad = None

    def copy_data(self) -> "NetworkWeights":
        """Deep copy of the buffers (no graph)"""
        copied = NetworkWeights()
        for name, tensor in self.items():
            copied[name] = Tensor(np.array(tensor.data, copy=True))
        return copied


def init_weight(rng: np.random.Generator, shape: Tuple[int, ...]) -> Tensor:
    """N(0, 1) weights; the equalized scale is applied at runtime"""
    return Tensor(rng.standard_normal(shape).astype(np.float32))


def init_bias(size: int) -> Tensor:
    return Tensor(np.zeros(size, dtype=np.float32))


def add_conv(weights: NetworkWeights, rng: np.random.Generator, prefix: str,
             out_channels: int, in_channels: int, kernel: int):
    weights[f"{prefix}.weight"] = init_weight(rng, (out_channels, in_channels, kernel, kernel, kernel))
    weights[f"{prefix}.bias"] = init_bias(out_channels)


def add_dense(weights: NetworkWeights, rng: np.random.Generator, prefix: str,
              out_features: int, in_features: int):
    weights[f"{prefix}.weight"] = init_weight(rng, (out_features, in_features))
    weights[f"{prefix}.bias"] = init_bias(out_features)
