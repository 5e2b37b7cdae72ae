"""
Checkpoint Container

Single binary file holding both weight maps, both optimizer states, the
schedule and the RNG state:

    b"VGAN" | u32 version | u32 entry count
    entries: u32 name length | name (utf-8) | u32 ndim | u32 dims... | <f4 data
    u32 meta length | meta JSON (schedule, model, step, data position, optimizer scalars)
    u32 rng length  | rng JSON (numpy bit generator state)

All integers little-endian. JSON is written with sorted keys so identical
states give identical bytes.
"""

import json
import os
import shutil
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from vgan.core.base import Component
from vgan.core.errors import CheckpointError
from vgan.core.tensor import Tensor
from vgan.networks.stage import NetworkWeights
from .optimizer import OptimizerState
from .schedule import TrainSchedule


MAGIC = b"VGAN"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    """Everything needed to continue training bit-identically"""

    weights_g: NetworkWeights
    weights_d: NetworkWeights
    opt_g: OptimizerState
    opt_d: OptimizerState
    schedule: TrainSchedule
    rng_state: Dict[str, Any]
    step: int = 0
    data_position: int = 0
    model: Dict[str, Any] = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def summary(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "step": self.step,
            "stage": self.schedule.stage,
            "phase": self.schedule.phase,
            "alpha": self.schedule.alpha,
            "finished": self.schedule.finished,
            "generator_parameters": self.weights_g.parameter_count(),
            "discriminator_parameters": self.weights_d.parameter_count(),
            "model": dict(self.model),
        }


def _entries(ckpt: Checkpoint):
    for name, tensor in ckpt.weights_g.items():
        yield name, tensor.data
    for name, tensor in ckpt.weights_d.items():
        yield name, tensor.data
    for prefix, state in (("opt_g", ckpt.opt_g), ("opt_d", ckpt.opt_d)):
        for name in sorted(state.m):
            yield f"{prefix}.m.{name}", state.m[name]
            yield f"{prefix}.v.{name}", state.v[name]


def _pack_entry(name: str, array: np.ndarray) -> bytes:
    encoded = name.encode("utf-8")
    parts = [_U32.pack(len(encoded)), encoded, _U32.pack(array.ndim)]
    parts.extend(_U32.pack(extent) for extent in array.shape)
    parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(parts)


def _pack_json(payload: Dict[str, Any]) -> bytes:
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _U32.pack(len(encoded)) + encoded


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    entries = list(_entries(ckpt))
    meta = {
        "step": ckpt.step,
        "data_position": ckpt.data_position,
        "schedule": ckpt.schedule.to_dict(),
        "model": ckpt.model,
        "opt_g": ckpt.opt_g.scalars(),
        "opt_d": ckpt.opt_d.scalars(),
    }
    parts = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(entries))]
    parts.extend(_pack_entry(name, array) for name, array in entries)
    parts.append(_pack_json(meta))
    parts.append(_pack_json(ckpt.rng_state))
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CheckpointError(f"{self.path}: truncated while reading {what} "
                                  f"(need {size} bytes at offset {self.offset}, file has {len(self.payload)})")
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def json(self, what: str) -> Dict[str, Any]:
        size = self.u32(f"{what} length")
        try:
            return json.loads(self.take(size, what).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{self.path}: corrupt {what}: {e}")


def decode_checkpoint(payload: bytes, path: str = "<bytes>") -> Checkpoint:
    reader = _Reader(payload, path)
    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a vgan checkpoint (magic {magic!r}, expected {MAGIC!r})")
    version = reader.u32("format version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: checkpoint format version {version} is not supported "
                              f"(this build reads version {FORMAT_VERSION})")

    weights_g, weights_d = NetworkWeights(), NetworkWeights()
    moments: Dict[Tuple[str, str], Dict[str, np.ndarray]] = {}
    for _ in range(reader.u32("entry count")):
        name_length = reader.u32("entry name length")
        try:
            name = reader.take(name_length, "entry name").decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"{path}: corrupt entry name: {e}")
        shape = tuple(reader.u32(f"{name} dims") for _ in range(reader.u32(f"{name} ndim")))
        count = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(reader.take(4 * count, f"{name} data"), dtype="<f4").reshape(shape)
        array = array.astype(np.float32)

        try:
            if name.startswith("opt_"):
                optimizer, moment, parameter = name.split(".", 2)
                moments.setdefault((optimizer, moment), {})[parameter] = array
            elif name.startswith("g."):
                weights_g[name] = Tensor(array)
            elif name.startswith("d."):
                weights_d[name] = Tensor(array)
            else:
                raise ValueError("unknown prefix")
        except ValueError as e:
            raise CheckpointError(f"{path}: bad entry '{name}' ({e})")

    meta = reader.json("metadata")
    rng_state = reader.json("rng state")
    if reader.offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - reader.offset} trailing bytes after rng state")

    def optimizer_state(prefix: str) -> OptimizerState:
        scalars = meta[prefix]
        return OptimizerState(beta1=float(scalars["beta1"]), beta2=float(scalars["beta2"]),
                              epsilon=float(scalars["epsilon"]), t=int(scalars["t"]),
                              m=moments.get((prefix, "m"), {}), v=moments.get((prefix, "v"), {}))

    try:
        return Checkpoint(
            weights_g=weights_g, weights_d=weights_d,
            opt_g=optimizer_state("opt_g"), opt_d=optimizer_state("opt_d"),
            schedule=TrainSchedule.from_dict(meta["schedule"]),
            rng_state=rng_state,
            step=int(meta["step"]),
            data_position=int(meta["data_position"]),
            model=dict(meta.get("model", {})),
            version=version,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: incomplete metadata ({e})")


def save_checkpoint(ckpt: Checkpoint, path: str) -> str:
    """Write atomically (temp file + rename)"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    temporary = target.with_name(target.name + ".tmp")
    temporary.write_bytes(encode_checkpoint(ckpt))
    os.replace(temporary, target)
    return str(target)


def load_checkpoint(path: str) -> Checkpoint:
    try:
        payload = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"{path}: cannot read checkpoint: {e}")
    return decode_checkpoint(payload, path)


class CheckpointSink(Component):
    """Writes checkpoint_<step>.vgan files plus a latest.vgan copy into one directory"""

    def __init__(self, directory: str, config: Optional[Dict[str, Any]] = None):
        super().__init__(config)
        self.directory = Path(directory)
        self.last_path: Optional[str] = None
        self.saved = 0

    def save(self, ckpt: Checkpoint, reason: str = "periodic") -> str:
        path = save_checkpoint(ckpt, str(self.directory / f"checkpoint_{ckpt.step:08d}.vgan"))
        shutil.copyfile(path, self.directory / "latest.vgan")
        self.last_path = path
        self.saved += 1
        self._log(f"[CHECKPOINT] step {ckpt.step} ({reason}) -> {path}")
        return path

    @property
    def latest_path(self) -> Path:
        return self.directory / "latest.vgan"

    def get_status(self) -> Dict[str, Any]:
        status = super().get_status()
        status.update({"directory": str(self.directory), "saved": self.saved, "last_path": self.last_path})
        return status
