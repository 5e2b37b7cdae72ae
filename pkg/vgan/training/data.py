"""
Training Data

Per-stage pyramid of the training volumes and a prefetching batch loader.

The pyramid holds one [N,1,R,R,R] float32 array per stage, produced from the
full-resolution volumes by repeated 2x2x2 mean pooling and cached on disk as
stage_<s>.npy. Batch order is a pure function of (seed, position): the global
position p maps to epoch p // N and slot p % N of that epoch's permutation,
so prefetching and resuming never change which volumes a step sees.
"""

import hashlib
import json
from collections import OrderedDict
from concurrent.futures import Future, ThreadPoolExecutor
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from vgan.core.base import Component
from vgan.core.errors import DataError, ShapeError
from vgan.networks.stage import resolution_for, stage_for_resolution
from vgan.nn.kernels import downsample_avg_2x_kernel
from vgan.volio.nifti import read_nifti


BatchKey = Tuple[int, int, int]


@lru_cache(maxsize=8)
def epoch_permutation(seed: int, epoch: int, count: int) -> np.ndarray:
    """Sample order of one epoch"""
    order = np.random.default_rng([seed, epoch]).permutation(count)
    order.setflags(write=False)
    return order


def batch_indices(seed: int, position: int, batch: int, count: int) -> np.ndarray:
    """Indices of the batch starting at global position"""
    if count < 1:
        raise DataError("cannot draw batches from an empty dataset")
    indices = np.empty(batch, dtype=np.int64)
    for i in range(batch):
        epoch, slot = divmod(position + i, count)
        indices[i] = epoch_permutation(seed, epoch, count)[slot]
    return indices


def downsample_to(volume: np.ndarray, resolution: int) -> np.ndarray:
    """Pool a cubic volume by factors of 2 down to resolution"""
    current = volume
    while current.shape[-1] > resolution:
        current = downsample_avg_2x_kernel(current)
    if current.shape[-3:] != (resolution,) * 3:
        raise DataError(f"volume of shape {volume.shape} cannot be pooled to {resolution}^3")
    return current.astype(np.float32, copy=False)


class VolumePyramid(Component):
    """Stage-indexed training arrays"""

    def __init__(self, levels: Dict[int, np.ndarray], config: Optional[Dict[str, Any]] = None):
        super().__init__(config)
        self.levels = levels
        counts = {array.shape[0] for array in levels.values()}
        if len(counts) != 1:
            raise DataError(f"pyramid levels disagree on volume count: {sorted(counts)}")
        self.count = counts.pop()
        self.target_stage = max(levels)

    @classmethod
    def from_array(cls, volumes: np.ndarray, target_stage: int) -> "VolumePyramid":
        """In-memory pyramid from [N,R,R,R] or [N,1,R,R,R] volumes"""
        volumes = np.asarray(volumes, dtype=np.float32)
        if volumes.ndim == 4:
            volumes = volumes[:, None]
        _check_resolution(volumes.shape[-1], target_stage, "array")
        top = downsample_to(volumes, resolution_for(target_stage))
        levels = {target_stage: np.ascontiguousarray(top)}
        for stage in range(target_stage - 1, -1, -1):
            levels[stage] = downsample_avg_2x_kernel(levels[stage + 1]).astype(np.float32)
        return cls(levels)

    @classmethod
    def build(cls, paths: Sequence[str], target_stage: int, cache_dir: str,
              config: Optional[Dict[str, Any]] = None) -> "VolumePyramid":
        """Pyramid for a list of NIfTI files, reusing the on-disk cache when it matches"""
        if not paths:
            raise DataError("training manifest lists no volumes")
        cache = Path(cache_dir)
        cache.mkdir(parents=True, exist_ok=True)
        fingerprint = _fingerprint(paths, target_stage)
        meta_path = cache / "pyramid.json"
        files = {stage: cache / f"stage_{stage}.npy" for stage in range(target_stage + 1)}

        if meta_path.exists() and all(path.exists() for path in files.values()):
            meta = json.loads(meta_path.read_text())
            if meta.get("fingerprint") == fingerprint:
                levels = {stage: np.load(path, mmap_mode="r") for stage, path in files.items()}
                pyramid = cls(levels, config)
                pyramid._log(f"[DATA] Reusing cached pyramid in {cache} ({pyramid.count} volumes)")
                return pyramid

        writers = {}
        for index, path in enumerate(paths):
            volume = read_nifti(path).data
            if volume.ndim != 3 or len(set(volume.shape)) != 1:
                raise DataError(f"{path}: training volumes must be cubic, got {volume.shape}")
            _check_resolution(volume.shape[0], target_stage, path)
            current = downsample_to(volume, resolution_for(target_stage))
            for stage in range(target_stage, -1, -1):
                if stage not in writers:
                    resolution = resolution_for(stage)
                    writers[stage] = np.lib.format.open_memmap(
                        files[stage], mode="w+", dtype=np.float32,
                        shape=(len(paths), 1, resolution, resolution, resolution))
                writers[stage][index, 0] = current
                if stage > 0:
                    current = downsample_avg_2x_kernel(current).astype(np.float32)

        for writer in writers.values():
            writer.flush()
        del writers
        meta_path.write_text(json.dumps({"fingerprint": fingerprint, "count": len(paths),
                                         "target_stage": target_stage}, sort_keys=True))
        levels = {stage: np.load(path, mmap_mode="r") for stage, path in files.items()}
        pyramid = cls(levels, config)
        pyramid._log(f"[DATA] Built pyramid for {pyramid.count} volumes, stages 0..{target_stage} in {cache}")
        return pyramid

    def stage_array(self, stage: int) -> np.ndarray:
        if stage not in self.levels:
            raise DataError(f"pyramid has no stage {stage} (built up to {self.target_stage})")
        return self.levels[stage]

    def gather(self, stage: int, indices: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(self.stage_array(stage)[indices], dtype=np.float32)


def _check_resolution(resolution: int, target_stage: int, source: str):
    try:
        stage = stage_for_resolution(resolution)
    except ShapeError:
        raise DataError(f"{source}: resolution {resolution} is not 4 * 2^s")
    if stage < target_stage:
        raise DataError(f"{source}: dataset resolution {resolution}^3 is below the target "
                        f"{resolution_for(target_stage)}^3")


def _fingerprint(paths: Sequence[str], target_stage: int) -> str:
    hasher = hashlib.sha256(str(target_stage).encode("utf-8"))
    for path in paths:
        stat = Path(path).stat()
        hasher.update(f"{Path(path).resolve()}|{stat.st_size}|{stat.st_mtime_ns}".encode("utf-8"))
    return hasher.hexdigest()


class BatchLoader(Component):
    """Serves batches by (stage, position, size), prefetching announced keys on a worker thread"""

    def __init__(self, pyramid: VolumePyramid, seed: int, prefetch_depth: int = 2,
                 config: Optional[Dict[str, Any]] = None):
        super().__init__(config)
        self.pyramid = pyramid
        self.seed = seed
        self.prefetch_depth = max(0, prefetch_depth)
        self._pending: "OrderedDict[BatchKey, Future]" = OrderedDict()
        self._executor = ThreadPoolExecutor(max_workers=1) if self.prefetch_depth else None

    def load(self, stage: int, position: int, batch: int) -> np.ndarray:
        indices = batch_indices(self.seed, position, batch, self.pyramid.count)
        return self.pyramid.gather(stage, indices)

    def get(self, stage: int, position: int, batch: int,
            upcoming: Iterable[BatchKey] = ()) -> np.ndarray:
        """Batch for (stage, position, batch); upcoming keys are queued for prefetch"""
        key = (stage, position, batch)
        future = self._pending.pop(key, None)
        result = future.result() if future is not None else self.load(*key)
        self._schedule(upcoming)
        return result

    def _schedule(self, upcoming: Iterable[BatchKey]):
        if self._executor is None:
            return
        upcoming = list(upcoming)
        for stale in [key for key in self._pending if key not in upcoming]:
            self._pending.pop(stale).cancel()
        for key in upcoming:
            if len(self._pending) >= self.prefetch_depth:
                break
            if key not in self._pending:
                self._pending[key] = self._executor.submit(self.load, *key)

    def close(self):
        self._pending.clear()
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def get_status(self) -> Dict[str, Any]:
        status = super().get_status()
        status.update({"count": self.pyramid.count, "pending": len(self._pending)})
        return status


def upcoming_keys(schedule_state: Dict[str, Any], position: int, depth: int) -> List[BatchKey]:
    """Keys of the next depth steps of a schedule (simulated on a copy)"""
    from .schedule import TrainSchedule

    schedule = TrainSchedule.from_dict(schedule_state)
    keys = []
    for _ in range(depth):
        if schedule.finished:
            break
        batch = schedule.batch_size
        keys.append((schedule.stage, position, batch))
        position += batch
        schedule.advance(batch)
    return keys
