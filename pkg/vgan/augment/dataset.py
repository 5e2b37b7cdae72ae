"""
Augmented Dataset

Writes k rotated copies of every input volume (the originals are not part of
the output) plus a manifest.tsv recording where each copy came from. Each
copy draws its angles from its own stream seeded by (seed, volume, copy), so
the result does not depend on the number of workers.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from vgan.core.base import Component
from vgan.core.errors import DataError
from vgan.volio.nifti import read_nifti, write_nifti
from vgan.volio.volume import Volume
from .resample import resample_trilinear
from .rotation import Rotation, sample_rotation


MANIFEST_NAME = "manifest.tsv"


@dataclass
class ManifestEntry:
    output: str
    source: str
    rotation: Rotation
    seed: int

    def to_tsv(self) -> str:
        theta_x, theta_y, theta_z = self.rotation.angles
        return f"{self.output}\t{self.source}\t{theta_x:.9g}\t{theta_y:.9g}\t{theta_z:.9g}\t{self.seed}"

    @classmethod
    def from_tsv(cls, line: str) -> "ManifestEntry":
        output, source, theta_x, theta_y, theta_z, seed = line.rstrip("\n").split("\t")
        return cls(output, source, Rotation(float(theta_x), float(theta_y), float(theta_z)), int(seed))


def copy_seed(seed: int, volume_index: int, copy_index: int) -> int:
    """Seed of one rotated copy"""
    return int(np.random.SeedSequence([seed, volume_index, copy_index]).generate_state(1, np.uint64)[0])


def volume_stem(path: str) -> str:
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[:-len(suffix)]
    return Path(path).stem


def check_unique_stems(sources: Sequence[str]):
    """Raise DataError when two sources would write to the same output names"""
    seen = {}
    for source in sources:
        stem = volume_stem(str(source))
        if stem in seen:
            raise DataError(f"{source} and {seen[stem]} share the name '{stem}'; their outputs would collide")
        seen[stem] = str(source)


def rotated_copies(volume: Volume, volume_index: int, k: int, sigma: float, seed: int,
                   fill: float = 0.0) -> Iterator[Tuple[int, Rotation, int, Volume]]:
    """(copy index, rotation, copy seed, rotated volume) for each of k copies"""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    for copy_index in range(k):
        seed_value = copy_seed(seed, volume_index, copy_index)
        rotation = sample_rotation(np.random.default_rng(seed_value), sigma)
        yield copy_index, rotation, seed_value, resample_trilinear(volume, rotation, fill)


def _augment_file(task) -> List[ManifestEntry]:
    volume_index, source, out_dir, k, sigma, seed, fill = task
    volume = read_nifti(source)
    entries = []
    for copy_index, rotation, seed_value, rotated in rotated_copies(volume, volume_index, k, sigma, seed, fill):
        output = Path(out_dir) / f"{volume_stem(source)}_rot{copy_index:02d}.nii.gz"
        write_nifti(rotated, str(output))
        entries.append(ManifestEntry(str(output), str(source), rotation, seed_value))
    return entries


class DatasetAugmenter(Component):
    """Expands a list of NIfTI files into k rotated copies each"""

    def __init__(self, k: int = 10, sigma: float = 10.0, fill: float = 0.0, workers: int = 1, config=None):
        super().__init__(config)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self.sigma = sigma
        self.fill = fill
        self.workers = max(1, workers)

    def build(self, sources: Sequence[str], out_dir: str, seed: int) -> List[ManifestEntry]:
        """Write the copies and the manifest; returns the manifest entries in input order"""
        if not sources:
            raise DataError("no volumes to augment")
        check_unique_stems(sources)
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        tasks = [(index, str(source), out_dir, self.k, self.sigma, seed, self.fill)
                 for index, source in enumerate(sources)]
        self._log(f"[AUGMENT] {len(sources)} volumes x {self.k} rotations (sigma {self.sigma} deg, "
                  f"{self.workers} worker(s))")

        entries: List[ManifestEntry] = []
        if self.workers == 1:
            for task in tasks:
                entries.extend(_augment_file(task))
                self._log_debug(f"augmented {task[1]}")
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                for produced in pool.map(_augment_file, tasks):
                    entries.extend(produced)

        write_manifest(entries, str(Path(out_dir) / MANIFEST_NAME))
        self._log_success(f"Wrote {len(entries)} augmented volumes to {out_dir}")
        return entries


def build_augmented_dataset(sources: Sequence[str], out_dir: str, k: int, sigma: float, seed: int,
                            fill: float = 0.0, workers: int = 1) -> List[ManifestEntry]:
    return DatasetAugmenter(k, sigma, fill, workers).build(sources, out_dir, seed)


def write_manifest(entries: Sequence[ManifestEntry], path: str) -> str:
    Path(path).write_text("".join(entry.to_tsv() + "\n" for entry in entries))
    return path


def read_manifest(path: str) -> List[ManifestEntry]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise DataError(f"cannot read manifest {path}: {e}")
    return [ManifestEntry.from_tsv(line) for line in lines if line.strip()]
