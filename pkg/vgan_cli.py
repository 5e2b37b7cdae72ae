"""
vgan CLI - Pipeline coordinator

Owns one resolved configuration and runs the pipeline commands against it:
synthdata -> preprocess -> augment -> train -> generate, plus selftest and
checkpoint inspection. Every command echoes resolved_config.toml beside its
outputs.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from termcolor import colored

from vgan.augment import DatasetAugmenter, MANIFEST_NAME, check_unique_stems, read_manifest, volume_stem
from vgan.config import get_config, load_run_config, write_resolved_config
from vgan.core.base import Component
from vgan.core.errors import DataError, ShapeError
from vgan.diagnostics import SelfTest
from vgan.networks import StageConfig, discriminator_parameter_count, generator_parameter_count
from vgan.training import (
    CheckpointSink, GENERATION_STREAM, VolumePyramid, diversity_report, generate_volumes,
    load_checkpoint, run_schedule
)
from vgan.volio import (
    Volume, center_crop, downsample_by_2, export_montage, export_slices, normalize_intensity,
    read_nifti, synth_phantom, upsample_to, write_nifti
)


SPLIT_NAME = "split.tsv"
TRAIN_LOG_NAME = "train_log.tsv"
SYNTH_STREAM = 5


class PipelineCLI(Component):
    """Main coordinator for the vgan pipeline"""

    def __init__(self, config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None,
                 preset: Optional[str] = None, require_seed: bool = True):
        raw = get_config(config_path, overrides, preset)
        if not require_seed and raw.get("seed") is None:
            raw = dict(raw, seed=0)
        self.run = load_run_config(raw)
        super().__init__(self.run.to_dict())

    # Helpers

    def _echo_config(self, directory: Path):
        path = write_resolved_config(self.run.to_dict(), str(directory))
        self._log_debug(f"Resolved configuration written to {path}")

    def _volume_files(self, directory: Path) -> List[Path]:
        if not directory.is_dir():
            raise DataError(f"input directory {directory} does not exist")
        return sorted(path for path in directory.glob(self.run.pattern) if path.is_file())

    def _split_entries(self) -> List[Dict[str, str]]:
        split = self.run.processed_dir / SPLIT_NAME
        if not split.exists():
            raise DataError(f"{split} not found: run 'preprocess' first")
        entries = []
        for line in split.read_text().splitlines():
            if line.strip():
                path, subset = line.split("\t")
                entries.append({"path": path, "subset": subset})
        return entries

    # Commands

    def cmd_synthdata(self, out_dir: Optional[str] = None) -> List[str]:
        """Write synth_<i>.nii.gz phantoms with the configured raw extents"""
        target = Path(out_dir or self.run.data_dir)
        target.mkdir(parents=True, exist_ok=True)
        written = []
        for index in range(self.run.synth_count):
            rng = np.random.default_rng([self.run.seed, SYNTH_STREAM, index])
            volume = synth_phantom(rng, self.run.synth_dims, self.run.synth_voxel_size)
            written.append(write_nifti(volume, str(target / f"synth_{index:03d}.nii.gz")))
        self._echo_config(target)
        self._log_success(f"Wrote {len(written)} phantoms of {tuple(self.run.synth_dims)} to {target}")
        return written

    def cmd_preprocess(self, in_dir: Optional[str] = None) -> str:
        """Downsample, crop and normalize every readable volume; write split.tsv"""
        source_dir = Path(in_dir or self.run.data_dir)
        files = self._volume_files(source_dir)
        if not files:
            raise DataError(f"no volumes matching '{self.run.pattern}' in {source_dir}")
        check_unique_stems([str(path) for path in files])

        out_dir = self.run.processed_dir
        out_dir.mkdir(parents=True, exist_ok=True)
        processed = []
        for path in files:
            try:
                volume = read_nifti(str(path))
            except DataError as e:
                self._log_warning(f"Skipping unreadable file: {e}")
                continue
            try:
                volume = center_crop(downsample_by_2(volume), self.run.target_dims)
            except ShapeError as e:
                raise DataError(f"{path}: {e}")
            volume = normalize_intensity(volume)
            processed.append(write_nifti(volume, str(out_dir / f"{volume_stem(str(path))}.nii.gz")))
            self._log_debug(f"{path.name} -> {volume.dims}")

        if not processed:
            raise DataError(f"none of the {len(files)} files in {source_dir} could be read")
        if self.run.eval_count >= len(processed):
            raise DataError(f"eval_count {self.run.eval_count} leaves no training volumes "
                            f"out of {len(processed)}")

        processed.sort(key=lambda item: Path(item).name)
        boundary = len(processed) - self.run.eval_count
        split = out_dir / SPLIT_NAME
        split.write_text("".join(f"{path}\t{'train' if index < boundary else 'eval'}\n"
                                 for index, path in enumerate(processed)))
        self._echo_config(out_dir)
        self._log_success(f"Preprocessed {len(processed)} volumes ({boundary} train, "
                          f"{self.run.eval_count} eval) -> {split}")
        return str(split)

    def cmd_augment(self) -> str:
        """k rotated copies of every training volume in split.tsv"""
        sources = [entry["path"] for entry in self._split_entries() if entry["subset"] == "train"]
        for source in sources:
            if not Path(source).exists():
                raise DataError(f"training volume {source} listed in {SPLIT_NAME} is missing")
        augmenter = DatasetAugmenter(self.run.augment_k, self.run.augment_sigma, self.run.augment_fill,
                                     self.run.augment_workers)
        augmenter.build(sources, str(self.run.augmented_dir), self.run.seed)
        self._echo_config(self.run.augmented_dir)
        return str(self.run.augmented_dir / MANIFEST_NAME)

    def _describe_plan(self):
        run = self.run
        cfg = StageConfig(run.target_stage, run.n_filters, run.latent_dim)
        schedule = run.schedule()
        self._log(f"Target: stage {run.target_stage} ({cfg.resolution}^3), F={run.n_filters}, "
                  f"latent {run.latent_dim}")
        self._log(f"Parameters: G {generator_parameter_count(cfg):,} / "
                  f"D {discriminator_parameter_count(cfg):,}")
        self._log(f"Reals per phase: {run.reals_per_phase:,}; batch sizes {run.batch_sizes}")
        self._log(f"Learning rates: {run.lr_table}; late {run.late_lr} over the last "
                  f"{run.late_fraction:.0%} of stage {run.target_stage}")
        self._log(f"Loss: lambda {run.gp_lambda}, drift {run.drift}; Adam betas "
                  f"({run.beta1}, {run.beta2}), eps {run.epsilon}")
        self._log(f"Planned steps: {schedule.planned_steps():,}")

    def cmd_train(self, dry_run: bool = False, resume: Optional[str] = None,
                  max_steps: Optional[int] = None):
        """Run the progressive schedule over the augmented dataset"""
        self._describe_plan()
        if dry_run:
            self._log_success("Dry run: configuration is valid, nothing trained")
            return None

        manifest = self.run.augmented_dir / MANIFEST_NAME
        if not manifest.exists():
            raise DataError(f"{manifest} not found: run 'augment' first")
        sources = [entry.output for entry in read_manifest(str(manifest))]
        missing = [source for source in sources if not Path(source).exists()]
        if missing:
            raise DataError(f"augmented volume {missing[0]} is missing ({len(missing)} in total)")

        sink = CheckpointSink(str(self.run.checkpoint_dir))
        if resume == "latest":
            resume = str(sink.latest_path)
        pyramid = VolumePyramid.build(sources, self.run.target_stage, str(self.run.cache_dir))
        self._echo_config(self.run.out_path)
        final = run_schedule(pyramid, self.run, sink, log_path=str(self.run.out_path / TRAIN_LOG_NAME),
                             resume=resume, max_steps=self.run.max_steps if max_steps is None else max_steps)
        self._log_success(f"Training stopped at step {final.step}: latest checkpoint {sink.latest_path}")
        return final

    def cmd_generate(self, checkpoint: Optional[str] = None) -> List[str]:
        """Sample volumes from a checkpoint; writes .nii.gz, three central slices and a montage each"""
        path = checkpoint or str(self.run.checkpoint_dir / "latest.vgan")
        ckpt = load_checkpoint(path)
        schedule = ckpt.schedule
        rng = np.random.default_rng([self.run.seed, GENERATION_STREAM])
        samples = generate_volumes(ckpt.weights_g, schedule.stage, self.run.generate_count, rng,
                                   batch=self.run.generate_batch, alpha=schedule.alpha,
                                   use_equalized=bool(ckpt.model.get("use_equalized", True)))

        out_dir = self.run.generated_dir
        montage_dir = out_dir / "montage"
        montage_dir.mkdir(parents=True, exist_ok=True)
        resolution = samples.shape[-1]
        target = self.run.upsample_target
        written = []
        for index, data in enumerate(samples):
            volume = Volume(data=data, normalized=True)
            if target and target != resolution:
                volume = upsample_to(volume, (target, target, target))
            stem = f"sample_{index:03d}"
            written.append(write_nifti(volume, str(out_dir / f"{stem}.nii.gz")))
            export_slices(volume, str(out_dir / stem))
            export_montage(volume, str(montage_dir / f"{stem}.pgm"), self.run.montage_slices)

        report = diversity_report(samples)
        report.update({"checkpoint": path, "step": ckpt.step, "stage": schedule.stage, "resolution": resolution})
        (out_dir / "diversity.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        self._echo_config(out_dir)
        level = "warning" if report["count"] > 1 and report["mean_voxel_std"] < 0.01 else "success"
        self._log(f"Generated {len(written)} volumes at {resolution}^3 -> {out_dir} "
                  f"(mean per-voxel std {report['mean_voxel_std']:.4f}, range "
                  f"[{report['value_min']:.3f}, {report['value_max']:.3f}])", level)
        return written

    def cmd_selftest(self, conv_kernel=None) -> Dict[str, Any]:
        report = SelfTest(self.config.get("selftest", {}), seed=self.run.seed, conv_kernel=conv_kernel).run()
        if report["passed"]:
            self._log_success("All self-test suites passed")
        else:
            failed = [suite["name"] for suite in report["suites"] if not suite["passed"]]
            self._log_error(f"Self-test failed: {', '.join(failed)}")
        return report

    def cmd_info(self, checkpoint: str) -> Dict[str, Any]:
        summary = load_checkpoint(checkpoint).summary()
        print(colored(f"Checkpoint: {checkpoint}", "cyan", attrs=["bold"]))
        for key, value in summary.items():
            print(colored(f"  {key}: {value}", "green"))
        return summary

    def get_status(self) -> Dict[str, Any]:
        status = super().get_status()
        status.update({"out_dir": self.run.out_dir, "seed": self.run.seed})
        return status
