"""
Run Configuration

Typed view of the merged TOML configuration. validate() gathers every
problem before raising, so a bad file is reported in one go.
"""

from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from vgan.core.errors import ConfigError
from vgan.networks.stage import MAX_FILTERS, resolution_for
from vgan.training.schedule import TrainSchedule


@dataclass
class RunConfig:
    seed: Optional[int]
    data_dir: str = "data/raw"
    out_dir: str = "runs/default"

    target_dims: Tuple[int, int, int] = (128, 128, 128)
    eval_count: int = 0
    pattern: str = "*.nii*"

    synth_count: int = 8
    synth_dims: Tuple[int, int, int] = (260, 311, 260)
    synth_voxel_size: Tuple[float, float, float] = (0.7, 0.7, 0.7)

    augment_k: int = 10
    augment_sigma: float = 10.0
    augment_fill: float = -1.0
    augment_workers: int = 1

    target_stage: int = 3
    n_filters: int = 128
    latent_dim: int = 128
    use_equalized: bool = True

    reals_per_phase: int = 1_000_000
    lr_table: List[float] = field(default_factory=lambda: [0.0003, 0.0003, 0.0006, 0.0006])
    batch_sizes: List[int] = field(default_factory=lambda: [16, 16, 8, 4])
    late_lr: float = 0.0001
    late_fraction: float = 0.25

    gp_lambda: float = 10.0
    drift: float = 0.001

    beta1: float = 0.0
    beta2: float = 0.99
    epsilon: float = 1e-8

    checkpoint_every: int = 1000
    log_every: int = 100
    prefetch: int = 2
    max_steps: int = 0
    update_generator: bool = True

    generate_count: int = 3
    generate_batch: int = 4
    upsample_target: int = 128
    montage_slices: int = 16

    selftest_grad_cases: int = 20
    selftest_conv_cases: int = 50

    # section -> (toml key -> attribute)
    SECTIONS = {
        "paths": {"data_dir": "data_dir", "out_dir": "out_dir"},
        "data": {"target_dims": "target_dims", "eval_count": "eval_count", "pattern": "pattern"},
        "synthdata": {"count": "synth_count", "dims": "synth_dims", "voxel_size": "synth_voxel_size"},
        "augment": {"k": "augment_k", "sigma": "augment_sigma", "fill": "augment_fill",
                    "workers": "augment_workers"},
        "model": {"target_stage": "target_stage", "n_filters": "n_filters", "latent_dim": "latent_dim",
                  "use_equalized": "use_equalized"},
        "schedule": {"reals_per_phase": "reals_per_phase", "lr_table": "lr_table",
                     "batch_sizes": "batch_sizes", "late_lr": "late_lr", "late_fraction": "late_fraction"},
        "loss": {"gp_lambda": "gp_lambda", "drift": "drift"},
        "optimizer": {"beta1": "beta1", "beta2": "beta2", "epsilon": "epsilon"},
        "training": {"checkpoint_every": "checkpoint_every", "log_every": "log_every",
                     "prefetch": "prefetch", "max_steps": "max_steps",
                     "update_generator": "update_generator"},
        "generate": {"count": "generate_count", "batch": "generate_batch",
                     "upsample_target": "upsample_target", "montage_slices": "montage_slices"},
        "selftest": {"grad_cases": "selftest_grad_cases", "conv_cases": "selftest_conv_cases"},
    }

    @classmethod
    def from_dict(cls, config: Dict[str, Any]) -> "RunConfig":
        """Build from the merged section dict; type problems are collected, not raised one by one"""
        values: Dict[str, Any] = {"seed": config.get("seed")}
        problems = []
        for section, keys in cls.SECTIONS.items():
            entries = config.get(section, {})
            if not isinstance(entries, dict):
                problems.append(f"[{section}] must be a table")
                continue
            for key, value in entries.items():
                if key not in keys:
                    problems.append(f"[{section}] unknown key '{key}'")
                    continue
                values[keys[key]] = value

        defaults = cls(seed=None)
        for name, value in list(values.items()):
            if name == "seed":
                continue
            default = getattr(defaults, name)
            try:
                values[name] = _coerce(value, default)
            except (TypeError, ValueError):
                problems.append(f"{name}: cannot use {value!r} (expected {type(default).__name__})")
                values.pop(name)
        if problems:
            raise ConfigError(problems)
        return cls(**values)

    def validate(self) -> "RunConfig":
        problems = []
        if self.seed is None:
            problems.append("seed is required (set 'seed' in the config or pass --seed)")
        elif not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2 ** 64:
            problems.append(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

        if len(self.target_dims) != 3 or any(extent < 1 for extent in self.target_dims):
            problems.append(f"data.target_dims must be three positive extents, got {self.target_dims}")
        if self.eval_count < 0:
            problems.append(f"data.eval_count must be >= 0, got {self.eval_count}")
        if len(self.synth_dims) != 3 or any(extent < 2 for extent in self.synth_dims):
            problems.append(f"synthdata.dims must be three extents >= 2, got {self.synth_dims}")
        if self.synth_count < 1:
            problems.append(f"synthdata.count must be >= 1, got {self.synth_count}")

        if self.augment_k < 1:
            problems.append(f"augment.k must be >= 1, got {self.augment_k}")
        if self.augment_sigma < 0:
            problems.append(f"augment.sigma must be >= 0, got {self.augment_sigma}")
        if self.augment_workers < 1:
            problems.append(f"augment.workers must be >= 1, got {self.augment_workers}")

        if self.target_stage < 0:
            problems.append(f"model.target_stage must be >= 0, got {self.target_stage}")
        else:
            resolution = resolution_for(self.target_stage)
            if len(set(self.target_dims)) != 1 or self.target_dims[0] < resolution or \
                    not _is_pow2_multiple(self.target_dims[0], resolution):
                problems.append(f"data.target_dims {tuple(self.target_dims)} must be a cube of side "
                                f"{resolution} * 2^k to train up to stage {self.target_stage}")
            if self.upsample_target and self.upsample_target % resolution:
                problems.append(f"generate.upsample_target {self.upsample_target} is not a multiple of "
                                f"{resolution}")
        if not 1 <= self.n_filters <= MAX_FILTERS:
            problems.append(f"model.n_filters must be in [1, {MAX_FILTERS}], got {self.n_filters}")
        if self.latent_dim < 1:
            problems.append(f"model.latent_dim must be >= 1, got {self.latent_dim}")

        if self.reals_per_phase < 1:
            problems.append(f"schedule.reals_per_phase must be >= 1, got {self.reals_per_phase}")
        if not self.lr_table or any(rate <= 0 for rate in self.lr_table):
            problems.append(f"schedule.lr_table must hold positive rates, got {self.lr_table}")
        if not self.batch_sizes or any(size < 1 for size in self.batch_sizes):
            problems.append(f"schedule.batch_sizes must hold positive sizes, got {self.batch_sizes}")
        if not 0.0 <= self.late_fraction <= 1.0:
            problems.append(f"schedule.late_fraction must be in [0, 1], got {self.late_fraction}")
        if self.late_fraction > 0 and self.late_lr <= 0:
            problems.append(f"schedule.late_lr must be positive, got {self.late_lr}")

        if self.gp_lambda < 0:
            problems.append(f"loss.gp_lambda must be >= 0, got {self.gp_lambda}")
        if self.drift < 0:
            problems.append(f"loss.drift must be >= 0, got {self.drift}")
        if not 0.0 <= self.beta1 < 1.0 or not 0.0 <= self.beta2 < 1.0:
            problems.append(f"optimizer betas must be in [0, 1), got ({self.beta1}, {self.beta2})")
        if self.epsilon <= 0:
            problems.append(f"optimizer.epsilon must be positive, got {self.epsilon}")

        for name in ("checkpoint_every", "log_every", "prefetch", "max_steps"):
            if getattr(self, name) < 0:
                problems.append(f"training.{name} must be >= 0, got {getattr(self, name)}")
        if self.generate_count < 1 or self.generate_batch < 1:
            problems.append("generate.count and generate.batch must be >= 1")
        if self.selftest_grad_cases < 1 or self.selftest_conv_cases < 1:
            problems.append("selftest case counts must be >= 1")

        if problems:
            raise ConfigError(problems)
        return self

    def schedule(self) -> TrainSchedule:
        late = (self.late_lr, self.late_fraction) if self.late_fraction > 0 else None
        return TrainSchedule(target_stage=self.target_stage, reals_per_phase=self.reals_per_phase,
                             lr_table=list(self.lr_table), late_lr=late, batch_sizes=list(self.batch_sizes))

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    @property
    def processed_dir(self) -> Path:
        return self.out_path / "processed"

    @property
    def augmented_dir(self) -> Path:
        return self.out_path / "augmented"

    @property
    def checkpoint_dir(self) -> Path:
        return self.out_path / "checkpoints"

    @property
    def cache_dir(self) -> Path:
        return self.out_path / "cache"

    @property
    def generated_dir(self) -> Path:
        return self.out_path / "generated"

    def to_dict(self) -> Dict[str, Any]:
        """Nested section form, as written to resolved_config.toml"""
        flat = asdict(self)
        nested: Dict[str, Any] = {"seed": self.seed} if self.seed is not None else {}
        for section, keys in self.SECTIONS.items():
            nested[section] = {key: _plain(flat[attribute]) for key, attribute in keys.items()}
        return nested


def _is_pow2_multiple(value: int, base: int) -> bool:
    if value % base:
        return False
    ratio = value // base
    return ratio & (ratio - 1) == 0


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return list(value)
    return value


def _coerce(value: Any, default: Any) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(value)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(value)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(value)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise TypeError(value)
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or len(value) != len(default):
            raise ValueError(value)
        return tuple(_coerce(item, default[0]) for item in value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)) or not value:
            raise ValueError(value)
        return [_coerce(item, default[0]) for item in value]
    return value


def load_run_config(config: Dict[str, Any]) -> RunConfig:
    """RunConfig.from_dict followed by validate()"""
    return RunConfig.from_dict(config).validate()
