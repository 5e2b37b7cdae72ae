"""
Progressive Schedule

State machine over (stage, phase, reals shown). Stage 0 only stabilizes;
every later stage fades in and then stabilizes. The stage advances once the
stabilize phase has shown reals_per_phase volumes.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from vgan.networks.stage import resolution_for


FADE_IN = "fade_in"
STABILIZE = "stabilize"

FULL_SCALE_LR_TABLE = [0.0003, 0.0003, 0.0006, 0.0006]
FULL_SCALE_LATE_LR = (0.0001, 0.25)
DEFAULT_BATCH_SIZES = [16, 16, 8, 4]


@dataclass
class TrainSchedule:
    """Where training stands and which rates apply there"""

    target_stage: int
    reals_per_phase: int = 1_000_000
    lr_table: List[float] = field(default_factory=lambda: list(FULL_SCALE_LR_TABLE))
    late_lr: Optional[Tuple[float, float]] = FULL_SCALE_LATE_LR
    batch_sizes: List[int] = field(default_factory=lambda: list(DEFAULT_BATCH_SIZES))
    stage: int = 0
    phase: str = STABILIZE
    reals_shown_in_phase: int = 0
    finished: bool = False

    def __post_init__(self):
        if self.target_stage < 0:
            raise ValueError(f"target_stage must be >= 0, got {self.target_stage}")
        if self.reals_per_phase < 1:
            raise ValueError(f"reals_per_phase must be >= 1, got {self.reals_per_phase}")
        if not self.lr_table or any(rate <= 0 for rate in self.lr_table):
            raise ValueError(f"lr_table must hold positive rates, got {self.lr_table}")
        if not self.batch_sizes or any(size < 1 for size in self.batch_sizes):
            raise ValueError(f"batch_sizes must hold positive sizes, got {self.batch_sizes}")
        if self.late_lr is not None:
            rate, fraction = self.late_lr
            if rate <= 0 or not 0.0 < fraction <= 1.0:
                raise ValueError(f"late_lr must be (rate > 0, fraction in (0, 1]), got {self.late_lr}")
            self.late_lr = (float(rate), float(fraction))
        if self.phase not in (FADE_IN, STABILIZE):
            raise ValueError(f"unknown phase '{self.phase}'")
        if self.stage == 0 and self.phase == FADE_IN:
            raise ValueError("stage 0 has no fade_in phase")

    @property
    def fading(self) -> bool:
        return self.phase == FADE_IN

    @property
    def alpha(self) -> float:
        if not self.fading:
            return 1.0
        return min(1.0, self.reals_shown_in_phase / self.reals_per_phase)

    @property
    def resolution(self) -> int:
        return resolution_for(self.stage)

    @property
    def batch_size(self) -> int:
        return self.batch_sizes[min(self.stage, len(self.batch_sizes) - 1)]

    @property
    def in_late_phase(self) -> bool:
        """Final part of the target stage's stabilize phase"""
        if self.late_lr is None or self.stage != self.target_stage or self.fading:
            return False
        _, fraction = self.late_lr
        return self.reals_shown_in_phase >= (1.0 - fraction) * self.reals_per_phase

    @property
    def learning_rate(self) -> float:
        if self.in_late_phase:
            return self.late_lr[0]
        return self.lr_table[min(self.stage, len(self.lr_table) - 1)]

    def advance(self, count: int) -> Optional[str]:
        """Count shown reals; returns 'phase_end' or 'stage_start' on a transition"""
        if self.finished:
            raise RuntimeError("schedule already finished")
        if count < 1:
            raise ValueError(f"advance needs a positive count, got {count}")
        self.reals_shown_in_phase += count
        if self.reals_shown_in_phase < self.reals_per_phase:
            return None

        self.reals_shown_in_phase = 0
        if self.fading:
            self.phase = STABILIZE
            return "phase_end"
        if self.stage >= self.target_stage:
            self.finished = True
            return "phase_end"
        self.stage += 1
        self.phase = FADE_IN
        return "stage_start"

    def planned_steps(self) -> int:
        """Steps a fresh schedule runs to completion (whole batches per phase)"""
        total = 0
        for stage in range(self.target_stage + 1):
            batch = self.batch_sizes[min(stage, len(self.batch_sizes) - 1)]
            phases = 1 if stage == 0 else 2
            total += phases * -(-self.reals_per_phase // batch)
        return total

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target_stage": self.target_stage,
            "reals_per_phase": self.reals_per_phase,
            "lr_table": list(self.lr_table),
            "late_lr": list(self.late_lr) if self.late_lr is not None else None,
            "batch_sizes": list(self.batch_sizes),
            "stage": self.stage,
            "phase": self.phase,
            "reals_shown_in_phase": self.reals_shown_in_phase,
            "finished": self.finished,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainSchedule":
        late = data.get("late_lr")
        return cls(
            target_stage=int(data["target_stage"]),
            reals_per_phase=int(data["reals_per_phase"]),
            lr_table=[float(rate) for rate in data["lr_table"]],
            late_lr=tuple(late) if late is not None else None,
            batch_sizes=[int(size) for size in data["batch_sizes"]],
            stage=int(data["stage"]),
            phase=str(data["phase"]),
            reals_shown_in_phase=int(data["reals_shown_in_phase"]),
            finished=bool(data.get("finished", False)),
        )

    def describe(self) -> str:
        return (f"stage {self.stage} ({self.resolution}^3) {self.phase} "
                f"{self.reals_shown_in_phase}/{self.reals_per_phase} alpha={self.alpha:.3f}")
