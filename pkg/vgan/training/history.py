"""
Step History

Keeps the recent step reports in memory and appends every report to the
tab-separated training log (step, stage, alpha, loss_d, loss_g).
"""

from dataclasses import dataclass, asdict
from datetime import datetime
from pathlib import Path
from typing import Dict, Any, List, Optional


@dataclass
class StepReport:
    """Outcome of one discriminator + generator update"""

    step: int
    stage: int
    alpha: float
    loss_d: float
    loss_g: float
    d_real_mean: float
    d_fake_mean: float
    gradient_penalty: float = 0.0
    transition: Optional[str] = None

    def to_tsv(self) -> str:
        return f"{self.step}\t{self.stage}\t{self.alpha:.6f}\t{self.loss_d:.8g}\t{self.loss_g:.8g}"


def parse_tsv_line(line: str) -> Dict[str, Any]:
    step, stage, alpha, loss_d, loss_g = line.rstrip("\n").split("\t")
    return {"step": int(step), "stage": int(stage), "alpha": float(alpha),
            "loss_d": float(loss_d), "loss_g": float(loss_g)}


class StepHistory:
    """Manages the step log and a bounded window of recent reports"""

    def __init__(self, config: Dict[str, Any], log_path: Optional[str] = None):
        self.config = config
        self.max_history_size = config.get('history_window', 200)
        self.log_path = Path(log_path) if log_path else None
        self.reports: List[StepReport] = []
        self.session_start_time = datetime.now()
        self.total_steps = 0

    def add(self, report: StepReport):
        """Record a report and append it to the log"""
        self.reports.append(report)
        self.total_steps += 1
        if len(self.reports) > self.max_history_size:
            self.reports = self.reports[-self.max_history_size:]
        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, 'a') as f:
                f.write(report.to_tsv() + "\n")

    def truncate_after(self, step: int):
        """Drop logged lines past step (a resumed run rewrites them)"""
        if self.log_path is None or not self.log_path.exists():
            return
        kept = [line for line in self.log_path.read_text().splitlines(keepends=True)
                if line.strip() and parse_tsv_line(line)["step"] <= step]
        self.log_path.write_text("".join(kept))

    def get_recent(self, limit: int = 10) -> List[StepReport]:
        return self.reports[-limit:] if self.reports else []

    def get_last(self) -> Optional[StepReport]:
        return self.reports[-1] if self.reports else None

    def read_log(self) -> List[Dict[str, Any]]:
        if self.log_path is None or not self.log_path.exists():
            return []
        return [parse_tsv_line(line) for line in self.log_path.read_text().splitlines() if line.strip()]

    def get_statistics(self, window: int = 50) -> Dict[str, Any]:
        """Mean losses over the recent window"""
        recent = self.get_recent(window)
        duration = (datetime.now() - self.session_start_time).total_seconds()
        if not recent:
            return {'steps': self.total_steps, 'session_duration': duration}
        return {
            'steps': self.total_steps,
            'session_duration': duration,
            'mean_loss_d': sum(r.loss_d for r in recent) / len(recent),
            'mean_loss_g': sum(r.loss_g for r in recent) / len(recent),
            'mean_d_real': sum(r.d_real_mean for r in recent) / len(recent),
            'mean_d_fake': sum(r.d_fake_mean for r in recent) / len(recent),
            'last': asdict(recent[-1]),
        }
