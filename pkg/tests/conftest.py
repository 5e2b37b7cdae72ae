"""
Shared fixtures: a seeded generator and tiny run configurations that train
in seconds on a CPU.
"""

import copy
from pathlib import Path

import numpy as np
import pytest
import toml

from vgan.config.run_config import load_run_config


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="also run desk-scale training runs")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale training runs, skipped without --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


TINY_CONFIG = {
    "seed": 7,
    "data": {"target_dims": [8, 8, 8], "eval_count": 1},
    "synthdata": {"count": 4, "dims": [18, 21, 18], "voxel_size": [2.0, 2.0, 2.0]},
    "augment": {"k": 2, "sigma": 10.0},
    "model": {"target_stage": 1, "n_filters": 4, "latent_dim": 8},
    "schedule": {"reals_per_phase": 16, "batch_sizes": [4, 4], "lr_table": [0.001, 0.001],
                 "late_fraction": 0.0},
    "training": {"checkpoint_every": 5, "log_every": 0, "prefetch": 1},
    "generate": {"count": 2, "batch": 2, "upsample_target": 16, "montage_slices": 4},
    "selftest": {"grad_cases": 2, "conv_cases": 3},
}


def merge(base, override):
    result = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = merge(result[key], value)
        else:
            result[key] = value
    return result


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(tmp_path):
    """Nested config dict rooted in tmp_path; returns a builder taking overrides"""
    def build(**sections):
        config = merge(TINY_CONFIG, {"paths": {"data_dir": str(tmp_path / "raw"),
                                               "out_dir": str(tmp_path / "run")}})
        return merge(config, sections)
    return build


@pytest.fixture
def tiny_run(tiny_config):
    return load_run_config(tiny_config())


@pytest.fixture
def config_file(tmp_path, tiny_config):
    """tiny_config written as a TOML file"""
    def write(**sections) -> str:
        path = Path(tmp_path) / "vgan.toml"
        path.write_text(toml.dumps(tiny_config(**sections)))
        return str(path)
    return write
