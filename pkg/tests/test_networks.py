"""
Generator / discriminator tests: shapes per stage, parameter tallies, the
fade-in endpoints and which parameters are active per phase.
"""

import numpy as np
import pytest

from vgan.core.errors import ShapeError
from vgan.core.gradcheck import grad_check
from vgan.core.tensor import Tensor, no_grad
from vgan.core import ops
from vgan.networks import (
    StageConfig, build_discriminator, build_generator, discriminator_forward,
    discriminator_parameter_count, generator_forward, generator_parameter_count
)
from vgan.networks.stage import is_active, name_stage, parse_name, resolution_for, stage_for_resolution
from vgan.nn.layers import downsample_avg_2x, upsample_nearest_2x


def _nets(stage: int, filters: int = 4, latent: int = 8, seed: int = 3):
    cfg = StageConfig(stage, filters, latent)
    return (build_generator(cfg, np.random.default_rng([seed, 1])),
            build_discriminator(cfg, np.random.default_rng([seed, 2])))


def test_resolution_law():
    assert [resolution_for(s) for s in range(4)] == [4, 8, 16, 32]
    assert stage_for_resolution(32) == 3
    with pytest.raises(ShapeError):
        stage_for_resolution(24)


@pytest.mark.parametrize("stage", range(4))
def test_output_shapes_per_stage(stage):
    weights_g, weights_d = _nets(stage)
    resolution = 4 * 2 ** stage
    with no_grad():
        z = Tensor(np.random.default_rng(stage).standard_normal((2, 8)).astype(np.float32))
        volume = generator_forward(weights_g, z, stage)
        score = discriminator_forward(weights_d, volume, stage)
    assert volume.shape == (2, 1, resolution, resolution, resolution)
    assert score.shape == (2, 1)
    assert np.all(np.isfinite(volume.data)) and np.all(np.isfinite(score.data))


@pytest.mark.parametrize("stage,filters,latent", [(0, 8, 8), (1, 8, 16), (2, 4, 8), (3, 128, 128)])
def test_parameter_tallies_match_built_weights(stage, filters, latent):
    cfg = StageConfig(stage, filters, latent)
    if filters == 128:
        assert generator_parameter_count(cfg) == 4_154_756
        assert discriminator_parameter_count(cfg) == 3_110_145
        return
    weights_g, weights_d = _nets(stage, filters, latent)
    assert weights_g.parameter_count() == generator_parameter_count(cfg)
    assert weights_d.parameter_count() == discriminator_parameter_count(cfg)


def test_build_is_deterministic_per_seed():
    first_g, first_d = _nets(1, seed=9)
    second_g, second_d = _nets(1, seed=9)
    other_g, _ = _nets(1, seed=10)
    assert first_g.digest() == second_g.digest()
    assert first_d.digest() == second_d.digest()
    assert first_g.digest() != other_g.digest()


def test_biases_start_at_zero_and_weights_are_standard_normal():
    weights_g, _ = _nets(1, filters=8)
    for name, tensor in weights_g.items():
        if name.endswith(".bias"):
            assert not np.any(tensor.data)
    dense = weights_g["g.base.dense.weight"].data
    assert abs(float(dense.mean())) < 0.05
    assert abs(float(dense.std()) - 1.0) < 0.05


@pytest.mark.parametrize("stage", [1, 2])
def test_generator_fade_start_equals_previous_stage_upsampled(stage):
    weights_g, _ = _nets(stage)
    z = Tensor(np.random.default_rng(5).standard_normal((2, 8)).astype(np.float32))
    with no_grad():
        faded = generator_forward(weights_g, z, stage, alpha=0.0)
        previous = upsample_nearest_2x(generator_forward(weights_g, z, stage - 1, alpha=1.0))
    np.testing.assert_array_equal(faded.data, previous.data)


@pytest.mark.parametrize("stage", [1, 2])
def test_discriminator_fade_start_equals_previous_stage_on_downsampled_input(stage):
    _, weights_d = _nets(stage)
    resolution = resolution_for(stage)
    x = Tensor(np.random.default_rng(6).uniform(-1, 1, (3, 1, resolution, resolution, resolution))
               .astype(np.float32))
    with no_grad():
        faded = discriminator_forward(weights_d, x, stage, alpha=0.0)
        previous = discriminator_forward(weights_d, downsample_avg_2x(x), stage - 1, alpha=1.0)
    np.testing.assert_array_equal(faded.data, previous.data)


def test_generator_rejects_bad_latents_and_stages():
    weights_g, _ = _nets(1)
    with pytest.raises(ShapeError):
        generator_forward(weights_g, Tensor(np.zeros((2, 5))), 0)
    with pytest.raises(ShapeError):
        generator_forward(weights_g, Tensor(np.zeros((2, 8))), 2)
    with pytest.raises(ValueError):
        generator_forward(weights_g, Tensor(np.zeros((2, 8))), 1, alpha=-0.1)


def test_discriminator_rejects_wrong_resolution():
    _, weights_d = _nets(1)
    with pytest.raises(ShapeError):
        discriminator_forward(weights_d, Tensor(np.zeros((1, 1, 4, 4, 4))), 1)


def test_canonical_names_and_active_sets():
    weights_g, weights_d = _nets(2)
    assert parse_name("g.block2.conv1.weight")["block_stage"] == "2"
    assert name_stage("d.from_voxel1.bias") == 1
    with pytest.raises(ValueError):
        parse_name("g.block.conv1.weight")

    stabilizing = weights_g.active_names(1, fading=False)
    assert "g.to_voxel1.weight" in stabilizing
    assert "g.to_voxel0.weight" not in stabilizing
    assert "g.block2.conv1.weight" not in stabilizing

    fading = weights_d.active_names(2, fading=True)
    assert "d.from_voxel1.weight" in fading and "d.from_voxel2.weight" in fading
    assert "d.from_voxel0.weight" not in fading
    assert is_active("d.final.dense.weight", 0, False)


def test_only_active_parameters_receive_gradients():
    from vgan.core.tensor import Tape, backward

    weights_g, _ = _nets(2)
    weights_g.set_trainable(weights_g.active_names(1, fading=False))
    with Tape() as tape:
        z = Tensor(np.random.default_rng(1).standard_normal((2, 8)).astype(np.float32))
        backward(ops.mean(generator_forward(weights_g, z, 1)), tape=tape)
    assert weights_g["g.block1.conv2.weight"].grad is not None
    assert np.any(weights_g["g.block1.conv2.weight"].grad)
    assert weights_g["g.block2.conv1.weight"].grad is None
    assert weights_g["g.to_voxel0.weight"].grad is None


def test_stage_zero_networks_pass_grad_check():
    weights_g, weights_d = _nets(0, filters=2, latent=4)
    latents = np.random.default_rng(2).standard_normal((2, 4))
    volumes = np.random.default_rng(3).uniform(-1, 1, (2, 1, 4, 4, 4))

    def generator_total(z):
        return ops.sum(generator_forward(weights_g, z, 0))

    def discriminator_total(x):
        return ops.sum(discriminator_forward(weights_d, x, 0))

    assert grad_check(generator_total, Tensor(latents), step=1e-5) < 1e-2
    assert grad_check(discriminator_total, Tensor(volumes), step=1e-5) < 1e-2


@pytest.mark.parametrize("stage", [0, 2])
def test_distinct_latents_give_distinct_volumes(stage):
    weights_g, _ = _nets(stage)
    z = np.random.default_rng(8).standard_normal((2, 8)).astype(np.float32)
    with no_grad():
        volumes = generator_forward(weights_g, Tensor(z), stage).data
    assert not np.allclose(volumes[0], volumes[1])
    assert np.max(np.abs(volumes[0] - volumes[1])) > 1e-4


def test_generator_samples_do_not_depend_on_the_rest_of_the_batch():
    weights_g, _ = _nets(1)
    z = np.random.default_rng(10).standard_normal((3, 8)).astype(np.float32)
    changed = z.copy()
    changed[1:] = np.random.default_rng(11).standard_normal((2, 8))
    with no_grad():
        first = generator_forward(weights_g, Tensor(z), 1, alpha=0.5).data[0]
        again = generator_forward(weights_g, Tensor(changed), 1, alpha=0.5).data[0]
    np.testing.assert_allclose(first, again, rtol=1e-6, atol=1e-7)
