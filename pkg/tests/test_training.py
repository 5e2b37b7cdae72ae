"""
Training tests: schedule arithmetic, Adam, the WGAN-GP terms, checkpoints,
batch order and bit-identical resumption.
"""

import numpy as np
import pytest

from vgan.core import ops
from vgan.core.errors import CheckpointError, DataError, NonFiniteError, ShapeError
from vgan.core.tensor import Tape, Tensor, grad
from vgan.networks import StageConfig, build_discriminator, build_generator
from vgan.training import (
    Checkpoint, CheckpointSink, LossSettings, OptimizerState, ProgressiveTrainer, TrainSchedule,
    VolumePyramid, adam_step, batch_indices, decode_checkpoint, diversity_report, encode_checkpoint,
    generate_volumes, generator_loss, gradient_penalty, interpolate, load_checkpoint, sample_latents,
    run_schedule, save_checkpoint, train_step, wgan_gp_losses
)
from vgan.training.checkpoint import FORMAT_VERSION
from vgan.training.data import upcoming_keys
from vgan.training.history import StepHistory, StepReport
from vgan.config.run_config import load_run_config
from vgan.volio import Volume, normalize_intensity, synth_phantom, write_nifti


# Schedule

def test_schedule_step_count_and_transitions():
    schedule = TrainSchedule(target_stage=2, reals_per_phase=64, batch_sizes=[4], late_lr=None)
    assert schedule.planned_steps() == 80
    steps, transitions = 0, []
    while not schedule.finished:
        event = schedule.advance(schedule.batch_size)
        steps += 1
        if event:
            transitions.append((steps, event))
    assert steps == 80
    assert transitions == [(16, "stage_start"), (32, "phase_end"), (48, "stage_start"),
                           (64, "phase_end"), (80, "phase_end")]


def test_alpha_ramps_linearly_during_fade_in():
    schedule = TrainSchedule(target_stage=1, reals_per_phase=64, batch_sizes=[4], late_lr=None)
    assert schedule.alpha == 1.0
    for _ in range(16):
        schedule.advance(4)
    assert schedule.stage == 1 and schedule.fading
    trace = []
    for _ in range(16):
        trace.append(schedule.alpha)
        schedule.advance(4)
    assert trace == [4 * k / 64 for k in range(16)]
    assert not schedule.fading and schedule.alpha == 1.0


def test_learning_rate_table_and_late_rate():
    schedule = TrainSchedule(target_stage=1, reals_per_phase=100, lr_table=[0.003],
                             late_lr=(0.001, 0.25), batch_sizes=[10])
    assert schedule.learning_rate == 0.003
    for _ in range(10 + 10 + 7):
        schedule.advance(10)
    assert (schedule.stage, schedule.phase, schedule.reals_shown_in_phase) == (1, "stabilize", 70)
    assert schedule.learning_rate == 0.003
    schedule.advance(10)
    assert schedule.learning_rate == 0.001


def test_schedule_rejects_bad_values():
    with pytest.raises(ValueError):
        TrainSchedule(target_stage=1, reals_per_phase=0)
    with pytest.raises(ValueError):
        TrainSchedule(target_stage=1, stage=0, phase="fade_in")
    finished = TrainSchedule(target_stage=0, reals_per_phase=1, batch_sizes=[1])
    finished.advance(1)
    with pytest.raises(RuntimeError):
        finished.advance(1)


def test_schedule_dict_round_trip():
    schedule = TrainSchedule(target_stage=2, reals_per_phase=32, batch_sizes=[8, 4])
    for _ in range(6):
        schedule.advance(schedule.batch_size)
    assert TrainSchedule.from_dict(schedule.to_dict()) == schedule


# Adam

def test_adam_matches_closed_form():
    param = Tensor(np.zeros(1, dtype=np.float64))
    state = OptimizerState(beta1=0.0, beta2=0.99, epsilon=1e-8)
    expected, v = 0.0, 0.0
    for t, g in enumerate([1.0, -2.0, 0.5], start=1):
        adam_step({"w": param}, {"w": np.array([g])}, state, lr=0.01)
        v = 0.99 * v + 0.01 * g * g
        expected -= 0.01 * g / (np.sqrt(v / (1 - 0.99 ** t)) + 1e-8)
        assert param.data[0] == pytest.approx(expected, rel=1e-12)
        if t == 1:
            assert param.data[0] == pytest.approx(-0.01, rel=1e-6)
    assert state.t == 3


def test_adam_reset_restarts_bias_correction():
    param = Tensor(np.ones(2, dtype=np.float64))
    state = OptimizerState()
    adam_step({"w": param}, {"w": np.ones(2)}, state, lr=0.1)
    state.reset()
    assert state.t == 0 and not state.m and not state.v


def test_adam_rejects_bad_input():
    param = Tensor(np.ones(2))
    with pytest.raises(ValueError):
        adam_step({"w": param}, {"w": np.ones(2)}, OptimizerState(), lr=0.0)
    with pytest.raises(ShapeError):
        adam_step({"w": param}, {"w": np.ones(3)}, OptimizerState(), lr=0.1)
    with pytest.raises(NonFiniteError):
        adam_step({"w": param}, {"w": np.array([1.0, np.nan])}, OptimizerState(), lr=0.1)


# Losses

def test_wgan_gp_losses_with_plugged_scores():
    loss_d, loss_g = wgan_gp_losses(Tensor(np.array([[1.0]])), Tensor(np.array([[0.0]])), 0.0)
    assert loss_d.item() == pytest.approx(-1.0 + 0.001)
    assert loss_g.item() == 0.0
    loss_d, _ = wgan_gp_losses(Tensor(np.array([[2.0], [0.0]])), Tensor(np.array([[1.0], [3.0]])), 0.5,
                               lam=10.0, drift=0.001)
    assert loss_d.item() == pytest.approx(2.0 - 1.0 + 5.0 + 0.001 * 2.0)


def test_non_finite_scores_are_named():
    with pytest.raises(NonFiniteError, match="d_fake"):
        wgan_gp_losses(Tensor(np.array([[1.0]])), Tensor(np.array([[np.nan]])), 0.0)
    with pytest.raises(NonFiniteError, match="gradient penalty"):
        wgan_gp_losses(Tensor(np.array([[1.0]])), Tensor(np.array([[0.0]])), float("inf"))
    with pytest.raises(NonFiniteError):
        generator_loss(Tensor(np.array([[np.inf]])))


def test_gradient_penalty_of_linear_critic(rng):
    real = Tensor(rng.standard_normal((3, 1, 4, 4, 4)))
    fake = Tensor(rng.standard_normal((3, 1, 4, 4, 4)))

    def critic(x):
        return ops.sum(x, axes=(1, 2, 3, 4))

    gp = gradient_penalty(None, real, fake, 0, 1.0, rng, critic=critic)
    assert gp.item() == pytest.approx((np.sqrt(64.0) - 1.0) ** 2)


def test_interpolation_is_exact_when_real_equals_fake(rng):
    volume = rng.standard_normal((2, 1, 4, 4, 4)).astype(np.float32)
    u = rng.random((2, 1, 1, 1, 1), dtype=np.float32)
    np.testing.assert_array_equal(interpolate(volume, volume.copy(), u), volume)

    def critic(x):
        return ops.sum(ops.mul(x, x), axes=(1, 2, 3, 4))

    gp = gradient_penalty(None, Tensor(volume), Tensor(volume.copy()), 0, 1.0, rng, critic=critic)
    norms = 2.0 * np.sqrt((volume.astype(np.float64) ** 2).reshape(2, -1).sum(axis=1))
    assert gp.item() == pytest.approx(np.mean((norms - 1.0) ** 2), rel=1e-5)


def test_gradient_penalty_is_differentiable_in_critic_weights(rng):
    w = Tensor(rng.standard_normal((1, 1, 2, 2, 2)), requires_grad=True)
    real = Tensor(rng.standard_normal((2, 1, 2, 2, 2)))
    fake = Tensor(rng.standard_normal((2, 1, 2, 2, 2)))

    def critic(x):
        return ops.sum(ops.mul(x, ops.expand(w, x.shape)), axes=(1, 2, 3, 4))

    with Tape():
        gp = gradient_penalty(None, real, fake, 0, 1.0, rng, critic=critic)
        (gw,) = grad(gp, [w])
    norm = np.sqrt(np.sum(w.data ** 2))
    assert gp.item() == pytest.approx((norm - 1.0) ** 2)
    np.testing.assert_allclose(gw.data, 2.0 * (norm - 1.0) * w.data / norm, rtol=1e-10)


def test_gradient_penalty_is_reproducible_per_seed():
    cfg = StageConfig(0, 4, 8)
    weights_d = build_discriminator(cfg, np.random.default_rng(1))
    data = np.random.default_rng(2).uniform(-1, 1, (2, 2, 1, 4, 4, 4)).astype(np.float32)
    real, fake = Tensor(data[0]), Tensor(data[1])
    first = gradient_penalty(weights_d, real, fake, 0, 1.0, np.random.default_rng(3))
    second = gradient_penalty(weights_d, real, fake, 0, 1.0, np.random.default_rng(3))
    assert first.item() == second.item()
    assert np.isfinite(first.item()) and first.item() >= 0.0


# Single steps

def _tiny_setup(target_stage=1, reals_per_phase=10_000, lr=0.003):
    cfg = StageConfig(target_stage, 4, 8)
    weights_g = build_generator(cfg, np.random.default_rng([5, 1]))
    weights_d = build_discriminator(cfg, np.random.default_rng([5, 2]))
    schedule = TrainSchedule(target_stage=target_stage, reals_per_phase=reals_per_phase,
                             lr_table=[lr], batch_sizes=[4], late_lr=None)
    return weights_g, weights_d, OptimizerState(), OptimizerState(), schedule


def test_sample_latents_statistics():
    z = sample_latents(np.random.default_rng(0), 4000, 8)
    assert z.shape == (4000, 8) and z.dtype == np.float32
    assert abs(float(z.data.mean())) < 0.05
    assert abs(float(z.data.std()) - 1.0) < 0.05
    with pytest.raises(ValueError):
        sample_latents(np.random.default_rng(0), 0, 8)


def test_train_step_advances_schedule_and_leaves_inactive_weights_alone():
    weights_g, weights_d, opt_g, opt_d, schedule = _tiny_setup()
    before_g = {name: tensor.data.copy() for name, tensor in weights_g.items()}
    before_d = {name: tensor.data.copy() for name, tensor in weights_d.items()}
    real = np.random.default_rng(1).uniform(-1, 1, (4, 1, 4, 4, 4)).astype(np.float32)

    report = train_step(real, weights_g, weights_d, opt_g, opt_d, schedule, np.random.default_rng(2), step=1)
    assert schedule.reals_shown_in_phase == 4
    assert report.step == 1 and report.stage == 0 and report.transition is None
    assert np.isfinite(report.loss_d) and np.isfinite(report.loss_g) and report.gradient_penalty >= 0.0

    for name in ("g.block1.conv1.weight", "g.to_voxel1.weight"):
        np.testing.assert_array_equal(weights_g[name].data, before_g[name])
    for name in ("d.block1.conv2.weight", "d.from_voxel1.weight"):
        np.testing.assert_array_equal(weights_d[name].data, before_d[name])
    assert not np.array_equal(weights_g["g.to_voxel0.weight"].data, before_g["g.to_voxel0.weight"])
    assert not np.array_equal(weights_d["d.final.dense.weight"].data, before_d["d.final.dense.weight"])
    assert all(not tensor.requires_grad for tensor in weights_g.values())


def test_train_step_without_generator_update_keeps_generator():
    weights_g, weights_d, opt_g, opt_d, schedule = _tiny_setup()
    digest = weights_g.digest()
    real = np.zeros((4, 1, 4, 4, 4), dtype=np.float32)
    train_step(real, weights_g, weights_d, opt_g, opt_d, schedule, np.random.default_rng(2),
               LossSettings(update_generator=False))
    assert weights_g.digest() == digest
    assert opt_g.t == 0 and opt_d.t == 1


def test_train_step_rejects_wrong_batch_shape():
    weights_g, weights_d, opt_g, opt_d, schedule = _tiny_setup()
    with pytest.raises(ShapeError):
        train_step(np.zeros((4, 1, 8, 8, 8), dtype=np.float32), weights_g, weights_d, opt_g, opt_d,
                   schedule, np.random.default_rng(0))


def test_critic_loss_falls_with_generator_frozen():
    weights_g, weights_d, opt_g, opt_d, schedule = _tiny_setup(target_stage=0)
    real = np.full((4, 1, 4, 4, 4), 0.5, dtype=np.float32)
    rng = np.random.default_rng(4)
    settings = LossSettings(update_generator=False)
    losses = [train_step(real, weights_g, weights_d, opt_g, opt_d, schedule, rng, settings).loss_d
              for _ in range(40)]
    assert np.mean(losses[-10:]) < np.mean(losses[:10])


# Checkpoints

def _checkpoint(step=3) -> Checkpoint:
    weights_g, weights_d, opt_g, opt_d, schedule = _tiny_setup()
    rng = np.random.default_rng(8)
    real = rng.uniform(-1, 1, (4, 1, 4, 4, 4)).astype(np.float32)
    train_step(real, weights_g, weights_d, opt_g, opt_d, schedule, rng)
    return Checkpoint(weights_g=weights_g, weights_d=weights_d, opt_g=opt_g, opt_d=opt_d,
                      schedule=schedule, rng_state=rng.bit_generator.state, step=step,
                      data_position=4 * step, model={"seed": 5, "n_filters": 4})


def test_checkpoint_round_trip_is_byte_identical():
    ckpt = _checkpoint()
    payload = encode_checkpoint(ckpt)
    restored = decode_checkpoint(payload)
    assert encode_checkpoint(restored) == payload
    assert restored.weights_g.digest() == ckpt.weights_g.digest()
    assert restored.schedule == ckpt.schedule
    assert restored.opt_d.t == 1
    np.testing.assert_array_equal(restored.opt_d.v["d.final.dense.weight"], ckpt.opt_d.v["d.final.dense.weight"])

    resumed = np.random.default_rng()
    resumed.bit_generator.state = restored.rng_state
    original = np.random.default_rng()
    original.bit_generator.state = ckpt.rng_state
    assert resumed.random() == original.random()


def test_checkpoint_rejects_corruption():
    payload = encode_checkpoint(_checkpoint())
    with pytest.raises(CheckpointError, match="magic"):
        decode_checkpoint(b"NOPE" + payload[4:])
    bumped = payload[:4] + (FORMAT_VERSION + 1).to_bytes(4, "little") + payload[8:]
    with pytest.raises(CheckpointError, match="version"):
        decode_checkpoint(bumped)
    with pytest.raises(CheckpointError, match="truncated"):
        decode_checkpoint(payload[:len(payload) // 2])
    with pytest.raises(CheckpointError, match="trailing"):
        decode_checkpoint(payload + b"\x00")


def test_checkpoint_files_and_sink(tmp_path):
    ckpt = _checkpoint(step=12)
    path = save_checkpoint(ckpt, str(tmp_path / "one.vgan"))
    assert load_checkpoint(path).step == 12
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "missing.vgan"))

    sink = CheckpointSink(str(tmp_path / "checkpoints"))
    saved = sink.save(ckpt, "phase_end")
    assert saved.endswith("checkpoint_00000012.vgan")
    assert sink.latest_path.read_bytes() == encode_checkpoint(ckpt)
    assert load_checkpoint(str(sink.latest_path)).summary()["step"] == 12


# Data

def test_batch_order_is_a_pure_function_of_position():
    first_epoch = batch_indices(3, 0, 5, 5)
    assert sorted(first_epoch.tolist()) == [0, 1, 2, 3, 4]
    assert batch_indices(3, 3, 4, 5).tolist() == batch_indices(3, 3, 4, 5).tolist()
    straddling = batch_indices(3, 3, 4, 5)
    assert straddling[:2].tolist() == first_epoch[3:].tolist()
    with pytest.raises(DataError):
        batch_indices(3, 0, 2, 0)


def test_upcoming_keys_follow_the_schedule():
    schedule = TrainSchedule(target_stage=1, reals_per_phase=8, batch_sizes=[4, 2], late_lr=None)
    keys = upcoming_keys(schedule.to_dict(), 0, 4)
    assert keys == [(0, 0, 4), (0, 4, 4), (1, 8, 2), (1, 10, 2)]


def test_pyramid_from_array_pools_each_stage(rng):
    volumes = rng.uniform(-1, 1, (3, 8, 8, 8)).astype(np.float32)
    pyramid = VolumePyramid.from_array(volumes, target_stage=1)
    assert pyramid.count == 3
    assert pyramid.stage_array(1).shape == (3, 1, 8, 8, 8)
    assert pyramid.stage_array(0).shape == (3, 1, 4, 4, 4)
    np.testing.assert_allclose(pyramid.stage_array(0)[0, 0, 0, 0, 0], volumes[0, :2, :2, :2].mean(), rtol=1e-6)
    with pytest.raises(DataError):
        pyramid.stage_array(2)
    with pytest.raises(DataError):
        VolumePyramid.from_array(volumes, target_stage=2)


def test_pyramid_build_uses_the_cache(tmp_path, rng):
    paths = [write_nifti(Volume(rng.uniform(-1, 1, (8, 8, 8))), str(tmp_path / f"v{i}.nii.gz"))
             for i in range(2)]
    first = VolumePyramid.build(paths, 1, str(tmp_path / "cache"))
    second = VolumePyramid.build(paths, 1, str(tmp_path / "cache"))
    np.testing.assert_array_equal(first.stage_array(0), second.stage_array(0))
    assert (tmp_path / "cache" / "stage_1.npy").exists()
    with pytest.raises(DataError):
        VolumePyramid.build([], 1, str(tmp_path / "cache"))


def test_history_truncates_log_on_resume(tmp_path):
    log_path = tmp_path / "train_log.tsv"
    history = StepHistory({}, str(log_path))
    for step in range(1, 6):
        history.add(StepReport(step, 0, 1.0, -0.5, 0.25, 0.1, -0.1))
    history.truncate_after(3)
    assert [row["step"] for row in history.read_log()] == [1, 2, 3]


# Whole runs

def _pyramid():
    return VolumePyramid.from_array(np.random.default_rng(21).uniform(-1, 1, (5, 8, 8, 8)), target_stage=1)


def test_resumed_run_is_bit_identical(tmp_path, tiny_run):
    straight = ProgressiveTrainer(tiny_run, _pyramid(), CheckpointSink(str(tmp_path / "a"))).train()
    assert straight.schedule.finished and straight.step == 12

    sink = CheckpointSink(str(tmp_path / "b"))
    log_path = str(tmp_path / "b" / "train_log.tsv")
    halted = ProgressiveTrainer(tiny_run, _pyramid(), sink, log_path=log_path).train(max_steps=7)
    assert halted.step == 7 and not halted.schedule.finished
    resumed = ProgressiveTrainer(tiny_run, _pyramid(), sink, log_path=log_path,
                                 resume=str(sink.latest_path)).train()

    assert encode_checkpoint(resumed) == encode_checkpoint(straight)
    steps = [int(line.split("\t")[0]) for line in (tmp_path / "b" / "train_log.tsv").read_text().splitlines()]
    assert steps == list(range(1, 13))


def test_resume_rejects_a_different_model(tmp_path, tiny_run, tiny_config):
    sink = CheckpointSink(str(tmp_path / "c"))
    ProgressiveTrainer(tiny_run, _pyramid(), sink).train(max_steps=2)
    wider = load_run_config(tiny_config(model={"n_filters": 8}))
    with pytest.raises(CheckpointError, match="n_filters"):
        ProgressiveTrainer(wider, _pyramid(), sink, resume=str(sink.latest_path))


def test_pyramid_below_target_is_a_data_error(tmp_path, tiny_config):
    run = load_run_config(tiny_config(model={"target_stage": 2}, data={"target_dims": [16, 16, 16]}))
    with pytest.raises(DataError):
        ProgressiveTrainer(run, _pyramid(), CheckpointSink(str(tmp_path / "d")))


def test_generation_is_seeded_and_reported():
    weights_g = build_generator(StageConfig(1, 4, 8), np.random.default_rng(0))
    first = generate_volumes(weights_g, 1, 5, np.random.default_rng([1, 4]), batch=2)
    again = generate_volumes(weights_g, 1, 5, np.random.default_rng([1, 4]), batch=2)
    rebatched = generate_volumes(weights_g, 1, 5, np.random.default_rng([1, 4]), batch=3)
    assert first.shape == (5, 8, 8, 8)
    np.testing.assert_array_equal(first, again)
    np.testing.assert_allclose(first, rebatched, rtol=1e-5, atol=1e-6)
    report = diversity_report(first)
    assert report["count"] == 5
    assert report["mean_voxel_std"] > 0.0
    assert report["value_min"] <= report["value_mean"] <= report["value_max"]


def test_two_fresh_runs_write_identical_checkpoints(tmp_path, tiny_run):
    first_sink = CheckpointSink(str(tmp_path / "first"))
    second_sink = CheckpointSink(str(tmp_path / "second"))
    first = run_schedule(_pyramid(), tiny_run, first_sink)
    second = run_schedule(_pyramid(), tiny_run, second_sink)
    assert first.step == second.step == 12
    assert encode_checkpoint(first) == encode_checkpoint(second)
    assert first_sink.latest_path.read_bytes() == second_sink.latest_path.read_bytes()


@pytest.mark.slow
def test_smoke_run_at_sixteen_cubed_keeps_samples_diverse(tmp_path, tiny_config):
    rng = np.random.default_rng(64)
    volumes = np.stack([normalize_intensity(synth_phantom(rng, (16, 16, 16), (2.0, 2.0, 2.0))).data
                        for _ in range(64)])
    run = load_run_config(tiny_config(
        model={"target_stage": 2, "n_filters": 8, "latent_dim": 16},
        data={"target_dims": [16, 16, 16]},
        schedule={"reals_per_phase": 1600, "batch_sizes": [4, 4, 4], "lr_table": [0.001] * 3},
        training={"checkpoint_every": 500},
    ))
    final = run_schedule(VolumePyramid.from_array(volumes, target_stage=2), run,
                         CheckpointSink(str(tmp_path / "smoke")))
    assert final.step == 2000 and final.schedule.finished

    samples = generate_volumes(final.weights_g, 2, 16, np.random.default_rng([run.seed, 4]), batch=4)
    assert samples.shape == (16, 16, 16, 16)
    assert np.all(np.isfinite(samples))
    assert samples.min() >= -1.5 and samples.max() <= 1.5
    data_range = float(volumes.max() - volumes.min())
    assert diversity_report(samples)["mean_voxel_std"] > 0.01 * data_range
