import numpy as np
import pytest

from phasemotion.apps import (PredictionConfig, TransferConfig, affine_warp, magnify, pmap, predict_next,
                              predict_rollout, resample, temporal_bandpass, transfer_to_image,
                              transfer_to_video)
from phasemotion.errors import StructureError, UsageError
from phasemotion.motion import estimate_flow
from phasemotion.pyramid import PyramidSpec, decompose, reconstruct
from phasemotion.synth import SynthSpec, generate, psnr


def mean_flow(a, b, m=16):
    f = estimate_flow(a, b)
    v = f.valid[m:-m, m:-m]
    return f.u[m:-m, m:-m][v].mean(), f.v[m:-m, m:-m][v].mean()


def seq(**kw):
    return generate(SynthSpec(**kw))[0]


def rgb_seq(**kw):
    g = seq(**kw)
    return [np.stack([f, 0.8 * f + 0.1, 1 - f], axis=-1) for f in g]


def recon(f):
    return reconstruct(decompose(f))


# prediction

def test_predict_static_scene():
    frames = seq(kind="static", frames=2)
    assert psnr(predict_next(frames), frames[-1]) > 50
    out = predict_rollout(frames, PredictionConfig(steps=5))
    assert len(out) == 5 and all(psnr(o, frames[-1]) > 45 for o in out)


def test_predict_translation():
    frames = seq(kind="translate", velocity=(1, 0), frames=3)
    assert psnr(predict_next(frames[:2]), frames[2]) > 30


def test_predict_reversal_negates_displacement():
    f = seq(kind="translate", velocity=(1, 0), frames=2)
    back = mean_flow(f[0], predict_next([f[1], f[0]]))
    fwd = mean_flow(f[1], predict_next([f[0], f[1]]))
    assert back[0] == pytest.approx(-fwd[0], abs=0.05)
    assert fwd[0] == pytest.approx(1.0, abs=0.1)


def test_rollout_single_step_is_predict_next():
    f = seq(kind="translate", velocity=(0.5, 0.2), frames=2)
    assert np.array_equal(predict_rollout(f, PredictionConfig(steps=1))[0], predict_next(f))


def test_rollout_cumulative_displacement():
    f = seq(kind="translate", velocity=(0.5, 0), frames=2)
    out = predict_rollout(f, PredictionConfig(steps=3))
    u, v = mean_flow(f[-1], out[-1])
    assert abs(u - 1.5) <= 0.15 and abs(v) < 0.05


@pytest.mark.parametrize("seed", range(4))
def test_rollout_full_pixel_per_frame(seed):
    f = seq(kind="translate", velocity=(1, 0), frames=5, seed=seed)
    out = predict_rollout(f[:2], PredictionConfig(steps=3))
    assert abs(mean_flow(f[1], out[-1])[0] - 3.0) <= 0.15
    assert all(psnr(o, t) > 35 for o, t in zip(out, f[2:]))


def test_rollout_diagonal_and_bounded_flow_change():
    f = seq(kind="translate", velocity=(0.6, -0.4), frames=4, seed=3)
    out = predict_rollout(f[:2], PredictionConfig(steps=2))
    u, v = mean_flow(f[1], out[-1])
    assert u == pytest.approx(1.2, abs=0.1) and v == pytest.approx(-0.8, abs=0.1)


def test_advect_beats_delta_rule_over_a_rollout():
    f = seq(kind="translate", velocity=(1, 0), frames=5)
    adv = predict_rollout(f[:2], PredictionConfig(steps=3))
    raw = predict_rollout(f[:2], PredictionConfig(steps=3, method="delta"))
    assert psnr(adv[-1], f[4]) > psnr(raw[-1], f[4]) + 5
    # the raw rule loses displacement because it re-measures its own output
    assert mean_flow(f[1], raw[-1])[0] < mean_flow(f[1], adv[-1])[0]


def test_delta_rule_single_step():
    frames = seq(kind="translate", velocity=(1, 0), frames=3)
    assert psnr(predict_next(frames[:2], PredictionConfig(method="delta")), frames[2]) > 30
    static = seq(kind="static", frames=2)
    assert psnr(predict_next(static, PredictionConfig(method="delta")), static[1]) > 50


def test_more_substeps_do_not_hurt():
    f = seq(kind="translate", velocity=(1, 0), frames=3, seed=1)
    one = psnr(predict_next(f[:2], PredictionConfig(substeps=1)), f[2])
    four = psnr(predict_next(f[:2], PredictionConfig(substeps=4)), f[2])
    assert four >= one - 0.5


def test_prediction_phase_only_mode():
    frames = seq(kind="translate", velocity=(1, 0), frames=3)
    p = predict_next(frames[:2], PredictionConfig(amplitude_extrapolation=False))
    assert psnr(p, frames[2]) > 25


def test_prediction_color_and_bounds():
    frames = rgb_seq(kind="translate", velocity=(1, 0), frames=3)
    p = predict_next(frames[:2])
    assert p.shape == frames[0].shape and p.min() >= 0 and p.max() <= 1
    assert psnr(p, frames[2]) > 28


def test_prediction_config_validation():
    for bad in [dict(steps=0), dict(clamp=0.0), dict(clamp=4.0), dict(delta_smoothing_radius=-1),
                dict(max_amplitude_ratio=0.5), dict(method="warp"), dict(substeps=0)]:
        with pytest.raises(UsageError):
            PredictionConfig(**bad)
    with pytest.raises(UsageError):
        predict_next(seq(frames=1))
    with pytest.raises(StructureError):
        predict_next([np.zeros((64, 64)), np.zeros((64, 96))])


# magnification

def oscillation_amplitude(frames, out):
    s = np.sin(2 * np.pi * np.arange(len(out)) / 8)
    d = np.array([mean_flow(frames[0], o)[0] for o in out])
    return float(d @ s / (s @ s))


def test_magnify_identity_and_freeze():
    frames = seq(kind="oscillate", amplitude=0.3, period=8, frames=6)
    for f, o in zip(frames, magnify(frames, 1.0)):
        assert np.max(np.abs(o - f)) < 1e-10
    for o in magnify(frames, 0.0):
        assert np.max(np.abs(o - recon(frames[0]))) < 1e-10


def test_magnify_linearity():
    frames = seq(kind="oscillate", amplitude=0.1, period=8, frames=9)
    assert oscillation_amplitude(frames, magnify(frames, 10.0)) == pytest.approx(1.0, abs=0.1)


def test_magnify_phase_only_still_amplifies():
    frames = seq(kind="oscillate", amplitude=0.1, period=8, frames=9)
    assert oscillation_amplitude(frames, magnify(frames, 10.0, amplitude=False)) == pytest.approx(1.0, abs=0.15)


def test_magnify_temporal_band():
    frames = seq(kind="oscillate", amplitude=0.1, period=8, frames=16)
    inside = magnify(frames, 5.0, band=(0.1, 0.15))
    outside = magnify(frames, 5.0, band=(0.3, 0.5))
    s = np.sin(2 * np.pi * np.arange(16) / 8)
    amp = lambda out: np.array([mean_flow(frames[0], o)[0] for o in out]) @ s / (s @ s)
    assert amp(inside) == pytest.approx(0.5, abs=0.07)
    assert amp(outside) == pytest.approx(0.1, abs=0.03)


def test_temporal_bandpass_passes_selected_frequency():
    t = np.arange(32)
    sig = np.sin(2 * np.pi * t / 8)[:, None] + 0.5
    assert np.allclose(temporal_bandpass(sig, 0.1, 0.2)[:, 0], np.sin(2 * np.pi * t / 8), atol=1e-12)
    assert np.allclose(temporal_bandpass(sig, 0.0, 0.0), 0.5)


def test_magnify_errors():
    with pytest.raises(UsageError):
        magnify(seq(frames=1), 2.0)
    with pytest.raises(UsageError):
        magnify(seq(frames=2), np.nan)
    with pytest.raises(StructureError):
        magnify([np.zeros((64, 64)), np.zeros((64, 80))], 2.0)


# transfer

def test_transfer_static_source_and_alpha_zero():
    target = seq(kind="static", frames=1, seed=9)[0]
    static = seq(kind="static", frames=4, seed=3)
    for o in transfer_to_image(target, static):
        assert psnr(o, target) > 50
    moving = seq(kind="translate", velocity=(0.5, 0), frames=4, seed=3)
    for o in transfer_to_image(target, moving, TransferConfig(alpha=0.0)):
        assert np.max(np.abs(o - recon(target))) < 1e-12


def test_self_transfer():
    frames = seq(kind="translate", velocity=(0.3, 0.2), frames=5)
    out = transfer_to_image(frames[0], frames)
    assert len(out) == 4
    assert all(psnr(o, f) > 25 for o, f in zip(out, frames[1:]))


def test_transfer_gain_linearity():
    frames = seq(kind="translate", velocity=(0.1, 0), frames=2)
    d = [mean_flow(frames[0], transfer_to_image(frames[0], frames, TransferConfig(alpha=a))[0])[0]
         for a in (1, 2, 4)]
    assert d[1] / d[0] == pytest.approx(2, rel=0.1)
    assert d[2] / d[0] == pytest.approx(4, rel=0.1)


def test_negative_alpha_inverts():
    frames = seq(kind="translate", velocity=(0.3, 0), frames=2)
    fwd = mean_flow(frames[0], transfer_to_image(frames[0], frames, TransferConfig(alpha=1))[0])[0]
    inv = mean_flow(frames[0], transfer_to_image(frames[0], frames, TransferConfig(alpha=-1))[0])[0]
    assert inv == pytest.approx(-fwd, rel=0.1)


def test_transfer_video_doubling():
    frames = seq(kind="translate", velocity=(0.3, 0), frames=4)
    out = transfer_to_video(frames, frames)
    assert len(out) == 4
    for a, b in zip(out, out[1:]):
        assert mean_flow(a, b)[0] == pytest.approx(0.6, rel=0.15)


@pytest.mark.parametrize("aligned", [True, False], ids=["aligned", "unrelated"])
def test_transfer_video_static_target(aligned):
    src = seq(kind="translate", velocity=(0.3, 0), frames=4)
    still = src[0] if aligned else seq(kind="static", frames=1, seed=5)[0]
    target = [still] * 4
    for alpha in (1.0, 2.0):
        out = transfer_to_video(target, src, TransferConfig(alpha=alpha))
        for a, b in zip(out, out[1:]):
            assert mean_flow(a, b)[0] == pytest.approx(0.3 * alpha, rel=0.15)


def test_delta_method_transfer():
    frames = seq(kind="translate", velocity=(0.3, 0.2), frames=4)
    cfg = TransferConfig(method="delta")
    out = transfer_to_image(frames[0], frames, cfg)
    assert all(psnr(o, f) > 25 for o, f in zip(out, frames[1:]))
    doubled = transfer_to_video(frames, frames, cfg)
    assert mean_flow(doubled[0], doubled[1])[0] == pytest.approx(0.6, rel=0.15)
    for o in transfer_to_image(frames[0], frames, TransferConfig(alpha=0.0, method="delta")):
        assert np.max(np.abs(o - recon(frames[0]))) < 1e-12


def test_advect_moves_unrelated_target_further_than_delta():
    src = seq(kind="translate", velocity=(0.3, 0.2), frames=3, seed=1)
    other = seq(kind="static", frames=1, seed=41)[0]
    adv = mean_flow(other, transfer_to_image(other, src)[-1])
    raw = mean_flow(other, transfer_to_image(other, src, TransferConfig(method="delta"))[-1])
    assert adv[0] == pytest.approx(0.6, rel=0.1) and adv[1] == pytest.approx(0.4, rel=0.1)
    assert raw[0] < adv[0]


def test_transfer_rotation_source():
    # spatially varying motion carried onto an unrelated texture
    src, truth = generate(SynthSpec(kind="rotate", degrees=1.0, frames=2, seed=4))
    other = seq(kind="static", frames=1, seed=12)[0]
    moved = transfer_to_image(other, src)[0]
    f = estimate_flow(other, moved)
    m = 24
    err = np.hypot(f.u - truth[0].u, f.v - truth[0].v)[m:-m, m:-m][f.valid[m:-m, m:-m]].mean()
    mag = np.hypot(truth[0].u, truth[0].v)[m:-m, m:-m].mean()
    assert err < 0.25 * mag


def test_transfer_video_alpha_zero_and_smoothing():
    tgt = seq(kind="translate", velocity=(0.4, 0), frames=4, seed=2)
    src = seq(kind="translate", velocity=(0, 0.4), frames=5, seed=8)
    out = transfer_to_video(tgt, src, TransferConfig(alpha=0.0))
    assert len(out) == 4
    for o, t in zip(out, tgt):
        assert np.max(np.abs(o - recon(t))) < 1e-12
    # source rests for one step then moves: smoothing lags the onset
    still = seq(kind="static", frames=1, seed=8)[0]
    moving = seq(kind="translate", velocity=(0, 0.4), frames=3, seed=8)
    src = [still, still, moving[1], moving[2]]
    tgt = [tgt[0]] * 4
    raw = transfer_to_video(tgt, src)
    smooth = transfer_to_video(tgt, src, TransferConfig(lambda_t=2.0))
    r, sm = mean_flow(raw[1], raw[2])[1], mean_flow(smooth[1], smooth[2])[1]
    assert sm == pytest.approx(r / 3, rel=0.2)


def test_transfer_correlation_weighting():
    frames = seq(kind="translate", velocity=(0.3, 0), frames=3)
    out = transfer_to_image(frames[0], frames, TransferConfig(use_correlation_weighting=True))
    assert all(psnr(o, f) > 25 for o, f in zip(out, frames[1:]))
    other = seq(kind="static", frames=1, seed=77)[0]
    w = transfer_to_image(other, frames, TransferConfig(use_correlation_weighting=True))
    u = transfer_to_image(other, frames)
    assert mean_flow(other, w[-1])[0] < mean_flow(other, u[-1])[0]


def test_transfer_resamples_source_and_handles_color():
    target = rgb_seq(kind="static", frames=1)[0]
    src = seq(kind="translate", velocity=(0.5, 0), frames=3, dims=(96, 96))
    out = transfer_to_image(target, src)
    assert out[0].shape == target.shape
    assert all(o.min() >= 0 and o.max() <= 1 for o in out)


def test_transfer_config_validation():
    TransferConfig(alpha=-1.0)
    for bad in [dict(alpha=np.inf), dict(amplitude_gate=1.5), dict(lambda_t=-1), dict(correlation_layer=-1),
                dict(method="warp")]:
        with pytest.raises(UsageError):
            TransferConfig(**bad)
    with pytest.raises(UsageError):
        transfer_to_image(np.zeros((64, 64)), [np.zeros((64, 64))])


def test_threads_do_not_change_results():
    frames = rgb_seq(kind="oscillate", amplitude=0.3, frames=5)
    a = magnify(frames, 3.0, threads=1)
    b = magnify(frames, 3.0, threads=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    a = transfer_to_video(frames, frames[::-1], threads=1)
    b = transfer_to_video(frames, frames[::-1], threads=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert pmap(lambda x: x * 2, range(10), 4) == [x * 2 for x in range(10)]


def test_resample_and_affine():
    f = np.random.default_rng(0).random((40, 50))
    assert resample(f, (40, 50)) is not None
    assert resample(f, (80, 100)).shape == (80, 100)
    assert np.allclose(affine_warp(f, [[1, 0, 0], [0, 1, 0]]), f)
    shifted = affine_warp(f, [[1, 0, 2], [0, 1, 0]])
    assert np.allclose(shifted[:, :-2], f[:, 2:])
    with pytest.raises(UsageError):
        affine_warp(f, np.eye(2))
