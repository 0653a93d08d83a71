"""Command-line entry point: ``phasemotion <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data/format error. Diagnostics go
to stderr; metrics go to stdout as one JSON object per line.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import apps, config, fileio, loss, motion, synth
from .errors import PhaseMotionError, UsageError
from .pyramid import PyramidSpec, decompose, merge_channels, reconstruct, split_channels


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="key = value config file with [section] headers")
    g.add_argument("--threads", type=int, default=None,
                   help="worker threads for per-frame work (default: CPU count)")
    g.add_argument("--scales", type=int, help="pyramid scales (default 4)")
    g.add_argument("--orients", type=int, help="orientations per scale (default 4)")
    g.add_argument("--min-band", type=int, help="smallest band side in px (default 16)")


def _motion_flags(p):
    p.add_argument("--eps-amp", type=float, help="amplitude validity fraction (default 0.05)")
    p.add_argument("--kappa-max", type=float, help="max normal-matrix condition number (default 1e4)")
    p.add_argument("--smoothing-radius", type=float, help="phase-delta smoothing sigma in px (default 0)")
    p.add_argument("--gradient", choices=("local", "center"), default="local",
                   help="spatial frequency per constraint: measured local phase gradient or band centroid")


def _transfer_flags(p):
    p.add_argument("--alpha", type=float, help="motion gain (default 1)")
    p.add_argument("--amplitude-gate", type=float, help="gate fraction of band max amplitude (default 0.05)")
    p.add_argument("--correlation-layer", type=int, help="pyramid scale feeding correlation weighting (default 1)")
    p.add_argument("--use-correlation", action="store_true", default=None,
                   help="weight injected deltas by appearance correlation")
    p.add_argument("--affine", help="six numbers 'a b tx c d ty' mapping output (x, y) to source coordinates")
    p.add_argument("--method", choices=("advect", "delta"),
                   help="move the target along the source flow (default) or add raw phase deltas")


def _out_depth(p):
    p.add_argument("--out-depth", type=int, choices=(8, 16), help="PNG bit depth (default 8)")


def build_parser():
    parser = _Parser(prog="phasemotion", description="Phase-based (Eulerian) motion toolkit.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("decompose", help="image -> PHPYR1 pyramid dump")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--precision", choices=("f64", "f32"))
    _common(p)

    p = sub.add_parser("reconstruct", help="PHPYR1 pyramid dump -> image")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    _out_depth(p)
    _common(p)

    p = sub.add_parser("flow", help="phase-based flow for a frame pair or a frame directory")
    p.add_argument("--prev")
    p.add_argument("--next")
    p.add_argument("--frames", help="frame directory; writes one flow per consecutive pair")
    p.add_argument("--out", required=True, help="PHFLO1 file (pair) or output directory (--frames)")
    p.add_argument("--png", action="store_true", help="also write colour-wheel PNG renderings")
    p.add_argument("--gt", help="ground-truth PHFLO1 file or directory; prints error metrics")
    _motion_flags(p)
    _common(p)

    p = sub.add_parser("predict", help="extrapolate future frames from the last two")
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--clamp", type=float, help="max phase step in rad (default pi/2)")
    p.add_argument("--phase-only", action="store_true", default=None,
                   help="do not extrapolate band amplitudes")
    p.add_argument("--method", choices=("advect", "delta"),
                   help="advect bands along the measured flow (default) or reapply the raw phase change")
    p.add_argument("--substeps", type=int, help="advection substeps per frame (default 2)")
    _out_depth(p)
    _common(p)

    p = sub.add_parser("magnify", help="phase-based motion magnification")
    p.add_argument("--frames", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--low", type=float, help="temporal band low edge, cycles/frame")
    p.add_argument("--high", type=float, help="temporal band high edge, cycles/frame")
    p.add_argument("--phase-only", action="store_true", help="leave band amplitudes unmagnified")
    _out_depth(p)
    _common(p)

    p = sub.add_parser("transfer-image", help="animate a still image with a video's phase motion")
    p.add_argument("--target", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    _transfer_flags(p)
    _out_depth(p)
    _common(p)

    p = sub.add_parser("transfer-video", help="add one video's phase motion to another")
    p.add_argument("--target", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lambda-t", type=float, help="temporal smoothing of injected deltas (default 0)")
    _transfer_flags(p)
    _out_depth(p)
    _common(p)

    p = sub.add_parser("loss", help="motion-style / content / temporal losses, optionally optimized")
    p.add_argument("--generated", required=True, help="generated (or initial) image")
    p.add_argument("--video", required=True, help="video frame providing the motion style")
    p.add_argument("--content", help="content image (default: the video frame)")
    p.add_argument("--previous", help="previous generated frame for the temporal term")
    p.add_argument("--no-correlation", action="store_true", help="unweighted Gram matrices")
    p.add_argument("--optimize", action="store_true", help="run gradient descent on the phases")
    p.add_argument("--out", help="optimized image path (with --optimize)")
    p.add_argument("--trajectory", help="CSV of the loss trajectory (with --optimize)")
    p.add_argument("--iters", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--style-weight", type=float)
    p.add_argument("--content-weight", type=float)
    p.add_argument("--temporal-weight", type=float)
    _out_depth(p)
    _common(p)

    p = sub.add_parser("synth", help="synthetic sequence with ground-truth flow")
    p.add_argument("--kind", choices=synth.KINDS, default="translate")
    p.add_argument("--texture", choices=synth.TEXTURES, default="noise")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--frames", type=int, default=5)
    p.add_argument("--vx", type=float, default=0.0)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--amplitude", type=float, default=0.0, help="oscillation amplitude, px")
    p.add_argument("--period", type=float, default=8.0, help="oscillation period, frames")
    p.add_argument("--degrees", type=float, default=0.0, help="rotation per frame")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smooth", type=float, default=1.5, help="noise texture blur sigma, px")
    p.add_argument("--out", required=True)
    _out_depth(p)
    _common(p)

    p = sub.add_parser("metrics", help="PSNR/MAE between images or EPE between flows")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--flow-est")
    p.add_argument("--flow-gt")
    p.add_argument("--margin", type=int, default=None, help="interior margin in px (default 8 for images, 0 for flow)")
    _common(p)
    return parser


def _load(args):
    cfg = config.load_config(getattr(args, "config", None))
    config.override(cfg, "pyramid", scales=getattr(args, "scales", None),
                    orientations=getattr(args, "orients", None), min_band=getattr(args, "min_band", None))
    return cfg


def _spec(cfg, dims):
    p = cfg.pyramid
    return PyramidSpec(p.scales, p.orientations, p.min_band)


def _threads(args):
    t = getattr(args, "threads", None)
    if t is None:
        return os.cpu_count() or 1
    if t < 1:
        raise UsageError("--threads must be >= 1")
    return t


def _emit(obj):
    def fix(v):
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, float) and math.isnan(v):
            return None
        return v
    print(json.dumps({k: fix(v) for k, v in obj.items()}, sort_keys=True))


def _depth(args, cfg):
    d = getattr(args, "out_depth", None)
    return d if d is not None else cfg.io.out_depth


def cmd_decompose(args, cfg):
    config.override(cfg, "io", precision=args.precision)
    frame = fileio.read_image(args.inp)
    _, planes = split_channels(frame)
    spec = _spec(cfg, frame.shape[:2])
    pyrs = apps.pmap(lambda p: decompose(p, spec), planes, _threads(args))
    fileio.write_pyramids(args.out, pyrs, 0 if cfg.io.precision == "f64" else 1)


def cmd_reconstruct(args, cfg):
    pyrs, _ = fileio.read_pyramids(args.inp)
    planes = apps.pmap(reconstruct, pyrs, _threads(args))
    fileio.write_image(args.out, merge_channels(planes), _depth(args, cfg))


def _flow_kwargs(args, cfg):
    config.override(cfg, "motion", eps_amp=args.eps_amp, kappa_max=args.kappa_max,
                    smoothing_radius=args.smoothing_radius)
    m = cfg.motion
    return dict(eps_amp=m.eps_amp, kappa_max=m.kappa_max, smoothing_radius=m.smoothing_radius,
                gradient=args.gradient)


def cmd_flow(args, cfg):
    kw = _flow_kwargs(args, cfg)
    if args.frames:
        frames = fileio.read_frames(args.frames)
        if len(frames) < 2:
            raise UsageError("flow needs at least two frames")
        pairs = list(zip(frames[:-1], frames[1:]))
    elif args.prev and args.next:
        pairs = [(fileio.read_image(args.prev), fileio.read_image(args.next))]
    else:
        raise UsageError("flow needs --prev and --next, or --frames")
    spec = _spec(cfg, pairs[0][0].shape[:2])
    flows = apps.pmap(lambda ab: motion.estimate_flow(ab[0], ab[1], spec, **kw), pairs, _threads(args))

    if args.frames:
        os.makedirs(args.out, exist_ok=True)
        paths = [os.path.join(args.out, f"{i:06d}.phflo") for i in range(len(flows))]
    else:
        paths = [args.out]
    for f, path in zip(flows, paths):
        fileio.write_flow(path, f)
        if args.png:
            fileio.write_image(os.path.splitext(path)[0] + ".png", fileio.flow_to_color(f))

    if args.gt:
        if os.path.isdir(args.gt):
            gts = [fileio.read_flow(os.path.join(args.gt, f"{i:06d}.phflo")) for i in range(len(flows))]
        else:
            gts = [fileio.read_flow(args.gt)]
        if len(gts) != len(flows):
            raise UsageError(f"{len(gts)} ground-truth flows for {len(flows)} estimates")
        margin = synth.INTERIOR_MARGIN
        errs = []
        for i, (e, g) in enumerate(zip(flows, gts)):
            err = synth.flow_error(e, g, margin)
            errs.append(err)
            _emit({"step": i, **err})
        _emit({"summary": True,
               "epe": float(np.mean([e["epe"] for e in errs])),
               "mae": float(np.mean([e["mae"] for e in errs])),
               "valid_fraction": float(np.mean([e["valid_fraction"] for e in errs]))})


def cmd_predict(args, cfg):
    config.override(cfg, "predict", steps=args.steps, clamp=args.clamp, method=args.method,
                    substeps=args.substeps)
    if args.phase_only:
        config.override(cfg, "predict", amplitude_extrapolation=False)
    frames = fileio.read_frames(args.frames)
    if len(frames) < 2:
        raise UsageError("predict needs at least two frames")
    p = cfg.predict
    pcfg = apps.PredictionConfig(steps=p.steps, clamp=p.clamp,
                                 delta_smoothing_radius=cfg.motion.smoothing_radius,
                                 amplitude_extrapolation=p.amplitude_extrapolation,
                                 method=p.method, substeps=p.substeps)
    out = apps.predict_rollout(frames, pcfg, _spec(cfg, frames[0].shape[:2]))
    fileio.write_frames(args.out, out, _depth(args, cfg))


def cmd_magnify(args, cfg):
    if not math.isfinite(args.alpha):
        raise UsageError("--alpha must be finite")
    frames = fileio.read_frames(args.frames)
    band = None
    if args.low is not None or args.high is not None:
        band = (args.low if args.low is not None else 0.0, args.high if args.high is not None else 0.5)
        if not (0 <= band[0] <= band[1] <= 0.5):
            raise UsageError("temporal band must satisfy 0 <= low <= high <= 0.5")
    out = apps.magnify(frames, args.alpha, band, _spec(cfg, frames[0].shape[:2]), _threads(args),
                       amplitude=not args.phase_only)
    fileio.write_frames(args.out, out, _depth(args, cfg))


def _transfer_cfg(args, cfg):
    config.override(cfg, "transfer", alpha=args.alpha, amplitude_gate=args.amplitude_gate,
                    correlation_layer=args.correlation_layer,
                    use_correlation_weighting=args.use_correlation,
                    lambda_t=getattr(args, "lambda_t", None), method=args.method)
    t = cfg.transfer
    return apps.TransferConfig(alpha=t.alpha, amplitude_gate=t.amplitude_gate, lambda_t=t.lambda_t,
                               correlation_layer=t.correlation_layer,
                               use_correlation_weighting=t.use_correlation_weighting, method=t.method)


def _affine(args, frames, dims):
    if not args.affine:
        return frames
    try:
        vals = [float(x) for x in args.affine.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"--affine must be six numbers, got {args.affine!r}") from None
    if len(vals) != 6 or not all(math.isfinite(v) for v in vals):
        raise UsageError(f"--affine must be six finite numbers, got {args.affine!r}")
    return [apps.affine_warp(apps.resample(f, dims), np.array(vals).reshape(2, 3)) for f in frames]


def cmd_transfer_image(args, cfg):
    tcfg = _transfer_cfg(args, cfg)
    target = fileio.read_image(args.target)
    source = fileio.read_frames(args.source)
    if len(source) < 2:
        raise UsageError("source sequence needs at least two frames")
    dims = target.shape[:2]
    source = _affine(args, source, dims)
    out = apps.transfer_to_image(target, source, tcfg, _spec(cfg, dims), _threads(args))
    fileio.write_frames(args.out, out, _depth(args, cfg))


def cmd_transfer_video(args, cfg):
    tcfg = _transfer_cfg(args, cfg)
    target = fileio.read_frames(args.target)
    source = fileio.read_frames(args.source)
    dims = target[0].shape[:2]
    source = _affine(args, source, dims)
    out = apps.transfer_to_video(target, source, tcfg, _spec(cfg, dims), _threads(args))
    fileio.write_frames(args.out, out, _depth(args, cfg))


def cmd_loss(args, cfg):
    config.override(cfg, "optimize", iters=args.iters, step=args.step, style_weight=args.style_weight,
                    content_weight=args.content_weight, temporal_weight=args.temporal_weight)
    o = cfg.optimize
    weights = loss.LossWeights(o.style_weight, o.content_weight, o.temporal_weight)
    gen = fileio.read_image(args.generated)
    video = fileio.read_image(args.video)
    if gen.shape[:2] != video.shape[:2]:
        raise UsageError(f"--generated {gen.shape[:2]} and --video {video.shape[:2]} differ in size")
    content = fileio.read_image(args.content) if args.content else None
    previous = fileio.read_image(args.previous) if args.previous else None
    spec = _spec(cfg, gen.shape[:2])
    if not args.optimize:
        obj = loss.TransferObjective(gen, video, weights, spec, content, previous,
                                     use_correlation=not args.no_correlation)
        total, parts, _ = obj(obj.initial())
        _emit({**parts, "total": total})
        return
    if not args.out:
        raise UsageError("--optimize needs --out")
    res = loss.optimize_transfer(gen, video, weights, o.iters, o.step, spec, content, previous,
                                 use_correlation=not args.no_correlation)
    fileio.write_image(args.out, np.clip(res.frame, 0, 1), _depth(args, cfg))
    if args.trajectory:
        res.write_csv(args.trajectory)
    it, s, c, t, total = res.trajectory[-1]
    _emit({"iters": it, "style": s, "content": c, "temporal": t, "total": total})


def cmd_synth(args, cfg):
    spec = synth.SynthSpec(kind=args.kind, texture=args.texture, dims=(args.height, args.width),
                           frames=args.frames, velocity=(args.vx, args.vy), amplitude=args.amplitude,
                           period=args.period, degrees=args.degrees, seed=args.seed, smooth=args.smooth)
    frames, flows = synth.generate(spec)
    fileio.write_frames(args.out, frames, _depth(args, cfg))
    gt_dir = os.path.join(args.out, "gt_flow")
    os.makedirs(gt_dir, exist_ok=True)
    for i, f in enumerate(flows):
        fileio.write_flow(os.path.join(gt_dir, f"{i:06d}.phflo"), f)


def cmd_metrics(args, cfg):
    if args.a and args.b:
        a, b = fileio.read_image(args.a), fileio.read_image(args.b)
        m = synth.INTERIOR_MARGIN if args.margin is None else args.margin
        _emit({"psnr": synth.psnr(a, b, m), "mae": synth.mae(a, b, m)})
    elif args.flow_est and args.flow_gt:
        m = 0 if args.margin is None else args.margin
        _emit(synth.flow_error(fileio.read_flow(args.flow_est), fileio.read_flow(args.flow_gt), m))
    else:
        raise UsageError("metrics needs --a and --b, or --flow-est and --flow-gt")


COMMANDS = {
    "decompose": cmd_decompose,
    "reconstruct": cmd_reconstruct,
    "flow": cmd_flow,
    "predict": cmd_predict,
    "magnify": cmd_magnify,
    "transfer-image": cmd_transfer_image,
    "transfer-video": cmd_transfer_video,
    "loss": cmd_loss,
    "synth": cmd_synth,
    "metrics": cmd_metrics,
}


def cli_main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        if not argv:
            parser.print_usage(sys.stderr)
            return 1
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = _load(args)
        COMMANDS[args.command](args, cfg)
        return 0
    except SystemExit as exc:
        # --help
        return 0 if exc.code in (0, None) else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PhaseMotionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())
