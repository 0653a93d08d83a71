"""Two Eulerian edits: extrapolating the next frame and magnifying motion.

Prediction measures the motion between the last two frames and pushes every
band along it, phase and amplitude envelope together. The older rule,
replaying each band's raw phase change, is shown for comparison: it loses
displacement because every step re-measures its own slightly short output.
Magnification scales the phase change since the first frame. Nothing is
warped in pixel space.

    python demos/03_predict_and_magnify.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from phasemotion import PredictionConfig, SynthSpec, estimate_flow, generate, magnify, predict_rollout, psnr
from phasemotion.fileio import write_frames

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "edit"

frames, _ = generate(SynthSpec(kind="translate", velocity=(1.0, 0), frames=6))
pred = predict_rollout(frames[:2], PredictionConfig(steps=4))
raw = predict_rollout(frames[:2], PredictionConfig(steps=4, method="delta"))
for i, (p, r, f) in enumerate(zip(pred, raw, frames[2:]), 1):
    print(f"step {i}: PSNR vs truth {psnr(p, f):.1f} dB (raw phase rule {psnr(r, f):.1f} dB)")
write_frames(str(out / "predicted"), pred)

wobble, _ = generate(SynthSpec(kind="oscillate", amplitude=0.1, period=8, frames=9))
big = magnify(wobble, 10.0)


def mean_u(a, b):
    flow = estimate_flow(a, b)
    return flow.u[16:-16, 16:-16][flow.valid[16:-16, 16:-16]].mean()


print("input  displacement:", np.round([mean_u(wobble[0], f) for f in wobble], 3))
print("x10    displacement:", np.round([mean_u(wobble[0], f) for f in big], 3))
write_frames(str(out / "magnified"), big)
print("frames written to", out)
