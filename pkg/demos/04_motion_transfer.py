"""Learning-free motion transfer.

The motion of a source video, read off its phase changes, is imposed on a
still image (or on another video) by moving the target's own bands. With
the source's first frame as target the true frames come back. An unrelated
texture moves by the source displacement too; adding the source's raw phase
deltas instead moves it noticeably less, since those phases belong to a
different texture.

    python demos/04_motion_transfer.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np

from phasemotion import SynthSpec, TransferConfig, estimate_flow, generate, psnr, transfer_to_image
from phasemotion.apps import transfer_to_video
from phasemotion.fileio import write_frames

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "transfer"

source, _ = generate(SynthSpec(kind="translate", velocity=(0.3, 0.2), frames=5, seed=0))
selfie = transfer_to_image(source[0], source)
print("self-transfer PSNR:", [round(psnr(a, b), 1) for a, b in zip(selfie, source[1:])])



def mean_flow(a, b):
    f = estimate_flow(a, b)
    inner = f.valid[16:-16, 16:-16]
    return np.round([f.u[16:-16, 16:-16][inner].mean(), f.v[16:-16, 16:-16][inner].mean()], 3)


other = generate(SynthSpec(kind="static", frames=1, seed=42))[0][0]
moved = transfer_to_image(other, source, TransferConfig(alpha=2.0))
raw = transfer_to_image(other, source, TransferConfig(alpha=2.0, method="delta"))
print("unrelated target, alpha=2, first step (source 0.6, 0.4):")
print("  advected:", mean_flow(other, moved[0]), " raw deltas:", mean_flow(other, raw[0]))
write_frames(str(out / "still"), moved)

doubled = transfer_to_video(source, source)
f = estimate_flow(doubled[0], doubled[1])
print("video onto itself: step flow", round(float(f.u[16:-16, 16:-16].mean()), 3), "(expected ~0.6)")
write_frames(str(out / "video"), doubled)
print("frames written to", out)
