"""The correlation-weighted Gram loss on pyramid phases.

Features are per-scale phase maps with one row per orientation. The
appearance correlation of pyramid amplitudes decides how much each position
counts. We run plain descent on the phases of one frame toward the motion
style of another and print the loss trajectory.

    python demos/05_motion_style_loss.py [outdir]
"""

import sys
from pathlib import Path

from phasemotion import LossWeights, SynthSpec, generate, optimize_transfer
from phasemotion.fileio import write_image

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out") / "loss"
out.mkdir(parents=True, exist_ok=True)

frames, _ = generate(SynthSpec(dims=(64, 64), kind="translate", velocity=(1.0, 0), frames=3, seed=5))
init, video = frames[0], frames[2]

for name, w in [("content only", LossWeights(0, 1, 0)), ("style + content", LossWeights(1, 0.1, 0))]:
    res = optimize_transfer(init, video, w, iters=60)
    t = res.trajectory
    print(f"{name}: total {t[0][4]:.4g} -> {t[-1][4]:.4g} after {t[-1][0]} iterations")
    res.write_csv(out / f"{name.replace(' ', '_').replace('+', 'and')}.csv")
    write_image(str(out / f"{name.replace(' ', '_').replace('+', 'and')}.png"), res.frame)
print("trajectories written to", out)
