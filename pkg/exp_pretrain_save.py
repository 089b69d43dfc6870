"""Scratch: pretrain once and save for iteration."""
import sys
import time

import motioninv as mi
from motioninv import synthdata

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 6000
out = sys.argv[2] if len(sys.argv) > 2 else "scratch/pre6000.mden"
spec = mi.DenoiserSpec()
sched = mi.linear_schedule()
data = synthdata.corpus_videos()
t0 = time.time()
cfg = mi.InversionConfig(steps=steps, lr=2e-3, seed=0)
params, losses = mi.pretrain(data, spec, cfg, sched)
print(f"pretrain {time.time()-t0:.0f}s first-decile {sum(losses[:steps//10])/(steps//10):.4f} "
      f"last-decile {sum(losses[-steps//10:])/(steps//10):.4f}", flush=True)
mi.save_params(params, out)
print("saved", out)
