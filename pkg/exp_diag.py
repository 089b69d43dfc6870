"""Scratch: diagnose motion-transfer strength vs inversion settings."""
import sys
import time

import numpy as np

import motioninv as mi
from motioninv import diffusion, embeddings as emb, inversion, metrics, synthdata

params = mi.load_params("scratch/pre6000.mden")
spec = params.spec
sched = mi.linear_schedule()
script = synthdata.held_out_scripts()["pan_right_hold"]
video, truth = synthdata.render(script, 0)
src_tracks = metrics.track(video)
src_disp = np.mean([t.displacements.mean(axis=0) for t in src_tracks], axis=0)
print(f"source mean displacement {src_disp}", flush=True)

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 400
lr = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-2

t0 = time.time()
icfg = mi.InversionConfig(steps=steps, lr=lr, seed=1)
m, losses = mi.invert(video, params, 0, icfg, sched)
print(f"invert steps={steps} lr={lr}: {time.time()-t0:.0f}s last-50 loss {np.mean(losses[-50:]):.4f}", flush=True)
for i, (qk, v) in enumerate(zip(m.m_qk, m.m_v)):
    print(f"  module {i}: |m_qk| rms {np.sqrt(np.mean(qk**2)):.4f}  |m_v| rms {np.sqrt(np.mean(v**2)):.4f}", flush=True)
md = emb.debias_differential(m)
for i, v in enumerate(md.m_v):
    print(f"  module {i}: debiased |m_v| rms {np.sqrt(np.mean(v**2)):.4f}", flush=True)

# effect size on a noisy input
x = np.clip(mi.q_sample(diffusion.to_signal(video), 150, np.random.default_rng(0).standard_normal(video.shape), sched), -3, 3)
e_with = mi.forward(params, x, 150, 1, m=md)
e_without = mi.forward(params, x, 150, 1)
print(f"eps-hat effect size at t=150: {np.sqrt(np.mean((e_with-e_without)**2)):.4f} (|eps_hat| {np.sqrt(np.mean(e_without**2)):.4f})", flush=True)

for sample_steps in (50, 200):
    for strategy, mm in (("differential", m), ("vanilla", None)):
        use = mm
        out = diffusion.sample(params, use, cond=1, seed=7, steps=sample_steps, schedule=sched)
        tracks = metrics.track(out)
        mf = metrics.motion_fidelity(src_tracks, tracks)
        disp = np.mean([t.displacements.mean(axis=0) for t in tracks], axis=0)
        tag = "emb" if use is not None else "zero"
        print(f"steps={sample_steps} {tag}: MF {mf:.3f} mean-disp {disp}", flush=True)
