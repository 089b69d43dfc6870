"""Scratch experiment: full criterion-6 style run with timing."""
import time

import numpy as np

import motioninv as mi
from motioninv import diffusion, inversion, metrics, synthdata


def main():
    t_all = time.time()
    spec = mi.DenoiserSpec()
    sched = mi.linear_schedule()
    data = synthdata.corpus_videos()
    print(f"corpus {len(data)} videos {time.time()-t_all:.0f}s", flush=True)

    t0 = time.time()
    cfg = mi.InversionConfig(steps=6000, lr=2e-3, seed=0)
    params, pre_losses = mi.pretrain(data, spec, cfg, sched)
    print(f"pretrain {time.time()-t0:.0f}s", flush=True)
    dec = len(pre_losses) // 10
    first = np.mean(pre_losses[:dec])
    last = np.mean(pre_losses[-dec:])
    print(f"pretrain loss first decile {first:.3f} last decile {last:.3f} ratio {last/first:.3f}", flush=True)

    script = synthdata.held_out_scripts()["pan_right_hold"]
    video, truth = synthdata.render(script, 0)

    t0 = time.time()
    icfg = mi.InversionConfig(steps=400, lr=1e-2, seed=1)
    m, losses = mi.invert(video, params, 0, icfg, sched)
    print(f"invert {time.time()-t0:.0f}s", flush=True)
    zero = mi.init_zero(spec, icfg.shape_config, spec.frames)
    zero_losses = inversion.loss_stream(video, params, 0, zero, icfg, sched)
    tr = np.mean(losses[-50:])
    zl = np.mean(zero_losses[-50:])
    print(f"last-50 trained {tr:.4f} zero {zl:.4f} ratio {tr/zl:.3f}", flush=True)

    t0 = time.time()
    out_emb = diffusion.sample(params, m, cond=1, seed=7, steps=50, schedule=sched)
    out_zero = diffusion.sample(params, None, cond=1, seed=7, steps=50, schedule=sched)
    print(f"2 samples {time.time()-t0:.0f}s", flush=True)

    src_tracks = metrics.track(video)
    emb_tracks = metrics.track(out_emb)
    zero_tracks = metrics.track(out_zero)
    mf_emb = metrics.motion_fidelity(src_tracks, emb_tracks)
    mf_zero = metrics.motion_fidelity(src_tracks, zero_tracks)
    print(f"MF embedded {mf_emb:.3f}  MF zero {mf_zero:.3f}", flush=True)
    mean_disp = np.mean([t.displacements.mean(axis=0) for t in emb_tracks], axis=0)
    print(f"embedded mean displacement {mean_disp}", flush=True)
    mean_disp0 = np.mean([t.displacements.mean(axis=0) for t in zero_tracks], axis=0)
    print(f"zero mean displacement {mean_disp0}", flush=True)
    print(f"out_emb std {out_emb.std():.3f} out_zero std {out_zero.std():.3f} "
          f"data std {np.mean([v.std() for v,_ in data[:20]]):.3f}", flush=True)
    print(f"total {time.time()-t_all:.0f}s", flush=True)


if __name__ == "__main__":
    main()
