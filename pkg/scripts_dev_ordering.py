"""Dev experiment: criterion 7b / 8 orderings on current defaults."""
import json
import sys
import time

from sinr.data import make_dataset
from sinr.training import TrainConfig, evaluate, train

fce_init = sys.argv[1] if len(sys.argv) > 1 else "literal"
seeds = [101, 202, 303]
variants = {
    "sinr": {},
    "trilinear": {"model": "trilinear"},
    "no-swa": {"use_swa": False},
    "no-fce": {"use_fce": False},
    "no-sf": {"use_sf": False},
}
train_scenes, test_scenes = make_dataset(0, n_train=64, n_test=16)
results = {}
for name, over in variants.items():
    per_scale = {1: [], 2: [], 4: []}
    first_last = []
    for seed in seeds:
        cfg = TrainConfig(seed=seed, fce_init=fce_init, **over)
        t0 = time.perf_counter()
        r = train(cfg, train_scenes)
        dt = time.perf_counter() - t0
        rows = evaluate(r.params, cfg, r.mask, test_scenes)
        losses = [v for _, v in r.loss_log]
        import numpy as np
        first = float(np.mean(losses[:100]))
        last = float(np.mean(losses[-100:]))
        first_last.append((first, last))
        for row in rows:
            per_scale[row.scale].append(row.psnr)
        print(f"{name} seed={seed} {dt:.0f}s first100={first:.4f} "
              f"last100={last:.4f} psnr@1/2/4="
              f"{rows[0].psnr:.2f}/{rows[1].psnr:.2f}/{rows[2].psnr:.2f}",
              flush=True)
    import numpy as np
    results[name] = {
        "psnr": {s: float(np.mean(v)) for s, v in per_scale.items()},
        "loss_ratio": float(np.mean([l / f for f, l in first_last])),
    }
print(json.dumps(results, indent=2))
with open(f"/tmp/ordering_{fce_init}.json", "w") as fh:
    json.dump(results, fh, indent=2)
