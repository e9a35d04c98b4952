import json
import numpy as np
from pathlib import Path
from uncdrive.protocol import ExperimentConfig, select_best, test_policy
from uncdrive.env import MPC

def med(v):
    v = np.asarray(v, dtype=float); v = v[np.isfinite(v)]
    return float(np.median(v))

out = {}
for sid in (1, 2):
    cfg = ExperimentConfig(scenario_id=sid, seed=0, total_steps=300000, out_dir=Path(f".probe/s{sid}"))
    params = select_best(cfg.out_dir, cfg)
    cases = ["VEVV", "VEXV", "VEXX"] if sid == 1 else ["VEVV", "VEXV", "VEXX", "XEXX", MPC]
    if sid == 1:
        cases.append(MPC)
    for case in cases:
        m, _ = test_policy(params, case, 60, sid, cfg)
        out[f"s{sid}/{case}"] = dict(
            finish=m.finish_rate, collide=m.collision_rate, timeout=m.timeout_rate,
            stalled=m.stalled_rate, ratio=med(m.brake_to_throttle_ratio),
            brakefreq=med(m.brake_frequency), gap=m.median_front_distance())
print(json.dumps(out, indent=1))
