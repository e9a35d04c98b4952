import sys, json
from pathlib import Path
from uncdrive.protocol import ExperimentConfig, train_experiment, select_best, test_policy
from uncdrive.ppo import PpoHyperParams, load_checkpoint

opt, steps, out, lr = sys.argv[1], int(sys.argv[2]), Path(sys.argv[3]), float(sys.argv[4])
cfg = ExperimentConfig(
    scenario_id=1, seed=0, total_steps=steps,
    hyper=PpoHyperParams(optimizer=opt, learning_rate=lr),
    out_dir=out,
)
train_experiment(cfg)
params = select_best(out, cfg)
m, _ = test_policy(params, "VEVV", 20, 1, cfg)
print(json.dumps({
    "opt": opt, "lr": lr, "steps": steps,
    "finish": m.finish_rate, "collide": m.collision_rate,
    "timeout": m.timeout_rate, "stalled": m.stalled_rate,
    "median_steps": float(sorted(m.episode_steps)[len(m.episode_steps)//2]),
    "median_dist": float(sorted(m.traveled_distance_m)[len(m.traveled_distance_m)//2]),
}))
