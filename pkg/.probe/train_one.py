import sys
from pathlib import Path
from uncdrive.protocol import ExperimentConfig, train_experiment
scenario, steps, out = int(sys.argv[1]), int(sys.argv[2]), Path(sys.argv[3])
cfg = ExperimentConfig(scenario_id=scenario, seed=0, total_steps=steps, out_dir=out)
train_experiment(cfg)
