"""Train a small pick linker end to end (a few minutes on a laptop).

Generates a modest synthetic dataset, trains for a handful of epochs, and
reports the held-out per-pick accuracy.  The desk-scale experiment used
throughout the repository is the same thing at 80k windows / 16 epochs; use
the CLI for that:

    pickassoc synth --config demos/data/config.txt --n 80000 --out dataset.npz
    pickassoc train --config demos/data/config.txt --dataset dataset.npz \
        --out linker.npz --log training_log.csv
"""

import pathlib

from pickassoc.geo import Region, load_stations
from pickassoc.linker import TrainConfig, train
from pickassoc.synth import SynthConfig, generate_dataset
from pickassoc.velmod import load_model

HERE = pathlib.Path(__file__).parent
stations = load_stations(HERE / "data" / "stations.csv")
model = load_model(HERE / "data" / "velocity_model.txt")
region = Region(34.0, 35.0, -118.0, -117.0)

dataset_path = HERE / "demo_dataset.npz"
synth_cfg = SynthConfig(n_p=50, false_pick_max=60, seed=3)
print("generating 8000 windows ...")
generate_dataset(synth_cfg, stations, region, model, 8000, dataset_path, workers=2)

train_cfg = TrainConfig(hidden=32, n_p=50, epochs=5, seed=3)
print("training (5 epochs) ...")
result = train(dataset_path, train_cfg, log_path=HERE / "demo_training_log.csv",
               checkpoint_path=HERE / "demo_linker.npz")
for h in result.history:
    print(f"  epoch {h.epoch}: train loss {h.train_loss:.4f}, "
          f"val loss {h.val_loss:.4f}, val accuracy {h.val_accuracy:.4f}")
print(f"best epoch {result.best_epoch}; checkpoint at {HERE / 'demo_linker.npz'}")
