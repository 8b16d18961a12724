"""Train a small model on a small dataset, then reconstruct a cloud.

This is a scaled-down end-to-end pass (a few minutes on a laptop); see the
README for the full desk-scale recipe used by the acceptance suite.

Run: python demos/04_train_and_reconstruct.py
"""

import tempfile
from pathlib import Path

import numpy as np

from splinefit import (
    ArchConfig,
    GenConfig,
    TrainConfig,
    emd,
    generate_dataset,
    load_dataset,
    reconstruct,
    train,
)
from splinefit.pipeline import export_obj

work = Path(tempfile.mkdtemp())
cfg = GenConfig(
    grid_sizes=((3, 4), (5, 6)),
    samples_per_size=40,
    points_per_cloud=256,
    seed=5,
)
data = generate_dataset(cfg, work / "data")
_, samples = load_dataset(data)

arch = ArchConfig(k_neighbors=8, layer_dims=(32, 32, 64), global_dim=128,
                  dict_atoms=8, head_hidden=256)
tc = TrainConfig(epochs=8, batch_size=16, seed=1)
result = train(samples, arch, tc, work / "run", degrees=cfg.degrees,
               log=print)
print("best epoch:", result.best_epoch)

held_out = samples[3]
recon = reconstruct(held_out.cloud, result.checkpoint_path, sample_res=48)
print(f"true grid {held_out.true_grid}, predicted {recon.predicted_grid}")
print("emd(reconstruction, clean):",
      round(emd(recon.dense_sample, held_out.clean_cloud, seed=0), 4))
print("emd(noisy input,   clean):",
      round(emd(held_out.cloud, held_out.clean_cloud, seed=0), 4))
export_obj(recon, work / "surface.obj")
print("mesh written to", work / "surface.obj")
