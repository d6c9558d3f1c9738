"""Synthetic slide -> density map -> Otsu blobs -> scores against ground truth.

Also shows the same run through the command line.
"""
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from tlsdet import SceneParams, density_map, evaluate_density, generate_scene

# %% a 4 mm x 4 mm scene with five lymphocyte clusters
params = SceneParams(seed=3)
scene = generate_scene(params)
print(len(scene.nuclei), "nuclei,", len(scene.boxes), "boxes")

dm = density_map(scene.nuclei, params.grid_spec)
report = evaluate_density(dm, scene.boxes)
print(report.to_dict()["counts"])
print({k: v for k, v in report.to_dict()["metrics"].items()})
# isolated background lymphocytes survive the global threshold as tiny blobs,
# so this baseline has high recall and very low precision

# %% box recall over a handful of seeds
brs = [evaluate_density(density_map(s.nuclei, s.params.grid_spec), s.boxes).metrics["BR"]
       for s in (generate_scene(SceneParams(seed=k)) for k in range(10))]
print("mean BR:", np.mean(brs))

# %% the CLI equivalent
out = Path(tempfile.mkdtemp())
tl = [sys.executable, "-m", "tlsdet.cli"]
subprocess.run(tl + ["synth", "--seed", "3", "--nuclei-out", str(out / "n.csv"),
                     "--boxes-out", str(out / "boxes.json")], check=True)
subprocess.run(tl + ["density", str(out / "n.csv"), "--pitch-um", "0.5", "--extent", "4000", "4000",
                     "-o", str(out / "density.pgm")], check=True)
print(sorted(p.name for p in out.iterdir()))
