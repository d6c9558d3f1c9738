"""Lymphocyte density, the attention channel, and the 4-channel network input."""
import numpy as np

from tlsdet import (GridSpec, Label, MultiChannelImage, NucleusTable, assemble_input,
                    count_nuclei, lda, mean_pool, normalize_density)

# %% a toy slide: 256 x 192 px at 0.5 um/px, density patches of 32 px
spec = GridSpec(256, 192, pitch_um=0.5, patch_size_px=32)
print("grid (rows, cols):", spec.shape)

rng = np.random.default_rng(0)
n = 400
x = np.r_[rng.normal(40, 6, n // 2), rng.uniform(0, 128, n // 2)].clip(0, 127.9)
y = np.r_[rng.normal(30, 6, n // 2), rng.uniform(0, 96, n // 2)].clip(0, 95.9)
labels = np.where(rng.random(n) < 0.2, Label.NON_LYMPHOCYTE, Label.LYMPHOCYTE)
nuclei = NucleusTable.from_arrays(x, y, labels)

# %% counts per patch (lymphocytes only), then min-max scaling to [0, 255]
counts = count_nuclei(nuclei, spec)
print(counts.values)
density = normalize_density(counts)
print("density range:", density.values.min(), density.values.max())

# %% attention is the reversed density: dense patches get low values
attention = lda(density)
print(attention.values.astype(int))

# %% pool an RGB tile to the same grid and stack the attention as a 4th channel
rgb = MultiChannelImage(rng.uniform(0, 255, (192, 256, 3)), ("R", "G", "B"))
pooled = mean_pool(rgb, spec.patch_size_px)
x4 = assemble_input(pooled, attention)
print(x4.values.shape, x4.channel_names)
