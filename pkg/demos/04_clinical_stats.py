"""Per-patient TLS density, normality checks and a two-group rank test."""
import numpy as np

from tlsdet import Group, PatientDensity, group_compare, mann_whitney_u, shapiro_wilk

rng = np.random.default_rng(4)

# %% skewed densities, so normality is doubtful and a rank test is the safer choice
areas = rng.uniform(80, 250, 40)
inv = rng.poisson(0.02 * areas[:20])
noinv = rng.poisson(0.06 * areas[20:])
patients = [PatientDensity(f"P{i:02d}", int(c), float(a), Group.INVASION)
            for i, (c, a) in enumerate(zip(inv, areas[:20]))]
patients += [PatientDensity(f"P{20 + i:02d}", int(c), float(a), Group.NO_INVASION)
             for i, (c, a) in enumerate(zip(noinv, areas[20:]))]

res = group_compare(patients)
for g, s in res.groups.items():
    sw = s.shapiro
    print(g.value, "n =", s.n, "median =", round(s.median, 4),
          "S-W p =", None if sw is None else round(sw.p_value, 4))
print("Mann-Whitney:", res.mann_whitney.to_dict())

# %% small samples use the exact null distribution
print(mann_whitney_u([1, 2], [3, 4]))
print(shapiro_wilk([1, 2, 3]).statistic)
