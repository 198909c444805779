# %% [markdown]
# Simulating the five data generating processes and the scenario builders.

# %%
import numpy as np

from gfmsim import dgp as D
from gfmsim.scenarios import build_dataset, describe, preset_spec

# %%
coeffs = D.sample_stationary_ar_coefficients(3, rng=0)
print("AR(3) coefficients:", np.round(coeffs.phi, 3))
print("root moduli:", np.round(np.abs(D.characteristic_roots(coeffs.phi)), 3))

# %%
series = {
    "AR(3)": D.simulate_ar(coeffs, 200, rng=1),
    "SAR(1)": D.simulate_sar(D.SAR_USACCDEATHS, 200, rng=1),
    "logistic": D.simulate_logistic_map(D.LOGISTIC_REFERENCE, 200, rng=1),
    "SETAR": D.simulate_setar(D.SETAR_REFERENCE, 200, rng=1),
    "Mackey-Glass": D.simulate_mackey_glass(D.MACKEY_GLASS_REFERENCE, 200, rng=1),
}
for name, s in series.items():
    v = s.values
    print(f"{name:>13}: n={v.size} mean={v.mean():9.3f} min={v.min():9.3f} max={v.max():9.3f}")

# %% [markdown]
# A preset fixes the DGP, the scenario layout and the sweep. Each replicate is
# rebuilt from its seed, so the same call always gives the same data.

# %%
spec = preset_spec("ar3-ms-hom-short")
print(describe(spec))
ds = build_dataset(spec, replicate=0, num_series=10)
print(len(ds.series), "series of length", len(ds.series[0].values))

# %%
try:
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(len(series), 1, figsize=(8, 9), sharex=True)
    for ax, (name, s) in zip(axes, series.items()):
        ax.plot(s.values, lw=0.8)
        ax.set_ylabel(name)
    fig.tight_layout()
    fig.savefig("dgps.png", dpi=100)
except ImportError:
    pass
