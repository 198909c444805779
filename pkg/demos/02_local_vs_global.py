# %% [markdown]
# Local AR against a pooled regression and a boosted-tree global model on many
# short AR(3) series.

# %%
import numpy as np

from gfmsim.evaluation import smape
from gfmsim.harness import make_task
from gfmsim.models.forecasting import forecast
from gfmsim.scenarios import build_dataset, preset_spec

spec = preset_spec("ar3-ms-hom-short")

# %%
errors = {"AR-3": [], "PR-3": [], "GBT-3": []}
for rep in range(30):
    task, train, test = make_task(build_dataset(spec, rep, num_series=100))
    for model in errors:
        pred, _ = forecast(model, task, {"desk": True} if model.startswith("GBT") else None, seed=rep)
        errors[model] += [smape(pred[k], test[i]) for k, i in enumerate(task.targets)]

for model, e in errors.items():
    print(f"{model}: mean SMAPE {np.mean(e):.2f} over {len(e)} series")

# %% [markdown]
# With only 15 training points per series the local fit is noisy, while the
# pooled fit shares one coefficient vector across all series.
