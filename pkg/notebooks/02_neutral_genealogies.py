# %% [markdown]
# # Genealogies of a neutral particle system
#
# With all weights equal, multinomial resampling is a Wright-Fisher
# population. Two lineages merge with probability `1/N` per generation, so
# pair heights are about `N` generations and about 1 in coalescent time.

# %%
import numpy as np

from smc_genealogy import CoalescenceSeries, neutral_model, run_smc, trace_genealogy, tree_height
from smc_genealogy.genealogy import rescaled_height
from smc_genealogy.harness import ExperimentConfig, run_fdd_experiment, run_scaling_experiment

# %% [markdown]
# ## A single run

# %%
N = 64
history = run_smc(neutral_model(20 * N), N, "multinomial", seed=3)
trace = trace_genealogy(history, np.arange(8))
series = CoalescenceSeries.from_history(history)
print("blocks in the first 200 reverse generations:", trace.num_blocks()[:200:20])
print("height:", tree_height(trace), "generations;", rescaled_height(trace, series), "coalescent units")

# %% [markdown]
# The per-generation merge rate `c` of a pair is the chance that two distinct
# children share a parent. For equal weights its mean is `1/N`.

# %%
c = series.c[1:]
print(f"mean c = {c.mean():.5f}, 1/N = {1 / N:.5f}")

# %% [markdown]
# ## Distance to the coalescent
#
# The joint law of the pair's state at rescaled times 0.5 and 1 approaches
# the Kingman law as `N` grows. The conditional estimator averages exact
# per-run transition laws and has much less noise than counting sampled
# paths.

# %%
cfg = ExperimentConfig(model="neutral", particles=[32, 64, 128, 256], replicates=500,
                       schemes=["multinomial"], out_dir="out/notebook_neutral")
fdd = run_fdd_experiment(cfg, n=2)
for row in fdd.rows:
    print(f"N={row.N:4d}  TV sampled {row.tv_sampled:.4f}  TV conditional {row.tv_conditional:.4f}")

# %% [markdown]
# ## Height grows linearly in N

# %%
scaling = run_scaling_experiment(cfg, n=2)
fit = scaling.mean_fits["multinomial"]
print(f"mean slope {fit.slope:.3f} [{fit.ci_low:.3f}, {fit.ci_high:.3f}]")
print(f"variance slope {scaling.var_fits['multinomial'].slope:.3f}")
