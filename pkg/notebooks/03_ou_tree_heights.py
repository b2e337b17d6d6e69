# %% [markdown]
# # Tree heights of a bootstrap particle filter
#
# A discretised Ornstein-Uhlenbeck process observed in Gaussian noise, with
# step and noise both 0.1, filtered with each of the four resampling schemes.
# Heights of the genealogies of `n` leaves, measured in coalescent time,
# should stay between fixed positive bounds for every `n`, while raw heights
# in generations double with `N`.
#
# Runs in about five minutes. The `configs/full.toml` preset repeats the
# study at 8192 particles, which takes hours.

# %%
from smc_genealogy.harness import load_config, run_height_experiment

cfg = load_config("configs/desk.toml", out_dir="out/notebook_ou")
summary = run_height_experiment(cfg)

# %%
print(f"{'scheme':12s} {'N':>4s} {'n':>4s} {'mean':>7s} {'var':>7s} {'censored':>8s}")
for r in summary.rows:
    print(f"{r.scheme:12s} {r.N:4d} {r.n:4d} {r.mean_rescaled:7.3f} {r.var_rescaled:7.3f} {r.censor_rate:8.3f}")

# %% [markdown]
# Raw heights at 256 particles over raw heights at 128.

# %%
for scheme in summary.schemes():
    ratios = [summary.row(scheme, 256, n).mean_height / summary.row(scheme, 128, n).mean_height
              for n in (2, 8, 32, 128)]
    print(scheme, " ".join(f"{x:.2f}" for x in ratios))

# %% [markdown]
# The plots land next to the CSV files, one pair per particle count.

# %%
for path in summary.files["plots"]:
    print(path)
