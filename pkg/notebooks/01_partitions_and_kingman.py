# %% [markdown]
# # Partitions and the Kingman coalescent
#
# The genealogy of `n` sampled particles is a path through the set partitions
# of `{1..n}`. Here we list those partitions, build the coalescent generator
# on them and compare exact laws with simulation.

# %%
import numpy as np

from smc_genealogy import enumerate_partitions
from smc_genealogy.kingman import (build_generator, fdd_law, height_moments, sample_partitions_at,
                                   sample_tree_heights, simulate_coalescent, transition_matrix)

rng = np.random.default_rng(0)

# %% [markdown]
# Partitions come in a fixed order: all singletons first, the single block
# last. The count is the Bell number.

# %%
for n in range(1, 7):
    print(n, len(enumerate_partitions(n)))
print([p.label() for p in enumerate_partitions(3)])

# %% [markdown]
# ## One tree

# %%
tree = simulate_coalescent(5, rng)
for t, p in zip(np.r_[0.0, tree.event_times], tree.path):
    print(f"{t:7.3f}  {p.label()}")

# %% [markdown]
# ## Tree height
#
# `T_n` is a sum of independent exponentials with rates `k(k-1)/2`, so its
# mean is `2(1 - 1/n)` and its variance converges to `4 pi^2/3 - 12` as `n`
# grows.

# %%
for n in (2, 10, 100):
    h = sample_tree_heights(n, 200_000, rng)
    mean, var = height_moments(n)
    print(f"n={n:4d}  mean {h.mean():.4f} (exact {mean:.4f})  var {h.var():.4f} (exact {var:.4f})")
print("variance at n = 10^4:", height_moments(10_000)[1], " limit:", 4 * np.pi ** 2 / 3 - 12)

# %% [markdown]
# ## Transition probabilities
#
# `exp(Qt)` gives the law of the partition at time `t` from any start.
# For `n = 2` the pair is still apart with probability `exp(-t)`.

# %%
q = build_generator(2)
for t in (0.0, 0.5, 1.0, 2.0):
    print(t, transition_matrix(q, t)[0], np.exp(-t))

# %% [markdown]
# Joint law at two times for `n = 3`, against 200 000 simulated trees.

# %%
paths, probs = fdd_law(3, (0.5, 1.0))
draws = sample_partitions_at(3, (0.5, 1.0), 200_000, rng)
parts = enumerate_partitions(3)
empirical = {p: 0 for p in paths}
for a, b in draws:
    empirical[(a, b)] += 1
for p, pr in zip(paths, probs):
    if pr > 0:
        print(f"{parts[p[0]].label():>10} -> {parts[p[1]].label():<10} {pr:.4f}  {empirical[p] / len(draws):.4f}")
