# %% [markdown]
# # Sampling the Levy area
#
# The truncated Fourier sampler is checked against a brute-force iterated sum
# before it is trusted inside the integrator.

# %%
import numpy as np

from stochvortex.noise import (brownian, fine_mesh_area, levy_area_refinement, levy_areas,
                               stream)

dt, K = 1 / 250, 1000

# %%
dW = brownian(1, 50_000, 2, dt).increments
A = levy_areas(stream(1, 0, 1), dW, dt, K)[:, 0, 1]
print("mean / SE       ", A.mean() / (A.std() / np.sqrt(A.size)))
print("Var / (dt^2/4)  ", A.var() / (dt ** 2 / 4))
print("corr with dW1dW2", np.corrcoef(A, dW[:, 0] * dW[:, 1])[0, 1])

# %%
_, Af = fine_mesh_area(stream(1, 1, 1), 5_000, dt, substeps=10_000)
print("fine-mesh Var / (dt^2/4)", Af.var() / (dt ** 2 / 4))

# %% [markdown]
# Truncation error: coarse and fine samples share their leading modes.

# %%
for k in (10, 100, 1000):
    c, f = levy_area_refinement(stream(1, 2, 1), dW[:5000], dt, k, 4 * k)
    mse = np.mean((c - f)[:, 0, 1] ** 2)
    print(k, mse / (dt ** 2 / (2 * np.pi ** 2 * k)))
