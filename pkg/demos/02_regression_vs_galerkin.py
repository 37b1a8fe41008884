"""Reconstructing a field from four Fourier coefficients.

Given the lowest Fourier modes of a field, the Galerkin reconstruction keeps
only those modes.  Conditioning the Gaussian reference measure keeps the same
mean but adds the unresolved variance, which is what the full measure does.
"""
import numpy as np

from optpredict import Grid, HamiltonianSpec, SamplerConfig, build_prior, condition, fourier_kernels
from optpredict.cli import invariant_initial_values
from optpredict.montecarlo import sample_conditioned

grid = Grid(32)
kernels = fourier_kernels(grid, 4)
spec = HamiltonianSpec(grid, 1.0)
cfg = SamplerConfig(seed=11, n_samples=3000, n_chains=60, chains_per_block=30, burn_in=500)

# draw one field from the invariant measure and keep its four coefficients
V, _ = invariant_initial_values(spec, kernels, cfg)
cg = condition(build_prior(grid, 1.055, 1.0), kernels, V)
ss = sample_conditioned(spec, kernels, V, cfg)

mc2 = (np.abs(ss.samples) ** 2).mean(axis=0)
reg2 = np.abs(cg.mean) ** 2 + np.diag(cg.cov).real
gal2 = np.abs(grid.n * kernels.G.conj().T @ V) ** 2

print("site   <|u|^2> sampled   regression   Galerkin")
for j in range(0, grid.n, 4):
    print(f"{j:4d}   {mc2[j]:12.3f}   {reg2[j]:10.3f}   {gal2[j]:8.3f}")
rms = lambda a: np.sqrt(np.mean((a - mc2) ** 2))
print(f"\nRMS error: regression {rms(reg2):.3f}, Galerkin {rms(gal2):.3f}")
print("the regression misses only the quartic flattening of the distribution;")
print("the Galerkin field has no subgrid variance at all")
