"""
Finding sparse state signals
============================

A single activation series evolves as an AR(1) whose innovations are
mostly small with occasional large jumps. The scale-mixture prior gives
each time point its own precision weight omega_t; weights below one mark
the jumps. Run with ``python demos/sparse_signal_study.py [W/V] [seed]``.
"""

import sys

import numpy as np

from sparsedlm.sampler import McmcConfig, ModelSpec, run_chain
from sparsedlm.simulate import simulate_univariate_sparse

ratio = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0

data, truth = simulate_univariate_sparse(V=1.0, W_over_V=ratio, kappa=20.0, phi=0.5, pi_mix=0.9, T=285, seed=seed)
print(f"T={data.T}, {truth.outlier.sum()} jump times among {truth.outlier.size}")

draws = run_chain(ModelSpec(y=data.series, trend=False), McmcConfig(n_iter=3000, burn_in=1000, seed=seed))

omega = draws.omega.mean(axis=0)[:, 0]
flagged = omega < 1.0
print(f"jumps flagged (omega < 1): {flagged[truth.outlier].mean():.2f}")
print(f"quiet times flagged:       {flagged[~truth.outlier].mean():.2f}")

# Posterior intervals for the headline parameters against the truth.
for name, sample, value in [
    ("V", 1 / draws.lambda_y[:, 0], truth.V),
    ("lambda_theta", draws.lambda_theta[:, 0], truth.lambda_theta),
    ("phi", draws.phi[:, 0, 0], truth.phi),
]:
    lo, hi = np.quantile(sample, [0.025, 0.975])
    print(f"{name:>12}: truth {value:.3f}, 95% interval [{lo:.3f}, {hi:.3f}]")

# The five smallest weights, which should sit on the largest jumps.
order = np.argsort(omega)[:5]
print("smallest omega:", np.round(omega[order], 3), "true |w|:", np.round(np.abs(truth.w[order]), 2))
