"""
Eliciting the connectivity priors
=================================

The spike-and-slab prior on each connectivity coefficient has two pieces:
a Gamma prior on the slab precision and a Beta prior on the inclusion rate.
This script shows how both are chosen from statements about plausible
effect sizes.
"""

import numpy as np
from scipy import stats

from sparsedlm.priors import elicit_inclusion_prior, elicit_slab_precision, tau0_from_quantile

# Pick the prior mode of the slab precision directly, then match the rate d.
slab = elicit_slab_precision(tau0=1.82, rate_d=1.53)
print("slab precision prior:", slab)

# Alternatively ask for a coefficient of -1 to sit at the 1% quantile
# of the slab, and back out the implied precision mode.
tau0 = tau0_from_quantile(-1.0, 0.01)
print(f"tau0 from the 1% quantile at -1: {tau0:.4f}")
print("implied prior:", elicit_slab_precision(target_quantile=-1.0, prob=0.01))

# Under the slab precision tau0 the coefficient has sd 1/sqrt(tau0).
sd = 1 / np.sqrt(1.82)
print(f"P(|phi| > 1 | tau = 1.82) = {2 * stats.norm.sf(1, scale=sd):.3f}")

# The inclusion rate pi favours connections a priori, with E(pi) = 2/3.
incl = elicit_inclusion_prior(6, 3)
print(f"inclusion prior: {incl}, mean {incl.mean:.4f}, sd {incl.sd:.4f}")
