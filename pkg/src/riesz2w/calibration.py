"""Frozen calibration constants.

The paper proves qualitative equivalences with unspecified constants, so
regression bounds are measured once on the seeded corpus and frozen here;
CI fails on any excursion. Values were recorded at calibration time with
the default backend and seeds; they are bounds, not targets.
"""

# theorem-audit band for N / (A2^(1/2) + T + T*) over the 20-pair corpus
RATIO_BAND = (0.05, 1.5)

# monotonicity ratio audit: max ratio over the 500-trial seeded suite
C_MONO = 4.0

# p_bad_mc(eps=0.1, trials=1e4) upper bounds per r
PBAD_BANDS = {4: 1.0, 8: 1.0, 16: 1.0}

# mean bad-energy fraction upper bounds per r (eps=0.1, seeded suite)
BAD_ENERGY_BANDS = {4: 1.0, 8: 1.0, 16: 1.0}

# dyadic-Poisson comparability: bounds for surrogate / sum of dyadic operators
DYADIC_POISSON_BAND = (0.05, 20.0)

# Ahlfors-David ratio band for cantor_ad(d=1.5, depth=7), sampled balls
CANTOR_AD_BAND = (0.1, 10.0)

# energy-constant audit on the Lebesgue pair (module example regression bound)
ENERGY_AUDIT_BOUND = 1e6
