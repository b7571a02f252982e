"""A small Monte Carlo study.

Bias, RMSE and interval coverage over replications, for two sample sizes.
The ratio column compares RMSE at one size with the next; under root-n
behaviour and a fourfold increase in n it should be near 2.
"""

from dynlogit import McConfig, SimDesign, run_monte_carlo

cfg = McConfig(reps=100, n_grid=(1000, 4000), design=SimDesign(beta=()),
               estimators=("arp_cmle", "cox"), seed=5)
print(run_monte_carlo(cfg).table())
