"""Simulate a short panel and fit the available estimators.

The design has one covariate, slope 1 and feedback 0.5, with normal fixed
effects. The lag-pattern likelihood, the slope-only likelihood and Cox's
no-covariate likelihood are fitted to the same data, next to a pooled logit
that ignores the fixed effects altogether.
"""

import warnings

from dynlogit import SimDesign, fit_arp, fit_beta_only, fit_cox, fit_pooled_logit, simulate_panel

warnings.simplefilter("ignore")

design = SimDesign(T=4)
ds = simulate_panel(design, 5000, seed=1)
print(f"n={ds.n}, T={ds.T}, truth beta=1.0 gamma=0.5\n")


def show(label, res):
    print(label)
    for row in res.table():
        print(f"  {row['parameter']:<10}{row['estimate']:>9.4f}  se {row['se']:.4f}")


show("lag-pattern CMLE", fit_arp(ds))
show("slope-only CMLE", fit_beta_only(ds))
# Cox conditions on the endpoints and the interior sum; covariates are ignored,
# so here it answers a different question (design has covariates).
show("Cox CMLE (ignores x)", fit_cox(ds))
show("pooled logit", fit_pooled_logit(ds))

print("\nWithout covariates Cox's estimator is the reference:")
plain = simulate_panel(SimDesign(T=4, beta=()), 5000, seed=2)
show("Cox CMLE", fit_cox(plain))
show("lag-pattern CMLE", fit_arp(plain))
