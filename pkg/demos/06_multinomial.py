"""Multinomial AR(1): three alternatives, alternative 1 as the base.

Only the 2 x 2 block of feedback effects among alternatives 2 and 3 is
identified, along with the slopes of alternatives 2 and 3.
"""

import warnings

from dynlogit import SimDesign, fit_mnl, simulate_panel

warnings.simplefilter("ignore")

design = SimDesign(T=4, M=3, multinomial=True, beta=[[0.0], [1.0], [-0.5]],
                   gamma=[[0, 0, 0], [0, 0.8, 0.1], [0, -0.2, 0.6]])
ds = simulate_panel(design, 6000, seed=6)
res = fit_mnl(ds)
for row, truth in zip(res.table(), design.true_values()):
    print(f"{row['parameter']:<9}{row['estimate']:>9.4f}  se {row['se']:.4f}  truth {truth:+.2f}")
