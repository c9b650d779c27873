"""
Rough initial data and its mollifications
=========================================

Sample a compactly supported fractional Brownian sheet, smooth it at dyadic
radii, and watch the solutions at time T approach each other while the
maximum norm never exceeds that of the data.
"""

from burgerslab import CutoffSpec, FbsParams, Grid, SolverConfig, TimeGrid, make_initial
from burgerslab import estimate_holder, zero_path
from burgerslab.harness.studies import study_mollification

g = Grid(2, 64, 1.0)
phi = make_initial(g, "fbs_cutoff", dict(hurst=0.5, seed=0,
                                         cutoff=CutoffSpec(0.08, 0.2, (0.5, 0.5))))
print("Hölder estimate of phi_1:", round(estimate_holder(phi.component(0)).exponent, 3))

############################################################
# Four levels, eps_m = 8h 2^-m, explicit monotone scheme

cfg = SolverConfig(0.02, 1e-3, scheme="ssp_fd", snapshot_every=100)
res = study_mollification(phi, zero_path(g, TimeGrid(0.1, 100)), cfg)
print(" ".join(f"{h:>10}" for h in res.header))
for row in res.rows:
    print(" ".join(f"{'':>10}" if v is None else f"{v:>10.4g}" for v in row))
print("verdict:", "PASS" if res.passed else "FAIL")
