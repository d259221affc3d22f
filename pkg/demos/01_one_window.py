"""One training window: sparse versus minimum-norm interpolating SDF.

Simulates a planted-sparse panel, builds the (T, P) managed-factor matrix of a
single window with P = 10 T, and compares the basis-pursuit and ridgeless
solutions of F lam = 1.  Months after the window serve as a holdout for the
factor means and covariance.

    python demos/01_one_window.py
"""

import numpy as np

from sparsesdf.factors import build_window, factor_series
from sparsesdf.features import FeatureSpec, draw_features
from sparsesdf.panel import PlantedKernelSpec, synth_panel
from sparsesdf.solvers import basis_pursuit, ridgeless
from sparsesdf.theory import decompose, mean_gap, scale_chain

T, N, D, HOLDOUT = 24, 80, 3, 120
spec = PlantedKernelSpec(k_true=3, P_max=500, seed=3)
panel, _ = synth_panel(spec, T_total=T + 1 + HOLDOUT, N=N, D=D)
draw = draw_features(FeatureSpec(P=10 * T, D=D, seed=11))
window = build_window(panel, draw, 0, T)
F = window.F_in

bp, rl = basis_pursuit(F), ridgeless(F)
print(f"F is {F.shape[0]} x {F.shape[1]}")
for sol in (bp, rl):
    print(f"{sol.method:>13}: |support| = {len(sol.support):4d}  l1 = {sol.l1_norm:9.4f}  "
          f"l2 = {sol.l2_norm:8.4f}  residual = {sol.residual_inf:.1e}")

# Out-of-sample SDF returns M = 1 - lam'F on the next month.
for sol in (bp, rl):
    print(f"{sol.method:>13}: next-month factor return lam'F = {sol.lam @ window.F_oos: .4f}")

# Holdout factor moments.  In-sample means lie in row(F), where the gap is zero.
F_hold = factor_series(panel, draw, T + 1)
mu = F_hold.mean(axis=0)
g = mean_gap(F, mu, bp, rl, decomposition=decompose(F, mu))
print(f"mean gap direct {g.gap_direct:.6e}  identity {g.gap_identity:.6e}  "
      f"error {g.identity_error:.1e}")

# Norm chain: ||lam||_2 <= ||lam||_1 and vol <= sqrt(max eig) ||lam||_1.
Sigma = np.cov(F_hold, rowvar=False)
sc = scale_chain(bp, Sigma)
for name, sol in (("BP", bp), ("ridgeless", rl)):
    print(f"{name} holdout mean lam'mu = {sol.lam @ mu: .4f}  vol = {np.sqrt(sol.lam @ Sigma @ sol.lam):.4f}")
print(f"BP vol {sc.vol:.4f} <= bound {sc.bound:.4f}")
