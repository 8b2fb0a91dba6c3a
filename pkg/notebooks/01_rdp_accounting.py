"""
RDP accounting of DP-SGD
========================

Compute the (eps, delta) guarantee of a DP-SGD run and compare it with the
closed-form TAN approximation.
"""

from tandp import PrivacyParams, epsilon_rdp, summarize

###############################################################################
# An ImageNet-scale run: 1.28M images, batch 16384, 72K steps, sigma = 2.5.
params = PrivacyParams(dataset_size=1_281_167, batch_size=16_384, steps=72_000,
                       noise_multiplier=2.5, delta=8e-7)
account = epsilon_rdp(params)
print(f"eps_rdp = {account.epsilon:.3f} at order {account.best_order}"
      f" (grid truncated: {account.grid_truncated})")

###############################################################################
# The TAN summary only needs eta^2 = q^2 S / (2 sigma^2).
s = summarize(params)
print(f"eta = {s.eta:.4f}, eps_tan = {s.eps_tan:.3f}")
print(f"GDP mu = {s.gdp_mu:.4f} (large-sigma value {s.gdp_mu_limit:.4f})")
print(f"tCDP omega = {s.tcdp_omega:.3f}")

###############################################################################
# The composed RDP curve around the optimum.
for alpha, rdp in account.per_order[:8]:
    print(f"  alpha={alpha:3d}  S*g_alpha={rdp:8.4f}")
