"""
Constant-TAN scaling plans
==========================

Derive cheaper simulation runs, step/batch trade-offs and dataset-size
variants from one reference configuration.
"""

from tandp import PrivacyParams, ReferenceConfig, planner

ref = ReferenceConfig(PrivacyParams(1_281_167, 16_384, 72_000, 2.5, 8e-7),
                      learning_rate=8.0)


def show(plan):
    for c in plan.configs:
        p = c.privacy
        print(f"  {c.kind:12s} N={p.dataset_size:8d} B={p.batch_size:6d} S={p.steps:7d} "
              f"sigma={p.noise_multiplier:8.5f} lr={c.learning_rate:6.2f} "
              f"compute={float(c.compute_factor):8.5f} eps={c.epsilon:7.2f} "
              f"eps_tan={c.eps_tan:6.2f} {' '.join(c.notes)}")


###############################################################################
# Simulate at small batch: same eta_step, same S, 1/64 of the compute.
show(planner.plan(ref, batches=[256, 1024, 4096]))

###############################################################################
# Trade steps for batch size at fixed sigma (learning rate scales as 1/S).
show(planner.plan(ref, steps=[18_000, 36_000, 144_000]))

###############################################################################
# Half and double the data, with delta scaled alike.
show(planner.plan(ref, betas=[0.5, 2.0]))
