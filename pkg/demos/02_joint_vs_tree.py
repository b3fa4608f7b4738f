"""
Joint vs two-stage training
===========================

Both trainers start from the same primary stage. The two-stage (tree) trainer
then fits one secondary per primary cluster, while the joint trainer lets all
six slots compete for every block in a single Lloyd loop.
"""

# %%
import numpy as np

from jointrdot.data import Mixture, SynthParams, synth_residuals
from jointrdot.rdot import QuantConfig, train_joint, train_tree

q = QuantConfig(28)
print(f"QP {q.qp}: step {q.step:.3f}, lambda {q.lam:.3f}")

# %% A mixture of two orientations gives the clusters something to separate.
params = SynthParams(mixture=Mixture(0.5, 0.0))
x = synth_residuals("V", 2000, 8, params, seed=42).as_float()

# %%
for learner in ("spgt", "sepklt"):
    _, a_joint, joint = train_joint(x, q, learner)
    _, a_tree, tree = train_tree(x, q, learner)
    print(f"\n{learner}")
    print("  joint history:", np.round(joint.iterations, 1))
    print("  tree history: ", np.round(tree.iterations, 1))
    print("  cluster sizes joint", a_joint.sizes, "tree", a_tree.sizes)
    delta = 100 * (joint.final_rd_total - tree.final_rd_total) / tree.final_rd_total
    print(f"  joint vs tree final RD total: {delta:+.3f}%")
