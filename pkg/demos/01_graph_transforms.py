"""
Path-graph transforms
=====================

The DCT and ADST fall out of tiny graph Laplacians, and a learned path graph
adapts the basis to the correlation along one direction of a residual block.
"""

# %%
import numpy as np

from jointrdot import graphs
from jointrdot.data import SynthParams, synth_residuals

np.set_printoptions(precision=3, suppress=True)

# %% The unit path graph on 8 nodes gives the DCT-II.
n = 8
dct = graphs.dct_basis(n)
print("max |gbt - cosine formula|:", np.abs(dct - graphs.dct_closed_form(n)).max())

# %% A self-loop on the first node turns it into the ADST: the lowest basis
# vector now ramps up from the predicted edge instead of staying flat.
adst = graphs.adst_basis(n)
print("DCT  col 0:", dct[:, 0])
print("ADST col 0:", adst[:, 0])

# %% Learn a graph from vertical-mode residuals. Columns run along the
# prediction direction, so their edge weights come out an order of magnitude
# above the row weights.
blocks = synth_residuals("V", 4000, n, SynthParams(), seed=3).as_float()
g_col, g_row = graphs.learn_spgt_graphs(blocks)
print("column edge weights:", g_col.edge_weights, "self loop", round(g_col.self_loop, 3))
print("row edge weights:   ", g_row.edge_weights, "self loop", round(g_row.self_loop, 3))

# %% How much energy the first few coefficients capture, DCT vs learned.
u_col, u_row = graphs.learn_spgt(blocks)


def compaction(col, row, k=8):
    y = np.einsum("ij,mjk,kl->mil", col.T, blocks, row)
    e = np.sort((y ** 2).mean(axis=0).ravel())[::-1]
    return e[:k].sum() / e.sum()


print(f"energy in 8 strongest coefficients: DCT {compaction(dct, dct):.3f}, SPGT {compaction(u_col, u_row):.3f}")
