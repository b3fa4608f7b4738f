"""
Coding gains
============

Train a bank on one half of a synthetic dataset, code the other half at six
QPs and compare against the DCT/ADST baseline with the BD-rate.
"""

# %%
from jointrdot.codec import Baseline, bd_rate, encode_block, entropy_bits, evaluate
from jointrdot.data import synth_residuals
from jointrdot.rdot import QuantConfig, train_joint

# %% The rate model on a toy level vector: runs of zeros are cheap,
# large levels are not.
print("bits for [3, 0, 0, -1, 0, 0, 0, 0]:", entropy_bits([3, 0, 0, -1, 0, 0, 0, 0]))
print("bits for all zeros:               ", entropy_bits([0] * 8))

# %%
x = synth_residuals("D_45", 8000, 8, seed=7).as_float()
train, test = x[:4000], x[4000:]
qps = range(26, 32)

bank = train_joint(train, QuantConfig(28), "spgt")[0]
ref = evaluate(test, Baseline(8), qps)
cur = evaluate(test, bank, qps)

print("\nqp  baseline bits/PSNR    bank bits/PSNR")
for a, b in zip(ref, cur):
    print(f"{a.qp}  {a.bits_per_block:7.2f} {a.psnr:6.2f}    {b.bits_per_block:7.2f} {b.psnr:6.2f}")

res = bd_rate(ref, cur)
print(f"\nBD-rate {res.percent:+.2f}% over PSNR {res.overlap_interval[0]:.2f}..{res.overlap_interval[1]:.2f} dB")

# %% Which slots the encoder picks for a handful of blocks.
q = QuantConfig(28)
print("chosen slots:", [encode_block(b, bank, q).chosen_slot for b in test[:20]])
