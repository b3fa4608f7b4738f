"""Rate-distortion optimized primary and secondary transform learning."""
from .codec import Baseline, BDRateResult, BlockCode, RDPoint, bd_rate, encode_block, encode_blocks, entropy_bits, evaluate
from .data import MODES, Mixture, ResidualDataset, SynthParams, ingest_raw, read_dataset, synth_residuals, write_dataset
from .graphs import PathGraphParams, adst_basis, dct_basis, gbt, laplacian, learn_path_graph, learn_spgt
from .klt import CovEstimate, sample_covariance, secondary_klt, separable_klt
from .linalg import EigPair, kron, sym_eig, unvec, vec
from .rdot import (
    ClusterAssign,
    Learner,
    QuantConfig,
    TrainReport,
    assign_clusters,
    dequantize,
    lloyd_train,
    quantize,
    rd_cost,
    rd_total,
    train_joint,
    train_tree,
    update_transforms,
)
from .transforms import (
    PrimaryKind,
    PrimaryTag,
    ScanOrder,
    TransformBank,
    TransformSpec,
    forward,
    inverse,
    read_bank,
    write_bank,
)

__version__ = "0.1.0"
