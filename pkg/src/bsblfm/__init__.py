"""Block sparse Bayesian learning via fast marginalization, with CS and CDF 5/3 compressors."""

from .bsbl_fm import (
    DegeneracyError,
    Model,
    RecoveryReport,
    SolverConfig,
    noisy_beta_inv,
    solve,
)
from .dictionary import DctDictionary, dct_dictionary, effective_operator
from .metrics import prd, time_op
from .sensing import SparseBinaryMatrix, encode, encode_stream, generate
from .signal_model import BlockPartition, packetize, uniform_partition

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "DctDictionary",
    "DegeneracyError",
    "Model",
    "RecoveryReport",
    "SolverConfig",
    "SparseBinaryMatrix",
    "dct_dictionary",
    "effective_operator",
    "encode",
    "encode_stream",
    "generate",
    "noisy_beta_inv",
    "packetize",
    "prd",
    "solve",
    "time_op",
    "uniform_partition",
]
