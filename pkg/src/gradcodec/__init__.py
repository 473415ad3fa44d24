"""gradcodec: bit-exact gradient compression codecs, rate-distortion
bound calculators, and a compressed gradient descent benchmark harness.
"""

__version__ = "0.1.0"

from .bitio import BitCursor, BitString, DecodeError
from .compressors import CompressionOutcome, Operator, OperatorConfig, make_operator
from .geometry import CapParams, cap_probability, reg_inc_beta
from .optim import Problem, RunTrace, cgd_run, make_problem

__all__ = [
    "BitCursor",
    "BitString",
    "CapParams",
    "CompressionOutcome",
    "DecodeError",
    "Operator",
    "OperatorConfig",
    "Problem",
    "RunTrace",
    "cap_probability",
    "cgd_run",
    "make_operator",
    "make_problem",
    "reg_inc_beta",
    "__version__",
]
