"""MRF MAP inference as QUBO, classical solvers, and stereo matching."""

from .imaging import DisparityMap
from .mrf import MarkovRandomField, brute_force_map, energy, random_mrf
from .onehot import (
    QuboInstance,
    RectifierTable,
    chain_strength,
    compute_rectifiers,
    decode,
    encode_one_hot,
    verify_feasible_optimum,
)
from .pbo import (
    PseudoBooleanPolynomial,
    decode_binary,
    encode_binary,
    pbo_to_qubo,
    quadratize,
)
from .solve import (
    IsingModel,
    SolveResult,
    qubo_to_ising,
    solve_chain_dp,
    solve_exhaustive,
    solve_sa,
)
from .stereo import (
    StereoConfig,
    StereoResult,
    middlebury_config,
    sintel_config,
    stereo_match,
)

__all__ = [
    "DisparityMap",
    "IsingModel",
    "MarkovRandomField",
    "PseudoBooleanPolynomial",
    "QuboInstance",
    "RectifierTable",
    "SolveResult",
    "StereoConfig",
    "StereoResult",
    "brute_force_map",
    "chain_strength",
    "compute_rectifiers",
    "decode",
    "decode_binary",
    "encode_binary",
    "encode_one_hot",
    "energy",
    "middlebury_config",
    "pbo_to_qubo",
    "quadratize",
    "qubo_to_ising",
    "random_mrf",
    "sintel_config",
    "solve_chain_dp",
    "solve_exhaustive",
    "solve_sa",
    "stereo_match",
    "verify_feasible_optimum",
]

__version__ = "0.1.0"
