"""Computing type-threshold functions over collocated multiple-access networks.

Exact description-entropy calculations, achievable rates and cut-set bounds
for the multi-round group broadcast scheme, and a symbol-level protocol
simulator.
"""

from .descriptions import (
    ChainLaw,
    Partition,
    ShiftPolicy,
    a_partition,
    binary_search_max_descriptions,
    chain_law,
    lemma_partition,
    sample_descriptions,
    single_group,
)
from .entropy import (
    binary_max_entropy_closed_form,
    chain_entropy,
    description_entropy_budget,
    lemma_bound,
    shift_sweep,
)
from .model import (
    SourceModel,
    TypeThresholdFunction,
    clipped_type_distribution,
    evaluate,
    evaluate_columns,
    function_entropy,
    standard_function,
    type_vector,
)
from .pmf import binomial_entropy, entropy_bits, h2, poisson_binomial_pmf
from .rates import (
    RateReport,
    cf_rate,
    cutset_bound_finite_field,
    cutset_bound_gaussian,
    irr_rate_gaussian,
    irr_upper_bound,
    mrgb_rate_finite_field,
    mrgb_rate_gaussian,
    mrgb_rate_gaussian_corollary,
)
from .sim import ProtocolTrace, SimConfig, empirical_chain_entropy, run_binary_search_max, run_protocol

__version__ = "0.1.0"

__all__ = [
    "ChainLaw",
    "Partition",
    "ProtocolTrace",
    "RateReport",
    "ShiftPolicy",
    "SimConfig",
    "SourceModel",
    "TypeThresholdFunction",
    "a_partition",
    "binary_max_entropy_closed_form",
    "binary_search_max_descriptions",
    "binomial_entropy",
    "cf_rate",
    "chain_entropy",
    "chain_law",
    "clipped_type_distribution",
    "cutset_bound_finite_field",
    "cutset_bound_gaussian",
    "description_entropy_budget",
    "empirical_chain_entropy",
    "entropy_bits",
    "evaluate",
    "evaluate_columns",
    "function_entropy",
    "h2",
    "irr_rate_gaussian",
    "irr_upper_bound",
    "lemma_bound",
    "lemma_partition",
    "mrgb_rate_finite_field",
    "mrgb_rate_gaussian",
    "mrgb_rate_gaussian_corollary",
    "poisson_binomial_pmf",
    "run_binary_search_max",
    "run_protocol",
    "sample_descriptions",
    "shift_sweep",
    "single_group",
    "standard_function",
    "type_vector",
]
