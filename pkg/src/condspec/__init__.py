"""Exact laws, limit laws and samplers for random decomposable structures
whose component counts are independent variables conditioned on their
weighted sum, in the convergent case ``E Z_j = j^(-q-1) lambda(j)``, ``q > 0``.
"""

from .dist import Pmf, ScaledVar, pmf_negbinom, pmf_poisson, tilt
from .errors import CondSpecError
from .exact import (
    SpectrumLaw,
    component_count_law,
    conditional_marginal,
    largest_component_law,
    limit_laws,
    partition_function,
    qn_law,
    smallest_component_law,
    spectrum_law_bruteforce,
    suffix_table,
    t_distribution,
    tv_distance,
)
from .modelfile import load_model, parse_model
from .models import LambdaFn, ModelSpec, condition_diagnostics
from .trees import otter_constants, rooted_tree_counts, tree_counts, unrooted_tree_counts

__version__ = "0.1.0"

__all__ = [
    "CondSpecError",
    "LambdaFn",
    "ModelSpec",
    "Pmf",
    "ScaledVar",
    "SpectrumLaw",
    "component_count_law",
    "condition_diagnostics",
    "conditional_marginal",
    "largest_component_law",
    "limit_laws",
    "load_model",
    "otter_constants",
    "parse_model",
    "partition_function",
    "pmf_negbinom",
    "pmf_poisson",
    "qn_law",
    "rooted_tree_counts",
    "smallest_component_law",
    "spectrum_law_bruteforce",
    "suffix_table",
    "t_distribution",
    "tilt",
    "tree_counts",
    "tv_distance",
    "unrooted_tree_counts",
]
