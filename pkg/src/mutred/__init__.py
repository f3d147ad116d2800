"""Evaluate mutant reduction strategies by how well they preserve score order."""

from .errors import DomainError, InfeasibleError, InputError, MutredError, ResourceError
from .indicators import (
    avg_vms,
    erop,
    full_oracle_op,
    nop,
    op_mean,
    op_single_chain,
    p_count,
    rr,
    strategy_effectiveness,
    vms,
)
from .matrix import (
    CoverageMatrix,
    KillMatrix,
    Sign,
    SuiteChain,
    filter_uncovered,
    half_sample_chain,
    killed_mutants,
    mutation_score,
    read_matrix,
    restrict,
    sign_sequence,
    thin_even_index,
)
from .ranking import Direction, RankResult, cohens_d, scott_knott_esd
from .strategies import (
    Selection,
    SelectionContext,
    apply_pipeline,
    coverage_subsumes,
    format_spec,
    parse_spec,
    select,
    select_cms,
    select_cos,
    select_rms,
    select_sms,
)

__version__ = "0.1.0"

__all__ = [
    "CoverageMatrix",
    "Direction",
    "DomainError",
    "InfeasibleError",
    "InputError",
    "KillMatrix",
    "MutredError",
    "RankResult",
    "ResourceError",
    "Selection",
    "SelectionContext",
    "Sign",
    "SuiteChain",
    "apply_pipeline",
    "avg_vms",
    "cohens_d",
    "coverage_subsumes",
    "erop",
    "filter_uncovered",
    "format_spec",
    "full_oracle_op",
    "half_sample_chain",
    "killed_mutants",
    "mutation_score",
    "nop",
    "op_mean",
    "op_single_chain",
    "p_count",
    "parse_spec",
    "read_matrix",
    "restrict",
    "rr",
    "scott_knott_esd",
    "select",
    "select_cms",
    "select_cos",
    "select_rms",
    "select_sms",
    "sign_sequence",
    "strategy_effectiveness",
    "thin_even_index",
    "vms",
]
