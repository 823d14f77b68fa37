"""Subnetwork quasi-maximum likelihood estimation for spatial autoregressive models.

The modules follow the data flow of an analysis: ``netcore`` (graphs and
weights), ``netgen`` (synthetic networks), ``sampler`` (subnetworks), ``dgp``
(responses), ``qmle`` (estimation), ``inference`` (standard errors),
``conditions`` (network diagnostics) and ``harness`` (Monte Carlo studies).
"""
__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BootstrapError,
    ConfigError,
    DegenerateCurvatureError,
    DegenerateDataError,
    DomainError,
    FitError,
    ParseError,
    SingularityError,
    SubnetSARError,
)
from .netcore import (  # noqa: F401
    AdjacencyMatrix,
    SubnetSelection,
    WeightMatrix,
    extract_selection,
    load_edge_list,
    row_normalize,
    spmv,
    write_edge_list,
)
from .netgen import LsmConfig, SbmConfig, gen_lsm, gen_sbm  # noqa: F401
from .sampler import Method, SamplerSpec, sample  # noqa: F401
from .dgp import DgpConfig, ErrorDist, draw_errors, gen_response  # noqa: F401
from .qmle import FitOptions, FitResult, LikelihoodWorkspace, fit  # noqa: F401
from .inference import (  # noqa: F401
    SeVariant,
    bootstrap_se,
    confidence_interval,
    plugin_se,
    se_ingredients,
)
from .conditions import ConditionReport, stationary_dist, verify_conditions  # noqa: F401
from .harness import ExperimentConfig, MCReport, emit_report, run_cell, run_experiment  # noqa: F401
