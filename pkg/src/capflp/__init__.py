"""Capacitated facility location with first-come-first-served agents.

Facilities are placed by percentile mechanisms; agents then choose a
facility, and each facility serves its ``k`` closest claimants.
"""

from .analysis import (
    TruthfulnessWitness,
    WorstCaseInstance,
    audit_truthfulness,
    check_absolute_truthfulness,
    empirical_ratio,
    mean_mechanism,
    percentile_mechanism,
    worst_case_instance,
)
from .bound import sw_upper_bound
from .core import (
    Beta,
    Instance,
    Mixture,
    Triangular,
    Uniform,
    make_capacities,
    make_instance,
    sample_positions,
)
from .errors import (
    CapacityInfeasible,
    CapflpError,
    Infeasible,
    InfeasibleError,
    NotES,
    ValidationError,
)
from .fcfs import (
    Placement,
    PriorityRule,
    check_equilibrium_stability,
    construct_ne,
    enumerate_ne,
    is_nash_equilibrium,
    mechanism_welfare,
    resolve_outcome,
    social_welfare,
)
from .harness import ExperimentConfig, RatioReport, run_experiment
from .mechanisms import (
    BestVectorReport,
    MechanismKind,
    PercentileVector,
    apply_percentile,
    best_uniform_vector_m,
    best_wg_vector,
    classify_percentile,
    es_condition,
)
from .planar import (
    PercentileMatrix,
    PlanarInstance,
    ar_median_planar,
    planar_is_es,
    planar_percentile_placement,
)
from .ratios import RatioFormulaResult, ar_aio, ar_aio_m, ar_median_aio, ar_uniform_m, ar_wg

__version__ = "0.1.0"
