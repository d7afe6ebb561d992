"""Explicit-state MDP protocol synthesis from prioritized quantitative
objectives with probabilistic switching contexts."""

from .engine import (
    Dtmc,
    EngineError,
    NonConvergenceError,
    StrategyMap,
    TargetSet,
    UnknownProposition,
    ValueVector,
    dtmc_persistence_prob,
    eval_state_formula,
    extract_strategy,
    max_reach_values,
    mec_decomposition,
    min_reach_values,
    persistence_values,
    prob0_max,
    prob1_max,
    verify_context,
)
from .formulas import And, Atom, Interval, Not, Or, StateFormula, Top
from .model import (
    Mdp,
    ModelError,
    ModelSemanticsError,
    ModelSyntaxError,
    build_mdp,
    cardinality,
    parse_model,
    post,
    reach,
    serialize_model,
)
from .requirement import (
    CaptlRequirement,
    Context,
    Objective,
    RequirementError,
    contexts_of,
    parse_query,
    parse_requirement,
    print_requirement,
    validate_persistence,
)
from .synthesis import (
    CompositionError,
    Partition,
    ProductDtmc,
    Protocol,
    SynthesisError,
    build_product,
    compose_protocol,
    partition_states,
    synth_pctl,
    synth_persistence,
)

__version__ = "0.1.0"
