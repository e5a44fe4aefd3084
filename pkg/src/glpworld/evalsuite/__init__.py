from .metrics import SIMILARITY_CLAMP, simulation_consistency, transition_smoothness
from .planning import (
    TASK_KINDS,
    TOP_M,
    EvalTask,
    NoiseWorldModel,
    OracleWorldModel,
    PlanCandidate,
    PlanNode,
    PlanTrace,
    RolloutWorldModel,
    baseline_plan,
    build_planning_suite,
    default_proposer,
    simulative_plan,
)
from .stepwise import (
    StepwiseInstance,
    StepwiseResult,
    build_stepwise_instances,
    oracle_model,
    repeater_model,
    rollout_model,
    stepwise_eval,
)

__all__ = [
    "EvalTask",
    "NoiseWorldModel",
    "OracleWorldModel",
    "PlanCandidate",
    "PlanNode",
    "PlanTrace",
    "RolloutWorldModel",
    "SIMILARITY_CLAMP",
    "StepwiseInstance",
    "StepwiseResult",
    "TASK_KINDS",
    "TOP_M",
    "baseline_plan",
    "build_planning_suite",
    "build_stepwise_instances",
    "default_proposer",
    "oracle_model",
    "repeater_model",
    "rollout_model",
    "simulation_consistency",
    "simulative_plan",
    "stepwise_eval",
    "transition_smoothness",
]
