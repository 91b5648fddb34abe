from .generate import generate_env, generate_suite
from .model import (
    Element,
    EnvState,
    FormWorld,
    Page,
    StepResult,
    atom_satisfied,
    back_action,
    declare_action,
    observe,
    outcome_reward,
    reset,
    step,
    type_kind,
)
from .oracle import optimal_actions, optimal_path, oracle_moves, shortest_path_length, sort_actions

__all__ = [
    "Element", "EnvState", "FormWorld", "Page", "StepResult", "atom_satisfied", "back_action",
    "declare_action", "generate_env", "generate_suite", "observe", "optimal_actions",
    "optimal_path", "oracle_moves", "outcome_reward", "reset", "shortest_path_length",
    "sort_actions", "step", "type_kind",
]
