"""Latent inference-budget modeling for anytime agents.

Agents are modeled as running an anytime inference algorithm truncated at
a latent budget; reward parameters and per-subpopulation budget priors are
recovered from observed behavior by marginal maximum likelihood.
"""

from .core import (
    LOG_FLOOR,
    AnytimeAgent,
    BudgetConditionedPolicy,
    BudgetGrid,
    BudgetPrior,
    InferenceState,
    budget_prior_probs,
    maze_grid,
    mcts_grid,
    mixture_log_prob,
    rsa_grid,
    sweep_policies,
)
from .fitting import (
    FitConfig,
    FitResult,
    ModelParams,
    budget_posteriors,
    fit,
    fit_boltzmann,
    fixed_budget_baseline,
    grad_params,
    marginal_nll,
    sweep_learning_rates,
)
from .harness import (
    Dataset,
    MetricsReport,
    exact_match_accuracy,
    generate_dataset,
    load_dataset,
    make_family,
    mean_nll,
    metrics_report,
    run_experiment,
    save_dataset,
    split_dataset,
)

__all__ = [
    "LOG_FLOOR", "AnytimeAgent", "BudgetConditionedPolicy", "BudgetGrid",
    "BudgetPrior", "InferenceState", "budget_prior_probs", "maze_grid",
    "mcts_grid", "mixture_log_prob", "rsa_grid", "sweep_policies",
    "FitConfig", "FitResult", "ModelParams", "budget_posteriors", "fit",
    "fit_boltzmann", "fixed_budget_baseline", "grad_params", "marginal_nll",
    "sweep_learning_rates", "Dataset", "MetricsReport",
    "exact_match_accuracy", "generate_dataset", "load_dataset", "make_family",
    "mean_nll", "metrics_report", "run_experiment", "save_dataset",
    "split_dataset",
]

__version__ = "0.1.0"
