# CLI module
from cli.experiment import evaluate_checkpoint, run_experiment, train_only
from cli.reports import emit_reports
from cli.sweep import sweep_training_budget

__all__ = ["emit_reports", "evaluate_checkpoint", "run_experiment", "sweep_training_budget", "train_only"]
