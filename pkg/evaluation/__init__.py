# Evaluation module
from evaluation.evaluator import evaluate_model
from evaluation.metrics import pointwise_metrics, rank_of_positive
from evaluation.replication import replication_check, replication_verdicts
from evaluation.sampling import sample_popularity_negatives
from evaluation.significance import paired_ttest_bonferroni

__all__ = [
    "evaluate_model",
    "paired_ttest_bonferroni",
    "pointwise_metrics",
    "rank_of_positive",
    "replication_check",
    "replication_verdicts",
    "sample_popularity_negatives",
]
