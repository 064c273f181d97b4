# Review meta-analysis module
from review_meta.comparisons import aggregate_outcomes, derive_outcome, load_comparisons

__all__ = ["aggregate_outcomes", "derive_outcome", "load_comparisons"]
