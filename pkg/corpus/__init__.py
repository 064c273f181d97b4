# Corpus module
from corpus.loader import load_interactions
from corpus.popularity import build_popularity_table
from corpus.preprocess import compute_stats, preprocess_min_length
from corpus.split import leave_one_out_split

__all__ = [
    "build_popularity_table",
    "compute_stats",
    "leave_one_out_split",
    "load_interactions",
    "preprocess_min_length",
]
