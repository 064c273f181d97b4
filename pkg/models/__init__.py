# Models module
from models.encoder import EncoderModel, encode_sequence, score_all_items
from models.factory import build_model, predict_next_item, predict_scores
from models.mf import MFModel, mf_score

__all__ = [
    "EncoderModel",
    "MFModel",
    "build_model",
    "encode_sequence",
    "mf_score",
    "predict_next_item",
    "predict_scores",
    "score_all_items",
]
