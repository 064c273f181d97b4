# Training module
from training.objectives import bpr_loss, mask_sequence, shift_targets
from training.trainer import Trainer, train_model, validation_loss

__all__ = ["Trainer", "bpr_loss", "mask_sequence", "shift_targets", "train_model", "validation_loss"]
