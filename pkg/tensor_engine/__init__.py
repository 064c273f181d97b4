# Tensor engine module
from config.settings import settings
from tensor_engine.tensor import Tape, Tensor, backward, float_dtype, set_float64

set_float64(settings.float64)

__all__ = ["Tape", "Tensor", "backward", "float_dtype", "set_float64"]
