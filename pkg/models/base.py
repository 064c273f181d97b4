"""
参数容器基类 - 编码器与矩阵分解模型共用的参数管理
"""
from typing import Dict, Tuple

import numpy as np
from scipy.stats import truncnorm

from core.errors import ShapeError
from tensor_engine.tensor import Tensor, float_dtype

INIT_STD = 0.02


class ParameterStore:
    """
    命名参数集合，提供训练/评估模式切换、state_dict 读写

    子类通过 add_parameter 注册参数；共享参数只注册一次
    """

    def __init__(self, seed: int):
        self.seed = seed
        self.training = False
        self._params: Dict[str, Tensor] = {}
        self._init_rng = np.random.default_rng(seed)

    # ==================== 参数注册与初始化 ====================
    def add_parameter(self, name: str, data: np.ndarray) -> Tensor:
        param = Tensor(data, requires_grad=True, name=name)
        self._params[name] = param
        return param

    def truncated_normal(self, name: str, shape: Tuple[int, ...]) -> Tensor:
        """截断正态初始化（±2σ，σ=0.02）"""
        values = truncnorm.rvs(-2.0, 2.0, scale=INIT_STD, size=shape, random_state=self._init_rng)
        return self.add_parameter(name, values.astype(float_dtype()))

    def zeros(self, name: str, shape: Tuple[int, ...]) -> Tensor:
        return self.add_parameter(name, np.zeros(shape, dtype=float_dtype()))

    def ones(self, name: str, shape: Tuple[int, ...]) -> Tensor:
        return self.add_parameter(name, np.ones(shape, dtype=float_dtype()))

    # ==================== 模式切换 ====================
    def train(self) -> "ParameterStore":
        self.training = True
        return self

    def eval(self) -> "ParameterStore":
        self.training = False
        return self

    # ==================== 参数访问 ====================
    def parameters(self) -> Dict[str, Tensor]:
        return dict(self._params)

    def num_parameters(self) -> int:
        return int(sum(p.data.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for param in self._params.values():
            param.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self._params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        载入参数（逐位复制）

        Raises:
            ShapeError: 参数名集合或形状不一致
        """
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise ShapeError(
                f"state dict mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for name, param in self._params.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise ShapeError(f"parameter {name} has shape {param.shape}, checkpoint has {value.shape}")
            param.data = value.astype(param.data.dtype, copy=True)
