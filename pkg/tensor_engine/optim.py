"""
Adam 优化器（带偏差校正）
"""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from core.errors import ShapeError
from tensor_engine.tensor import Tensor


@dataclass
class AdamState:
    """
    Adam 状态 - 每个参数的一阶/二阶矩缓冲与步数
    """
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam_state(
    params: Dict[str, Tensor],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """为每个参数创建全零的矩缓冲"""
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, param in params.items():
        state.m[name] = np.zeros_like(param.data)
        state.v[name] = np.zeros_like(param.data)
    return state


def adam_step(
    params: Dict[str, Tensor],
    grads: Optional[Dict[str, Optional[np.ndarray]]],
    state: AdamState,
) -> AdamState:
    """
    执行一步 Adam 更新（原地修改参数）

    Args:
        params: 参数名 -> 参数张量
        grads: 参数名 -> 梯度；为 None 时读取各参数的 .grad，缺失的梯度按0处理
        state: 优化器状态，t 加 1

    Returns:
        AdamState: 同一个 state 对象
    """
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t

    for name, param in params.items():
        grad = param.grad if grads is None else grads.get(name)
        if name not in state.m:
            state.m[name] = np.zeros_like(param.data)
            state.v[name] = np.zeros_like(param.data)
        if grad is None:
            grad = np.zeros_like(param.data)
        if grad.shape != param.shape:
            raise ShapeError(f"gradient for {name} has shape {grad.shape}, parameter has {param.shape}")

        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        param.data -= update.astype(param.data.dtype, copy=False)

    return state
