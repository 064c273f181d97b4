"""
张量模块 - 基于 numpy 的稠密张量与反向模式自动微分

只有在 Tape 上下文中、且至少一个输入需要梯度时才会记录计算图；
Tape 之外的计算不保留任何中间结果（推理路径零开销）。
"""
from __future__ import annotations

import contextvars
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ContractError, ShapeError

_float_dtype = np.float32
_active_tape: contextvars.ContextVar = contextvars.ContextVar("active_tape", default=None)


def set_float64(enabled: bool) -> None:
    """
    切换全局精度：True 为 64 位校验模式，False 为 32 位训练精度
    只影响之后创建的张量
    """
    global _float_dtype
    _float_dtype = np.float64 if enabled else np.float32


def float_dtype() -> type:
    return _float_dtype


class Tensor:
    """
    稠密张量（行主序），可选地跟踪梯度
    """

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=_float_dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """累加梯度（不覆盖），参数被多处共享时各路径的梯度求和"""
        grad = _unbroadcast(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # ==================== 运算符 ====================
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, axis1: int, axis2: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[axis1], axes[axis2] = axes[axis2], axes[axis1]
        return transpose(self, tuple(axes))


TensorLike = Union[Tensor, np.ndarray, float, int, Sequence[float]]


class Tape:
    """
    计算带 - 按执行顺序记录可微运算（天然是拓扑序）

    Usage:
        with Tape() as tape:
            loss = model_loss(...)
        backward(loss, tape)
    """

    def __init__(self):
        self.nodes: List[Tensor] = []
        self._tokens: List[contextvars.Token] = []

    def __enter__(self) -> "Tape":
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        _active_tape.reset(self._tokens.pop())
        return False

    def record(self, node: Tensor) -> None:
        self.nodes.append(node)

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor, tape: Tape) -> List[Tensor]:
    """
    从标量损失反向传播，梯度累加到所有被跟踪的叶子张量上

    Args:
        loss: 标量损失
        tape: 记录了前向计算的 Tape

    Returns:
        List[Tensor]: 收到梯度的叶子张量（参数）

    Raises:
        ContractError: 损失不是标量，或者与被跟踪的参数不连通
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad or not tape.nodes:
        raise ContractError("loss is not connected to any tracked parameter on this tape")

    leaves: Dict[int, Tensor] = {}
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        if node.grad is None:
            continue
        for parent in node._parents:
            if parent.requires_grad and parent.is_leaf:
                leaves[id(parent)] = parent
        node._backward(node.grad)
        # 中间结果的梯度用完即释放
        node.grad = None
    return list(leaves.values())


def as_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_node(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable[[np.ndarray], None]) -> Tensor:
    """创建运算结果；在活动 Tape 上且有输入需要梯度时记录到计算图"""
    out = Tensor(data)
    tape = _active_tape.get()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        tape.record(out)
    return out


def send_grad(tensor: Tensor, grad: np.ndarray) -> None:
    if tensor.requires_grad:
        tensor.accumulate_grad(grad)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度求和还原到原始形状"""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ==================== 基础运算 ====================
def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        send_grad(a, g)
        send_grad(b, g)

    return make_node(a.data + b.data, (a, b), _backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        send_grad(a, g)
        send_grad(b, -g)

    return make_node(a.data - b.data, (a, b), _backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        send_grad(a, g * b.data)
        send_grad(b, g * a.data)

    return make_node(a.data * b.data, (a, b), _backward)


def div(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def _backward(g):
        send_grad(a, g / b.data)
        send_grad(b, -g * a.data / (b.data * b.data))

    return make_node(a.data / b.data, (a, b), _backward)


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """
    矩阵乘法，支持前导批维度的广播
    梯度: dA = dC·Bᵀ, dB = Aᵀ·dC
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs at least 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def _backward(g):
        send_grad(a, np.matmul(g, np.swapaxes(b.data, -1, -2)))
        send_grad(b, np.matmul(np.swapaxes(a.data, -1, -2), g))

    return make_node(np.matmul(a.data, b.data), (a, b), _backward)


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    def _backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        send_grad(a, np.broadcast_to(g, a.shape))

    return make_node(a.data.sum(axis=axis, keepdims=keepdims), (a,), _backward)


def tensor_mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    def _backward(g):
        send_grad(a, g.reshape(a.shape))

    return make_node(a.data.reshape(shape), (a,), _backward)


def transpose(a: Tensor, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))

    def _backward(g):
        send_grad(a, g.transpose(inverse))

    return make_node(a.data.transpose(axes), (a,), _backward)
