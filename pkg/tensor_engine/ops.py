"""
可微算子 - softmax / layer_norm / gelu / dropout / 交叉熵等

每个算子前向用 numpy 计算，反向规则写在闭包里，由 Tape 统一调度。
"""
from typing import Optional

import numpy as np
from scipy.special import erf, expit

from core.errors import ContractError, DegenerateBatchError, ShapeError
from tensor_engine.tensor import Tensor, TensorLike, as_tensor, make_node, send_grad

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def softmax(x: TensorLike, axis: int = -1) -> Tensor:
    """
    沿 axis 做 softmax，先减去最大值防止溢出

    例如: [ln2, 0] -> [2/3, 1/3]；[1000, 0] -> [1, 0]
    """
    x = as_tensor(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    exps = np.exp(shifted)
    probs = exps / exps.sum(axis=axis, keepdims=True)

    def _backward(g):
        dot = (g * probs).sum(axis=axis, keepdims=True)
        send_grad(x, probs * (g - dot))

    return make_node(probs, (x,), _backward)


def layer_norm(x: TensorLike, gain: TensorLike, bias: TensorLike, eps: float = 1e-12) -> Tensor:
    """
    最后一维标准化后做仿射变换（gain, bias）

    Args:
        x: 形状 [..., d]
        gain: 形状 [d]
        bias: 形状 [d]
        eps: 方差平滑项

    Returns:
        Tensor: 与 x 同形状
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match last dim {d}")

    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    denom = np.sqrt(var + eps)
    # 常数行（方差为0且 eps=0）输出全零
    with np.errstate(divide="ignore"):
        inv_std = np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), 0.0).astype(x.data.dtype)
    normed = centered * inv_std
    out = normed * gain.data + bias.data

    def _backward(g):
        lead_axes = tuple(range(g.ndim - 1))
        send_grad(gain, (g * normed).sum(axis=lead_axes))
        send_grad(bias, g.sum(axis=lead_axes))
        if x.requires_grad:
            dnormed = g * gain.data
            grad_x = inv_std / d * (
                d * dnormed
                - dnormed.sum(axis=-1, keepdims=True)
                - normed * (dnormed * normed).sum(axis=-1, keepdims=True)
            )
            send_grad(x, grad_x)

    return make_node(out, (x, gain, bias), _backward)


def gelu(x: TensorLike) -> Tensor:
    """
    精确 GELU: x·Φ(x)，Φ 用误差函数计算
    例如: gelu(1) = 0.84134
    """
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT_2))
    out = x.data * cdf

    def _backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        send_grad(x, g * (cdf + x.data * pdf))

    return make_node(out, (x,), _backward)


def dropout(x: TensorLike, rate: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """倒置 dropout；评估模式或 rate=0 时原样返回"""
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs a random generator")
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)

    def _backward(g):
        send_grad(x, g * keep)

    return make_node(x.data * keep, (x,), _backward)


def masked_fill(x: TensorLike, mask: np.ndarray, value: float) -> Tensor:
    """mask 为 True 的位置替换为常数 value，该位置梯度为0"""
    x = as_tensor(x)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)

    def _backward(g):
        send_grad(x, np.where(mask, 0.0, g))

    return make_node(np.where(mask, value, x.data), (x,), _backward)


def take_rows(weight: TensorLike, ids: np.ndarray) -> Tensor:
    """
    按 ids 取 weight 的行（embedding 查表），重复 id 的梯度累加

    Args:
        weight: 形状 [N, ...]
        ids: 任意形状的整数数组

    Returns:
        Tensor: 形状 ids.shape + weight.shape[1:]
    """
    weight = as_tensor(weight)
    ids = np.asarray(ids, dtype=np.int64)

    def _backward(g):
        if weight.requires_grad:
            grad = np.zeros_like(weight.data)
            np.add.at(grad, ids, g)
            weight.accumulate_grad(grad)

    return make_node(weight.data[ids], (weight,), _backward)


def gather_last(x: TensorLike, index: np.ndarray) -> Tensor:
    """
    沿最后一维按 index 取值（take_along_axis），用于相对位置打分

    Args:
        x: 形状 [..., L, K]
        index: 形状 [L, M] 的整数矩阵，对所有前导维度广播

    Returns:
        Tensor: 形状 [..., L, M]
    """
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 2 or index.shape[0] != x.shape[-2]:
        raise ShapeError(f"gather index {index.shape} does not match rows of {x.shape}")
    lead = x.shape[:-2]
    full_index = np.broadcast_to(index, lead + index.shape)
    out = np.take_along_axis(x.data, full_index, axis=-1)

    def _backward(g):
        if not x.requires_grad:
            return
        rows, width = x.shape[-2], x.shape[-1]
        flat_grad = np.zeros((int(np.prod(lead, dtype=np.int64)), rows, width), dtype=x.data.dtype)
        flat_g = g.reshape(-1, rows, index.shape[1])
        batch_idx = np.arange(flat_grad.shape[0])[:, None, None]
        row_idx = np.arange(rows)[None, :, None]
        np.add.at(flat_grad, (batch_idx, row_idx, index[None, :, :]), flat_g)
        x.accumulate_grad(flat_grad.reshape(x.shape))

    return make_node(out, (x,), _backward)


def log_sigmoid(x: TensorLike) -> Tensor:
    """数值稳定的 ln σ(x) = −ln(1 + e^{−x})"""
    x = as_tensor(x)

    def _backward(g):
        send_grad(x, g * expit(-x.data))

    return make_node(-np.logaddexp(0.0, -x.data), (x,), _backward)


def masked_cross_entropy(logits: TensorLike, targets: np.ndarray, active: np.ndarray) -> Tensor:
    """
    只在 active 位置上求平均的 softmax 交叉熵

    Args:
        logits: 形状 [P, C]
        targets: 形状 [P] 的类别下标（非 active 位置的值被忽略）
        active: 形状 [P] 的布尔标记

    Returns:
        Tensor: 标量损失

    Raises:
        DegenerateBatchError: 没有任何 active 位置
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    active = np.asarray(active, dtype=bool)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],) or active.shape != targets.shape:
        raise ShapeError(
            f"cross entropy expects logits [P, C] with targets/active [P], "
            f"got {logits.shape}, {targets.shape}, {active.shape}"
        )
    count = int(active.sum())
    if count == 0:
        raise DegenerateBatchError("no active positions in batch")

    safe_targets = np.where(active, targets, 0)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(len(targets))
    picked = log_probs[rows, safe_targets]
    loss = -(picked * active).sum() / count

    def _backward(g):
        probs = np.exp(log_probs)
        probs[rows, safe_targets] -= 1.0
        probs *= active[:, None] / count
        send_grad(logits, probs * g)

    return make_node(np.asarray(loss, dtype=logits.data.dtype), (logits,), _backward)
