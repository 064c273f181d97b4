"""
注意力工具 - 多头拆分/合并与解耦（内容/相对位置）注意力打分
"""
import numpy as np

from tensor_engine.ops import gather_last
from tensor_engine.tensor import Tensor


def split_heads(x: Tensor, num_heads: int) -> Tensor:
    """[B, L, H] -> [B, heads, L, H/heads]"""
    batch, length, hidden = x.shape
    return x.reshape(batch, length, num_heads, hidden // num_heads).transpose(0, 2, 1, 3)


def merge_heads(x: Tensor) -> Tensor:
    """[B, heads, L, d] -> [B, L, heads*d]"""
    batch, heads, length, dim = x.shape
    return x.transpose(0, 2, 1, 3).reshape(batch, length, heads * dim)


def split_relative_heads(rel: Tensor, num_heads: int) -> Tensor:
    """相对位置表 [2M-1, H] -> [heads, 2M-1, H/heads]"""
    rows, hidden = rel.shape
    return rel.reshape(rows, num_heads, hidden // num_heads).transpose(1, 0, 2)


def relative_position_index(length: int, max_len: int) -> np.ndarray:
    """
    相对距离下标矩阵: idx[i, j] = clip(i - j, ±(max_len-1)) + max_len - 1

    Returns:
        np.ndarray: 形状 [length, length]，取值 0..2*max_len-2
    """
    positions = np.arange(length)
    distance = positions[:, None] - positions[None, :]
    return np.clip(distance, -(max_len - 1), max_len - 1) + max_len - 1


def disentangled_attention_scores(
    query: Tensor,
    key: Tensor,
    rel_query: Tensor,
    rel_key: Tensor,
    rel_index: np.ndarray,
) -> Tensor:
    """
    解耦注意力打分：内容-内容 + 内容-位置 + 位置-内容，整体除以 sqrt(3·d)

    Args:
        query: 内容 query，形状 [B, heads, L, d]
        key: 内容 key，形状 [B, heads, L, d]
        rel_query: 相对位置的 query 投影，形状 [heads, 2M-1, d]
        rel_key: 相对位置的 key 投影，形状 [heads, 2M-1, d]
        rel_index: relative_position_index(L, M) 的结果

    Returns:
        Tensor: 注意力 logits，形状 [B, heads, L, L]
    """
    head_dim = query.shape[-1]
    content = query @ key.swapaxes(-1, -2)
    # c2p[i, j] = q_i · K_r[δ(i, j)]
    content_to_position = gather_last(query @ rel_key.swapaxes(-1, -2), rel_index)
    # p2c[i, j] = k_j · Q_r[δ(j, i)]
    position_to_content = gather_last(key @ rel_query.swapaxes(-1, -2), rel_index).swapaxes(-1, -2)
    scale = 1.0 / np.sqrt(3.0 * head_dim)
    return (content + content_to_position + position_to_content) * scale
