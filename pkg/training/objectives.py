"""
训练目标 - 物品遮盖、右移序列、BPR

数据变换（mask_sequence / shift_targets）只处理 numpy 数组；
*_loss 函数在当前 Tape 上构建可微损失。
"""
from typing import Collection, Optional, Sequence, Tuple

import numpy as np

from core.errors import DegenerateBatchError
from core.models import PADDING_ID, MaskedBatch
from models.encoder import EncoderModel
from models.mf import MFModel
from tensor_engine.ops import log_sigmoid, masked_cross_entropy, take_rows
from tensor_engine.tensor import Tensor


# ==================== 数据变换 ====================
def mask_sequence(seq: Sequence[int], p: float, rng: np.random.Generator, mask_id: int) -> MaskedBatch:
    """
    每个非填充位置独立以概率 p 替换为 mask；一个都没选中时强制均匀选一个

    Args:
        seq: 物品ID序列（可含左填充 0）
        p: 遮盖概率
        rng: 随机数生成器
        mask_id: mask 标记的ID（V+1）

    Returns:
        MaskedBatch: 一维的 inputs / labels / active
    """
    ids = np.asarray(seq, dtype=np.int64)
    real = ids != PADDING_ID
    if not real.any():
        raise DegenerateBatchError("cannot mask a sequence without items")

    active = (rng.random(ids.shape) < p) & real
    if not active.any():
        candidates = np.flatnonzero(real)
        active[candidates[rng.integers(len(candidates))]] = True
    return _apply_mask(ids, active, mask_id)


def mask_last_item(seq: Sequence[int], mask_id: int) -> MaskedBatch:
    """只遮盖最后一个物品（与推理时的输入形式一致）"""
    ids = np.asarray(seq, dtype=np.int64)
    real = np.flatnonzero(ids != PADDING_ID)
    if not len(real):
        raise DegenerateBatchError("cannot mask a sequence without items")
    active = np.zeros(ids.shape, dtype=bool)
    active[real[-1]] = True
    return _apply_mask(ids, active, mask_id)


def _apply_mask(ids: np.ndarray, active: np.ndarray, mask_id: int) -> MaskedBatch:
    inputs = np.where(active, mask_id, ids)
    labels = np.where(active, ids, PADDING_ID)
    return MaskedBatch(inputs=inputs, labels=labels, active=active)


def shift_targets(seq: Sequence[int]) -> Tuple[list, list]:
    """
    右移一位构造预测目标
    例如: [a, b, c] -> ([a, b], [b, c])

    Raises:
        DegenerateBatchError: 序列长度小于 2
    """
    seq = list(seq)
    if len(seq) < 2:
        raise DegenerateBatchError(f"shifted-sequence training needs at least 2 items, got {len(seq)}")
    return seq[:-1], seq[1:]


def sample_uniform_negatives(
    rng: np.random.Generator,
    num_items: int,
    size: int,
    seen: Optional[Collection[int]] = None,
) -> np.ndarray:
    """
    均匀采样 1..V 中的负样本，尽量避开 seen 中的物品（用户已交互过的物品）
    """
    negatives = rng.integers(1, num_items + 1, size=size)
    if not seen or len(seen) >= num_items:
        return negatives
    seen_array = np.fromiter(seen, dtype=np.int64)
    rejected = np.isin(negatives, seen_array)
    while rejected.any():
        negatives[rejected] = rng.integers(1, num_items + 1, size=int(rejected.sum()))
        rejected = np.isin(negatives, seen_array)
    return negatives


def bpr_loss(pos_score: float, neg_score: float) -> float:
    """
    −ln σ(pos − neg)
    例如: pos - neg = 1 -> 0.3133
    """
    return float(np.logaddexp(0.0, -(pos_score - neg_score)))


# ==================== 可微损失 ====================
def masked_item_loss(model: EncoderModel, batch: MaskedBatch) -> Tensor:
    """只对被遮盖位置计算全物品 softmax 交叉熵"""
    hidden = model.encode(batch.inputs, "bidirectional")
    logits = model.score_positions(hidden, batch.active)
    targets = batch.labels[batch.active]
    return masked_cross_entropy(logits, targets, np.ones(len(targets), dtype=bool))


def shifted_softmax_loss(model: EncoderModel, inputs: np.ndarray, targets: np.ndarray, active: np.ndarray) -> Tensor:
    """causal 编码后在每个有效位置上做全物品 softmax 交叉熵"""
    if not active.any():
        raise DegenerateBatchError("no active positions in batch")
    hidden = model.encode(inputs, "causal")
    logits = model.score_positions(hidden, active)
    picked = targets[active]
    return masked_cross_entropy(logits, picked, np.ones(len(picked), dtype=bool))


def shifted_sampled_bce_loss(
    model: EncoderModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    negatives: np.ndarray,
    active: np.ndarray,
) -> Tensor:
    """
    每个有效位置一个正样本、一个均匀负样本的二元交叉熵
    loss = mean(−ln σ(s_pos) − ln σ(−s_neg))
    """
    if not active.any():
        raise DegenerateBatchError("no active positions in batch")
    hidden = model.encode(inputs, "causal")
    batch, length, _ = hidden.shape
    vectors = model.output_vectors(hidden)
    rows = take_rows(vectors.reshape(batch * length, vectors.shape[-1]), np.flatnonzero(active))
    params = model.parameters()

    def _logits(items: np.ndarray) -> Tensor:
        embeddings = take_rows(params["item_embeddings"], items)
        return (rows * embeddings).sum(axis=-1) + take_rows(params["output_bias"], items)

    pos = _logits(targets[active])
    neg = _logits(negatives[active])
    return -(log_sigmoid(pos) + log_sigmoid(-neg)).mean()


def mf_bpr_loss(model: MFModel, user_rows: np.ndarray, positives: np.ndarray, negatives: np.ndarray) -> Tensor:
    """批内平均 BPR 损失"""
    if len(user_rows) == 0:
        raise DegenerateBatchError("no (user, item) pairs in batch")
    pos = model.pair_scores(user_rows, positives)
    neg = model.pair_scores(user_rows, negatives)
    return -log_sigmoid(pos - neg).mean()
