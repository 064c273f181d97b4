"""
批次构建 - 截断到最近 max_seq_len 个物品并左填充
"""
from typing import Dict, Hashable, Iterator, List, Sequence, Tuple

import numpy as np

from core.models import PADDING_ID, MaskedBatch
from models.factory import pad_left
from training.objectives import mask_last_item, mask_sequence, sample_uniform_negatives, shift_targets


def iterate_user_batches(
    users: Sequence[Hashable],
    batch_size: int,
    rng: np.random.Generator = None,
) -> Iterator[List[Hashable]]:
    """按批次遍历用户；给定 rng 时先打乱顺序"""
    order = rng.permutation(len(users)) if rng is not None else np.arange(len(users))
    for start in range(0, len(order), batch_size):
        yield [users[i] for i in order[start:start + batch_size]]


def build_masked_batch(
    sequences: Sequence[Sequence[int]],
    max_len: int,
    mask_prob: float,
    rng: np.random.Generator,
    mask_id: int,
    last_item_mask_prob: float = 0.0,
) -> MaskedBatch:
    """
    物品遮盖批次；每个 epoch 重新采样遮盖位置

    last_item_mask_prob > 0 时，每行以该概率改为只遮盖最后一个物品
    """
    padded = pad_left(sequences, max_len)
    rows = []
    for row in padded:
        if last_item_mask_prob > 0.0 and rng.random() < last_item_mask_prob:
            rows.append(mask_last_item(row, mask_id))
        else:
            rows.append(mask_sequence(row, mask_prob, rng, mask_id))
    return MaskedBatch(
        inputs=np.stack([r.inputs for r in rows]),
        labels=np.stack([r.labels for r in rows]),
        active=np.stack([r.active for r in rows]),
    )


def build_shifted_batch(
    sequences: Sequence[Sequence[int]],
    max_len: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    右移序列批次

    Returns:
        (inputs, targets, active): 均为 [B, max_len]；长度不足 2 的序列整行无效
    """
    inputs, targets = [], []
    for seq in sequences:
        if len(seq) < 2:
            inputs.append([])
            targets.append([])
            continue
        x, y = shift_targets(list(seq)[-(max_len + 1):])
        inputs.append(x)
        targets.append(y)
    input_ids = pad_left(inputs, max_len)
    target_ids = pad_left(targets, max_len)
    return input_ids, target_ids, target_ids != PADDING_ID


def sample_shifted_negatives(
    sequences: Sequence[Sequence[int]],
    targets: np.ndarray,
    num_items: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """为每个有效位置采样一个用户未交互过的均匀负样本"""
    negatives = np.zeros_like(targets)
    for row, seq in enumerate(sequences):
        active = targets[row] != PADDING_ID
        count = int(active.sum())
        if count:
            negatives[row, active] = sample_uniform_negatives(rng, num_items, count, set(seq))
    return negatives


def build_bpr_batch(
    users: Sequence[Hashable],
    train: Dict[Hashable, List[int]],
    user_index: Dict[Hashable, int],
    num_items: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    批内用户的全部训练交互，每个正样本配一个均匀负样本

    Returns:
        (user_rows, positives, negatives)
    """
    user_rows, positives, negatives = [], [], []
    for user in users:
        seq = train[user]
        if not seq:
            continue
        user_rows.append(np.full(len(seq), user_index[user], dtype=np.int64))
        positives.append(np.asarray(seq, dtype=np.int64))
        negatives.append(sample_uniform_negatives(rng, num_items, len(seq), set(seq)))
    if not user_rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    return np.concatenate(user_rows), np.concatenate(positives), np.concatenate(negatives)
