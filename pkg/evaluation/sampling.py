"""
按流行度采样负样本
"""
from typing import Collection

import numpy as np

from core.errors import SamplingError
from core.models import PopularityTable


def sample_popularity_negatives(
    pop: PopularityTable,
    positive: int,
    history: Collection[int],
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    按流行度权重无放回地采样 n 个互不相同的负样本

    正样本与 history 中的物品不参与采样。流行度为 0 的物品只在有权重的候选不足 n 个时
    均匀补足，保证候选集合大小恒为 n+1。

    Args:
        pop: 流行度表
        positive: 正样本物品ID
        history: 需要排除的物品（exclude_history 关闭时传空集合）
        n: 负样本数
        rng: 按 (种子, 用户) 构造的随机数生成器

    Returns:
        np.ndarray: n 个物品ID

    Raises:
        SamplingError: 可选物品不足 n 个
    """
    eligible = np.ones(pop.num_items + 1, dtype=bool)
    eligible[0] = False
    eligible[positive] = False
    if history:
        eligible[np.fromiter(history, dtype=np.int64)] = False

    weighted = np.flatnonzero(eligible & (pop.counts > 0))
    unweighted = np.flatnonzero(eligible & (pop.counts == 0))
    if len(weighted) + len(unweighted) < n:
        raise SamplingError(
            f"only {len(weighted) + len(unweighted)} eligible negatives for item {positive}, need {n}"
        )

    if len(weighted) >= n:
        weights = pop.counts[weighted].astype(np.float64)
        return rng.choice(weighted, size=n, replace=False, p=weights / weights.sum())
    filler = rng.choice(unweighted, size=n - len(weighted), replace=False)
    return np.concatenate([weighted, filler])
