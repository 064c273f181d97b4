"""
排序指标 - Recall@K（即 HitRate@K）、NDCG@K、MRR
"""
from typing import Dict, Iterable, Sequence

import numpy as np

from core.errors import ContractError


def rank_of_positive(scores: np.ndarray, candidates: Sequence[int], positive: int) -> int:
    """
    正样本在候选集中的名次（从1开始）

    名次 = 1 + 分数严格更高的候选数 + 分数相同且ID更小的候选数

    Args:
        scores: 按物品ID索引的分数向量
        candidates: 候选物品ID（包含正样本）
        positive: 正样本ID
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    if not np.any(candidates == positive):
        raise ContractError(f"positive item {positive} is not among the candidates")
    candidate_scores = scores[candidates]
    target = scores[positive]
    higher = np.count_nonzero(candidate_scores > target)
    tied_before = np.count_nonzero((candidate_scores == target) & (candidates < positive))
    return int(1 + higher + tied_before)


def pointwise_metrics(rank: int, k: int) -> Dict[str, float]:
    """
    单个用户的指标
    例如: rank=3, K=10 -> ndcg = 1/log2(4) = 0.5
    """
    if rank < 1:
        raise ContractError(f"rank must be at least 1, got {rank}")
    hit = rank <= k
    return {
        f"recall@{k}": 1.0 if hit else 0.0,
        f"ndcg@{k}": float(1.0 / np.log2(rank + 1)) if hit else 0.0,
        "mrr": 1.0 / rank,
    }


def metrics_from_ranks(ranks: np.ndarray, cutoffs: Iterable[int]) -> Dict[str, np.ndarray]:
    """pointwise_metrics 的向量化版本，返回每个用户的指标向量"""
    ranks = np.asarray(ranks, dtype=np.int64)
    result: Dict[str, np.ndarray] = {}
    for k in cutoffs:
        hit = ranks <= k
        result[f"recall@{k}"] = hit.astype(np.float64)
        result[f"ndcg@{k}"] = np.where(hit, 1.0 / np.log2(ranks + 1), 0.0)
    result["mrr"] = 1.0 / ranks
    return result
