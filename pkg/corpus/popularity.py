"""
物品流行度表 - 用于按流行度采样负样本
"""
from typing import Iterable, List, Optional

import numpy as np

from core.errors import EmptyDatasetError
from core.models import InteractionDataset, PopularityTable, SplitDataset


def build_popularity_table(
    ds: InteractionDataset,
    split: Optional[SplitDataset] = None,
    source: str = "train",
) -> PopularityTable:
    """
    统计每个物品的交互次数并归一化

    Args:
        ds: 数据集
        split: 给定且 source="train" 时只统计训练交互（不含验证/测试物品）
        source: "train" | "full"

    Returns:
        PopularityTable: 下标为内部物品ID，第 0 位恒为 0
    """
    if source not in ("train", "full"):
        raise ValueError(f"unknown popularity source {source!r}")
    if split is not None and source == "train":
        sequences: Iterable[List[int]] = split.train.values()
        effective = "train"
    else:
        sequences = ds.sequences.values()
        effective = "full"

    counts = np.zeros(ds.num_items + 1, dtype=np.int64)
    for seq in sequences:
        np.add.at(counts, np.asarray(seq, dtype=np.int64), 1)
    total = counts.sum()
    if total == 0:
        raise EmptyDatasetError("cannot build a popularity table without interactions")

    probabilities = counts / total
    return PopularityTable(
        counts=counts,
        probabilities=probabilities,
        cumulative=np.cumsum(probabilities),
        source=effective,
    )
