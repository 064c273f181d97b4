"""
预处理与统计
"""
from typing import Dict, Hashable, List

from core.errors import ContractError, EmptyDatasetError
from core.logger import logger
from core.models import DatasetStats, InteractionDataset


def preprocess_min_length(ds: InteractionDataset, min_len: int = 5) -> InteractionDataset:
    """
    丢弃长度小于 min_len 的序列，并重新压缩物品ID（未再出现的物品移出词表）

    新ID按剩余数据中的首次出现顺序分配

    Raises:
        ContractError: min_len < 1
        EmptyDatasetError: 过滤后没有剩余序列
    """
    if min_len < 1:
        raise ContractError(f"min_len must be at least 1, got {min_len}")

    kept = {user: seq for user, seq in ds.sequences.items() if len(seq) >= min_len}
    if not kept:
        raise EmptyDatasetError(f"no sequences of length >= {min_len}")

    remap: Dict[int, int] = {}
    item_ids: List[Hashable] = []
    sequences: Dict[Hashable, List[int]] = {}
    for user, seq in kept.items():
        new_seq = []
        for old in seq:
            new = remap.get(old)
            if new is None:
                item_ids.append(ds.item_ids[old - 1])
                new = len(item_ids)
                remap[old] = new
            new_seq.append(new)
        sequences[user] = new_seq

    result = InteractionDataset(sequences=sequences, item_ids=item_ids)
    logger.info(
        f"Kept {result.num_users}/{ds.num_users} users with at least {min_len} interactions "
        f"({ds.num_items} -> {result.num_items} items)"
    )
    return result


def compute_stats(ds: InteractionDataset) -> DatasetStats:
    """
    统计用户数、物品数、交互数、平均长度与稀疏度（不做四舍五入）
    """
    if ds.num_users == 0 or ds.num_items == 0:
        raise EmptyDatasetError("cannot compute statistics of an empty dataset")
    interactions = ds.num_interactions
    return DatasetStats(
        users=ds.num_users,
        items=ds.num_items,
        interactions=interactions,
        avg_len=interactions / ds.num_users,
        sparsity=1.0 - interactions / (ds.num_users * ds.num_items),
    )
