"""
评估器 - 采样指标与全量指标共用一次打分
"""
import time
from functools import partial
from typing import Callable, Dict, Hashable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config.experiment import EvalConfig
from config.settings import settings
from core.errors import ContractError
from core.logger import logger
from core.models import EvalReport, PopularityTable, SplitDataset
from core.utils import user_rng
from evaluation.metrics import metrics_from_ranks, rank_of_positive
from evaluation.sampling import sample_popularity_negatives
from models.factory import Model, predict_scores

Scorer = Callable[[Sequence[Sequence[int]], Sequence[Hashable]], np.ndarray]


def evaluate_model(
    model: Optional[Model],
    split: SplitDataset,
    pop: PopularityTable,
    cfg: EvalConfig,
    scorer: Optional[Scorer] = None,
) -> EvalReport:
    """
    留一法评估：每个测试用户以 训练序列+验证物品 为输入预测测试物品

    sampled 模式在正样本 + num_negatives 个流行度负样本中排序，unsampled 模式在全部物品中排序

    Args:
        model: 已训练模型（提供 scorer 时可为 None）
        split: 留一法切分
        pop: 流行度表
        cfg: 评估配置
        scorer: 自定义打分函数 (histories, users) -> [B, V+1]，默认使用 predict_scores

    Returns:
        EvalReport: 每个用户的指标向量与均值
    """
    users: List[Hashable] = list(split.test)
    if not users:
        raise ContractError("test set is empty")
    if scorer is None:
        if model is None:
            raise ContractError("evaluate_model needs a model or a scorer")
        scorer = partial(predict_scores, model)

    modes = cfg.modes
    seed = cfg.seed if cfg.seed is not None else settings.default_seed
    ranks: Dict[str, List[int]] = {mode: [] for mode in modes}
    all_items = np.arange(1, split.num_items + 1)

    started = time.perf_counter()
    batches = range(0, len(users), cfg.batch_size)
    for start in tqdm(batches, desc="Evaluating", disable=not settings.progress_bars):
        batch_users = users[start:start + cfg.batch_size]
        histories = [split.history(u) for u in batch_users]
        scores = scorer(histories, batch_users)
        for row, user in enumerate(batch_users):
            positive = split.test[user]
            seen = set(histories[row])
            seen.discard(positive)
            user_scores = np.array(scores[row], dtype=np.float64)
            if cfg.exclude_history and seen:
                user_scores[list(seen)] = -np.inf

            if "unsampled" in ranks:
                ranks["unsampled"].append(rank_of_positive(user_scores, all_items, positive))
            if "sampled" in ranks:
                negatives = sample_popularity_negatives(
                    pop,
                    positive,
                    seen if cfg.exclude_history else (),
                    cfg.num_negatives,
                    user_rng(seed, user),
                )
                candidates = np.concatenate([[positive], negatives])
                ranks["sampled"].append(rank_of_positive(user_scores, candidates, positive))
    elapsed = time.perf_counter() - started

    per_user: Dict[str, np.ndarray] = {}
    for mode in modes:
        for name, values in metrics_from_ranks(np.array(ranks[mode]), cfg.cutoffs).items():
            per_user[f"{mode}/{name}"] = values
    means = {key: float(values.mean()) for key, values in per_user.items()}

    summary = ", ".join(f"{key}={value:.4f}" for key, value in means.items() if key.endswith("@10"))
    logger.info(f"Evaluated {len(users)} users in {elapsed:.1f}s: {summary}")
    return EvalReport(
        users=users,
        per_user=per_user,
        means=means,
        eval_seconds=elapsed,
        cutoffs=list(cfg.cutoffs),
        modes=modes,
    )
