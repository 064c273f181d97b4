"""
模型构建与推理入口
"""
from typing import Hashable, Iterable, List, Optional, Sequence, Union

import numpy as np

from config.experiment import ModelConfig
from core.errors import ConfigError, ContractError
from core.models import PADDING_ID
from models.encoder import EncoderModel, score_all_items
from models.mf import MFModel

Model = Union[EncoderModel, MFModel]


def build_model(config: ModelConfig, vocab_size: int, seed: int, users: Sequence[Hashable] = ()) -> Model:
    """
    按配置构建模型，参数在同一种子下逐位可复现

    Args:
        config: 模型配置
        vocab_size: 物品数 V
        seed: 初始化种子
        users: 训练用户列表（仅 mf_bpr 需要，决定用户因子表的行顺序）

    Raises:
        ConfigError: 词表为空或 hidden_size 不能被 num_heads 整除
    """
    if vocab_size < 1:
        raise ConfigError(f"vocab_size must be at least 1, got {vocab_size}")
    if config.kind == "mf_bpr":
        return MFModel(config, vocab_size, users, seed)
    if config.hidden_size % config.num_heads != 0:
        raise ConfigError(f"hidden_size {config.hidden_size} is not divisible by num_heads {config.num_heads}")
    return EncoderModel(config, vocab_size, seed)


def pad_left(sequences: Sequence[Sequence[int]], length: int) -> np.ndarray:
    """左填充到固定长度（最近的物品在最右侧），超长时保留末尾"""
    batch = np.full((len(sequences), length), PADDING_ID, dtype=np.int64)
    for row, seq in enumerate(sequences):
        tail = list(seq)[-length:] if length else []
        if tail:
            batch[row, length - len(tail):] = tail
    return batch


def inference_inputs(model: EncoderModel, histories: Sequence[Sequence[int]]) -> np.ndarray:
    """
    构造推理输入：双向模型取最近 max_seq_len-1 个物品并在末尾追加 mask；
    causal 模型取最近 max_seq_len 个物品
    """
    if model.attention == "causal":
        rows = [list(seq)[-model.max_seq_len:] for seq in histories]
    else:
        keep = model.max_seq_len - 1
        rows = [(list(seq)[-keep:] if keep else []) + [model.mask_id] for seq in histories]
    return pad_left(rows, model.max_seq_len)


def predict_scores(
    model: Model,
    histories: Sequence[Sequence[int]],
    users: Optional[Sequence[Hashable]] = None,
) -> np.ndarray:
    """
    批量计算下一个物品的分数

    Returns:
        np.ndarray: 形状 [B, V+1]，按内部物品ID索引，第 0 列为 −∞
    """
    for seq in histories:
        if len(seq) == 0:
            raise ContractError("cannot predict from an empty sequence")
    batch = len(histories)
    if isinstance(model, MFModel):
        if users is None:
            raise ContractError("mf_bpr predictions need user ids")
        item_scores = model.all_item_scores(users)
    else:
        was_training = model.training
        model.eval()
        try:
            ids = inference_inputs(model, histories)
            hidden = model.encode(ids)
            last = np.full(batch, ids.shape[1] - 1)
            logits = score_all_items(model, hidden, last).data
        finally:
            model.training = was_training
        item_scores = logits[:, 1:model.num_items + 1]

    scores = np.empty((batch, model.num_items + 1), dtype=np.float64)
    scores[:, 0] = -np.inf
    scores[:, 1:] = item_scores
    return scores


def predict_next_item(
    model: Model,
    user_sequence: Sequence[int],
    exclude: Iterable[int] = (),
    user: Optional[Hashable] = None,
) -> np.ndarray:
    """
    对单个用户的序列续写打分

    Args:
        model: 已训练的模型
        user_sequence: 非空的内部物品ID序列
        exclude: 需要屏蔽（置为 −∞）的物品
        user: 用户ID（mf_bpr 需要）

    Returns:
        np.ndarray: 长度 V+1 的分数向量，下标即内部物品ID
    """
    scores = predict_scores(model, [user_sequence], None if user is None else [user])[0]
    excluded: List[int] = [item for item in exclude if 1 <= item <= model.num_items]
    if excluded:
        scores[excluded] = -np.inf
    return scores
