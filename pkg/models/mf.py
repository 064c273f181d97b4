"""
矩阵分解基线（BPR 成对损失训练）
"""
from typing import Hashable, Iterable, Sequence

import numpy as np

from config.experiment import ModelConfig
from core.errors import ItemIdError
from models.base import ParameterStore
from tensor_engine.ops import take_rows
from tensor_engine.tensor import Tensor


class MFModel(ParameterStore):
    """
    用户因子 [U, d] · 物品因子 [V, d] + 物品偏置 [V]

    物品内部ID 1..V 对应因子表第 0..V-1 行
    """

    def __init__(self, config: ModelConfig, vocab_size: int, users: Sequence[Hashable], seed: int):
        super().__init__(seed)
        self.config = config
        self.kind = config.kind
        self.num_items = vocab_size
        self.latent_dim = config.latent_dim
        self.user_index = {user: row for row, user in enumerate(users)}
        self.truncated_normal("user_factors", (max(len(self.user_index), 1), self.latent_dim))
        self.truncated_normal("item_factors", (vocab_size, self.latent_dim))
        self.zeros("item_bias", (vocab_size,))

    def user_rows(self, users: Iterable[Hashable]) -> np.ndarray:
        """用户 -> 行号；训练时未见过的用户为 -1"""
        return np.array([self.user_index.get(user, -1) for user in users], dtype=np.int64)

    def check_items(self, items: np.ndarray) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        bad = items[(items < 1) | (items > self.num_items)]
        if bad.size:
            raise ItemIdError(f"unknown item id {int(bad[0])} (catalog has {self.num_items} items)")
        return items

    def user_vectors(self, users: Sequence[Hashable]) -> np.ndarray:
        """冷启动用户返回零向量"""
        rows = self.user_rows(users)
        factors = self._params["user_factors"].data
        vectors = np.zeros((len(rows), self.latent_dim), dtype=factors.dtype)
        known = rows >= 0
        vectors[known] = factors[rows[known]]
        return vectors

    def pair_scores(self, user_rows: np.ndarray, items: np.ndarray) -> Tensor:
        """可微打分: user·item + bias，user_rows 必须是已知用户的行号"""
        items = self.check_items(items)
        user_vec = take_rows(self._params["user_factors"], user_rows)
        item_vec = take_rows(self._params["item_factors"], items - 1)
        bias = take_rows(self._params["item_bias"], items - 1)
        return (user_vec * item_vec).sum(axis=-1) + bias

    def all_item_scores(self, users: Sequence[Hashable]) -> np.ndarray:
        """对全部物品打分，形状 [B, V]"""
        factors = self._params["item_factors"].data
        return self.user_vectors(users) @ factors.T + self._params["item_bias"].data


def mf_score(model: MFModel, user: Hashable, items) -> np.ndarray:
    """
    计算单个用户对若干物品的分数

    Raises:
        ItemIdError: 物品ID不在 1..V 内
    """
    items = model.check_items(np.atleast_1d(items))
    user_vec = model.user_vectors([user])[0]
    factors = model.parameters()["item_factors"].data[items - 1]
    return factors @ user_vec + model.parameters()["item_bias"].data[items - 1]
