"""
Transformer 编码器 - BERT4Rec / SASRec / ALBERT4Rec / DeBERTa4Rec 共用

结构:
    物品 embedding（ALBERT 为 E 维 + 投影到 H）
    + 绝对位置 embedding（DeBERTa 改为跨层共享的相对位置表）
    -> LayerNorm -> N 个 pre-LN block（自注意力 + 4H GELU 前馈）-> LayerNorm
    输出与同一张物品 embedding 表做点积（权重共享）再加物品偏置
"""
from typing import List, Optional

import numpy as np

from config.experiment import ModelConfig
from core.errors import ConfigError, ShapeError
from core.models import PADDING_ID
from models.attention import (
    disentangled_attention_scores,
    merge_heads,
    relative_position_index,
    split_heads,
    split_relative_heads,
)
from models.base import ParameterStore
from tensor_engine.ops import dropout, gelu, layer_norm, masked_fill, softmax, take_rows
from tensor_engine.tensor import Tensor

# 注意力屏蔽用的大负数（全填充行仍保持有限）
ATTENTION_MASK_VALUE = -1e9


class EncoderModel(ParameterStore):
    """
    序列推荐 Transformer 编码器

    Args:
        config: 模型配置
        vocab_size: 物品数 V（embedding 表有 V+2 行：0 填充，V+1 为 mask）
        seed: 初始化与 dropout 的随机种子
    """

    def __init__(self, config: ModelConfig, vocab_size: int, seed: int):
        super().__init__(seed)
        if config.hidden_size % config.num_heads != 0:
            raise ConfigError(
                f"hidden_size {config.hidden_size} is not divisible by num_heads {config.num_heads}"
            )
        self.config = config
        self.kind = config.kind
        self.num_items = vocab_size
        self.mask_id = vocab_size + 1
        self.vocab_rows = vocab_size + 2
        self.max_seq_len = config.max_seq_len
        self.hidden_size = config.hidden_size
        self.embedding_size = config.embedding_size or config.hidden_size
        self.num_heads = config.num_heads
        self.attention = config.attention or ("causal" if config.kind == "sasrec" else "bidirectional")
        self.relative = config.kind == "deberta4rec"
        self.factorized = self.embedding_size != self.hidden_size
        self._dropout_rng = np.random.default_rng([seed, 1])
        self._build_parameters()

    def _build_parameters(self) -> None:
        H, E, M = self.hidden_size, self.embedding_size, self.max_seq_len
        self.truncated_normal("item_embeddings", (self.vocab_rows, E))
        self._params["item_embeddings"].data[PADDING_ID] = 0.0
        if self.factorized:
            self.truncated_normal("embedding_projection", (E, H))
        if self.relative:
            self.truncated_normal("relative_embeddings", (2 * M - 1, H))
        else:
            self.truncated_normal("position_embeddings", (M, H))
        self._add_norm("embedding_norm", H)

        unique_blocks = 1 if self.config.share_layers else self.config.num_blocks
        for b in range(unique_blocks):
            prefix = f"blocks.{b}"
            self._add_norm(f"{prefix}.attn_norm", H)
            for name in ("query", "key", "value", "output"):
                self._add_linear(f"{prefix}.{name}", H, H)
            if self.relative:
                self._add_linear(f"{prefix}.rel_query", H, H)
                self._add_linear(f"{prefix}.rel_key", H, H)
            self._add_norm(f"{prefix}.ffn_norm", H)
            self._add_linear(f"{prefix}.ffn_in", H, 4 * H)
            self._add_linear(f"{prefix}.ffn_out", 4 * H, H)

        self._add_norm("final_norm", H)
        if self.factorized:
            self.truncated_normal("head_projection", (H, E))
        self.zeros("output_bias", (self.vocab_rows,))

    def _add_linear(self, prefix: str, fan_in: int, fan_out: int) -> None:
        self.truncated_normal(f"{prefix}.weight", (fan_in, fan_out))
        self.zeros(f"{prefix}.bias", (fan_out,))

    def _add_norm(self, prefix: str, dim: int) -> None:
        self.ones(f"{prefix}.gain", (dim,))
        self.zeros(f"{prefix}.bias", (dim,))

    # ==================== 前向 ====================
    def _p(self, name: str) -> Tensor:
        return self._params[name]

    def _linear(self, x: Tensor, prefix: str) -> Tensor:
        return x @ self._p(f"{prefix}.weight") + self._p(f"{prefix}.bias")

    def _norm(self, x: Tensor, prefix: str) -> Tensor:
        return layer_norm(x, self._p(f"{prefix}.gain"), self._p(f"{prefix}.bias"))

    def _dropout(self, x: Tensor) -> Tensor:
        return dropout(x, self.config.dropout, self._dropout_rng, self.training)

    def block_prefix(self, block: int) -> str:
        return "blocks.0" if self.config.share_layers else f"blocks.{block}"

    def attention_mask(self, ids: np.ndarray, mode: str) -> np.ndarray:
        """
        布尔屏蔽矩阵 [B, 1, L, L]，True 表示不可见：填充位作为 key 一律屏蔽，causal 另外屏蔽未来位置

        对角线始终可见，填充位的 query 只看自己，不会退化成对全部位置（包括未来）的均匀注意力
        """
        length = ids.shape[1]
        mask = np.broadcast_to((ids == PADDING_ID)[:, None, None, :], (ids.shape[0], 1, length, length))
        if mode == "causal":
            future = np.triu(np.ones((length, length), dtype=bool), k=1)
            mask = mask | future[None, None, :, :]
        return mask & ~np.eye(length, dtype=bool)[None, None, :, :]

    def encode(self, ids: np.ndarray, mode: Optional[str] = None) -> Tensor:
        """
        编码左填充的物品ID矩阵

        Args:
            ids: 形状 [B, L] 的整数矩阵，L ≤ max_seq_len
            mode: "bidirectional" | "causal"，默认使用模型自身的注意力方式

        Returns:
            Tensor: 隐状态 [B, L, H]

        Raises:
            ShapeError: L 超过 max_seq_len
        """
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ShapeError(f"expected an id matrix [B, L], got shape {ids.shape}")
        length = ids.shape[1]
        if length > self.max_seq_len:
            raise ShapeError(f"sequence length {length} exceeds max_seq_len {self.max_seq_len}")
        mode = mode or self.attention

        x = take_rows(self._p("item_embeddings"), ids)
        if self.factorized:
            x = x @ self._p("embedding_projection")
        if not self.relative:
            # 左填充：最后一个位置总是对齐到 max_seq_len-1
            positions = np.arange(self.max_seq_len - length, self.max_seq_len)
            x = x + take_rows(self._p("position_embeddings"), positions)
        x = self._dropout(self._norm(x, "embedding_norm"))

        mask = self.attention_mask(ids, mode)
        rel_index = relative_position_index(length, self.max_seq_len) if self.relative else None
        for block in range(self.config.num_blocks):
            x = self._block(x, self.block_prefix(block), mask, rel_index)
        return self._norm(x, "final_norm")

    def _block(self, x: Tensor, prefix: str, mask: np.ndarray, rel_index: Optional[np.ndarray]) -> Tensor:
        h = self._norm(x, f"{prefix}.attn_norm")
        query = split_heads(self._linear(h, f"{prefix}.query"), self.num_heads)
        key = split_heads(self._linear(h, f"{prefix}.key"), self.num_heads)
        value = split_heads(self._linear(h, f"{prefix}.value"), self.num_heads)

        if self.relative:
            rel = self._p("relative_embeddings")
            rel_query = split_relative_heads(self._linear(rel, f"{prefix}.rel_query"), self.num_heads)
            rel_key = split_relative_heads(self._linear(rel, f"{prefix}.rel_key"), self.num_heads)
            scores = disentangled_attention_scores(query, key, rel_query, rel_key, rel_index)
        else:
            scores = (query @ key.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.config.head_dim))

        weights = self._dropout(softmax(masked_fill(scores, mask, ATTENTION_MASK_VALUE), axis=-1))
        context = merge_heads(weights @ value)
        x = x + self._dropout(self._linear(context, f"{prefix}.output"))

        h = self._norm(x, f"{prefix}.ffn_norm")
        h = self._linear(gelu(self._linear(h, f"{prefix}.ffn_in")), f"{prefix}.ffn_out")
        return x + self._dropout(h)

    # ==================== 打分 ====================
    def output_vectors(self, hidden: Tensor) -> Tensor:
        """隐状态映射回 embedding 空间（ALBERT 需要投影回 E 维）"""
        if self.factorized:
            return hidden @ self._p("head_projection")
        return hidden

    def score(self, rows: Tensor, inference: bool = False) -> Tensor:
        """
        对所有词表行打分: rows · embeddingᵀ + bias

        Args:
            rows: 形状 [P, H] 的隐状态
            inference: True 时填充位与 mask 位的 logit 为 −∞，训练时为一个大负数

        Returns:
            Tensor: 形状 [P, V+2]
        """
        logits = self.output_vectors(rows) @ self._p("item_embeddings").transpose() + self._p("output_bias")
        blocked = np.zeros(self.vocab_rows, dtype=bool)
        blocked[[PADDING_ID, self.mask_id]] = True
        value = -np.inf if inference else ATTENTION_MASK_VALUE
        return masked_fill(logits, blocked, value)

    def score_positions(self, hidden: Tensor, positions: np.ndarray, inference: bool = False) -> Tensor:
        """
        选取若干位置的隐状态并对全部物品打分

        Args:
            hidden: [B, L, H]
            positions: 形状 [B] 的位置下标（每行一个），或 [B, L] 的布尔选择矩阵

        Returns:
            Tensor: [P, V+2]，P 为被选位置数（按行主序）
        """
        batch, length, dim = hidden.shape
        positions = np.asarray(positions)
        if positions.dtype == bool:
            if positions.shape != (batch, length):
                raise ShapeError(f"position mask {positions.shape} does not match hidden {hidden.shape}")
            flat = np.flatnonzero(positions)
        else:
            if positions.shape != (batch,) or np.any(positions < 0) or np.any(positions >= length):
                raise ShapeError(f"invalid positions {positions!r} for hidden {hidden.shape}")
            flat = np.arange(batch) * length + positions
        rows = take_rows(hidden.reshape(batch * length, dim), flat)
        return self.score(rows, inference=inference)


def encode_sequence(model: EncoderModel, batch: np.ndarray, mode: Optional[str] = None) -> Tensor:
    return model.encode(batch, mode)


def score_all_items(model: EncoderModel, hidden: Tensor, positions: np.ndarray) -> Tensor:
    """推理打分：填充位与 mask 位为 −∞"""
    return model.score_positions(hidden, positions, inference=True)


def trainable_blocks(model: EncoderModel) -> List[str]:
    """实际存在参数的 block 前缀（共享时只有 blocks.0）"""
    return sorted({".".join(name.split(".")[:2]) for name in model.parameters() if name.startswith("blocks.")})
