"""
数据模型定义 - 只定义类和字段，不包含复杂逻辑
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Hashable, List, Optional

import numpy as np

PADDING_ID = 0  # 内部ID 0 保留给填充位


@dataclass(frozen=True)
class Interaction:
    """
    单条交互记录
    """
    user: Hashable  # 用户标识（字符串或整数，不透明）
    item: Hashable  # 物品外部标识
    position: int  # 在该用户序列中的时间顺序下标（从0开始）


@dataclass
class InteractionDataset:
    """
    交互数据集 - 每个用户按时间排序的物品序列

    内部物品ID为 1..V；0 为填充位，V+1 为 [mask] 标记
    """
    sequences: Dict[Hashable, List[int]]  # 用户 -> 内部物品ID序列
    item_ids: List[Hashable]  # 内部ID i 对应 item_ids[i-1]
    item_index: Dict[Hashable, int] = field(default_factory=dict)  # 外部ID -> 内部ID

    def __post_init__(self):
        if not self.item_index:
            self.item_index = {item: idx for idx, item in enumerate(self.item_ids, start=1)}

    @property
    def num_users(self) -> int:
        return len(self.sequences)

    @property
    def num_items(self) -> int:
        return len(self.item_ids)

    @property
    def mask_id(self) -> int:
        return self.num_items + 1

    @property
    def num_interactions(self) -> int:
        return sum(len(seq) for seq in self.sequences.values())


@dataclass
class SplitDataset:
    """
    留一法切分结果
    """
    train: Dict[Hashable, List[int]]  # 用户 -> 训练序列
    test: Dict[Hashable, int]  # 用户 -> 最后一个物品
    validation: Dict[Hashable, int]  # 验证用户 -> 倒数第二个物品
    val_user_seed: int
    num_items: int

    @property
    def mask_id(self) -> int:
        return self.num_items + 1

    def history(self, user: Hashable) -> List[int]:
        """测试时的输入历史：训练序列 + 验证物品（如有）"""
        seq = list(self.train[user])
        if user in self.validation:
            seq.append(self.validation[user])
        return seq


@dataclass
class DatasetStats:
    """
    数据集统计信息（列顺序与统计表一致）
    """
    users: int
    items: int
    interactions: int
    avg_len: float
    sparsity: float

    def as_row(self) -> Dict[str, Any]:
        return {
            "users": self.users,
            "items": self.items,
            "interactions": self.interactions,
            "avg_len": self.avg_len,
            "sparsity": self.sparsity,
        }


@dataclass
class PopularityTable:
    """
    物品流行度表 - 按内部ID索引，下标0（填充位）恒为0
    """
    counts: np.ndarray  # shape (V+1,)
    probabilities: np.ndarray  # shape (V+1,)
    cumulative: np.ndarray  # shape (V+1,)，累积分布
    source: str = "train"  # "train" | "full"

    @property
    def num_items(self) -> int:
        return len(self.counts) - 1


@dataclass
class MaskedBatch:
    """
    物品遮盖任务的一个批次（或一行）
    """
    inputs: np.ndarray  # 被遮盖位置替换为 mask id
    labels: np.ndarray  # 被遮盖位置的原始物品ID
    active: np.ndarray  # 是否参与损失计算


@dataclass
class TrainLog:
    """
    训练日志 - 每个 epoch 的验证损失与累计耗时

    cum_seconds / total_seconds 只统计训练步，验证损失的计算时间不计入
    """
    epochs: List[int] = field(default_factory=list)
    val_losses: List[float] = field(default_factory=list)
    cum_seconds: List[float] = field(default_factory=list)
    steps_at_epoch: List[int] = field(default_factory=list)
    total_steps: int = 0
    total_seconds: float = 0.0
    best_epoch: Optional[int] = None
    best_val_loss: Optional[float] = None
    stop_reason: str = ""

    def record_epoch(self, epoch: int, val_loss: float, cum_seconds: float, steps: int) -> None:
        self.epochs.append(epoch)
        self.val_losses.append(val_loss)
        self.cum_seconds.append(cum_seconds)
        self.steps_at_epoch.append(steps)


@dataclass
class EvalReport:
    """
    评估报告 - 键形如 "sampled/recall@10"、"unsampled/mrr"
    """
    users: List[Hashable]
    per_user: Dict[str, np.ndarray]
    means: Dict[str, float]
    eval_seconds: float
    cutoffs: List[int]
    modes: List[str]

    @property
    def num_users(self) -> int:
        return len(self.users)


@dataclass
class SignificanceResult:
    """
    配对 t 检验结果（含 Bonferroni 校正）
    """
    p_value: float
    corrected_p_value: float
    num_tests: int
    significant: bool
    t_statistic: Optional[float] = None


@dataclass
class ReplicationVerdict:
    """
    复现判定 - 相对误差在 ±5% 以内即视为复现成功
    """
    observed: float
    reported: float
    relative_diff: float
    replicated: bool
    metric: Optional[str] = None


@dataclass(frozen=True)
class ComparisonRecord:
    """
    文献综述中的一次 BERT4Rec vs SASRec 比较
    """
    paper_id: str
    dataset: str
    outcome: str  # "bert4rec_wins" | "sasrec_wins" | "tie"


@dataclass
class OutcomeRow:
    """
    结果表的一行（一个数据集或合计）
    """
    dataset: str
    total: int
    counts: Dict[str, int]
    percentages: Dict[str, int]  # 四舍五入（half-up）后的整数百分比
    papers: Dict[str, List[str]]


@dataclass
class OutcomeTable:
    """
    按数据集汇总的比较结果表
    """
    rows: List[OutcomeRow]
    total: OutcomeRow
    min_papers: int
    num_datasets: int
    num_filtered_datasets: int
    num_papers: int
