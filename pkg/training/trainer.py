"""
训练循环
协调批次构建、前向/反向、Adam 更新、验证与停止判断

停止方式:
1. steps(N): 恰好 N 步后停止，返回最终参数
2. early_stopping(patience): 验证损失连续 patience 个 epoch 没有严格下降即停止，返回最佳 epoch 的参数
3. epochs(N): 固定 N 个 epoch，返回最终参数
"""
import math
import time
from typing import Dict, Hashable, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config.experiment import TrainConfig
from config.settings import settings
from core.errors import DegenerateBatchError, DivergenceError
from core.logger import logger
from core.models import SplitDataset, TrainLog
from core.utils import user_rng
from models.encoder import EncoderModel
from models.factory import Model, pad_left
from models.mf import MFModel
from tensor_engine.ops import masked_cross_entropy
from tensor_engine.optim import adam_step, init_adam_state
from tensor_engine.tensor import Tape, backward
from training.batching import (
    build_bpr_batch,
    build_masked_batch,
    build_shifted_batch,
    iterate_user_batches,
    sample_shifted_negatives,
)
from training.objectives import (
    masked_item_loss,
    mf_bpr_loss,
    sample_uniform_negatives,
    shifted_sampled_bce_loss,
    shifted_softmax_loss,
)

VALIDATION_BATCH_SIZE = 256


class Trainer:
    """
    单线程训练器，训练期间独占模型
    """

    def __init__(self, model: Model, split: SplitDataset, cfg: TrainConfig):
        self.model = model
        self.split = split
        self.cfg = cfg
        self.objective = cfg.objective or _default_objective(model)
        self.users: List[Hashable] = list(split.train)
        self.mask_prob = cfg.mask_prob if cfg.mask_prob is not None else getattr(model.config, "mask_prob", 0.2)
        self.seed = cfg.seed if cfg.seed is not None else settings.default_seed
        self.rng = np.random.default_rng(self.seed)
        self.params = model.parameters()
        self.optimizer = init_adam_state(self.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
        self.logger = logger

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(len(self.users) / self.cfg.batch_size)

    # ==================== 单步 ====================
    def _batch_loss(self, batch_users: List[Hashable]):
        sequences = [self.split.train[u] for u in batch_users]
        model = self.model
        if self.objective == "masked_item":
            batch = build_masked_batch(
                sequences,
                model.max_seq_len,
                self.mask_prob,
                self.rng,
                model.mask_id,
                self.cfg.last_item_mask_prob,
            )
            return masked_item_loss(model, batch)
        if self.objective == "shifted_sequence":
            inputs, targets, active = build_shifted_batch(sequences, model.max_seq_len)
            if self.cfg.negative_strategy == "full_softmax":
                return shifted_softmax_loss(model, inputs, targets, active)
            negatives = sample_shifted_negatives(sequences, targets, model.num_items, self.rng)
            return shifted_sampled_bce_loss(model, inputs, targets, negatives, active)
        user_rows, positives, negatives = build_bpr_batch(
            batch_users, self.split.train, model.user_index, model.num_items, self.rng
        )
        return mf_bpr_loss(model, user_rows, positives, negatives)

    def train_step(self, batch_users: List[Hashable], step: int) -> Optional[float]:
        """
        一个批次的前向、反向与参数更新

        Returns:
            Optional[float]: 批次损失；批次内没有可训练位置时返回 None（仍计为一步）

        Raises:
            DivergenceError: 损失不是有限值
        """
        self.model.train()
        try:
            with Tape() as tape:
                loss = self._batch_loss(batch_users)
        except DegenerateBatchError:
            self.logger.debug(f"Step {step}: batch has nothing to train on, skipped")
            return None

        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(f"training loss became {value}", step=step)
        self.model.zero_grad()
        backward(loss, tape)
        adam_step(self.params, None, self.optimizer)
        return value

    # ==================== 训练循环 ====================
    def run(self) -> TrainLog:
        cfg = self.cfg
        log = TrainLog()
        best_state: Optional[Dict[str, np.ndarray]] = None
        step = 0
        epoch = 0
        elapsed = 0.0
        stop_reason = ""

        total = {"steps": math.ceil(cfg.steps / max(self.steps_per_epoch, 1)), "epochs": cfg.epochs}.get(
            cfg.stopping, cfg.max_epochs
        )
        progress = tqdm(total=total, desc=f"Training {self.model.kind}", disable=not settings.progress_bars)
        self.logger.info(
            f"Training {self.model.kind} with {self.objective} on {len(self.users)} users, "
            f"{self.steps_per_epoch} steps per epoch, stopping={cfg.stopping_label()}"
        )

        while not stop_reason:
            epoch += 1
            started = time.perf_counter()
            epoch_losses = []
            for batch_users in iterate_user_batches(self.users, cfg.batch_size, self.rng):
                step += 1
                loss = self.train_step(batch_users, step)
                if loss is not None:
                    epoch_losses.append(loss)
                if cfg.stopping == "steps" and step >= cfg.steps:
                    stop_reason = "steps"
                    break

            if cfg.stopping == "epochs" and epoch >= cfg.epochs:
                stop_reason = "epochs"
            if cfg.max_epochs is not None and epoch >= cfg.max_epochs and not stop_reason:
                stop_reason = "max_epochs"

            # 只计训练时间，验证不计入
            elapsed += time.perf_counter() - started
            if epoch % cfg.validate_every == 0 or stop_reason:
                val_loss = validation_loss(self.model, self.split, self.objective, seed=self.seed)
                log.record_epoch(epoch, val_loss, elapsed, step)
                if log.best_val_loss is None or val_loss < log.best_val_loss:
                    log.best_val_loss = val_loss
                    log.best_epoch = epoch
                    if cfg.stopping == "early_stopping":
                        best_state = self.model.state_dict()
                elif cfg.stopping == "early_stopping" and epoch - log.best_epoch >= cfg.patience:
                    stop_reason = "early_stopping"
                train_loss = float(np.mean(epoch_losses)) if epoch_losses else float("nan")
                self.logger.debug(
                    f"Epoch {epoch}: train_loss={train_loss:.5f} val_loss={val_loss:.5f} steps={step}"
                )
                progress.set_postfix(val_loss=f"{val_loss:.4f}", best=log.best_epoch)
            progress.update(1)

        progress.close()
        if best_state is not None:
            self.model.load_state_dict(best_state)
            self.logger.info(f"Restored parameters of epoch {log.best_epoch} (val_loss={log.best_val_loss:.5f})")

        log.total_steps = step
        log.total_seconds = elapsed
        log.stop_reason = stop_reason
        self.model.eval()
        self.logger.info(
            f"Finished training after {epoch} epochs / {step} steps in {elapsed:.1f}s ({stop_reason})"
        )
        return log


def _default_objective(model: Model) -> str:
    if isinstance(model, MFModel):
        return "bpr"
    return "shifted_sequence" if model.attention == "causal" else "masked_item"


def train_model(model: Model, split: SplitDataset, cfg: TrainConfig) -> Tuple[Model, TrainLog]:
    """
    训练模型

    Args:
        model: build_model 构建的模型
        split: 留一法切分
        cfg: 训练配置

    Returns:
        (model, TrainLog): 训练后的模型（原地更新）与训练日志

    Raises:
        DivergenceError: 损失出现非有限值
    """
    log = Trainer(model, split, cfg).run()
    return model, log


# ==================== 验证损失 ====================
def validation_loss(model: Model, split: SplitDataset, objective: str, seed: int = 0) -> float:
    """
    验证集损失（评估模式，无 dropout，同一种子下结果确定）

    masked_item: 序列截断到验证物品为止，验证物品位置替换为 mask，求恢复它的交叉熵
    shifted_sequence: 以训练序列为输入，最后一个位置预测验证物品的交叉熵
    bpr: 每个验证对配一个按 (seed, user) 采样的负样本，求平均 BPR 损失
    """
    users = list(split.validation)
    if not users:
        raise DegenerateBatchError("validation set is empty")
    was_training = model.training
    model.eval()
    try:
        if objective == "bpr":
            return _bpr_validation_loss(model, split, users, seed)
        total = 0.0
        for start in range(0, len(users), VALIDATION_BATCH_SIZE):
            chunk = users[start:start + VALIDATION_BATCH_SIZE]
            total += _sequence_validation_loss(model, split, chunk, objective) * len(chunk)
        return total / len(users)
    finally:
        model.training = was_training


def _sequence_validation_loss(model: EncoderModel, split: SplitDataset, users: List[Hashable], objective: str) -> float:
    targets = np.array([split.validation[u] for u in users], dtype=np.int64)
    if objective == "masked_item":
        keep = model.max_seq_len - 1
        rows = [(split.train[u][-keep:] if keep else []) + [model.mask_id] for u in users]
        ids = pad_left(rows, model.max_seq_len)
        hidden = model.encode(ids, "bidirectional")
    else:
        ids = pad_left([split.train[u] for u in users], model.max_seq_len)
        hidden = model.encode(ids, "causal")
    last = np.full(len(users), ids.shape[1] - 1)
    logits = model.score_positions(hidden, last)
    # 训练序列为空（causal 输入全是填充）的行仍参与平均
    return masked_cross_entropy(logits, targets, np.ones(len(users), dtype=bool)).item()


def _bpr_validation_loss(model: MFModel, split: SplitDataset, users: List[Hashable], seed: int) -> float:
    positives = np.array([split.validation[u] for u in users], dtype=np.int64)
    negatives = np.array(
        [
            sample_uniform_negatives(user_rng(seed, u), model.num_items, 1, set(split.history(u)))[0]
            for u in users
        ],
        dtype=np.int64,
    )
    factors = model.parameters()["item_factors"].data
    bias = model.parameters()["item_bias"].data
    vectors = model.user_vectors(users)
    scores_pos = (vectors * factors[positives - 1]).sum(axis=1) + bias[positives - 1]
    scores_neg = (vectors * factors[negatives - 1]).sum(axis=1) + bias[negatives - 1]
    return float(np.mean(np.logaddexp(0.0, -(scores_pos - scores_neg))))
