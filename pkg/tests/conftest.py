"""
测试共用的 fixture
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# 添加项目根目录到路径
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config.experiment import EvalConfig, ModelConfig, TrainConfig  # noqa: E402
from config.settings import settings  # noqa: E402
from core.models import InteractionDataset  # noqa: E402
from tensor_engine import set_float64  # noqa: E402

settings.progress_bars = False

# 文献比较结果表中列出的数据集: (bert4rec_wins, sasrec_wins, tie)
TABLE_ROWS = {
    "Beauty": (12, 5, 2),
    "ML-1M": (13, 3, 2),
    "Yelp": (6, 4, 0),
    "Steam": (7, 1, 0),
    "ML-20M": (7, 0, 1),
    "Sports": (1, 4, 1),
    "LastFM": (4, 2, 0),
    "Toys": (0, 5, 0),
}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: learnability runs that train for many epochs")


@pytest.fixture
def float64():
    """64 位校验模式（梯度检查用）"""
    set_float64(True)
    yield
    set_float64(settings.float64)


def cyclic_dataset(num_users: int = 40, num_items: int = 20, length: int = 12) -> InteractionDataset:
    """合成循环数据：下一个物品总是 (当前物品 mod V) + 1"""
    sequences = {}
    for u in range(num_users):
        start = u % num_items
        sequences[f"u{u}"] = [(start + t) % num_items + 1 for t in range(length)]
    return InteractionDataset(sequences=sequences, item_ids=[f"i{i}" for i in range(1, num_items + 1)])


def skewed_dataset(num_users: int = 1000, num_items: int = 50, length: int = 5, seed: int = 0) -> InteractionDataset:
    """流行度偏斜的合成数据：每个用户按 1/rank² 的权重无放回抽取 length 个物品"""
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, num_items + 1) ** 2
    probs = weights / weights.sum()
    sequences = {
        f"u{u}": [int(i) + 1 for i in rng.choice(num_items, size=length, replace=False, p=probs)]
        for u in range(num_users)
    }
    return InteractionDataset(sequences=sequences, item_ids=[f"i{i}" for i in range(1, num_items + 1)])


@pytest.fixture
def cyclic():
    return cyclic_dataset()


@pytest.fixture
def tiny_model_config():
    return ModelConfig(kind="bert4rec", max_seq_len=8, hidden_size=8, num_blocks=2, num_heads=2, dropout=0.0)


@pytest.fixture
def tiny_train_config():
    return TrainConfig(objective="masked_item", batch_size=8, stopping="steps", steps=10, mask_prob=0.2, seed=3)


@pytest.fixture
def tiny_eval_config():
    return EvalConfig(num_negatives=5, cutoffs=[1, 5, 10], seed=11, batch_size=7)


def write_review_csv(path: Path) -> Path:
    """
    重建 134 条比较记录：表中 8 个数据集的计数，外加 38 个论文数不足 5 的数据集
    （16 个各 2 条、22 个各 1 条，共 36 胜 / 8 负 / 10 平）
    """
    lines = ["paper_id,dataset,outcome"]
    k = 0
    for dataset, counts in TABLE_ROWS.items():
        for outcome, count in zip(("bert4rec_wins", "sasrec_wins", "tie"), counts):
            for _ in range(count):
                lines.append(f"p{k % 40 + 1:02d},{dataset},{outcome}")
                k += 1
    n = 0
    for d in range(1, 39):
        for _ in range(2 if d <= 16 else 1):
            outcome = "bert4rec_wins" if n < 36 else ("sasrec_wins" if n < 44 else "tie")
            lines.append(f"p{k % 40 + 1:02d},Other-{d:02d},{outcome}")
            k += 1
            n += 1
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def review_csv(tmp_path):
    return write_review_csv(tmp_path / "review.csv")


def numeric_gradient(f, array: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """中心差分梯度（原地扰动 array）"""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = array[idx]
        array[idx] = original + eps
        plus = f()
        array[idx] = original - eps
        minus = f()
        array[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad
