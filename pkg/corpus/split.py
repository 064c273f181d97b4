"""
留一法切分
"""
import numpy as np

from core.errors import SplitError
from core.logger import logger
from core.models import InteractionDataset, SplitDataset

MIN_SPLIT_LENGTH = 3


def leave_one_out_split(ds: InteractionDataset, num_val_users: int = 2048, seed: int = 0) -> SplitDataset:
    """
    最后一个物品作为测试；随机选出的 min(num_val_users, 用户数) 个用户再留出倒数第二个物品作为验证

    验证用户按种子无放回均匀抽样，同一种子得到相同的验证集合

    Args:
        ds: 预处理后的数据集
        num_val_users: 验证用户数
        seed: 抽样种子

    Returns:
        SplitDataset: 切分结果

    Raises:
        SplitError: 存在长度小于 3 的序列
    """
    for user, seq in ds.sequences.items():
        if len(seq) < MIN_SPLIT_LENGTH:
            raise SplitError(
                f"user {user!r} has {len(seq)} interactions; leave-one-out needs at least {MIN_SPLIT_LENGTH}",
                user=user,
            )

    users = list(ds.sequences)
    count = min(num_val_users, len(users))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(users), size=count, replace=False) if count else np.array([], dtype=np.int64)
    val_users = {users[i] for i in chosen}

    train, test, validation = {}, {}, {}
    for user, seq in ds.sequences.items():
        test[user] = seq[-1]
        if user in val_users:
            validation[user] = seq[-2]
            train[user] = list(seq[:-2])
        else:
            train[user] = list(seq[:-1])

    logger.info(f"Split {len(users)} users: {len(validation)} validation users (seed {seed})")
    return SplitDataset(
        train=train,
        test=test,
        validation=validation,
        val_user_seed=seed,
        num_items=ds.num_items,
    )
