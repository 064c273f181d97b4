"""
通用工具函数
"""
import hashlib
import re
from datetime import datetime
from typing import Hashable

import numpy as np


def stable_hash(value: Hashable) -> int:
    """
    计算与进程无关的稳定哈希（Python 内置 hash 对字符串有随机盐）
    例如: "u1" -> 固定的 63 位整数
    """
    digest = hashlib.md5(str(value).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def user_rng(seed: int, user: Hashable) -> np.random.Generator:
    """
    为 (全局种子, 用户) 生成独立的随机数生成器，结果与调度顺序无关
    """
    return np.random.default_rng([int(seed), stable_hash(user)])


def sanitize_filename(filename: str) -> str:
    """
    清理文件名，移除不安全字符
    """
    return re.sub(r'[<>:"/\\|?*@\s]', "_", filename)


def get_current_timestamp() -> str:
    """
    获取当前时间戳字符串
    """
    return datetime.now().isoformat(timespec="seconds")


def format_relative_diff(relative_diff: float) -> str:
    """
    相对差值格式化为带符号的百分比
    例如: 0.000717 -> "+0.07%"
    """
    return f"{relative_diff * 100:+.2f}%"
