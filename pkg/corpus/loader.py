"""
交互数据加载 - 支持两种格式

pairs: 每行 "user item"（空白分隔），同一用户按时间顺序排列
csv:   表头 user,item,timestamp，按 (user, timestamp, 输入顺序) 排序后组成序列
"""
from pathlib import Path
from collections import Counter
from typing import Dict, Hashable, Iterable, List, Union

import pandas as pd

from core.errors import EmptyDatasetError, ParseError
from core.logger import logger
from core.models import Interaction, InteractionDataset

CSV_COLUMNS = ("user", "item", "timestamp")


def load_interactions(path: Union[str, Path], format: str = "pairs") -> InteractionDataset:
    """
    加载交互文件，内部物品ID按首次出现顺序分配为 1..V

    Args:
        path: 文件路径
        format: "pairs" | "csv"

    Returns:
        InteractionDataset: 数据集（连续重复的 (user, item) 原样保留）

    Raises:
        ParseError: 行格式错误（带行号）
        EmptyDatasetError: 文件中没有任何交互
    """
    path = Path(path)
    if format == "pairs":
        records = _to_interactions(_read_pairs(path))
    elif format == "csv":
        records = _to_interactions(_read_csv(path))
    else:
        raise ValueError(f"unknown interaction format {format!r} (expected 'pairs' or 'csv')")

    if not records:
        raise EmptyDatasetError(f"no interactions found in {path}")

    dataset = _build_dataset(records)
    logger.info(
        f"Loaded {dataset.num_interactions} interactions for {dataset.num_users} users "
        f"and {dataset.num_items} items from {path}"
    )
    return dataset


def _decode_line(raw: bytes, line_num: int) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid UTF-8 at byte {e.start}", line=line_num) from e


def _first_undecodable_line(path: Path) -> int:
    with open(path, "rb") as f:
        for line_num, raw in enumerate(f, start=1):
            try:
                raw.decode("utf-8")
            except UnicodeDecodeError:
                return line_num
    return 1


def _read_pairs(path: Path) -> List[tuple]:
    rows = []
    with open(path, "rb") as f:
        for line_num, raw in enumerate(f, start=1):
            line = _decode_line(raw, line_num)
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError(f"expected 'user item', got {line.rstrip()!r}", line=line_num)
            rows.append((parts[0], parts[1]))
    return rows


def _read_csv(path: Path) -> List[tuple]:
    try:
        df = pd.read_csv(path, dtype={"user": str, "item": str}, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        return []
    except pd.errors.ParserError as e:
        raise ParseError(f"malformed csv in {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise ParseError(f"invalid UTF-8 in {path}", line=_first_undecodable_line(path)) from e

    missing = [col for col in CSV_COLUMNS if col not in df.columns]
    if missing:
        raise ParseError(f"csv header must contain {','.join(CSV_COLUMNS)}; missing {missing}", line=1)
    if df.empty:
        return []

    # 数据行号 = 表头 1 行 + 下标 + 1
    df["_line"] = df.index + 2
    bad = df[list(CSV_COLUMNS)].isna().any(axis=1)
    if bad.any():
        raise ParseError("missing user, item or timestamp", line=int(df.loc[bad, "_line"].iloc[0]))
    df["timestamp"] = pd.to_numeric(df["timestamp"], errors="coerce")
    if df["timestamp"].isna().any():
        raise ParseError("timestamp is not numeric", line=int(df.loc[df["timestamp"].isna(), "_line"].iloc[0]))

    # 稳定排序：时间戳相同时保持输入顺序
    df = df.sort_values(["user", "timestamp", "_line"], kind="mergesort")
    return list(zip(df["user"], df["item"]))


def _to_interactions(rows: Iterable[tuple]) -> List[Interaction]:
    """(user, item) 行 -> 交互记录，position 为该用户内的时间顺序下标"""
    seen: Counter = Counter()
    records = []
    for user, item in rows:
        records.append(Interaction(user=user, item=item, position=seen[user]))
        seen[user] += 1
    return records


def _build_dataset(records: List[Interaction]) -> InteractionDataset:
    item_index: Dict[Hashable, int] = {}
    item_ids: List[Hashable] = []
    sequences: Dict[Hashable, List[int]] = {}
    for record in records:
        internal = item_index.get(record.item)
        if internal is None:
            item_ids.append(record.item)
            internal = len(item_ids)
            item_index[record.item] = internal
        sequences.setdefault(record.user, []).append(internal)
    return InteractionDataset(sequences=sequences, item_ids=item_ids, item_index=item_index)
