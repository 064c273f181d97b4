"""
合并多个运行的评估结果为一张对比表，并与最佳模型做配对显著性检验
"""
from pathlib import Path
from typing import Dict, List, Union

import numpy as np

from core.errors import MergeError
from core.logger import logger
from data_io.local_store import (
    EVAL_REPORT_FILE,
    PER_USER_FILE,
    TABLE_METRICS,
    flat_means,
    load_eval_report_json,
    load_per_user_csv,
    save_table_csv,
)
from evaluation.significance import paired_ttest_bonferroni

COMPARISON_FILE = "comparison.csv"
BEST_MARKER = "best"
SIGNIFICANT_MARKER = "†"


def discover_runs(run_dir: Path) -> List[Path]:
    """目录本身是一个运行，或其直接子目录中的运行（按名称排序）"""
    run_dir = Path(run_dir)
    if (run_dir / EVAL_REPORT_FILE).exists():
        return [run_dir]
    if not run_dir.is_dir():
        return []
    return sorted(child for child in run_dir.iterdir() if (child / EVAL_REPORT_FILE).exists())


def _load_run(path: Path) -> Dict:
    summary = load_eval_report_json(path / EVAL_REPORT_FILE)
    users, per_user = load_per_user_csv(path / PER_USER_FILE)
    return {
        "name": summary.get("name") or path.name,
        "means": flat_means(summary),
        "train_seconds": summary.get("train_seconds"),
        "users": users,
        "per_user": per_user,
    }


def _align(runs: List[Dict]) -> None:
    """按第一个运行的用户顺序重排每用户向量；用户集合不同时报错"""
    reference = runs[0]["users"]
    for run in runs[1:]:
        if set(run["users"]) != set(reference) or len(run["users"]) != len(reference):
            raise MergeError(f"run {run['name']!r} was evaluated on a different user set than {runs[0]['name']!r}")
        if run["users"] != reference:
            position = {user: i for i, user in enumerate(run["users"])}
            order = np.array([position[user] for user in reference])
            run["per_user"] = {key: values[order] for key, values in run["per_user"].items()}
            run["users"] = list(reference)


def emit_reports(run_dir: Union[str, Path]) -> Path:
    """
    合并评估结果，写出 comparison.csv

    每个指标列：值、标记列（best / † / 空）、Bonferroni 校正后的 p 值列；
    检验数 = 非最佳模型数；只有一个运行时不加标记

    Raises:
        MergeError: 没有找到运行，或运行的测试用户集合不同
    """
    run_dir = Path(run_dir)
    paths = discover_runs(run_dir)
    if not paths:
        raise MergeError(f"no evaluated runs under {run_dir}")
    runs = [_load_run(path) for path in paths]
    _align(runs)

    shared = set.intersection(*(set(run["per_user"]) for run in runs))
    metrics = [m for m in TABLE_METRICS if m in shared] + sorted(shared - set(TABLE_METRICS))

    rows = [{"model": run["name"]} for run in runs]
    for metric in metrics:
        column = metric.replace("/", "_")
        values = [float(run["per_user"][metric].mean()) for run in runs]
        for row, value in zip(rows, values):
            row[column] = value
        if len(runs) == 1:
            continue

        best = int(np.argmax(values))
        num_tests = len(runs) - 1
        for index, (row, run) in enumerate(zip(rows, runs)):
            if index == best:
                row[f"{column}_marker"] = BEST_MARKER
                row[f"{column}_p"] = np.nan
                continue
            result = paired_ttest_bonferroni(runs[best]["per_user"][metric], run["per_user"][metric], num_tests)
            row[f"{column}_marker"] = SIGNIFICANT_MARKER if result.significant else ""
            row[f"{column}_p"] = result.corrected_p_value

    for row, run in zip(rows, runs):
        row["train_seconds"] = np.nan if run["train_seconds"] is None else run["train_seconds"]

    logger.info(f"Merged {len(runs)} runs over {len(runs[0]['users'])} users")
    return save_table_csv(rows, run_dir / COMPARISON_FILE)
