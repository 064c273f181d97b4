"""
本地存储模块 - 实验产物的读写（CSV / TSV / JSON，全部 UTF-8，数值保留完整精度）
"""
import json
from pathlib import Path
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.logger import logger
from core.models import DatasetStats, EvalReport, OutcomeTable, ReplicationVerdict, TrainLog
from core.utils import format_relative_diff, get_current_timestamp

# ==================== 运行目录中的文件名 ====================
EFFECTIVE_CONFIG_FILE = "effective_config.txt"
TRAIN_LOG_FILE = "train_log.csv"
EVAL_REPORT_FILE = "eval_report.json"
EVAL_TABLE_FILE = "eval_table.csv"
PER_USER_FILE = "per_user_metrics.csv"
REPLICATION_FILE = "replication.csv"
CHECKPOINT_FILE = "model.ckpt"
CHECKPOINT_CONFIG_FILE = "model.ckpt.cfg"

# 与复现对比表相同的列顺序
TABLE_METRICS = ("sampled/recall@10", "sampled/ndcg@10", "unsampled/recall@10", "unsampled/ndcg@10")


def _prepare(path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _column(metric: str) -> str:
    """sampled/recall@10 -> sampled_recall@10"""
    return metric.replace("/", "_")


def save_stats_csv(stats: DatasetStats, path: Path) -> Path:
    """单行统计 CSV: users, items, interactions, avg_len, sparsity"""
    path = _prepare(path)
    pd.DataFrame([stats.as_row()]).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Saved dataset stats to {path}")
    return path


def save_train_log_csv(log: TrainLog, path: Path) -> Path:
    """训练日志 CSV: epoch, val_loss, cum_seconds, steps"""
    path = _prepare(path)
    df = pd.DataFrame(
        {
            "epoch": log.epochs,
            "val_loss": log.val_losses,
            "cum_seconds": log.cum_seconds,
            "steps": log.steps_at_epoch,
        }
    )
    df.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Saved train log ({len(df)} epochs) to {path}")
    return path


def load_train_log_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)


def report_summary(
    report: EvalReport,
    train_seconds: Optional[float] = None,
    verdicts: Sequence[ReplicationVerdict] = (),
    name: Optional[str] = None,
) -> Dict:
    """评估报告的 JSON 结构：means 按 模式 -> 指标 分组"""
    grouped: Dict[str, Dict[str, float]] = {}
    for key, value in report.means.items():
        mode, metric = key.split("/", 1)
        grouped.setdefault(mode, {})[metric] = value
    return {
        "name": name,
        "created_at": get_current_timestamp(),
        "num_users": report.num_users,
        "modes": report.modes,
        "cutoffs": report.cutoffs,
        "means": grouped,
        "eval_seconds": report.eval_seconds,
        "train_seconds": train_seconds,
        "replication": [
            {
                "metric": v.metric,
                "observed": v.observed,
                "reported": v.reported,
                "relative_diff": v.relative_diff,
                "relative_diff_display": format_relative_diff(v.relative_diff),
                "replicated": v.replicated,
            }
            for v in verdicts
        ],
    }


def save_eval_report_json(
    report: EvalReport,
    path: Path,
    train_seconds: Optional[float] = None,
    verdicts: Sequence[ReplicationVerdict] = (),
    name: Optional[str] = None,
) -> Path:
    path = _prepare(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report_summary(report, train_seconds, verdicts, name), f, ensure_ascii=False, indent=2)
    logger.info(f"Saved eval report to {path}")
    return path


def load_eval_report_json(path: Path) -> Dict:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def flat_means(summary: Dict) -> Dict[str, float]:
    """JSON 中分组的 means 还原为 "mode/metric" 扁平键"""
    return {
        f"{mode}/{metric}": value
        for mode, metrics in summary.get("means", {}).items()
        for metric, value in metrics.items()
    }


def comparison_row(
    name: str,
    means: Dict[str, float],
    train_seconds: Optional[float],
    reported: Optional[Dict[str, float]] = None,
) -> Dict:
    """对比表的一行；给出发表值时附加相对差列"""
    row: Dict = {"model": name}
    for metric in TABLE_METRICS:
        row[_column(metric)] = means.get(metric, np.nan)
    row["train_seconds"] = np.nan if train_seconds is None else train_seconds
    for metric, value in (reported or {}).items():
        if metric in means:
            row[f"{_column(metric)}_rel_diff"] = format_relative_diff((means[metric] - value) / value)
    return row


def save_table_csv(rows: List[Dict], path: Path) -> Path:
    path = _prepare(path)
    pd.DataFrame(rows).to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Saved comparison table ({len(rows)} rows) to {path}")
    return path


def save_per_user_csv(report: EvalReport, path: Path) -> Path:
    """每个用户一行、每个指标一列；用于跨运行的配对检验"""
    path = _prepare(path)
    df = pd.DataFrame({"user": [str(u) for u in report.users]})
    for key, values in report.per_user.items():
        df[key] = values
    df.to_csv(path, index=False, float_format="%.17g")
    return path


def load_per_user_csv(path: Path) -> Tuple[List[Hashable], Dict[str, np.ndarray]]:
    df = pd.read_csv(path, dtype={"user": str})
    users = df["user"].tolist()
    return users, {col: df[col].to_numpy(dtype=np.float64) for col in df.columns if col != "user"}


def save_verdicts_csv(verdicts: Sequence[ReplicationVerdict], path: Path) -> Path:
    path = _prepare(path)
    pd.DataFrame(
        [
            {
                "metric": v.metric,
                "observed": v.observed,
                "reported": v.reported,
                "relative_diff": v.relative_diff,
                "relative_diff_display": format_relative_diff(v.relative_diff),
                "replicated": v.replicated,
            }
            for v in verdicts
        ],
        columns=["metric", "observed", "reported", "relative_diff", "relative_diff_display", "replicated"],
    ).to_csv(path, index=False, float_format="%.17g")
    return path


def save_frontier_tsv(rows: List[Dict], path: Path) -> Path:
    """训练预算扫描结果：multiplier, steps, wall_clock_s, 各指标, 复现标记"""
    path = _prepare(path)
    pd.DataFrame(rows).to_csv(path, sep="\t", index=False, float_format="%.17g")
    logger.info(f"Saved frontier ({len(rows)} rows) to {path}")
    return path


# ==================== 文献比较结果表 ====================
_OUTCOME_LABELS = {"bert4rec_wins": "BERT4Rec wins", "sasrec_wins": "SASRec wins", "tie": "Ties"}


def save_outcome_table(table: OutcomeTable, csv_path: Path, json_path: Optional[Path] = None) -> Path:
    """
    CSV 列与结果表一致：dataset, total, 三种结果 "n (p%)", 三种结果的论文列表；
    JSON 另外给出精确分数
    """
    csv_path = _prepare(csv_path)
    rows = []
    for row in table.rows + [table.total]:
        record = {"dataset": row.dataset, "total": row.total}
        for outcome, label in _OUTCOME_LABELS.items():
            record[label] = f"{row.counts[outcome]} ({row.percentages[outcome]}%)"
        for outcome, label in _OUTCOME_LABELS.items():
            record[f"{label} papers"] = ";".join(row.papers[outcome]) if row.dataset != "Total" else ""
        rows.append(record)
    pd.DataFrame(rows).to_csv(csv_path, index=False)

    if json_path is not None:
        json_path = _prepare(json_path)
        payload = {
            "min_papers": table.min_papers,
            "num_datasets": table.num_datasets,
            "num_filtered_datasets": table.num_filtered_datasets,
            "num_papers": table.num_papers,
            "comparisons_per_paper": table.total.total / table.num_papers,
            "rows": [
                {
                    "dataset": row.dataset,
                    "total": row.total,
                    "counts": row.counts,
                    "percentages": row.percentages,
                    "fractions": {k: v / row.total for k, v in row.counts.items()},
                    "papers": row.papers,
                }
                for row in table.rows + [table.total]
            ],
        }
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2)
    logger.info(f"Saved outcome table to {csv_path}")
    return csv_path
