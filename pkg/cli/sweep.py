"""
训练预算扫描 - 以 base_steps 的若干倍数训练同一配置，得到 时间-效果 前沿

默认按顺序执行（耗时可比）；parallel=True 时并行执行，且 timing_reliable 列为 false
"""
from concurrent.futures import ProcessPoolExecutor
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from tqdm import tqdm

from cli.experiment import evaluate_experiment, prepare_data, run_directory, train_experiment
from config.experiment import (
    ExperimentConfig,
    build_experiment_config,
    flatten_experiment_config,
    load_experiment_config,
)
from config.settings import settings
from core.errors import ConfigError
from core.logger import logger
from core.utils import format_relative_diff
from data_io.local_store import save_frontier_tsv

DEFAULT_MULTIPLIERS = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
FRONTIER_FILE = "frontier.tsv"


def budget_steps(multiplier: float, base_steps: int) -> int:
    """round(m × base)，四舍五入，至少 1 步"""
    steps = Decimal(repr(float(multiplier))) * base_steps
    return max(1, int(steps.quantize(Decimal(1), rounding=ROUND_HALF_UP)))


def _entry_config(cfg: ExperimentConfig, multiplier: float) -> ExperimentConfig:
    steps = budget_steps(multiplier, cfg.training.base_steps)
    training = cfg.training.model_copy(update={"stopping": "steps", "steps": steps})
    return cfg.model_copy(update={"name": f"{cfg.name}_x{multiplier:g}", "training": training})


def _frontier_row(
    multiplier: float,
    cfg: ExperimentConfig,
    means: Dict[str, float],
    wall_clock: float,
    verdicts,
    timing_reliable: bool,
) -> Dict:
    row: Dict = {"multiplier": multiplier, "steps": cfg.training.steps, "wall_clock_s": wall_clock}
    for metric, value in means.items():
        row[metric] = value
    for verdict in verdicts:
        row[f"{verdict.metric}_rel_diff"] = format_relative_diff(verdict.relative_diff)
    row["replicated"] = all(v.replicated for v in verdicts) if verdicts else ""
    row["timing_reliable"] = timing_reliable
    return row


def _run_entry(flat_config: Dict[str, str], multiplier: float, out_dir: str, timing_reliable: bool) -> Dict:
    """单个扫描点：训练 -> 评估（并行模式下在子进程中执行）"""
    cfg = build_experiment_config(flat_config)
    data = prepare_data(cfg)
    run_dir = Path(out_dir) / f"x{multiplier:g}"
    model, log = train_experiment(cfg, data, run_dir)
    report, verdicts = evaluate_experiment(cfg, model, data, log.total_seconds, run_dir)
    return _frontier_row(multiplier, cfg, report.means, log.total_seconds, verdicts, timing_reliable)


def sweep_training_budget(
    config_path: Union[str, Path],
    multipliers: Optional[Sequence[float]] = None,
    overrides: Iterable[str] = (),
    parallel: bool = False,
) -> Path:
    """
    对每个倍数 m 以 steps(round(m × base_steps)) 训练并评估，写出 frontier.tsv

    Args:
        config_path: 实验配置文件
        multipliers: 步数倍数，默认 {0.5,1,2,4,8,16,32}
        overrides: --set 覆盖
        parallel: 是否并行（并行时耗时不可比）

    Returns:
        Path: frontier.tsv 路径（行按倍数排序）

    Raises:
        ConfigError: 倍数列表为空、含非正数或有重复
    """
    cfg = load_experiment_config(config_path, overrides)
    if multipliers is None:
        multipliers = DEFAULT_MULTIPLIERS
    multipliers = sorted(float(m) for m in multipliers)
    if not multipliers:
        raise ConfigError("sweep needs at least one multiplier")
    if multipliers[0] <= 0:
        raise ConfigError(f"multipliers must be positive, got {multipliers[0]}")
    labels = [f"x{m:g}" for m in multipliers]
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise ConfigError(f"duplicate multipliers would share run directories: {duplicates}")

    out_dir = run_directory(cfg)
    entries = [(m, _entry_config(cfg, m)) for m in multipliers]
    logger.info(
        f"Sweeping {len(entries)} budgets for {cfg.name}: "
        + ", ".join(f"{m:g}x={entry.training.steps}" for m, entry in entries)
    )

    rows: List[Dict] = []
    if parallel:
        logger.warning("Parallel sweep: wall-clock columns are not comparable across rows")
        with ProcessPoolExecutor() as pool:
            futures = [
                pool.submit(_run_entry, flatten_experiment_config(entry), m, str(out_dir), False)
                for m, entry in entries
            ]
            for future in tqdm(futures, desc="Sweep", disable=not settings.progress_bars):
                rows.append(future.result())
    else:
        data = prepare_data(cfg)
        for m, entry in tqdm(entries, desc="Sweep", disable=not settings.progress_bars):
            run_dir = out_dir / f"x{m:g}"
            model, log = train_experiment(entry, data, run_dir)
            report, verdicts = evaluate_experiment(entry, model, data, log.total_seconds, run_dir)
            rows.append(_frontier_row(m, entry, report.means, log.total_seconds, verdicts, True))

    rows.sort(key=lambda row: row["multiplier"])
    return save_frontier_tsv(rows, out_dir / FRONTIER_FILE)
