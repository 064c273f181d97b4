"""
实验流程 - 加载 -> 预处理 -> 切分 -> 训练 -> 评估 -> 写出报告

运行目录（output_dir/<name>/）中的产物:
    effective_config.txt   有效配置（默认值已填充，可直接重新运行）
    train_log.csv          每个 epoch 的验证损失与累计耗时
    model.ckpt(.cfg)       参数检查点与配置副本
    eval_report.json       指标均值（按模式分组）与复现判定
    eval_table.csv         复现对比表格式的一行
    per_user_metrics.csv   每个用户的指标（用于配对检验）
    replication.csv        每个发表指标的复现判定
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

from config.experiment import ExperimentConfig, dump_experiment_config, load_experiment_config
from core.errors import ConfigError, DivergenceError, SeqRecError
from core.logger import logger
from core.models import EvalReport, InteractionDataset, PopularityTable, ReplicationVerdict, SplitDataset, TrainLog
from core.utils import sanitize_filename
from corpus import build_popularity_table, leave_one_out_split, load_interactions, preprocess_min_length
from data_io.local_store import (
    CHECKPOINT_CONFIG_FILE,
    CHECKPOINT_FILE,
    EFFECTIVE_CONFIG_FILE,
    EVAL_REPORT_FILE,
    EVAL_TABLE_FILE,
    PER_USER_FILE,
    REPLICATION_FILE,
    TRAIN_LOG_FILE,
    comparison_row,
    save_eval_report_json,
    save_per_user_csv,
    save_table_csv,
    save_train_log_csv,
    save_verdicts_csv,
)
from evaluation import evaluate_model, replication_verdicts
from models import build_model
from models.factory import Model
from tensor_engine.checkpoint import load_tensors, save_tensors
from training import train_model

# 退出码
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2


@dataclass
class PreparedData:
    """一次实验用到的数据（构造后只读）"""
    dataset: InteractionDataset
    split: SplitDataset
    popularity: PopularityTable


def run_directory(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output_dir) / sanitize_filename(cfg.name)


def prepare_data(cfg: ExperimentConfig) -> PreparedData:
    """
    步骤 1-3: 加载交互、过滤短序列、留一法切分并统计流行度

    Raises:
        ConfigError: 未配置数据路径
    """
    if cfg.dataset.path is None:
        raise ConfigError("dataset.path is required")
    logger.info(f"Step 1: loading {cfg.dataset.path} ({cfg.dataset.format})")
    dataset = load_interactions(cfg.dataset.path, cfg.dataset.format)
    logger.info(f"Step 2: dropping sequences shorter than {cfg.dataset.min_len}")
    dataset = preprocess_min_length(dataset, cfg.dataset.min_len)
    logger.info("Step 3: leave-one-out split")
    split = leave_one_out_split(dataset, cfg.dataset.num_val_users, cfg.dataset.split_seed)
    popularity = build_popularity_table(dataset, split, source=cfg.dataset.popularity_source)
    return PreparedData(dataset=dataset, split=split, popularity=popularity)


def new_model(cfg: ExperimentConfig, data: PreparedData) -> Model:
    return build_model(cfg.model, data.dataset.num_items, cfg.training.seed, users=list(data.split.train))


def save_checkpoint(model: Model, cfg: ExperimentConfig, run_dir: Path) -> Path:
    """参数检查点 + 同格式的配置副本（用于重新加载）"""
    path = save_tensors(run_dir / CHECKPOINT_FILE, model.state_dict())
    dump_experiment_config(cfg, run_dir / CHECKPOINT_CONFIG_FILE)
    return path


def load_checkpoint(cfg: ExperimentConfig, data: PreparedData, checkpoint: Union[str, Path]) -> Tuple[Model, ExperimentConfig]:
    """
    按检查点旁的配置副本重建模型结构并载入参数

    配置副本存在时使用其中的 model 部分（结构必须与参数一致）
    """
    checkpoint = Path(checkpoint)
    sidecar = checkpoint.with_name(checkpoint.name + ".cfg")
    if sidecar.exists():
        saved = load_experiment_config(sidecar)
        if saved.model != cfg.model:
            logger.info(f"Using model section from {sidecar}")
            cfg = cfg.model_copy(update={"model": saved.model})
    model = new_model(cfg, data)
    model.load_state_dict(load_tensors(checkpoint))
    model.eval()
    return model, cfg


def train_experiment(cfg: ExperimentConfig, data: PreparedData, run_dir: Optional[Path] = None) -> Tuple[Model, TrainLog]:
    """步骤 4: 训练并写出训练日志、检查点与有效配置"""
    run_dir = run_dir or run_directory(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    dump_experiment_config(cfg, run_dir / EFFECTIVE_CONFIG_FILE)

    logger.info(f"Step 4: training {cfg.model.kind} ({cfg.training.stopping_label()})")
    model = new_model(cfg, data)
    model, log = train_model(model, data.split, cfg.training)
    save_train_log_csv(log, run_dir / TRAIN_LOG_FILE)
    save_checkpoint(model, cfg, run_dir)
    return model, log


def evaluate_experiment(
    cfg: ExperimentConfig,
    model: Model,
    data: PreparedData,
    train_seconds: Optional[float] = None,
    run_dir: Optional[Path] = None,
) -> Tuple[EvalReport, List[ReplicationVerdict]]:
    """步骤 5: 评估并写出报告；复现未通过只记录，不视为失败"""
    run_dir = run_dir or run_directory(cfg)
    logger.info(f"Step 5: evaluating ({cfg.evaluation.mode}, {cfg.evaluation.num_negatives} negatives)")
    report = evaluate_model(model, data.split, data.popularity, cfg.evaluation)
    verdicts = replication_verdicts(report.means, cfg.reported) if cfg.reported else []

    save_eval_report_json(report, run_dir / EVAL_REPORT_FILE, train_seconds, verdicts, name=cfg.name)
    save_table_csv([comparison_row(cfg.name, report.means, train_seconds, cfg.reported)], run_dir / EVAL_TABLE_FILE)
    save_per_user_csv(report, run_dir / PER_USER_FILE)
    if verdicts:
        save_verdicts_csv(verdicts, run_dir / REPLICATION_FILE)
    return report, verdicts


def exit_status(error: BaseException) -> int:
    """异常 -> 退出码：配置错误 2，发散与 I/O 失败 1"""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG_ERROR
    return EXIT_FAILURE


def _guarded(action, description: str) -> int:
    try:
        action()
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR
    except DivergenceError as e:
        logger.error(f"{description} diverged: {e}")
        return EXIT_FAILURE
    except (OSError, SeqRecError) as e:
        logger.exception(f"{description} failed: {e}")
        return exit_status(e)
    return EXIT_OK


def run_experiment(config_path: Union[str, Path], overrides: Iterable[str] = ()) -> int:
    """
    完整实验：配置在任何计算之前校验

    Returns:
        int: 0 成功（包括复现未通过），1 发散或 I/O 失败，2 配置错误
    """
    try:
        cfg = load_experiment_config(config_path, overrides)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR

    def _run():
        run_dir = run_directory(cfg)
        data = prepare_data(cfg)
        model, log = train_experiment(cfg, data, run_dir)
        evaluate_experiment(cfg, model, data, log.total_seconds, run_dir)
        logger.info(f"Experiment {cfg.name} finished; outputs in {run_dir}")

    return _guarded(_run, f"Experiment {cfg.name}")


def train_only(config_path: Union[str, Path], overrides: Iterable[str] = ()) -> int:
    """train 子命令：只训练并保存检查点"""
    try:
        cfg = load_experiment_config(config_path, overrides)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR

    def _run():
        train_experiment(cfg, prepare_data(cfg))

    return _guarded(_run, f"Training {cfg.name}")


def evaluate_checkpoint(
    config_path: Union[str, Path],
    checkpoint: Union[str, Path],
    overrides: Iterable[str] = (),
) -> int:
    """evaluate 子命令：载入检查点并评估"""
    try:
        cfg = load_experiment_config(config_path, overrides)
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR

    def _run():
        data = prepare_data(cfg)
        model, effective = load_checkpoint(cfg, data, checkpoint)
        run_dir = run_directory(effective)
        run_dir.mkdir(parents=True, exist_ok=True)
        dump_experiment_config(effective, run_dir / EFFECTIVE_CONFIG_FILE)
        evaluate_experiment(effective, model, data, None, run_dir)

    return _guarded(_run, f"Evaluation of {checkpoint}")
