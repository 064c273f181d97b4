"""
命令行入口：
    stats <data>                  数据集统计（可选先做最短长度过滤）
    train <config>                只训练，保存检查点
    evaluate <config> <ckpt>      载入检查点并评估
    run <config>                  训练 + 评估 + 复现判定
    sweep <config>                训练预算扫描（frontier.tsv）
    aggregate-review <csv>        文献比较结果统计
    report <dir>                  合并多个运行的对比表
"""
import argparse
from pathlib import Path
from typing import List, Optional

from cli.experiment import (
    EXIT_CONFIG_ERROR,
    EXIT_FAILURE,
    EXIT_OK,
    evaluate_checkpoint,
    run_experiment,
    train_only,
)
from cli.reports import emit_reports
from cli.sweep import sweep_training_budget
from core.errors import ConfigError, MergeError, SeqRecError
from core.logger import logger
from corpus import compute_stats, load_interactions, preprocess_min_length
from data_io.local_store import save_outcome_table, save_stats_csv
from review_meta import aggregate_outcomes, load_comparisons


def _add_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="覆盖配置项，可重复使用 (例如: --set model.max_seq_len=100)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="序列推荐实验工具：训练、评估、复现检查与文献结果统计")
    sub = parser.add_subparsers(dest="command", required=True)

    stats = sub.add_parser("stats", help="打印并保存数据集统计")
    stats.add_argument("data", type=str, help="交互数据文件")
    stats.add_argument("--format", choices=["pairs", "csv"], default="pairs", help="数据格式 (默认: pairs)")
    stats.add_argument("--min-len", type=int, default=None, help="先过滤长度小于该值的序列 (默认: 不过滤)")
    stats.add_argument("--out", type=str, default=None, help="统计 CSV 输出路径 (默认: 只打印)")

    train = sub.add_parser("train", help="按配置训练并保存检查点")
    train.add_argument("config", type=str, help="实验配置文件")
    _add_overrides(train)

    evaluate = sub.add_parser("evaluate", help="评估已保存的检查点")
    evaluate.add_argument("config", type=str, help="实验配置文件")
    evaluate.add_argument("checkpoint", type=str, help="检查点文件")
    _add_overrides(evaluate)

    run = sub.add_parser("run", help="训练并评估，写出全部报告")
    run.add_argument("config", type=str, help="实验配置文件")
    _add_overrides(run)

    sweep = sub.add_parser("sweep", help="训练预算扫描")
    sweep.add_argument("config", type=str, help="实验配置文件")
    sweep.add_argument(
        "--multipliers",
        type=float,
        nargs="+",
        default=None,
        help="base_steps 的倍数 (默认: 0.5 1 2 4 8 16 32)",
    )
    sweep.add_argument("--parallel", action="store_true", help="并行运行（耗时列不可比）")
    _add_overrides(sweep)

    review = sub.add_parser("aggregate-review", help="统计文献中的比较结果")
    review.add_argument("csv", type=str, help="比较记录 CSV (paper_id,dataset,outcome)")
    review.add_argument("--min-papers", type=int, default=5, help="展示数据集所需的最少论文数 (默认: 5)")
    review.add_argument("--out", type=str, default=None, help="结果表 CSV 输出路径 (默认: <csv>_table.csv)")

    report = sub.add_parser("report", help="合并多个运行的评估结果")
    report.add_argument("dir", type=str, help="运行目录或其上级目录")
    return parser


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = load_interactions(args.data, args.format)
    if args.min_len is not None:
        dataset = preprocess_min_length(dataset, args.min_len)
    stats = compute_stats(dataset)
    print(
        f"users={stats.users} items={stats.items} interactions={stats.interactions} "
        f"avg_len={stats.avg_len:.2f} sparsity={stats.sparsity:.4%}"
    )
    if args.out:
        save_stats_csv(stats, Path(args.out))
    return EXIT_OK


def cmd_aggregate_review(args: argparse.Namespace) -> int:
    table = aggregate_outcomes(load_comparisons(args.csv), min_papers=args.min_papers)
    source = Path(args.csv)
    csv_path = Path(args.out) if args.out else source.with_name(f"{source.stem}_table.csv")
    save_outcome_table(table, csv_path, csv_path.with_suffix(".json"))
    for row in table.rows + [table.total]:
        counts = " / ".join(f"{row.counts[o]} ({row.percentages[o]}%)" for o in row.counts)
        print(f"{row.dataset:<12} {row.total:>4}  {counts}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = getattr(args, "overrides", [])

    if args.command == "run":
        return run_experiment(args.config, overrides)
    if args.command == "train":
        return train_only(args.config, overrides)
    if args.command == "evaluate":
        return evaluate_checkpoint(args.config, args.checkpoint, overrides)

    try:
        if args.command == "stats":
            return cmd_stats(args)
        if args.command == "aggregate-review":
            return cmd_aggregate_review(args)
        if args.command == "sweep":
            path = sweep_training_budget(args.config, args.multipliers, overrides, args.parallel)
            print(f"frontier: {path}")
            return EXIT_OK
        if args.command == "report":
            print(f"comparison: {emit_reports(args.dir)}")
            return EXIT_OK
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR
    except MergeError as e:
        logger.error(f"Cannot merge runs: {e}")
        return EXIT_FAILURE
    except (OSError, SeqRecError) as e:
        logger.exception(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    return EXIT_FAILURE
