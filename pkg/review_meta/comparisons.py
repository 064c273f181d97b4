"""
文献比较结果统计 - BERT4Rec vs SASRec 的胜/负/平计数

输入 CSV 表头: paper_id,dataset,outcome
outcome 取值: bert4rec_wins | sasrec_wins | tie
"""
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Union

import pandas as pd

from core.errors import ContractError, IntegrityError, ParseError
from core.logger import logger
from core.models import ComparisonRecord, OutcomeRow, OutcomeTable

OUTCOMES = ("bert4rec_wins", "sasrec_wins", "tie")
COLUMNS = ("paper_id", "dataset", "outcome")


def load_comparisons(path: Union[str, Path]) -> List[ComparisonRecord]:
    """
    读取并校验比较记录

    Raises:
        ParseError: 表头缺列、字段为空或 outcome 非法（带行号）
        IntegrityError: (paper_id, dataset) 重复
    """
    path = Path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path} is empty", line=1) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"{path} is not valid UTF-8: {e.reason}") from e

    missing = [col for col in COLUMNS if col not in df.columns]
    if missing:
        raise ParseError(f"header must be {','.join(COLUMNS)}; missing {missing}", line=1)

    records: List[ComparisonRecord] = []
    seen: Dict[tuple, int] = {}
    for index, row in enumerate(df[list(COLUMNS)].itertuples(index=False), start=2):
        paper_id, dataset, outcome = (str(value).strip() for value in row)
        if not paper_id or not dataset:
            raise ParseError("paper_id and dataset must not be empty", line=index)
        outcome = outcome.lower()
        if outcome not in OUTCOMES:
            raise ParseError(f"unknown outcome {outcome!r} (expected one of {', '.join(OUTCOMES)})", line=index)
        key = (paper_id, dataset)
        if key in seen:
            raise IntegrityError(
                f"duplicate comparison {paper_id!r} on {dataset!r} at line {index} (first seen at line {seen[key]})"
            )
        seen[key] = index
        records.append(ComparisonRecord(paper_id=paper_id, dataset=dataset, outcome=outcome))

    logger.info(f"Loaded {len(records)} comparison records from {path}")
    return records


def half_up_percent(count: int, total: int) -> int:
    """
    整数百分比，四舍五入（half-up）
    例如: 32/134 -> 24
    """
    return (200 * count + total) // (2 * total)


def _build_row(name: str, records: Sequence[ComparisonRecord]) -> OutcomeRow:
    counts = {outcome: 0 for outcome in OUTCOMES}
    papers: Dict[str, List[str]] = {outcome: [] for outcome in OUTCOMES}
    for record in records:
        counts[record.outcome] += 1
        papers[record.outcome].append(record.paper_id)
    total = len(records)
    return OutcomeRow(
        dataset=name,
        total=total,
        counts=counts,
        percentages={outcome: half_up_percent(count, total) for outcome, count in counts.items()},
        papers={outcome: sorted(ids) for outcome, ids in papers.items()},
    )


def aggregate_outcomes(records: Iterable[ComparisonRecord], min_papers: int = 5) -> OutcomeTable:
    """
    按数据集汇总

    只展示记录数 ≥ min_papers 的数据集（按总数降序、名称升序），
    Total 行覆盖全部记录（包括被过滤掉的数据集）

    Raises:
        ContractError: 没有任何记录
    """
    records = list(records)
    if not records:
        raise ContractError("cannot aggregate an empty comparison list")

    by_dataset: Dict[str, List[ComparisonRecord]] = defaultdict(list)
    for record in records:
        by_dataset[record.dataset].append(record)

    rows = [
        _build_row(dataset, items)
        for dataset, items in by_dataset.items()
        if len(items) >= min_papers
    ]
    rows.sort(key=lambda row: (-row.total, row.dataset))

    table = OutcomeTable(
        rows=rows,
        total=_build_row("Total", records),
        min_papers=min_papers,
        num_datasets=len(by_dataset),
        num_filtered_datasets=len(by_dataset) - len(rows),
        num_papers=len({record.paper_id for record in records}),
    )
    logger.info(
        f"Aggregated {len(records)} comparisons over {table.num_datasets} datasets "
        f"({len(rows)} shown with >= {min_papers} papers)"
    )
    return table


def derive_outcome(
    bert4rec_metrics: Union[Mapping[str, float], Sequence[float]],
    sasrec_metrics: Union[Mapping[str, float], Sequence[float]],
) -> str:
    """
    由两组指标推导比较结果：在所有指标上都更好才算胜，否则为平

    Raises:
        ContractError: 两组指标不对应或为空
    """
    if isinstance(bert4rec_metrics, Mapping) and isinstance(sasrec_metrics, Mapping):
        if set(bert4rec_metrics) != set(sasrec_metrics):
            raise ContractError("metric names differ between the two models")
        keys = sorted(bert4rec_metrics)
        bert = [bert4rec_metrics[k] for k in keys]
        sas = [sasrec_metrics[k] for k in keys]
    else:
        bert, sas = list(bert4rec_metrics), list(sasrec_metrics)
    if not bert or len(bert) != len(sas):
        raise ContractError("need the same non-empty list of metrics for both models")

    if all(b > s for b, s in zip(bert, sas)):
        return "bert4rec_wins"
    if all(s > b for b, s in zip(bert, sas)):
        return "sasrec_wins"
    return "tie"
