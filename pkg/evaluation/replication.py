"""
复现判定 - 观测值与原始发表值的相对误差在 ±5% 以内即视为复现
"""
import math
from typing import Dict, List, Optional

from core.errors import ContractError
from core.logger import logger
from core.models import ReplicationVerdict
from core.utils import format_relative_diff

TOLERANCE = 0.05
# 吸收 0.05 边界上的浮点误差
_EPSILON = 1e-12


def replication_check(
    observed: float,
    reported: float,
    metric: Optional[str] = None,
    tolerance: float = TOLERANCE,
) -> ReplicationVerdict:
    """
    例如: 0.6975 vs 0.6970 -> +0.07%，复现成功；0.5215 vs 0.6970 -> −25.18%，未复现

    Raises:
        ContractError: reported 不是正数
    """
    if not math.isfinite(reported) or reported <= 0:
        raise ContractError(f"reported value must be positive, got {reported}")
    relative_diff = (observed - reported) / reported
    return ReplicationVerdict(
        observed=observed,
        reported=reported,
        relative_diff=relative_diff,
        replicated=abs(relative_diff) <= tolerance + _EPSILON,
        metric=metric,
    )


def replication_verdicts(means: Dict[str, float], reported: Dict[str, float]) -> List[ReplicationVerdict]:
    """对每个给出了发表值的指标做判定；评估中没有的指标跳过并告警"""
    verdicts = []
    for metric, value in reported.items():
        if metric not in means:
            logger.warning(f"Reported metric {metric} was not evaluated; skipping replication check")
            continue
        verdict = replication_check(means[metric], value, metric=metric)
        status = "replicated" if verdict.replicated else "NOT replicated"
        logger.info(
            f"{metric}: {verdict.observed:.4f} vs reported {value:.4f} "
            f"({format_relative_diff(verdict.relative_diff)}) {status}"
        )
        verdicts.append(verdict)
    return verdicts
