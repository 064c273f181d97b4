"""
显著性检验 - 配对 t 检验 + Bonferroni 校正
"""
from typing import Sequence

import numpy as np
from scipy.special import betainc

from core.errors import ContractError
from core.models import SignificanceResult

ALPHA = 0.05


def student_t_two_tailed_p(t: float, df: float) -> float:
    """
    双尾 p 值，用正则化不完全 beta 函数计算 Student-t 分布
    例如: t=2.776, df=4 -> 0.05
    """
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_ttest_bonferroni(
    a: Sequence[float],
    b: Sequence[float],
    num_tests: int,
    alpha: float = ALPHA,
) -> SignificanceResult:
    """
    同一批用户上两个指标向量的配对 t 检验

    差值方差为 0 时：均值差也为 0 则 p=1，否则 p=0

    Args:
        a, b: 每个用户的指标值（相同用户、相同顺序）
        num_tests: 同时进行的检验数（用于 Bonferroni 校正）
        alpha: 显著性水平

    Returns:
        SignificanceResult: corrected = min(1, p × num_tests)

    Raises:
        ContractError: 长度不一致、样本少于 2 或 num_tests < 1
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"paired vectors differ in length: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ContractError("paired t-test needs at least 2 users")
    if num_tests < 1:
        raise ContractError(f"num_tests must be at least 1, got {num_tests}")

    diff = a - b
    n = diff.size
    mean = diff.mean()
    sd = diff.std(ddof=1)
    if sd == 0.0:
        t_stat = 0.0 if mean == 0.0 else float(np.sign(mean) * np.inf)
        p_value = 1.0 if mean == 0.0 else 0.0
    else:
        t_stat = float(mean / (sd / np.sqrt(n)))
        p_value = student_t_two_tailed_p(t_stat, n - 1)

    corrected = min(1.0, p_value * num_tests)
    return SignificanceResult(
        p_value=p_value,
        corrected_p_value=corrected,
        num_tests=num_tests,
        significant=corrected < alpha,
        t_statistic=t_stat,
    )
