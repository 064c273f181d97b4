"""
异常定义 - 全项目共用的错误类型

每个异常同时继承对应的内置异常（ValueError / RuntimeError），
调用方既可以精确捕获，也可以按内置类型统一处理。
"""
from typing import Optional


class SeqRecError(Exception):
    """所有项目异常的基类"""


class ParseError(SeqRecError, ValueError):
    """输入文件格式错误，line 为出错的行号（从1开始）"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(SeqRecError, ValueError):
    """数据集为空（空文件或过滤后无剩余序列）"""


class SplitError(SeqRecError, ValueError):
    """留一法切分失败，user 为序列过短的用户"""

    def __init__(self, message: str, user=None):
        self.user = user
        super().__init__(message)


class ShapeError(SeqRecError, ValueError):
    """张量形状不匹配"""


class DegenerateBatchError(SeqRecError, ValueError):
    """批次中没有任何参与损失计算的位置"""


class ContractError(SeqRecError, ValueError):
    """调用前置条件不满足"""


class ConfigError(SeqRecError, ValueError):
    """配置项非法或未知"""


class DivergenceError(SeqRecError, RuntimeError):
    """训练损失出现非有限值，step 为出错的步数"""

    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})")


class SamplingError(SeqRecError, ValueError):
    """可采样的负样本数量不足"""


class ItemIdError(SeqRecError, KeyError):
    """未知的物品ID"""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class IntegrityError(SeqRecError, ValueError):
    """数据完整性冲突（如重复记录）"""


class MergeError(SeqRecError, ValueError):
    """多个运行结果无法合并"""
