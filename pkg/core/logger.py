"""
日志配置
使用 loguru 提供日志功能
"""
import sys
from pathlib import Path

from loguru import logger

from config.settings import settings

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"

# 移除默认的处理器
logger.remove()

# 添加控制台输出（带颜色）
logger.add(sys.stderr, format=CONSOLE_FORMAT, level=settings.log_level, colorize=True)

_file_sinks_configured = False


def configure_file_logging(log_dir: Path = None) -> None:
    """
    添加文件输出（常规日志 + 单独的错误日志），重复调用无副作用

    Args:
        log_dir: 日志目录，默认使用 settings.logs_dir
    """
    global _file_sinks_configured
    if _file_sinks_configured:
        return

    log_dir = Path(log_dir or settings.logs_dir)
    log_dir.mkdir(parents=True, exist_ok=True)

    logger.add(
        log_dir / "seqrec_{time:YYYY-MM-DD}.log",
        format=FILE_FORMAT,
        level="DEBUG",
        rotation="00:00",  # 每天轮换
        retention=f"{settings.log_retention_days} days",
        compression="zip",
        encoding="utf-8",
    )
    logger.add(
        log_dir / "errors_{time:YYYY-MM-DD}.log",
        format=FILE_FORMAT,
        level="ERROR",
        rotation="00:00",
        retention="90 days",  # 错误日志保留更久
        compression="zip",
        encoding="utf-8",
    )
    _file_sinks_configured = True


__all__ = ["logger", "configure_file_logging"]
