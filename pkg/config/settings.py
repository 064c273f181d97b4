"""
配置文件 - 统一管理进程级配置项（路径、日志、数值精度）
实验相关的配置见 config/experiment.py
"""
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# ==================== 项目路径配置 ====================
PROJECT_ROOT = Path(__file__).resolve().parent.parent

# 加载环境变量（.env 不存在时静默跳过）
load_dotenv(PROJECT_ROOT / ".env")


class Settings(BaseSettings):
    """应用配置，所有字段都可以通过 SEQREC_ 前缀的环境变量覆盖"""

    model_config = SettingsConfigDict(
        env_prefix="SEQREC_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",  # 忽略 .env 中未定义的字段
    )

    # 输出与日志目录
    output_dir: Path = PROJECT_ROOT / "output"
    logs_dir: Path = PROJECT_ROOT / "logs"

    # 日志配置
    log_level: str = "INFO"
    log_retention_days: int = 30

    # 64 位校验模式（梯度检查用），默认 32 位训练精度
    float64: bool = False

    # 未在实验配置中指定种子时使用
    default_seed: int = 0

    # 是否显示 tqdm 进度条
    progress_bars: bool = True

    def ensure_directories(self) -> None:
        """确保输出与日志目录存在"""
        for directory in (self.output_dir, self.logs_dir):
            directory.mkdir(parents=True, exist_ok=True)


# 创建全局配置实例
settings = Settings()
