"""
序列推荐实验入口脚本

用法示例:
    python run_lab.py stats data/ml-1m.txt --min-len 5
    python run_lab.py run configs/toy_bert4rec.txt --set training.stopping="steps(10)"
    python run_lab.py sweep configs/toy_bert4rec.txt --multipliers 0.5 1 2 4
    python run_lab.py aggregate-review data/review_comparisons.csv
    python run_lab.py report outputs/
"""
import sys
from pathlib import Path

# 添加项目根目录到路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config.settings import settings  # noqa: E402
from core.logger import configure_file_logging  # noqa: E402
from cli.commands import main  # noqa: E402


if __name__ == "__main__":
    settings.ensure_directories()
    configure_file_logging()
    sys.exit(main())
