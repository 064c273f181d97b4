"""
实验配置 - 扁平 key = value 文本格式与 pydantic 校验模型

配置文件示例:
    # 注释
    preset = ours
    dataset.path = data/ml-1m.txt
    model.max_seq_len = 100
    training.stopping = steps(10)
    evaluation.cutoffs = 1,5,10
    reported.sampled/recall@10 = 0.6970
    seed = 42

所有键在开始任何计算之前校验，未知键直接报错。
"""
import re
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.presets import get_preset, get_reported_baseline
from config.settings import settings
from core.errors import ConfigError

SECTIONS = ("dataset", "model", "training", "evaluation", "reported")
TOP_LEVEL_KEYS = ("name", "seed", "output_dir", "preset", "reported_preset")
NONE_TOKENS = {"", "none", "null"}

ModelKind = Literal["bert4rec", "sasrec", "albert4rec", "deberta4rec", "mf_bpr"]
BIDIRECTIONAL_KINDS = ("bert4rec", "albert4rec", "deberta4rec")
DEFAULT_OBJECTIVES = {
    "bert4rec": "masked_item",
    "albert4rec": "masked_item",
    "deberta4rec": "masked_item",
    "sasrec": "shifted_sequence",
    "mf_bpr": "bpr",
}
METRIC_KEY = re.compile(r"^(sampled|unsampled)/(recall@\d+|ndcg@\d+|mrr)$")
_STOPPING_CALL = re.compile(r"^\s*(steps|early_stopping|epochs)\s*\(\s*(\d+)\s*\)\s*$")


class DatasetConfig(BaseModel):
    """数据集与切分配置"""

    model_config = ConfigDict(extra="forbid")

    path: Optional[Path] = None
    format: Literal["pairs", "csv"] = "pairs"
    name: Optional[str] = None
    min_len: int = Field(5, ge=1)
    num_val_users: int = Field(2048, ge=1)
    split_seed: Optional[int] = None
    popularity_source: Literal["train", "full"] = "train"


class ModelConfig(BaseModel):
    """
    模型结构配置（默认值对应 BERT4Rec "Ours" 列）

    attention 由 kind 推导；albert4rec 强制共享层，embedding_size 默认 16
    """

    model_config = ConfigDict(extra="forbid")

    kind: ModelKind = "bert4rec"
    max_seq_len: int = Field(50, ge=2)
    hidden_size: int = Field(64, ge=1)
    embedding_size: Optional[int] = Field(None, ge=1)
    num_blocks: int = Field(2, ge=1)
    num_heads: int = Field(2, ge=1)
    mask_prob: float = Field(0.2, gt=0.0, lt=1.0)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    share_layers: bool = False
    latent_dim: int = Field(128, ge=1)
    attention: Optional[Literal["bidirectional", "causal"]] = None

    @model_validator(mode="after")
    def _derive_fields(self) -> "ModelConfig":
        derived = "causal" if self.kind == "sasrec" else "bidirectional"
        if self.attention is not None and self.attention != derived:
            raise ValueError(f"{self.kind} uses {derived} attention, got {self.attention}")
        self.attention = derived
        if self.kind == "albert4rec":
            self.share_layers = True
            if self.embedding_size is None:
                self.embedding_size = 16
        if self.embedding_size is None:
            self.embedding_size = self.hidden_size
        if self.kind != "mf_bpr" and self.hidden_size % self.num_heads != 0:
            raise ValueError(f"hidden_size {self.hidden_size} is not divisible by num_heads {self.num_heads}")
        return self

    @property
    def head_dim(self) -> int:
        return self.hidden_size // self.num_heads


class TrainConfig(BaseModel):
    """
    训练配置

    stopping 接受 "steps" / "early_stopping" / "epochs"，
    也接受带参数的写法 "steps(10)"、"early_stopping(200)"、"epochs(300)"
    """

    model_config = ConfigDict(extra="forbid")

    objective: Optional[Literal["masked_item", "shifted_sequence", "bpr"]] = None
    batch_size: int = Field(128, ge=1)
    stopping: Literal["steps", "early_stopping", "epochs"] = "early_stopping"
    steps: int = Field(400_000, ge=1)
    patience: int = Field(200, ge=1)
    epochs: int = Field(200, ge=1)
    max_epochs: Optional[int] = Field(None, ge=1)
    validate_every: int = Field(1, ge=1)
    mask_prob: Optional[float] = Field(None, gt=0.0, lt=1.0)
    last_item_mask_prob: float = Field(0.0, ge=0.0, le=1.0)
    lr: float = Field(1e-3, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    seed: Optional[int] = None
    negative_strategy: Literal["one_uniform_negative", "full_softmax"] = "one_uniform_negative"
    base_steps: int = Field(400_000, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _expand_stopping_call(cls, data):
        if isinstance(data, dict) and isinstance(data.get("stopping"), str):
            match = _STOPPING_CALL.match(data["stopping"])
            if match:
                mode, amount = match.groups()
                data = dict(data)
                data["stopping"] = mode
                data[{"steps": "steps", "early_stopping": "patience", "epochs": "epochs"}[mode]] = amount
        return data

    def stopping_label(self) -> str:
        amount = {"steps": self.steps, "early_stopping": self.patience, "epochs": self.epochs}[self.stopping]
        return f"{self.stopping}({amount})"


class EvalConfig(BaseModel):
    """评估配置"""

    model_config = ConfigDict(extra="forbid")

    mode: Literal["sampled", "unsampled", "both"] = "both"
    cutoffs: List[int] = Field(default_factory=lambda: [1, 5, 10])
    num_negatives: int = Field(100, ge=1)
    exclude_history: bool = True
    seed: Optional[int] = None
    batch_size: int = Field(256, ge=1)

    @field_validator("cutoffs", mode="before")
    @classmethod
    def _split_cutoffs(cls, value):
        if isinstance(value, str):
            value = [part for part in re.split(r"[,\s]+", value.strip()) if part]
        return value

    @field_validator("cutoffs")
    @classmethod
    def _check_cutoffs(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one cutoff is required")
        if any(k <= 0 for k in value):
            raise ValueError(f"cutoffs must be positive, got {value}")
        return sorted(set(value))

    @property
    def modes(self) -> List[str]:
        return ["sampled", "unsampled"] if self.mode == "both" else [self.mode]


class ExperimentConfig(BaseModel):
    """
    完整实验配置；构造完成后所有种子与推导字段都已填充
    """

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    seed: int = Field(default_factory=lambda: settings.default_seed)
    output_dir: Path = Field(default_factory=lambda: settings.output_dir)
    preset: Optional[str] = None
    reported_preset: Optional[str] = None
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    reported: Dict[str, float] = Field(default_factory=dict)

    @field_validator("reported")
    @classmethod
    def _check_reported(cls, value: Dict[str, float]) -> Dict[str, float]:
        for metric, number in value.items():
            if not METRIC_KEY.match(metric):
                raise ValueError(f"unknown reported metric {metric!r} (expected e.g. sampled/recall@10)")
            if number <= 0:
                raise ValueError(f"reported value for {metric} must be positive, got {number}")
        return value

    @model_validator(mode="after")
    def _fill_derived(self) -> "ExperimentConfig":
        expected = DEFAULT_OBJECTIVES[self.model.kind]
        if self.training.objective is None:
            self.training.objective = expected
        elif self.training.objective != expected:
            raise ValueError(f"{self.model.kind} trains with {expected}, got objective {self.training.objective}")
        if self.training.mask_prob is None:
            self.training.mask_prob = self.model.mask_prob
        if self.training.seed is None:
            self.training.seed = self.seed
        if self.evaluation.seed is None:
            self.evaluation.seed = self.seed
        if self.dataset.split_seed is None:
            self.dataset.split_seed = self.seed
        return self


# ==================== key = value 解析 ====================
def parse_key_values(text: str, source: str = "<config>") -> Dict[str, str]:
    """
    解析扁平 key = value 文本，# 之后为注释

    Raises:
        ConfigError: 行格式错误或键重复
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source} line {lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source} line {lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def parse_overrides(overrides: Iterable[str]) -> Dict[str, str]:
    """解析命令行 --set key=value 列表"""
    values: Dict[str, str] = {}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        values[key] = value
    return values


def build_experiment_config(values: Dict[str, str], base_dir: Optional[Path] = None) -> ExperimentConfig:
    """
    由扁平键值构造并校验实验配置

    处理顺序: 预设 -> 文件中的键 -> 报告基线预设（仅填充未显式给出的指标）

    Args:
        values: 扁平键值
        base_dir: 相对数据路径的基准目录（通常是配置文件所在目录）

    Returns:
        ExperimentConfig: 校验后的配置

    Raises:
        ConfigError: 未知键、未知预设或取值非法
    """
    merged: Dict[str, str] = {}
    preset = values.get("preset")
    if preset and preset.lower() not in NONE_TOKENS:
        try:
            merged.update(get_preset(preset))
        except KeyError as e:
            raise ConfigError(str(e.args[0])) from e
    merged.update(values)

    top: Dict[str, object] = {}
    nested: Dict[str, Dict[str, object]] = {section: {} for section in SECTIONS}
    for key, value in merged.items():
        converted = None if value.strip().lower() in NONE_TOKENS else value
        if "." in key and key.split(".", 1)[0] in SECTIONS:
            section, field = key.split(".", 1)
            if converted is not None:
                nested[section][field] = converted
        elif key in TOP_LEVEL_KEYS:
            if converted is not None:
                top[key] = converted
        else:
            raise ConfigError(f"unknown config key {key!r}")

    reported_preset = top.get("reported_preset")
    if reported_preset:
        try:
            baseline = get_reported_baseline(str(reported_preset))
        except KeyError as e:
            raise ConfigError(str(e.args[0])) from e
        for metric, number in baseline.items():
            nested["reported"].setdefault(metric, number)

    dataset_path = nested["dataset"].get("path")
    if dataset_path is not None and base_dir is not None and not Path(str(dataset_path)).is_absolute():
        nested["dataset"]["path"] = (Path(base_dir) / str(dataset_path)).resolve()

    try:
        return ExperimentConfig(**top, **nested)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid experiment config: {problems}") from e


def load_experiment_config(path: Union[str, Path], overrides: Optional[Iterable[str]] = None) -> ExperimentConfig:
    """
    读取配置文件并应用 --set 覆盖

    Raises:
        ConfigError: 文件不存在或内容非法
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError(f"config file {path} is not valid UTF-8: {e.reason}") from e
    values = parse_key_values(text, source=str(path))
    values.update(parse_overrides(overrides or ()))
    return build_experiment_config(values, base_dir=path.parent)


# ==================== 写出有效配置 ====================
def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def flatten_experiment_config(cfg: ExperimentConfig) -> Dict[str, str]:
    """展开为扁平键值（推导字段已填充，None 省略）"""
    flat: Dict[str, str] = {}
    for key in TOP_LEVEL_KEYS:
        value = getattr(cfg, key)
        if value is not None:
            flat[key] = _format_value(value)
    for section in ("dataset", "model", "training", "evaluation"):
        for field, value in getattr(cfg, section).model_dump().items():
            if value is not None:
                flat[f"{section}.{field}"] = _format_value(value)
    for metric, number in cfg.reported.items():
        flat[f"reported.{metric}"] = _format_value(number)
    return flat


def dump_experiment_config(cfg: ExperimentConfig, path: Union[str, Path]) -> Path:
    """
    写出有效配置，重新加载后得到相同的 ExperimentConfig
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# effective config for {cfg.name}"]
    lines += [f"{key} = {value}" for key, value in flatten_experiment_config(cfg).items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
