"""
实验预设 - 各 BERT4Rec 实现的默认参数，以及原始发表的基线指标

预设是扁平的 key -> value 字典（键与配置文件相同），
只提供默认值，配置文件中显式写出的键总是覆盖预设。
"""
from typing import Dict

# ==================== 模型/训练预设 ====================
PRESETS: Dict[str, Dict[str, str]] = {
    # 原始实现：固定 400,000 步
    "original": {
        "model.kind": "bert4rec",
        "model.max_seq_len": "200",
        "model.mask_prob": "0.2",
        "model.hidden_size": "64",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "steps",
        "training.steps": "400000",
    },
    "recbole": {
        "model.kind": "bert4rec",
        "model.max_seq_len": "50",
        "model.mask_prob": "0.2",
        "model.hidden_size": "64",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "epochs",
        "training.epochs": "300",
    },
    "bert4rec_vae": {
        "model.kind": "bert4rec",
        "model.max_seq_len": "100",
        "model.mask_prob": "0.15",
        "model.hidden_size": "256",
        "model.num_blocks": "2",
        "model.num_heads": "4",
        "training.stopping": "epochs",
        "training.epochs": "200",
    },
    "ours": {
        "model.kind": "bert4rec",
        "model.max_seq_len": "50",
        "model.mask_prob": "0.2",
        "model.hidden_size": "64",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "early_stopping",
        "training.patience": "200",
    },
    "ours_longer_seq": {
        "model.kind": "bert4rec",
        "model.max_seq_len": "100",
        "model.mask_prob": "0.2",
        "model.hidden_size": "64",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "early_stopping",
        "training.patience": "200",
    },
    # SASRec 原始配置：隐层 50，2 个头（每头 25 维）
    "sasrec": {
        "model.kind": "sasrec",
        "model.max_seq_len": "50",
        "model.hidden_size": "50",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "early_stopping",
        "training.patience": "200",
        "training.negative_strategy": "one_uniform_negative",
    },
    "mf_bpr": {
        "model.kind": "mf_bpr",
        "model.latent_dim": "128",
        "training.stopping": "early_stopping",
        "training.patience": "200",
    },
    "albert4rec": {
        "model.kind": "albert4rec",
        "model.max_seq_len": "200",
        "model.mask_prob": "0.2",
        "model.hidden_size": "64",
        "model.embedding_size": "16",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "early_stopping",
        "training.patience": "200",
    },
    "deberta4rec": {
        "model.kind": "deberta4rec",
        "model.max_seq_len": "200",
        "model.mask_prob": "0.2",
        "model.hidden_size": "64",
        "model.num_blocks": "2",
        "model.num_heads": "2",
        "training.stopping": "early_stopping",
        "training.patience": "200",
    },
}

# ==================== 原始发表的采样指标 ====================
REPORTED_BASELINES: Dict[str, Dict[str, float]] = {
    "ml-1m": {"sampled/recall@10": 0.6970, "sampled/ndcg@10": 0.4818},
    "steam": {"sampled/recall@10": 0.4013, "sampled/ndcg@10": 0.2261},
    "beauty": {"sampled/recall@10": 0.3025, "sampled/ndcg@10": 0.1862},
    "ml-20m": {"sampled/recall@10": 0.7473, "sampled/ndcg@10": 0.5340},
}


def get_preset(name: str) -> Dict[str, str]:
    """
    获取预设（返回副本）

    Raises:
        KeyError: 未知预设名
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return dict(PRESETS[name])


def get_reported_baseline(name: str) -> Dict[str, float]:
    key = name.lower()
    if key not in REPORTED_BASELINES:
        raise KeyError(f"unknown reported baseline {name!r}; available: {', '.join(sorted(REPORTED_BASELINES))}")
    return dict(REPORTED_BASELINES[key])
