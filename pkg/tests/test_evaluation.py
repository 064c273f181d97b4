"""
评估测试 - 负采样、排序指标、显著性检验、复现判定
"""
import math

import numpy as np
import pytest

from config.experiment import EvalConfig
from conftest import cyclic_dataset
from core.errors import ContractError, SamplingError
from core.models import InteractionDataset
from corpus import build_popularity_table, leave_one_out_split
from evaluation import (
    evaluate_model,
    paired_ttest_bonferroni,
    pointwise_metrics,
    rank_of_positive,
    replication_check,
    replication_verdicts,
    sample_popularity_negatives,
)
from evaluation.metrics import metrics_from_ranks
from evaluation.significance import student_t_two_tailed_p
from models import build_model


def _popularity(sequences, num_items):
    ds = InteractionDataset(sequences=sequences, item_ids=[f"i{i}" for i in range(1, num_items + 1)])
    return build_popularity_table(ds, source="full")


class TestNegativeSampling:
    """流行度负采样测试"""

    def test_takes_every_eligible_item_when_forced(self):
        """测试可选物品恰好 n 个时全部入选，零流行度物品用于补足"""
        pop = _popularity({"u1": [1, 2, 3, 4, 5], "u2": [1, 8]}, num_items=8)
        negatives = sample_popularity_negatives(pop, 1, set(), 7, np.random.default_rng(0))
        assert sorted(negatives) == [2, 3, 4, 5, 6, 7, 8]

    def test_distinct_and_excludes_positive_and_history(self):
        """测试负样本互不相同，且不含正样本与历史物品"""
        pop = _popularity({f"u{u}": list(range(1, 31)) for u in range(3)}, num_items=30)
        negatives = sample_popularity_negatives(pop, 4, {1, 2, 3}, 20, np.random.default_rng(1))
        assert len(set(negatives)) == 20
        assert not {1, 2, 3, 4} & set(negatives)

    def test_popularity_weighted_frequency(self):
        """测试 {A:3, B:1} 时 A 被抽中的频率约为 0.75"""
        pop = _popularity({"u1": [1, 1, 2], "u2": [1, 3]}, num_items=3)
        rng = np.random.default_rng(2)
        draws = [sample_popularity_negatives(pop, 3, set(), 1, rng)[0] for _ in range(10_000)]
        assert np.mean(np.array(draws) == 1) == pytest.approx(0.75, abs=0.02)

    def test_same_rng_same_candidates(self):
        """测试同一种子得到相同的负样本"""
        pop = _popularity({f"u{u}": list(range(1, 31)) for u in range(3)}, num_items=30)
        a = sample_popularity_negatives(pop, 4, {1}, 10, np.random.default_rng(5))
        b = sample_popularity_negatives(pop, 4, {1}, 10, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_not_enough_items(self):
        """测试可选物品不足时报错"""
        pop = _popularity({"u1": [1, 2, 3]}, num_items=3)
        with pytest.raises(SamplingError):
            sample_popularity_negatives(pop, 1, {2}, 2, np.random.default_rng(0))


class TestMetrics:
    """排序指标测试"""

    def test_rank_counts_strictly_higher(self):
        """测试名次 = 1 + 分数更高的候选数"""
        scores = np.array([0.0, 0.9, 0.5, 0.7, 0.1])
        assert rank_of_positive(scores, [1, 2, 3, 4], 3) == 2
        assert rank_of_positive(scores, [1, 2, 3, 4], 1) == 1

    def test_ties_broken_by_item_id(self):
        """测试分数相同时 ID 更小的候选排在前面"""
        scores = np.array([0.0, 0.5, 0.5, 0.5])
        assert rank_of_positive(scores, [1, 2, 3], 1) == 1
        assert rank_of_positive(scores, [1, 2, 3], 3) == 3

    def test_positive_must_be_candidate(self):
        """测试正样本不在候选中时报错"""
        with pytest.raises(ContractError):
            rank_of_positive(np.zeros(5), [1, 2], 3)

    @pytest.mark.parametrize(
        "rank,expected",
        [
            (1, {"recall@10": 1.0, "ndcg@10": 1.0, "mrr": 1.0}),
            (3, {"recall@10": 1.0, "ndcg@10": 0.5, "mrr": 1 / 3}),
            (11, {"recall@10": 0.0, "ndcg@10": 0.0, "mrr": 1 / 11}),
        ],
    )
    def test_pointwise(self, rank, expected):
        """测试 rank=1/3/11 时的单用户指标"""
        assert pointwise_metrics(rank, 10) == pytest.approx(expected)

    def test_vectorised_matches_pointwise(self):
        """测试向量化指标与逐个计算一致"""
        ranks = np.array([1, 2, 5, 9, 40])
        vectors = metrics_from_ranks(ranks, [5])
        for i, rank in enumerate(ranks):
            for name, value in pointwise_metrics(int(rank), 5).items():
                assert vectors[name][i] == pytest.approx(value)

    def test_matches_sort_oracle(self):
        """测试 1000 个随机样例（含并列分数、打乱候选顺序）上名次与指标等于显式排序的参考实现"""
        rng = np.random.default_rng(7)
        for _ in range(1000):
            num_items = int(rng.integers(2, 51))
            if rng.random() < 0.5:
                scores = rng.integers(0, 6, size=num_items + 1) / 5.0
            else:
                scores = rng.random(num_items + 1)
            positive = int(rng.integers(1, num_items + 1))
            others = [i for i in range(1, num_items + 1) if i != positive]
            size = min(len(others), int(rng.integers(1, 11)))
            sampled = [positive] + [int(i) for i in rng.choice(others, size=size, replace=False)]

            for candidates in (list(range(1, num_items + 1)), sampled):
                order = sorted(candidates, key=lambda item: (-scores[item], item))
                expected = order.index(positive) + 1
                rank = rank_of_positive(scores, rng.permutation(candidates), positive)
                assert rank == expected

                k = int(rng.integers(1, 11))
                ndcg = 1.0 / math.log2(expected + 1) if expected <= k else 0.0
                recall = 1.0 if expected <= k else 0.0
                single = pointwise_metrics(rank, k)
                vector = metrics_from_ranks(np.array([rank]), [k])
                assert single[f"recall@{k}"] == vector[f"recall@{k}"][0] == recall
                assert single["mrr"] == vector["mrr"][0] == 1.0 / expected
                assert single[f"ndcg@{k}"] == pytest.approx(ndcg, rel=1e-15, abs=0)
                assert vector[f"ndcg@{k}"][0] == pytest.approx(ndcg, rel=1e-15, abs=0)

    def test_random_ranking_mrr(self):
        """测试 V=100 时均匀随机名次的期望 MRR 为 H_100/100 ≈ 0.0519"""
        mrr = metrics_from_ranks(np.arange(1, 101), [10])["mrr"].mean()
        assert mrr == pytest.approx(0.0519, abs=1e-4)

        rng = np.random.default_rng(0)
        items = np.arange(1, 101)
        ranks = [rank_of_positive(np.r_[0.0, rng.random(100)], items, 1) for _ in range(5000)]
        assert np.mean(1.0 / np.array(ranks)) == pytest.approx(0.0519, abs=0.006)


class TestEvaluateModel:
    """评估流程测试"""

    @pytest.fixture
    def setup(self):
        ds = cyclic_dataset(num_users=30, num_items=40, length=8)
        split = leave_one_out_split(ds, num_val_users=5, seed=0)
        return split, build_popularity_table(ds, split)

    def test_oracle_scorer_scores_perfectly(self, setup, tiny_eval_config):
        """测试总给测试物品最高分的打分器在所有指标上都为 1"""
        split, pop = setup

        def oracle(histories, users):
            scores = np.zeros((len(users), split.num_items + 1))
            for row, user in enumerate(users):
                scores[row, split.test[user]] = 10.0
            return scores

        report = evaluate_model(None, split, pop, tiny_eval_config, scorer=oracle)
        assert report.modes == ["sampled", "unsampled"]
        assert set(report.means.values()) == {1.0}
        assert len(report.users) == 30

    def test_sampled_rank_never_worse(self, setup, tiny_eval_config):
        """测试同一打分下采样名次不差于全量名次"""
        split, pop = setup
        rng = np.random.default_rng(3)
        fixed = rng.random((len(split.test), split.num_items + 1))
        index = {user: i for i, user in enumerate(split.test)}

        def scorer(histories, users):
            return fixed[[index[u] for u in users]]

        report = evaluate_model(None, split, pop, tiny_eval_config, scorer=scorer)
        assert np.all(report.per_user["sampled/mrr"] >= report.per_user["unsampled/mrr"])
        assert np.all(report.per_user["sampled/recall@5"] >= report.per_user["unsampled/recall@5"])

    def test_history_is_excluded(self, setup):
        """测试历史物品不参与全量排序"""
        split, pop = setup

        def history_first(histories, users):
            scores = np.zeros((len(users), split.num_items + 1))
            for row, user in enumerate(users):
                scores[row, histories[row]] = 5.0
                scores[row, split.test[user]] = 1.0
            return scores

        cfg = EvalConfig(mode="unsampled", cutoffs=[1], seed=0)
        report = evaluate_model(None, split, pop, cfg, scorer=history_first)
        assert report.means["unsampled/recall@1"] == 1.0

    def test_same_seed_same_report(self, setup, tiny_model_config, tiny_eval_config):
        """测试同一模型、同一种子两次评估逐位相同"""
        split, pop = setup
        model = build_model(tiny_model_config, split.num_items, seed=0)
        a = evaluate_model(model, split, pop, tiny_eval_config)
        b = evaluate_model(model, split, pop, tiny_eval_config)
        for key in a.per_user:
            np.testing.assert_array_equal(a.per_user[key], b.per_user[key])

    def test_needs_model_or_scorer(self, setup, tiny_eval_config):
        """测试既没有模型也没有打分器时报错"""
        split, pop = setup
        with pytest.raises(ContractError):
            evaluate_model(None, split, pop, tiny_eval_config)


class TestSignificance:
    """配对 t 检验测试"""

    def test_identical_vectors(self):
        """测试两组相同的向量 p=1 且不显著"""
        result = paired_ttest_bonferroni([0.1, 0.5, 0.3], [0.1, 0.5, 0.3], num_tests=3)
        assert result.p_value == 1.0
        assert result.corrected_p_value == 1.0
        assert not result.significant

    def test_t_distribution_tail(self):
        """测试 t=2.776, df=4 时双尾 p≈0.05"""
        assert student_t_two_tailed_p(2.776, 4) == pytest.approx(0.05, abs=1e-4)

    def test_matches_scipy(self):
        """测试与 scipy.stats.ttest_rel 一致"""
        from scipy import stats

        rng = np.random.default_rng(0)
        a = rng.random(50)
        b = a + rng.normal(0.05, 0.1, 50)
        result = paired_ttest_bonferroni(a, b, num_tests=1)
        expected = stats.ttest_rel(a, b)
        assert result.p_value == pytest.approx(expected.pvalue, rel=1e-6)
        assert result.t_statistic == pytest.approx(expected.statistic, rel=1e-6)

    def test_bonferroni(self):
        """测试 p≈0.05、两次检验时校正后翻倍"""
        a = [1.0, 2.0, 3.0, 4.0, 5.0]
        t = 2.776
        # 构造 t 统计量恰为 2.776 的差值
        diff = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        diff = diff + t * diff.std(ddof=1) / np.sqrt(5)
        result = paired_ttest_bonferroni(np.array(a) + diff, a, num_tests=2)
        assert result.p_value == pytest.approx(0.05, abs=1e-4)
        assert result.corrected_p_value == pytest.approx(2 * result.p_value)

    def test_correction_is_capped(self):
        """测试校正后的 p 值不超过 1"""
        result = paired_ttest_bonferroni([0.1, 0.2, 0.4], [0.2, 0.1, 0.35], num_tests=20)
        assert result.corrected_p_value == 1.0

    def test_constant_nonzero_difference(self):
        """测试差值恒定且非零时 p=0"""
        result = paired_ttest_bonferroni([1.0, 2.0, 3.0], [0.5, 1.5, 2.5], num_tests=1)
        assert result.p_value == 0.0
        assert result.significant

    def test_invalid_inputs(self):
        """测试长度不一致或样本过少时报错"""
        with pytest.raises(ContractError):
            paired_ttest_bonferroni([1.0, 2.0], [1.0], num_tests=1)
        with pytest.raises(ContractError):
            paired_ttest_bonferroni([1.0], [1.0], num_tests=1)
        with pytest.raises(ContractError):
            paired_ttest_bonferroni([1.0, 2.0], [1.0, 3.0], num_tests=0)


class TestReplication:
    """复现判定测试"""

    def test_close_value_replicates(self):
        """测试 0.6975 vs 0.6970 相对误差 +0.07%"""
        verdict = replication_check(0.6975, 0.6970)
        assert verdict.relative_diff == pytest.approx(0.000717, abs=1e-6)
        assert verdict.replicated

    def test_far_value_fails(self):
        """测试 0.5215 vs 0.6970 相对误差 -25.18%"""
        verdict = replication_check(0.5215, 0.6970)
        assert verdict.relative_diff == pytest.approx(-0.2518, abs=1e-4)
        assert not verdict.replicated

    def test_boundary_is_inclusive(self):
        """测试恰好 ±5% 视为复现"""
        assert replication_check(1.05, 1.0).replicated
        assert replication_check(0.95, 1.0).replicated
        assert not replication_check(1.0501, 1.0).replicated

    def test_reported_must_be_positive(self):
        """测试发表值为 0 时报错"""
        with pytest.raises(ContractError):
            replication_check(0.5, 0.0)

    def test_verdicts_skip_missing_metrics(self):
        """测试只判定评估中存在的指标"""
        verdicts = replication_verdicts(
            {"sampled/recall@10": 0.70},
            {"sampled/recall@10": 0.6970, "sampled/ndcg@10": 0.4818},
        )
        assert [v.metric for v in verdicts] == ["sampled/recall@10"]
