"""
文献比较结果统计测试
"""
import random

import pytest

from conftest import TABLE_ROWS
from core.errors import ContractError, IntegrityError, ParseError
from core.models import ComparisonRecord
from review_meta import aggregate_outcomes, derive_outcome, load_comparisons
from review_meta.comparisons import half_up_percent


class TestLoadComparisons:
    """比较记录加载测试"""

    def test_loads_full_table(self, review_csv):
        """测试加载 134 条记录"""
        records = load_comparisons(review_csv)
        assert len(records) == 134
        assert records[0] == ComparisonRecord(paper_id="p01", dataset="Beauty", outcome="bert4rec_wins")

    def test_duplicate_pair(self, tmp_path):
        """测试同一论文同一数据集重复出现时报错"""
        path = tmp_path / "dup.csv"
        path.write_text("paper_id,dataset,outcome\np1,ML-1M,tie\np1,ML-1M,tie\n", encoding="utf-8")
        with pytest.raises(IntegrityError):
            load_comparisons(path)

    def test_unknown_outcome(self, tmp_path):
        """测试非法 outcome 报出行号"""
        path = tmp_path / "bad.csv"
        path.write_text("paper_id,dataset,outcome\np1,ML-1M,tie\np2,ML-1M,draw\n", encoding="utf-8")
        with pytest.raises(ParseError) as exc:
            load_comparisons(path)
        assert exc.value.line == 3

    def test_missing_column(self, tmp_path):
        """测试表头缺列时报错"""
        path = tmp_path / "bad.csv"
        path.write_text("paper_id,outcome\np1,tie\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_comparisons(path)


class TestAggregateOutcomes:
    """汇总测试"""

    def test_total_row(self, review_csv):
        """测试合计行 86/32/16，百分比 64/24/12"""
        table = aggregate_outcomes(load_comparisons(review_csv))
        assert table.total.total == 134
        assert table.total.counts == {"bert4rec_wins": 86, "sasrec_wins": 32, "tie": 16}
        assert table.total.percentages == {"bert4rec_wins": 64, "sasrec_wins": 24, "tie": 12}
        assert table.num_papers == 40

    def test_rows_match_published_counts(self, review_csv):
        """测试每个展示的数据集计数，按总数降序排列"""
        table = aggregate_outcomes(load_comparisons(review_csv))
        assert [row.dataset for row in table.rows] == [
            "Beauty", "ML-1M", "Yelp", "ML-20M", "Steam", "LastFM", "Sports", "Toys",
        ]
        for row in table.rows:
            counts = TABLE_ROWS[row.dataset]
            assert (row.counts["bert4rec_wins"], row.counts["sasrec_wins"], row.counts["tie"]) == counts
        beauty = table.rows[0]
        assert beauty.total == 19
        assert beauty.percentages == {"bert4rec_wins": 63, "sasrec_wins": 26, "tie": 11}
        assert table.num_datasets == 46
        assert table.num_filtered_datasets == 38

    def test_half_up_rounding(self):
        """测试 1/8 = 12.5% 四舍五入为 13%"""
        assert half_up_percent(1, 8) == 13
        assert half_up_percent(7, 8) == 88
        assert half_up_percent(32, 134) == 24

    def test_single_record(self):
        """测试 min_papers=1 时单条记录也成行"""
        table = aggregate_outcomes([ComparisonRecord("p1", "ML-1M", "tie")], min_papers=1)
        assert len(table.rows) == 1
        assert table.rows[0].percentages == {"bert4rec_wins": 0, "sasrec_wins": 0, "tie": 100}
        assert table.rows[0].papers["tie"] == ["p1"]

    def test_order_does_not_matter(self, review_csv):
        """测试打乱记录顺序后结果不变"""
        records = load_comparisons(review_csv)
        shuffled = list(records)
        random.Random(0).shuffle(shuffled)
        assert aggregate_outcomes(shuffled) == aggregate_outcomes(records)

    def test_empty(self):
        """测试没有记录时报错"""
        with pytest.raises(ContractError):
            aggregate_outcomes([])


class TestDeriveOutcome:
    """比较结果推导测试"""

    def test_all_better_wins(self):
        """测试所有指标都更好才算胜"""
        assert derive_outcome({"recall@10": 0.7, "ndcg@10": 0.5}, {"recall@10": 0.6, "ndcg@10": 0.4}) == "bert4rec_wins"
        assert derive_outcome([0.1, 0.2], [0.3, 0.4]) == "sasrec_wins"

    def test_mixed_is_tie(self):
        """测试指标互有胜负或相等时为平"""
        assert derive_outcome([0.7, 0.3], [0.6, 0.4]) == "tie"
        assert derive_outcome([0.5], [0.5]) == "tie"

    def test_mismatched_metrics(self):
        """测试指标不对应时报错"""
        with pytest.raises(ContractError):
            derive_outcome({"recall@10": 0.7}, {"ndcg@10": 0.6})
        with pytest.raises(ContractError):
            derive_outcome([], [])
