"""
Tests for Mining Service
"""

import json
import random
from fractions import Fraction
from itertools import combinations

import pytest

from app.schemas import (
    AssociationRule,
    FirmFeatures,
    Item,
    ItemSet,
    MiningConfig,
    RatioVector,
    Transaction,
    TransactionSet,
)
from app.services.mining_service import MiningService, bin_labels, mining_service
from app.services.scoring_service import scoring_service
from app.utils.error_handlers import ContractViolationError, InternalConsistencyError


def item(name: str) -> Item:
    return Item(feature=name, level="1")


def itemset(names: str, count: int = 0) -> ItemSet:
    return ItemSet(items=tuple(sorted(item(n) for n in names)), support_count=count)


def transactions(*baskets: str) -> TransactionSet:
    return TransactionSet(transactions=tuple(
        Transaction(firm_id=f"t{i:02d}", period="2010-02", items=frozenset(item(n) for n in basket))
        for i, basket in enumerate(baskets)
    ))


def features(firm_id: str, x1: float, x2: float = 0.2, x3: float = 0.1, x4: float = 0.5, x5: float = 1.0,
             growth=None) -> FirmFeatures:
    ratios = RatioVector(x1=x1, x2=x2, x3=x3, x4=x4, x5=x5)
    return FirmFeatures(firm_id=firm_id, period="2010-02", ratios=ratios,
                        zscore=scoring_service.z_score(ratios), growth=growth or {})


def brute_force_frequent(tx: TransactionSet, threshold: int):
    """Support of every subset of the item universe, kept if frequent"""
    universe = sorted({i for t in tx.transactions for i in t.items})
    found = {}
    for size in range(1, len(universe) + 1):
        for candidate in combinations(universe, size):
            count = sum(1 for t in tx.transactions if t.items.issuperset(candidate))
            if count >= threshold:
                found[candidate] = count
    return found


def support_of(tx: TransactionSet, items) -> int:
    return sum(1 for t in tx.transactions if t.items.issuperset(items))


class TestAprioriGen:
    """Candidate generation: join then prune"""

    def test_join_three_pairs(self):
        assert mining_service.apriori_gen([itemset("AB"), itemset("AC"), itemset("BC")], 3) == [itemset("ABC")]

    def test_no_shared_prefix(self):
        assert mining_service.apriori_gen([itemset("AB"), itemset("CD")], 3) == []

    def test_prune_infrequent_subset(self):
        """ABC is joined from AB and AC but BC is not frequent"""
        assert mining_service.apriori_gen([itemset("AB"), itemset("AC")], 3) == []

    def test_singletons(self):
        assert mining_service.apriori_gen([itemset("A"), itemset("B")], 2) == [itemset("AB")]

    def test_empty_level(self):
        assert mining_service.apriori_gen([], 4) == []

    def test_matches_all_subsets_oracle(self):
        """Candidates are exactly the k-sets whose (k-1)-subsets are all in the level"""
        for seed in range(150):
            rng = random.Random(seed)
            k = rng.randint(2, 4)
            universe = sorted(item(n) for n in "ABCDEFG"[:rng.randint(k, 7)])
            level = [
                ItemSet(items=subset)
                for subset in combinations(universe, k - 1)
                if rng.random() < 0.6
            ]
            present = {s.items for s in level}
            oracle = [
                candidate for candidate in combinations(universe, k)
                if all(subset in present for subset in combinations(candidate, k - 1))
            ]

            result = mining_service.apriori_gen(level, k)
            assert [c.items for c in result] == oracle, seed

    def test_candidates_cover_frequent_sets(self):
        """Every frequent k-itemset is generated from the frequent (k-1)-itemsets"""
        for seed in range(60):
            rng = random.Random(seed)
            baskets = ["".join(n for n in "ABCDEF" if rng.random() < 0.5) for _ in range(rng.randint(1, 15))]
            frequent = brute_force_frequent(transactions(*baskets), rng.randint(1, 3))
            sizes = {len(items) for items in frequent}
            for k in range(2, max(sizes, default=1) + 1):
                level = [ItemSet(items=items) for items in frequent if len(items) == k - 1]
                candidates = {c.items for c in mining_service.apriori_gen(level, k)}
                assert {items for items in frequent if len(items) == k} <= candidates, seed

    def test_mixed_sizes_rejected(self):
        with pytest.raises(ContractViolationError):
            mining_service.apriori_gen([itemset("AB"), itemset("C")], 3)

    def test_k_below_two_rejected(self):
        with pytest.raises(ContractViolationError):
            mining_service.apriori_gen([itemset("A")], 1)


class TestApriori:
    """Frequent itemsets"""

    def test_small_example(self):
        tx = transactions("ABC", "AB", "AC", "BC")
        found = {tuple(i.feature for i in s.items): s.support_count for s in mining_service.apriori(tx, 2)}
        assert found == {
            ("A",): 3, ("B",): 3, ("C",): 3,
            ("A", "B"): 2, ("A", "C"): 2, ("B", "C"): 2,
        }

    def test_output_order(self):
        result = mining_service.apriori(transactions("ABC", "AB", "AC", "BC"), 1)
        assert [len(s) for s in result] == sorted(len(s) for s in result)
        assert result[-1] == itemset("ABC", 1)

    def test_fractional_support(self):
        """0.5 of four transactions needs a count of two"""
        tx = transactions("ABC", "AB", "AC", "BC")
        assert mining_service.apriori(tx, 0.5) == mining_service.apriori(tx, 2)

    def test_empty_transactions(self):
        assert mining_service.apriori(TransactionSet(), 1) == []

    def test_matches_brute_force(self):
        """Apriori agrees with exhaustive enumeration on random small inputs"""
        for seed in range(120):
            rng = random.Random(seed)
            universe = "ABCDEFGH"[:rng.randint(1, 8)]
            baskets = [
                "".join(n for n in universe if rng.random() < 0.45)
                for _ in range(rng.randint(1, 20))
            ]
            tx = transactions(*baskets)
            threshold = rng.randint(1, 4)

            result = mining_service.apriori(tx, threshold)
            assert {s.items: s.support_count for s in result} == brute_force_frequent(tx, threshold), seed

    def test_downward_closure(self):
        rng = random.Random(99)
        baskets = ["".join(n for n in "ABCDEF" if rng.random() < 0.6) for _ in range(20)]
        result = mining_service.apriori(transactions(*baskets), 4)
        counts = {s.items: s.support_count for s in result}
        for items, count in counts.items():
            for size in range(1, len(items)):
                for subset in combinations(items, size):
                    assert subset in counts
                    assert counts[subset] >= count


class TestGenerateRules:
    """Association rules and exact confidence"""

    @pytest.mark.parametrize("min_confidence,emitted", [(0.5, True), (2 / 3, True), (0.67, False), (1.0, False)])
    def test_two_thirds_threshold(self, min_confidence, emitted):
        tx = transactions("ABC", "AB", "AC", "BC")
        rules = mining_service.generate_rules(mining_service.apriori(tx, 1), min_confidence, len(tx))
        a_to_b = [r for r in rules if r.antecedent == itemset("A", 3)]
        assert bool(a_to_b) is emitted
        if emitted:
            assert a_to_b[0].confidence == pytest.approx(2 / 3)
            assert a_to_b[0].support == pytest.approx(0.5)
            assert a_to_b[0].support_count == 2

    def test_confidence_recomputed_exactly(self):
        for seed in range(40):
            rng = random.Random(seed)
            baskets = ["".join(n for n in "ABCDE" if rng.random() < 0.5) for _ in range(rng.randint(2, 20))]
            tx = transactions(*baskets)
            min_confidence = rng.choice([0.3, 0.5, 0.6, 0.8, 1.0])
            rules = mining_service.generate_rules(mining_service.apriori(tx, 2), min_confidence, len(tx))
            for rule in rules:
                whole = tuple(sorted(rule.antecedent.items + rule.consequent.items))
                expected = Fraction(support_of(tx, whole), support_of(tx, rule.antecedent.items))
                assert rule.confidence == float(expected)
                assert rule.confidence >= min_confidence
                assert rule.support_count == support_of(tx, whole)

    def test_rule_order(self):
        tx = transactions("ABC", "AB", "AC", "BC", "AB")
        rules = mining_service.generate_rules(mining_service.apriori(tx, 1), 0.1, len(tx))
        keys = [(-r.confidence, -r.support_count) for r in rules]
        assert keys == sorted(keys)

    def test_missing_antecedent_support(self):
        with pytest.raises(InternalConsistencyError):
            mining_service.generate_rules([itemset("AB", 2)], 0.5, 4)

    def test_zero_transactions_rejected(self):
        with pytest.raises(ContractViolationError):
            mining_service.generate_rules([], 0.5, 0)

    def test_rules_satisfied_by(self):
        tx = transactions("ABC", "AB", "AC", "BC", "AB")
        rules = mining_service.generate_rules(mining_service.apriori(tx, 1), 0.1, len(tx))
        basket = tx.transactions[1]
        matched = MiningService.rules_satisfied_by(rules, basket)
        assert matched
        assert all(basket.items.issuperset(r.antecedent.items) for r in matched)
        assert MiningService.rules_satisfied_by(rules, basket, top_n=2) == matched[:2]


class TestDiscretize:
    """Equal-frequency binning and categorical zone items"""

    @pytest.mark.parametrize("bins,labels", [
        (1, ("ALL",)),
        (2, ("LOW", "HIGH")),
        (3, ("LOW", "MED", "HIGH")),
        (5, ("LOW", "MED1", "MED2", "MED3", "HIGH")),
    ])
    def test_bin_labels(self, bins, labels):
        assert bin_labels(bins) == labels

    def test_six_values_three_bins(self):
        firms = [features(f"f{v}", x1=float(v)) for v in range(1, 7)]
        tx = mining_service.discretize(firms, 3)
        levels = [next(i.level for i in t.items if i.feature == "X1") for t in tx.transactions]
        assert levels == ["LOW", "LOW", "MED", "MED", "HIGH", "HIGH"]
        assert tx.bin_edges["X1"] == pytest.approx((8 / 3, 13 / 3))

    def test_value_on_edge_goes_low(self):
        assert MiningService.bin_index(2.0, (2.0, 4.0)) == 0
        assert MiningService.bin_index(2.0000001, (2.0, 4.0)) == 1

    def test_identical_values_collapse(self):
        firms = [features(f"f{i}", x1=0.1) for i in range(4)]
        tx = mining_service.discretize(firms, 3)
        assert all(item("X1") not in t.items for t in tx.transactions)
        assert all(Item(feature="X1", level="ALL") in t.items for t in tx.transactions)
        assert any(w.startswith("X1:") for w in tx.warnings)
        assert tx.bin_edges["X1"] == ()

    def test_zone_item(self):
        firms = [features("weak", x1=0.0, x2=0.0, x3=0.0, x4=0.0, x5=0.0), features("acme", x1=0.1)]
        tx = mining_service.discretize(firms, 2)
        assert Item(feature="Z_ZONE", level="DISTRESS") in tx.transactions[0].items
        assert Item(feature="Z_ZONE", level="GRAY") in tx.transactions[1].items

    def test_one_item_per_feature(self):
        firms = [features(f"f{i}", x1=i / 10, x5=1 + i / 5) for i in range(8)]
        tx = mining_service.discretize(firms, 3)
        for t in tx.transactions:
            assert sorted(i.feature for i in t.items) == ["X1", "X2", "X3", "X4", "X5", "Z_ZONE"]

    def test_growth_feature_binned(self):
        firms = [features(f"f{i}", x1=i / 10, growth={"ASSET_GROWTH": i - 2.0}) for i in range(6)]
        firms.append(features("new", x1=0.9))
        tx = mining_service.discretize(firms, 2)
        assert "ASSET_GROWTH" in tx.bin_edges
        assert not any(i.feature == "ASSET_GROWTH" for i in tx.transactions[-1].items)
        assert any(i.feature == "ASSET_GROWTH" for i in tx.transactions[0].items)

    def test_bins_below_two_rejected(self):
        with pytest.raises(ContractViolationError):
            mining_service.discretize([features("f", x1=0.1)], 1)


class TestMine:
    """Clustering plus global and per-cluster rules"""

    def test_single_firm_single_cluster(self):
        config = MiningConfig(min_support=1, min_confidence=0.5, bins=3, k_clusters=1, seed=1)
        result = mining_service.mine([features("acme", x1=0.1)], config)
        assert result.cluster_model.k == 1
        cluster_rules = [r.model_copy(update={"scope": "global"}) for r in result.cluster_rules[0]]
        assert cluster_rules == list(result.global_rules)
        assert all(r.scope == "cluster:0" for r in result.cluster_rules[0])

    def test_scopes_and_thresholds(self, mining_config):
        rng = random.Random(5)
        firms = [
            features(f"f{i:02d}", x1=rng.uniform(-0.2, 0.4), x2=rng.uniform(-0.1, 0.3),
                     x3=rng.uniform(-0.1, 0.2), x4=rng.uniform(0.1, 3.0), x5=rng.uniform(0.3, 2.0))
            for i in range(12)
        ]
        result = mining_service.mine(firms, mining_config)
        assert result.cluster_model.k == 2
        assert sorted(result.cluster_rules) == [0, 1]
        assert all(r.scope == "global" for r in result.global_rules)
        for cluster, rules in result.cluster_rules.items():
            assert all(r.scope == f"cluster:{cluster}" for r in rules)
        assert all(r.confidence >= 0.6 for r in result.all_rules())
        assert all(r.support_count >= 2 for r in result.global_rules)

    def test_separated_clusters_sharpen_rules(self):
        """Two firm groups with disjoint ratio profiles; X5 is mixed in both"""
        mixed_x5 = [1.0, 1.0, 1.0, 2.0, 2.0]
        strong = [features(f"s{i}", x1=0.5 + i / 100, x2=0.4, x3=0.3, x4=3.0, x5=x5)
                  for i, x5 in enumerate(mixed_x5)]
        weak = [features(f"w{i}", x1=-0.3 - i / 100, x2=-0.2, x3=-0.1, x4=0.1, x5=x5)
                for i, x5 in enumerate(mixed_x5)]
        config = MiningConfig(min_support=2, min_confidence=0.5, bins=2, k_clusters=2, seed=3)
        result = mining_service.mine(strong + weak, config)

        model = result.cluster_model
        strong_cluster = model.assignments[("s0", "2010-02")]
        assert model.members(strong_cluster) == sorted(f.key for f in strong)
        assert model.members(1 - strong_cluster) == sorted(f.key for f in weak)

        global_confidence = {(r.antecedent.items, r.consequent.items): r.confidence for r in result.global_rules}
        for rules in result.cluster_rules.values():
            for rule in rules:
                key = (rule.antecedent.items, rule.consequent.items)
                if key in global_confidence:
                    assert rule.confidence >= global_confidence[key]

        mixed = (Item(feature="X5", level="LOW"),)
        safe = (Item(feature="Z_ZONE", level="SAFE"),)
        assert global_confidence[(mixed, safe)] == pytest.approx(0.5)
        in_cluster = {(r.antecedent.items, r.consequent.items): r.confidence
                      for r in result.cluster_rules[strong_cluster]}
        assert in_cluster[(mixed, safe)] == 1.0
        assert not any(i.level == "DISTRESS" for r in result.cluster_rules[strong_cluster]
                       for i in r.antecedent.items + r.consequent.items)

    def test_deterministic(self, mining_config):
        firms = [features(f"f{i}", x1=i / 10, x4=3 - i / 4) for i in range(8)]
        assert mining_service.mine(firms, mining_config) == mining_service.mine(firms, mining_config)


class TestExports:
    """Transaction CSV and rule JSON lines"""

    def test_transactions_csv(self):
        tx = TransactionSet(transactions=(
            Transaction(firm_id="acme", period="2010-02", items=frozenset({
                Item(feature="Z_ZONE", level="GRAY"), Item(feature="X1", level="LOW"),
            })),
        ))
        assert MiningService.export_transactions_csv(tx) == "firm_id,period,items\nacme,2010-02,X1=LOW;Z_ZONE=GRAY\n"

    def test_empty_transactions_csv(self):
        assert MiningService.export_transactions_csv(TransactionSet()) == "firm_id,period,items\n"

    def test_rules_jsonl(self):
        rule = AssociationRule(
            antecedent=ItemSet(items=(Item(feature="X1", level="LOW"),), support_count=3),
            consequent=ItemSet(items=(Item(feature="Z_ZONE", level="DISTRESS"),), support_count=2),
            support=0.2, confidence=2 / 3, support_count=2,
        )
        lines = MiningService.rules_to_jsonl([rule, rule.as_record()]).splitlines()
        assert len(lines) == 2
        assert lines[0] == lines[1]
        record = json.loads(lines[0])
        assert list(record) == sorted(record)
        assert record["antecedent"] == ["X1=LOW"]
        assert record["consequent"] == ["Z_ZONE=DISTRESS"]
        assert record["scope"] == "global"
