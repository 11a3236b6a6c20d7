"""
Mining Service - discretization, Apriori frequent itemsets and association rules

Mining runs in two steps: firm-periods are clustered on their ratio vectors,
then rules are mined over discretized items globally and per cluster.
"""

import csv
import io
import json
import logging
from collections import Counter, defaultdict
from decimal import Decimal
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..schemas.mining import (
    AssociationRule,
    FirmFeatures,
    Item,
    ItemSet,
    MiningConfig,
    MiningResult,
    Transaction,
    TransactionSet,
    resolve_min_support,
)
from ..utils.error_handlers import ContractViolationError, InternalConsistencyError
from ..utils.logging import pipeline_logger
from .clustering_service import clustering_service

logger = logging.getLogger("bilanz.mining")

RATIO_FEATURES = ("X1", "X2", "X3", "X4", "X5")
ZONE_FEATURE = "Z_ZONE"
SINGLE_BIN_LEVEL = "ALL"

ItemTuple = Tuple[Item, ...]


def bin_labels(bins: int) -> Tuple[str, ...]:
    """LOW/HIGH, LOW/MED/HIGH, then LOW, MED1..MEDn, HIGH"""
    if bins == 1:
        return (SINGLE_BIN_LEVEL,)
    if bins == 2:
        return ("LOW", "HIGH")
    if bins == 3:
        return ("LOW", "MED", "HIGH")
    return ("LOW",) + tuple(f"MED{i}" for i in range(1, bins - 1)) + ("HIGH",)


def _itemset_order(itemset: ItemSet):
    return (len(itemset.items), [item.key for item in itemset.items])


def rule_order(rule: AssociationRule):
    """Confidence desc, support desc, then antecedent and consequent lexicographically"""
    return (
        -rule.confidence,
        -rule.support_count,
        [item.key for item in rule.antecedent.items],
        [item.key for item in rule.consequent.items],
    )


class MiningService:
    """Service for the knowledge-discovery step"""

    # Discretization

    @staticmethod
    def equal_frequency_edges(values: Sequence[float], bins: int) -> Tuple[float, ...]:
        """
        Interior edges splitting values into equal-frequency bins

        A value equal to an edge belongs to the lower bin. Duplicate edges and
        edges that leave nothing above them are dropped, so features with few
        distinct values end up with fewer bins.
        """
        data = np.asarray(values, dtype=float)
        if data.size == 0:
            return ()
        bins = min(bins, len(np.unique(data)))
        if bins < 2:
            return ()
        edges = np.unique(np.quantile(data, [i / bins for i in range(1, bins)]))
        return tuple(float(e) for e in edges if e < data.max())

    @staticmethod
    def bin_index(value: float, edges: Sequence[float]) -> int:
        return sum(1 for edge in edges if edge < value)

    def discretize(self, firms: Sequence[FirmFeatures], bins: int) -> TransactionSet:
        """
        Turn scored firm-periods into transactions

        X1..X5 and any growth feature become quantile-bin items; the Z zone
        becomes a categorical Z_ZONE item. Edges come from the whole corpus.
        """
        if bins < 2:
            raise ContractViolationError("bins must be at least 2", {"bins": bins})

        columns: Dict[str, Dict[int, float]] = {}
        for feature, attr in zip(RATIO_FEATURES, ("x1", "x2", "x3", "x4", "x5")):
            columns[feature] = {i: getattr(f.ratios, attr) for i, f in enumerate(firms)}
        growth_features = sorted({name for f in firms for name in f.growth})
        for feature in growth_features:
            columns[feature] = {i: f.growth[feature] for i, f in enumerate(firms) if feature in f.growth}

        bin_edges: Dict[str, Tuple[float, ...]] = {}
        warnings: List[str] = []
        items_by_firm: List[set] = [set() for _ in firms]

        for feature, column in columns.items():
            if not column:
                continue
            edges = self.equal_frequency_edges(list(column.values()), bins)
            bin_edges[feature] = edges
            effective = len(edges) + 1
            if effective < bins:
                message = f"{feature}: {effective} of {bins} bins (too few distinct values)"
                warnings.append(message)
                logger.warning(message)
            labels = bin_labels(effective)
            for i, value in column.items():
                items_by_firm[i].add(Item(feature=feature, level=labels[self.bin_index(value, edges)]))

        for i, firm in enumerate(firms):
            items_by_firm[i].add(Item(feature=ZONE_FEATURE, level=firm.zscore.zone.value))

        return TransactionSet(
            transactions=tuple(
                Transaction(firm_id=f.firm_id, period=f.period, items=frozenset(items))
                for f, items in zip(firms, items_by_firm)
            ),
            bin_edges=bin_edges,
            warnings=tuple(warnings),
        )

    # Frequent itemsets

    def apriori_gen(self, l_prev: Sequence[ItemSet], k: int) -> List[ItemSet]:
        """
        Candidate k-itemsets from the frequent (k-1)-itemsets

        Join pairs sharing their first k-2 items, then prune candidates with
        an infrequent (k-1)-subset.
        """
        if k < 2:
            raise ContractViolationError("apriori_gen needs k >= 2", {"k": k})
        sizes = {len(itemset) for itemset in l_prev}
        if sizes and sizes != {k - 1}:
            raise ContractViolationError(
                f"apriori_gen expects itemsets of size {k - 1}",
                {"k": k, "sizes": sorted(sizes)},
            )

        previous = sorted({itemset.items for itemset in l_prev}, key=lambda t: [i.key for i in t])
        frequent = set(previous)
        candidates: List[ItemTuple] = []

        for a_index, a in enumerate(previous):
            for b in previous[a_index + 1:]:
                # sorted order: once the prefix differs no later b can match
                if a[:-1] != b[:-1]:
                    break
                candidate = a + (b[-1],)
                if all(subset in frequent for subset in combinations(candidate, k - 1)):
                    candidates.append(candidate)

        return [ItemSet(items=c) for c in sorted(set(candidates), key=lambda t: [i.key for i in t])]

    @staticmethod
    def _count(candidates: List[ItemSet], transactions: Sequence[frozenset]) -> List[int]:
        """One pass over the transactions; candidates indexed by their first item"""
        index: Dict[Item, List[int]] = defaultdict(list)
        for position, candidate in enumerate(candidates):
            index[candidate.items[0]].append(position)

        counts = [0] * len(candidates)
        for items in transactions:
            for item in items:
                for position in index.get(item, ()):
                    if items.issuperset(candidates[position].items):
                        counts[position] += 1
        return counts

    def apriori(self, tx: TransactionSet, min_support: Union[int, float]) -> List[ItemSet]:
        """
        All frequent itemsets with their support counts

        Args:
            tx: transactions to mine
            min_support: absolute count, or a fraction converted to ceil(fraction * |tx|)

        Returns:
            ItemSets ordered by size, then lexicographically
        """
        if not tx.transactions:
            return []
        threshold = resolve_min_support(min_support, len(tx))
        if threshold < 1:
            raise ContractViolationError("min_support must be at least 1", {"min_support": min_support})

        transactions = [t.items for t in tx.transactions]
        item_counts = Counter(item for items in transactions for item in items)
        level = [
            ItemSet(items=(item,), support_count=count)
            for item, count in sorted(item_counts.items())
            if count >= threshold
        ]

        frequent: List[ItemSet] = []
        k = 2
        while level:
            frequent.extend(level)
            candidates = self.apriori_gen(level, k)
            counts = self._count(candidates, transactions)
            level = [
                ItemSet(items=candidate.items, support_count=count)
                for candidate, count in zip(candidates, counts)
                if count >= threshold
            ]
            k += 1

        return sorted(frequent, key=_itemset_order)

    # Rules

    def generate_rules(
        self,
        frequent: Sequence[ItemSet],
        min_confidence: float,
        tx_count: int,
        scope: str = "global",
    ) -> List[AssociationRule]:
        """
        Rules A -> F minus A for every frequent F and non-empty proper subset A

        A rule is kept when support(F) / support(A) >= min_confidence, compared
        exactly on the integer counts.
        """
        if tx_count < 1:
            raise ContractViolationError("tx_count must be at least 1", {"tx_count": tx_count})
        threshold = Fraction(Decimal(repr(float(min_confidence))))
        support = {itemset.items: itemset.support_count for itemset in frequent}

        rules: List[AssociationRule] = []
        for itemset in frequent:
            if len(itemset) < 2:
                continue
            full = itemset.items
            for size in range(1, len(full)):
                for antecedent in combinations(full, size):
                    antecedent_count = support.get(antecedent, 0)
                    if antecedent_count == 0:
                        raise InternalConsistencyError(
                            "Antecedent of a frequent itemset has no support",
                            {"itemset": [str(i) for i in full], "antecedent": [str(i) for i in antecedent]},
                        )
                    confidence = Fraction(itemset.support_count, antecedent_count)
                    if confidence < threshold:
                        continue
                    consequent = tuple(item for item in full if item not in antecedent)
                    rules.append(AssociationRule(
                        antecedent=ItemSet(items=antecedent, support_count=antecedent_count),
                        consequent=ItemSet(items=consequent, support_count=support.get(consequent, 0)),
                        support=itemset.support_count / tx_count,
                        confidence=float(confidence),
                        support_count=itemset.support_count,
                        scope=scope,
                    ))

        return sorted(rules, key=rule_order)

    def mine(self, firms: Sequence[FirmFeatures], config: MiningConfig) -> MiningResult:
        """Cluster, discretize, then mine rules globally and within each cluster"""
        model = clustering_service.cluster(
            [(f.key, f.ratios) for f in firms],
            config.k_clusters,
            seed=config.seed,
            max_iterations=config.max_iterations,
        )
        tx = self.discretize(firms, config.bins)

        global_itemsets = self.apriori(tx, config.min_support)
        global_rules = self.generate_rules(global_itemsets, config.min_confidence, len(tx), "global")
        pipeline_logger.log_mining("global", len(global_itemsets), len(global_rules))

        cluster_rules: Dict[int, Tuple[AssociationRule, ...]] = {}
        for cluster in range(model.k):
            subset = tx.subset(model.members(cluster))
            if not subset.transactions:
                cluster_rules[cluster] = ()
                continue
            scope = f"cluster:{cluster}"
            itemsets = self.apriori(subset, config.min_support)
            rules = self.generate_rules(itemsets, config.min_confidence, len(subset), scope)
            pipeline_logger.log_mining(scope, len(itemsets), len(rules))
            cluster_rules[cluster] = tuple(rules)

        return MiningResult(
            cluster_model=model,
            transactions=tx,
            global_itemsets=tuple(global_itemsets),
            global_rules=tuple(global_rules),
            cluster_rules=cluster_rules,
        )

    @staticmethod
    def rules_satisfied_by(
        rules: Iterable[AssociationRule],
        transaction: Transaction,
        top_n: Optional[int] = None,
    ) -> List[AssociationRule]:
        """Rules whose antecedent the transaction contains, best first"""
        matched = sorted(
            (rule for rule in rules if transaction.items.issuperset(rule.antecedent.items)),
            key=rule_order,
        )
        return matched if top_n is None else matched[:top_n]

    # Exports

    @staticmethod
    def export_transactions_csv(tx: TransactionSet) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["firm_id", "period", "items"])
        for t in tx.transactions:
            writer.writerow([t.firm_id, t.period, ";".join(str(item) for item in sorted(t.items))])
        return buffer.getvalue()

    @staticmethod
    def rules_to_jsonl(rules: Iterable[Union[AssociationRule, dict]]) -> str:
        """One JSON object per rule; accepts rules or their report records"""
        records = (rule.as_record() if isinstance(rule, AssociationRule) else rule for rule in rules)
        return "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)


mining_service = MiningService()
