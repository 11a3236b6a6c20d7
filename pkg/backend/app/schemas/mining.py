"""
Mining schemas: items, itemsets, transactions, rules, cluster models and configs
"""

import math
from decimal import Decimal
from functools import total_ordering
from typing import Dict, FrozenSet, List, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .scoring import RatioVector, ZScoreResult

FirmKey = Tuple[str, str]


@total_ordering
class Item(BaseModel):
    """A discretized condition, e.g. X1=LOW or Z_ZONE=DISTRESS"""
    model_config = ConfigDict(frozen=True)

    feature: str
    level: str

    @property
    def key(self) -> Tuple[str, str]:
        return (self.feature, self.level)

    def __lt__(self, other: "Item") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return f"{self.feature}={self.level}"

    @classmethod
    def parse(cls, text: str) -> "Item":
        feature, _, level = text.partition("=")
        return cls(feature=feature, level=level)


class ItemSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    items: Tuple[Item, ...]
    support_count: int = 0

    @model_validator(mode="after")
    def sorted_unique(self):
        if not self.items:
            raise ValueError("Item sets must not be empty")
        for a, b in zip(self.items, self.items[1:]):
            if not a < b:
                raise ValueError("Item set items must be strictly sorted and duplicate-free")
        if self.support_count < 0:
            raise ValueError("support_count must be non-negative")
        return self

    def __len__(self) -> int:
        return len(self.items)

    def labels(self) -> List[str]:
        return [str(item) for item in self.items]


class Transaction(BaseModel):
    model_config = ConfigDict(frozen=True)

    firm_id: str
    period: str
    items: FrozenSet[Item]

    @property
    def key(self) -> FirmKey:
        return (self.firm_id, self.period)


class TransactionSet(BaseModel):
    model_config = ConfigDict(frozen=True)

    transactions: Tuple[Transaction, ...] = ()
    # Interior bin edges per continuous feature
    bin_edges: Dict[str, Tuple[float, ...]] = {}
    warnings: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.transactions)

    def subset(self, keys) -> "TransactionSet":
        wanted = set(keys)
        return TransactionSet(
            transactions=tuple(t for t in self.transactions if t.key in wanted),
            bin_edges=self.bin_edges,
            warnings=self.warnings,
        )


class AssociationRule(BaseModel):
    model_config = ConfigDict(frozen=True)

    antecedent: ItemSet
    consequent: ItemSet
    support: float
    confidence: float
    support_count: int
    scope: str = "global"

    @model_validator(mode="after")
    def disjoint_sides(self):
        if set(self.antecedent.items) & set(self.consequent.items):
            raise ValueError("Antecedent and consequent must be disjoint")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("Confidence must lie in [0, 1]")
        return self

    def as_record(self) -> dict:
        return {
            "scope": self.scope,
            "antecedent": self.antecedent.labels(),
            "consequent": self.consequent.labels(),
            "support": self.support,
            "confidence": self.confidence,
            "support_count": self.support_count,
        }


class MiningConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    # int = absolute count, float = fraction of transactions
    min_support: Union[int, float] = 0.2
    min_confidence: float = 0.6
    bins: int = Field(default=3, ge=2)
    k_clusters: int = Field(default=3, ge=1)
    seed: int = 42
    max_iterations: int = Field(default=100, ge=1)

    @field_validator("min_support")
    @classmethod
    def positive_support(cls, v):
        if isinstance(v, bool) or v <= 0:
            raise ValueError("min_support must be positive")
        if isinstance(v, float) and v > 1:
            raise ValueError("Fractional min_support must not exceed 1")
        return v

    @field_validator("min_confidence")
    @classmethod
    def confidence_range(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("min_confidence must lie in (0, 1]")
        return v


class ClusterModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    centroids: Tuple[Tuple[float, ...], ...]
    assignments: Dict[FirmKey, int]
    # (mean, stddev) per feature; stddev 0 marks a constant feature
    standardization: Tuple[Tuple[float, float], ...]
    objective_history: Tuple[float, ...] = ()
    iterations: int = 0

    @property
    def k(self) -> int:
        return len(self.centroids)

    def members(self, cluster: int) -> List[FirmKey]:
        return sorted(key for key, index in self.assignments.items() if index == cluster)


class FirmFeatures(BaseModel):
    """Scored firm-period handed to the miner"""
    model_config = ConfigDict(frozen=True)

    firm_id: str
    period: str
    ratios: RatioVector
    zscore: ZScoreResult
    growth: Dict[str, float] = {}

    @property
    def key(self) -> FirmKey:
        return (self.firm_id, self.period)


class MiningResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    cluster_model: ClusterModel
    transactions: TransactionSet
    global_itemsets: Tuple[ItemSet, ...] = ()
    global_rules: Tuple[AssociationRule, ...] = ()
    cluster_rules: Dict[int, Tuple[AssociationRule, ...]] = {}

    def all_rules(self) -> List[AssociationRule]:
        rules = list(self.global_rules)
        for cluster in sorted(self.cluster_rules):
            rules.extend(self.cluster_rules[cluster])
        return rules


def empty_cluster_model() -> ClusterModel:
    return ClusterModel(centroids=(), assignments={}, standardization=())


def resolve_min_support(min_support: Union[int, float], tx_count: int) -> int:
    """Absolute support threshold; fractions convert via ceiling"""
    if isinstance(min_support, float):
        return max(1, math.ceil(Decimal(repr(min_support)) * tx_count))
    return int(min_support)

