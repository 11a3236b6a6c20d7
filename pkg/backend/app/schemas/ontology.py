"""
Financial domain ontology schemas: classes, slots, facets, instances and the tree
"""

import math
from decimal import Decimal
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict, model_validator


class SlotRange(str, Enum):
    NUMERIC = "Numeric"
    TEXT = "Text"
    CLASS_REF = "ClassRef"


class FacetConstraint(str, Enum):
    REQUIRED = "required"
    NUMERIC = "numeric"
    NON_NEGATIVE = "non-negative"
    MAX_CARDINALITY = "max-cardinality"


def _is_number(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, Decimal):
        return value.is_finite()
    if isinstance(value, (int, float)):
        return math.isfinite(value)
    return False


class Facet(BaseModel):
    """A constraint on the values of one slot"""
    model_config = ConfigDict(frozen=True)

    slot: str
    constraint: FacetConstraint
    # n for max-cardinality
    argument: Optional[int] = None

    @model_validator(mode="after")
    def argument_for_cardinality(self):
        if self.constraint == FacetConstraint.MAX_CARDINALITY:
            if self.argument is None or self.argument < 0:
                raise ValueError("max-cardinality needs a non-negative argument")
        elif self.argument is not None:
            raise ValueError(f"{self.constraint.value} takes no argument")
        return self

    def admits(self, value: Any) -> bool:
        if self.constraint == FacetConstraint.REQUIRED:
            return value is not None
        if value is None:
            return True
        if self.constraint == FacetConstraint.NUMERIC:
            return _is_number(value)
        if self.constraint == FacetConstraint.NON_NEGATIVE:
            return _is_number(value) and value >= 0
        # max-cardinality
        count = len(value) if isinstance(value, (list, tuple, set, frozenset)) else 1
        return count <= self.argument


class OntClass(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    comment: Optional[str] = None
    parent: Optional[str] = None
    disjoint_with: FrozenSet[str] = frozenset()


class Slot(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    domain: str
    range: SlotRange
    facets: Tuple[Facet, ...] = ()
    # Class-level value (template slot value), e.g. a ratio's numerator item
    filler: Optional[str] = None

    def admits(self, value: Any) -> bool:
        return all(facet.admits(value) for facet in self.facets)


class Instance(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    of_class: str
    slot_values: Dict[str, Any] = {}
    annotations: Tuple[str, ...] = ()


class OntologyTree(BaseModel):
    """Single-rooted concept tree; immutable once built"""
    model_config = ConfigDict(frozen=True)

    root: str
    classes: Dict[str, OntClass]
    slots: Tuple[Slot, ...] = ()
    instances: Tuple[Instance, ...] = ()

    @model_validator(mode="after")
    def tree_invariants(self):
        if self.root not in self.classes:
            raise ValueError(f"Root class {self.root!r} is not declared")
        if self.classes[self.root].parent is not None:
            raise ValueError("Root class must not have a parent")

        for class_id, ont_class in self.classes.items():
            if class_id != ont_class.id:
                raise ValueError(f"Class key {class_id!r} does not match id {ont_class.id!r}")
            if class_id != self.root and ont_class.parent is None:
                raise ValueError(f"Class {class_id!r} has no parent and is not the root")
            if ont_class.parent is not None and ont_class.parent not in self.classes:
                raise ValueError(f"Class {class_id!r} names undeclared parent {ont_class.parent!r}")
            for other in ont_class.disjoint_with:
                if other == class_id:
                    raise ValueError(f"Class {class_id!r} cannot be disjoint with itself")
                if other not in self.classes or class_id not in self.classes[other].disjoint_with:
                    raise ValueError(f"Disjointness between {class_id!r} and {other!r} is not symmetric")
            self._chain_to_root(class_id)

        for slot in self.slots:
            if slot.domain not in self.classes:
                raise ValueError(f"Slot {slot.name!r} has undeclared domain {slot.domain!r}")
            if slot.range == SlotRange.CLASS_REF and slot.filler is not None and slot.filler not in self.classes:
                raise ValueError(f"Slot {slot.name!r} refers to undeclared class {slot.filler!r}")

        for instance in self.instances:
            if instance.of_class not in self.classes:
                raise ValueError(f"Instance {instance.id!r} has undeclared class {instance.of_class!r}")
            for slot in self.slots_for(instance.of_class):
                if not slot.admits(instance.slot_values.get(slot.name)):
                    raise ValueError(f"Instance {instance.id!r} violates facets of slot {slot.name!r}")
        return self

    def _chain_to_root(self, class_id: str) -> List[str]:
        chain = [class_id]
        seen: Set[str] = {class_id}
        current = self.classes[class_id]
        while current.parent is not None:
            if current.parent in seen:
                raise ValueError(f"Cycle in parent chain of {class_id!r}")
            seen.add(current.parent)
            chain.append(current.parent)
            current = self.classes[current.parent]
        if chain[-1] != self.root:
            raise ValueError(f"Class {class_id!r} does not reach the root")
        return chain

    def ancestors(self, class_id: str) -> List[str]:
        """Class chain from class_id up to the root, inclusive"""
        return self._chain_to_root(class_id)

    def children_of(self, class_id: str) -> List[str]:
        return sorted(c.id for c in self.classes.values() if c.parent == class_id)

    def descendants(self, class_id: str) -> Set[str]:
        """class_id plus every class below it"""
        found = {class_id}
        frontier = [class_id]
        while frontier:
            current = frontier.pop()
            for child in self.children_of(current):
                if child not in found:
                    found.add(child)
                    frontier.append(child)
        return found

    def slots_for(self, class_id: str) -> List[Slot]:
        """Slots declared on the class or inherited from its ancestors"""
        chain = set(self.ancestors(class_id))
        return [slot for slot in self.slots if slot.domain in chain]

    def class_slots(self, class_id: str) -> Dict[str, Slot]:
        """Slots declared directly on the class"""
        return {slot.name: slot for slot in self.slots if slot.domain == class_id}
