"""
Ontology Service - builds the financial domain ontology tree and reads/writes
it as an RDF/OWL subset (owl:Class, rdfs:subClassOf, rdfs:comment, owl:disjointWith)
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, TextIO, Tuple, Union

from lxml import etree
from pydantic import ValidationError

from ..schemas.ontology import (
    Facet,
    FacetConstraint,
    Instance,
    OntClass,
    OntologyTree,
    Slot,
    SlotRange,
)
from ..schemas.statement import (
    FinancialStatement,
    LineItemCategory,
    SupplementalFigures,
    ValidationReport,
)
from ..utils.error_handlers import (
    ClassLookupError,
    OntologyConstructionError,
    OwlParseError,
    OwlResolutionError,
)
from ..utils.validation import InputValidator

logger = logging.getLogger("bilanz.ontology")

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"
XML_NS = "http://www.w3.org/XML/1998/namespace"
PROTEGE_IMPORT = "http://protege.stanford.edu/plugins/owl/protege"

NSMAP = {"rdf": RDF_NS, "rdfs": RDFS_NS, "owl": OWL_NS}

RDF_RDF = f"{{{RDF_NS}}}RDF"
RDF_ID = f"{{{RDF_NS}}}ID"
RDF_ABOUT = f"{{{RDF_NS}}}about"
RDF_RESOURCE = f"{{{RDF_NS}}}resource"
RDFS_COMMENT = f"{{{RDFS_NS}}}comment"
RDFS_SUBCLASS = f"{{{RDFS_NS}}}subClassOf"
OWL_CLASS = f"{{{OWL_NS}}}Class"
OWL_ONTOLOGY = f"{{{OWL_NS}}}Ontology"
OWL_IMPORTS = f"{{{OWL_NS}}}imports"
OWL_DISJOINT = f"{{{OWL_NS}}}disjointWith"
XML_LANG = f"{{{XML_NS}}}lang"

ROOT_CLASS = "BalanceSheet"

# (id, parent, comment)
SKELETON = (
    (ROOT_CLASS, None, "Snapshot of assets, liabilities and owners' equity at a point in time"),
    ("Assets", ROOT_CLASS, "Valuable items owned by the business"),
    ("CurrentAssets", "Assets", "Assets convertible into cash within one calendar year"),
    ("FixedAssets", "Assets", "Long-term assets used in the business"),
    ("Liabilities", ROOT_CLASS, "Debts and obligations owed to outside creditors"),
    ("CurrentLiabilities", "Liabilities", "Obligations payable within one year"),
    ("LongTermLiabilities", "Liabilities", "Obligations due more than one year out"),
    ("OwnersEquity", ROOT_CLASS, "Initial investment plus retained earnings"),
)

SKELETON_DISJOINT = (
    ("CurrentAssets", "FixedAssets"),
    ("CurrentLiabilities", "LongTermLiabilities"),
)

CATEGORY_CLASSES = {
    LineItemCategory.CURRENT_ASSET: "CurrentAssets",
    LineItemCategory.LONG_TERM_ASSET: "FixedAssets",
    LineItemCategory.CURRENT_LIABILITY: "CurrentLiabilities",
    LineItemCategory.LONG_TERM_LIABILITY: "LongTermLiabilities",
    LineItemCategory.EQUITY: "OwnersEquity",
    LineItemCategory.SUPPLEMENTAL: "SupplementalFigures",
}

SUPPLEMENTAL_CLASS = ("SupplementalFigures", ROOT_CLASS, "Income statement and market figures")
RATIOS_CLASS = ("FinancialRatios", ROOT_CLASS, "Altman discriminant ratios")
MEASURES_CLASS = ("FinancialMeasures", ROOT_CLASS, "Accounting quantities the ratios relate")

# class_id_for never emits an underscore, so line items cannot reach these ids
MEASURE_PREFIX = "Measure_"

MEASURES = (
    ("WorkingCapital", "Current assets minus current liabilities"),
    ("TotalAssets", "Sum of current and long-term assets"),
    ("TotalLiabilities", "Sum of current and long-term liabilities"),
    ("RetainedEarnings", "Earnings reinvested after distributions"),
    ("Ebit", "Earnings before interest and taxes"),
    ("MarketValueEquity", "Market capitalisation of the equity"),
    ("Sales", "Net sales for the period"),
)

# (class id, numerator, denominator)
RATIOS = (
    ("X1_WorkingCapitalToTotalAssets", "WorkingCapital", "TotalAssets"),
    ("X2_RetainedEarningsToTotalAssets", "RetainedEarnings", "TotalAssets"),
    ("X3_EbitToTotalAssets", "Ebit", "TotalAssets"),
    ("X4_MarketValueEquityToTotalLiabilities", "MarketValueEquity", "TotalLiabilities"),
    ("X5_SalesToTotalAssets", "Sales", "TotalAssets"),
)

RESERVED_CLASSES = frozenset(
    [class_id for class_id, _, _ in SKELETON]
    + [SUPPLEMENTAL_CLASS[0], RATIOS_CLASS[0], MEASURES_CLASS[0]]
    + [MEASURE_PREFIX + measure for measure, _ in MEASURES]
    + [class_id for class_id, _, _ in RATIOS]
)


class _TreeBuilder:
    """Mutable staging area; freeze() hands out the immutable tree"""

    def __init__(self, root: str):
        self.root = root
        self.classes: Dict[str, OntClass] = {}
        self.slots: List[Slot] = []
        self.instances: Dict[str, Instance] = {}
        # class id -> line-item name that produced it
        self.item_sources: Dict[str, str] = {}

    def add_class(self, class_id: str, parent: Optional[str], comment: Optional[str] = None):
        if class_id in self.classes:
            raise OntologyConstructionError(f"Class {class_id!r} is already declared", {"class_id": class_id})
        self.classes[class_id] = OntClass(id=class_id, parent=parent, comment=comment)

    def ensure_class(self, class_id: str, parent: Optional[str], comment: Optional[str] = None):
        if class_id not in self.classes:
            self.add_class(class_id, parent, comment)

    def set_disjoint(self, a: str, b: str):
        for this, other in ((a, b), (b, a)):
            current = self.classes[this]
            self.classes[this] = current.model_copy(
                update={"disjoint_with": current.disjoint_with | {other}}
            )

    def add_slot(self, slot: Slot):
        if any(s.name == slot.name and s.domain == slot.domain for s in self.slots):
            raise OntologyConstructionError(f"Slot {slot.name!r} already declared on {slot.domain!r}")
        self.slots.append(slot)

    def item_class(self, name: str, category) -> str:
        parent = CATEGORY_CLASSES.get(category)
        if parent is None:
            raise OntologyConstructionError(
                f"Cannot parent line item {name!r}: unknown category {category!r}",
                {"name": name, "category": str(category)},
            )
        if parent == SUPPLEMENTAL_CLASS[0]:
            self.ensure_class(*SUPPLEMENTAL_CLASS)

        class_id = InputValidator.class_id_for(name)
        if not class_id:
            raise OntologyConstructionError(f"Line item {name!r} yields an empty class id", {"name": name})

        if class_id in RESERVED_CLASSES:
            raise OntologyConstructionError(
                f"Line item {name!r} collides with reserved class {class_id!r}",
                {"name": name, "class_id": class_id},
            )
        existing = self.classes.get(class_id)
        if existing is None:
            self.add_class(class_id, parent)
            self.item_sources[class_id] = name
        elif self.item_sources.get(class_id) != name or existing.parent != parent:
            raise OntologyConstructionError(
                f"Line item {name!r} collides with class {class_id!r}",
                {"name": name, "class_id": class_id},
            )
        return class_id

    def add_instance(self, instance: Instance):
        if instance.of_class not in self.classes:
            raise OntologyConstructionError(f"Instance {instance.id!r} names undeclared class {instance.of_class!r}")
        if instance.id in self.instances:
            raise OntologyConstructionError(f"Instance {instance.id!r} is already declared")
        for slot in self._slots_for(instance.of_class):
            value = instance.slot_values.get(slot.name)
            for facet in slot.facets:
                if not facet.admits(value):
                    raise OntologyConstructionError(
                        f"Instance {instance.id!r} violates facet {facet.constraint.value} of slot {slot.name!r}",
                        {"instance": instance.id, "slot": slot.name, "constraint": facet.constraint.value},
                    )
        self.instances[instance.id] = instance

    def _slots_for(self, class_id: str) -> List[Slot]:
        chain = set()
        current: Optional[str] = class_id
        while current is not None and current not in chain:
            chain.add(current)
            current = self.classes[current].parent
        return [slot for slot in self.slots if slot.domain in chain]

    def snapshot(self):
        return (dict(self.classes), list(self.slots), dict(self.instances), dict(self.item_sources))

    def restore(self, state):
        self.classes, self.slots, self.instances, self.item_sources = (
            dict(state[0]), list(state[1]), dict(state[2]), dict(state[3])
        )

    def freeze(self) -> OntologyTree:
        try:
            return OntologyTree(
                root=self.root,
                classes=dict(self.classes),
                slots=tuple(self.slots),
                instances=tuple(sorted(self.instances.values(), key=lambda i: i.id)),
            )
        except ValidationError as exc:
            raise OntologyConstructionError(exc.errors()[0]["msg"])


class OntologyService:
    """Service for the financial domain ontology"""

    def _skeleton(self) -> _TreeBuilder:
        builder = _TreeBuilder(ROOT_CLASS)
        for class_id, parent, comment in SKELETON:
            builder.add_class(class_id, parent, comment)
        for a, b in SKELETON_DISJOINT:
            builder.set_disjoint(a, b)
        # Every line-item instance carries its amount and provenance
        builder.add_slot(Slot(
            name="amount", domain=ROOT_CLASS, range=SlotRange.NUMERIC,
            facets=(
                Facet(slot="amount", constraint=FacetConstraint.REQUIRED),
                Facet(slot="amount", constraint=FacetConstraint.NUMERIC),
            ),
        ))
        for name in ("firm_id", "period"):
            builder.add_slot(Slot(
                name=name, domain=ROOT_CLASS, range=SlotRange.TEXT,
                facets=(Facet(slot=name, constraint=FacetConstraint.REQUIRED),),
            ))
        return builder

    @staticmethod
    def _add_ratio_classes(builder: _TreeBuilder):
        if RATIOS_CLASS[0] in builder.classes:
            return
        builder.add_class(*MEASURES_CLASS)
        for measure, comment in MEASURES:
            builder.add_class(MEASURE_PREFIX + measure, MEASURES_CLASS[0], comment)
        builder.add_class(*RATIOS_CLASS)
        for class_id, numerator, denominator in RATIOS:
            builder.add_class(class_id, RATIOS_CLASS[0], f"{numerator} / {denominator}")
            for slot_name, filler in (("numerator", numerator), ("denominator", denominator)):
                builder.add_slot(Slot(
                    name=slot_name, domain=class_id, range=SlotRange.CLASS_REF, filler=MEASURE_PREFIX + filler,
                    facets=(
                        Facet(slot=slot_name, constraint=FacetConstraint.REQUIRED),
                        Facet(slot=slot_name, constraint=FacetConstraint.MAX_CARDINALITY, argument=1),
                    ),
                ))

    def _add_statement(self, builder: _TreeBuilder, stmt: FinancialStatement,
                       supp: Optional[SupplementalFigures], report: Optional[ValidationReport]):
        supp = stmt.supplemental if supp is None else supp
        if supp.missing() != list(SupplementalFigures.model_fields):
            self._add_ratio_classes(builder)

        annotations = tuple(f"validation_failed:{name}" for name in (report.failed_checks if report else []))
        for item in stmt.items:
            class_id = builder.item_class(item.name, item.category)
            builder.add_instance(Instance(
                id=f"{stmt.firm_id}_{stmt.period}_{class_id}",
                of_class=class_id,
                slot_values={"amount": item.amount, "firm_id": stmt.firm_id, "period": stmt.period},
                annotations=annotations,
            ))

    def build_financial_ontology(
        self,
        stmt: FinancialStatement,
        supp: Optional[SupplementalFigures] = None,
        report: Optional[ValidationReport] = None,
    ) -> OntologyTree:
        """
        Build the domain tree for one firm-period

        The skeleton is always present; each line item becomes a class under
        its category class plus one instance carrying the amount. Ratio classes
        appear once supplemental figures are available.
        """
        builder = self._skeleton()
        self._add_statement(builder, stmt, supp, report)
        tree = builder.freeze()
        logger.debug(f"Built ontology for {stmt.firm_id} {stmt.period}: "
                     f"{len(tree.classes)} classes, {len(tree.instances)} instances")
        return tree

    def build_corpus_ontology(
        self,
        entries: Sequence[Tuple[FinancialStatement, Optional[ValidationReport]]],
        on_error: Optional[Callable[[FinancialStatement, OntologyConstructionError], None]] = None,
    ) -> OntologyTree:
        """
        Fold many firm-periods into one tree

        Without on_error the first construction failure propagates. With it,
        the failing statement is left out entirely and reported to the callback.
        """
        builder = self._skeleton()
        for stmt, report in entries:
            state = builder.snapshot()
            try:
                self._add_statement(builder, stmt, None, report)
            except OntologyConstructionError as exc:
                if on_error is None:
                    raise
                builder.restore(state)
                on_error(stmt, exc)
        return builder.freeze()

    def make_instance(self, tree: OntologyTree, instance: Instance) -> OntologyTree:
        """Return a new tree with one more instance, enforcing facets"""
        builder = _TreeBuilder(tree.root)
        builder.classes = dict(tree.classes)
        builder.slots = list(tree.slots)
        builder.instances = {i.id: i for i in tree.instances}
        builder.add_instance(instance)
        return builder.freeze()

    def export_owl(self, tree: OntologyTree) -> str:
        """Serialize the class part of the tree; classes in id order"""
        document = etree.Element(RDF_RDF, nsmap=NSMAP)
        ontology = etree.SubElement(document, OWL_ONTOLOGY, {RDF_ABOUT: ""})
        etree.SubElement(ontology, OWL_IMPORTS, {RDF_RESOURCE: PROTEGE_IMPORT})

        for class_id in sorted(tree.classes):
            ont_class = tree.classes[class_id]
            element = etree.SubElement(document, OWL_CLASS, {RDF_ID: class_id})
            if ont_class.comment:
                comment = etree.SubElement(element, RDFS_COMMENT, {XML_LANG: "en"})
                comment.text = ont_class.comment
            for other in sorted(ont_class.disjoint_with):
                disjoint = etree.SubElement(element, OWL_DISJOINT)
                etree.SubElement(disjoint, OWL_CLASS, {RDF_ABOUT: f"#{other}"})
            if ont_class.parent is not None:
                subclass = etree.SubElement(element, RDFS_SUBCLASS)
                etree.SubElement(subclass, OWL_CLASS, {RDF_ABOUT: f"#{ont_class.parent}"})

        return etree.tostring(document, xml_declaration=True, encoding="UTF-8", pretty_print=True).decode("utf-8")

    def import_owl(self, source: Union[str, bytes, TextIO]) -> OntologyTree:
        """Rebuild classes, parents, comments and disjointness from export_owl output"""
        data = source if isinstance(source, (str, bytes)) else source.read()
        if isinstance(data, str):
            data = data.encode("utf-8")
        if not data.strip():
            raise OwlParseError("Empty document: no root class")

        parser = etree.XMLParser(resolve_entities=False, no_network=True, remove_comments=True)
        try:
            document = etree.fromstring(data, parser)
        except etree.XMLSyntaxError as exc:
            line, column = exc.position if exc.position else (exc.lineno, None)
            raise OwlParseError(f"Malformed XML: {exc.msg}", line=line, column=column)

        if document.tag != RDF_RDF:
            raise OwlParseError(f"Expected rdf:RDF document element, found {document.tag}", line=document.sourceline)

        declared: Dict[str, dict] = {}
        for element in document:
            if not isinstance(element.tag, str):
                continue
            if element.tag == OWL_ONTOLOGY:
                self._check_ontology_header(element)
            elif element.tag == OWL_CLASS:
                class_id, record = self._read_class(element)
                if class_id in declared:
                    raise OwlParseError(f"Class {class_id!r} declared twice", line=element.sourceline)
                declared[class_id] = record
            else:
                raise OwlParseError(f"Unsupported element {element.tag}", line=element.sourceline)

        for class_id, record in declared.items():
            for ref in [record["parent"], *record["disjoint_with"]]:
                if ref is not None and ref not in declared:
                    raise OwlResolutionError(
                        f"Class {class_id!r} refers to undeclared class {ref!r}",
                        {"class_id": class_id, "reference": ref},
                    )

        # owl:disjointWith is symmetric even when written on one side only
        for class_id, record in declared.items():
            for other in record["disjoint_with"]:
                declared[other]["disjoint_with"].add(class_id)

        roots = sorted(class_id for class_id, record in declared.items() if record["parent"] is None)
        if not roots:
            raise OwlParseError("Document declares no root class")
        if len(roots) > 1:
            raise OwlParseError(f"Document declares several root classes: {', '.join(roots)}")

        classes = {
            class_id: OntClass(
                id=class_id,
                comment=record["comment"],
                parent=record["parent"],
                disjoint_with=frozenset(record["disjoint_with"]),
            )
            for class_id, record in declared.items()
        }
        try:
            return OntologyTree(root=roots[0], classes=classes)
        except ValidationError as exc:
            raise OwlResolutionError(exc.errors()[0]["msg"])

    @staticmethod
    def _check_ontology_header(element):
        for child in element:
            if isinstance(child.tag, str) and child.tag != OWL_IMPORTS:
                raise OwlParseError(f"Unsupported ontology header element {child.tag}", line=child.sourceline)

    @staticmethod
    def _reference(element) -> str:
        """Class id from rdf:resource="#X" or a nested <owl:Class rdf:about="#X"/>"""
        target = element.get(RDF_RESOURCE)
        if target is None:
            nested = [child for child in element if isinstance(child.tag, str)]
            if len(nested) != 1 or nested[0].tag != OWL_CLASS or nested[0].get(RDF_ABOUT) is None:
                raise OwlParseError(f"{element.tag} must reference exactly one class", line=element.sourceline)
            target = nested[0].get(RDF_ABOUT)
        return target.split("#")[-1]

    def _read_class(self, element) -> Tuple[str, dict]:
        class_id = element.get(RDF_ID)
        if class_id is None and element.get(RDF_ABOUT):
            class_id = element.get(RDF_ABOUT).split("#")[-1]
        if not class_id:
            raise OwlParseError("owl:Class without rdf:ID", line=element.sourceline)

        record = {"comment": None, "parent": None, "disjoint_with": set()}
        for child in element:
            if not isinstance(child.tag, str):
                continue
            if child.tag == RDFS_COMMENT:
                record["comment"] = child.text or None
            elif child.tag == RDFS_SUBCLASS:
                if record["parent"] is not None:
                    raise OwlParseError(f"Class {class_id!r} has more than one parent", line=child.sourceline)
                record["parent"] = self._reference(child)
            elif child.tag == OWL_DISJOINT:
                other = self._reference(child)
                if other == class_id:
                    raise OwlParseError(f"Class {class_id!r} is disjoint with itself", line=child.sourceline)
                record["disjoint_with"].add(other)
            else:
                raise OwlParseError(f"Unsupported element {child.tag} in class {class_id!r}", line=child.sourceline)
        return class_id, record

    def query_subtree(self, tree: OntologyTree, class_id: str) -> List[Instance]:
        """Instances of class_id or any descendant, ordered by id"""
        if class_id not in tree.classes:
            raise ClassLookupError(class_id)
        wanted = tree.descendants(class_id)
        return [instance for instance in tree.instances if instance.of_class in wanted]

    @staticmethod
    def structurally_equal(a: OntologyTree, b: OntologyTree) -> bool:
        """Same root and same classes, parents, comments and disjointness"""
        def shape(tree: OntologyTree):
            return {
                class_id: (c.parent, c.comment, frozenset(c.disjoint_with))
                for class_id, c in tree.classes.items()
            }
        return a.root == b.root and shape(a) == shape(b)


ontology_service = OntologyService()
