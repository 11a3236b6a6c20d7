"""
Schemas Package
Pydantic models for statements, ontology, scoring, mining and reports
"""
from .statement import (  # noqa: F401
    DeclaredTotals,
    FinancialStatement,
    LineItem,
    LineItemCategory,
    StatementFormat,
    StatementTotals,
    SupplementalFigures,
    ValidationCheck,
    ValidationReport,
)
from .scoring import RatioVector, Zone, ZScoreResult  # noqa: F401
from .ontology import (  # noqa: F401
    Facet,
    FacetConstraint,
    Instance,
    OntClass,
    OntologyTree,
    Slot,
    SlotRange,
)
from .mining import (  # noqa: F401
    AssociationRule,
    ClusterModel,
    FirmFeatures,
    Item,
    ItemSet,
    MiningConfig,
    MiningResult,
    Transaction,
    TransactionSet,
)
from .pipeline import (  # noqa: F401
    BankruptcyReport,
    FirmReportEntry,
    InputFailure,
    OwlMode,
    PipelineConfig,
    ReportFormat,
    ValidationSummary,
)
