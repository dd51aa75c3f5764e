"""Literature mining for mechanical constitutive models.

Converts scientific PDFs into a validated, queryable database of
constitutive models through a two-stage agent pipeline (cheap relevance
gate, high-capability structured extractor), deterministic validation of
symbol grounding, a self-evaluation harness and a reviewable store behind
an HTTP API.
"""

__version__ = "0.1.0"

from .evaluation import (  # noqa: F401
    ConfusionCounts,
    GroundTruthDoc,
    MetricsReport,
    RocCurve,
    confusion,
    match_extractions,
    metrics,
    roc,
)
from .ingest import (  # noqa: F401
    CandidateBlock,
    HeadSegment,
    RawDocument,
    SerializedDoc,
    parse_pdf,
    segment_equation_candidates,
    truncate_head,
)
from .latex import (  # noqa: F401
    extract_equation_symbols,
    normalize_equation,
    tokenize_equation,
)
from .records import (  # noqa: F401
    ConstitutiveModelRecord,
    GroundingReport,
    ValidationReport,
    check_grounding,
    validate_record,
)
from .units import (  # noqa: F401
    PlausibilityTable,
    normalize_unit,
    resolve_scaled_value,
)
