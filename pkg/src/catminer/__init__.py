"""catminer: retrieval-augmented extraction and evaluation workbench for
electrocatalysis literature."""

__version__ = "0.1.0"

from .corpus import NER_LABELS, EntityLabel, EntityRecord
from .grammar import ExtractionResult, parse_extraction, render_extraction

__all__ = [
    "__version__",
    "EntityLabel",
    "EntityRecord",
    "NER_LABELS",
    "ExtractionResult",
    "parse_extraction",
    "render_extraction",
]
