"""Hidden-state extraction client for the corank bundle format."""

from .extractor import (
    BatchOutcome,
    ExtractionError,
    ExtractionJob,
    ExtractionResult,
    ModelRunner,
    TokenPartition,
    assign_token_spans,
    extract_batch,
    extract_representations,
    resolve_layer,
)

__version__ = "0.1.0"
