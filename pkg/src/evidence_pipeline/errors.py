"""Exception hierarchy shared across the pipeline.

Every error raised by the engine derives from :class:`PipelineError`, so the
CLI can map any engine failure to a stable exit code.
"""


class PipelineError(Exception):
    """Base class for all engine errors."""


# --- data loading ---------------------------------------------------------

class ParseError(PipelineError):
    """Input file is malformed (bad header, wrong column count, bad JSON)."""


class MissingField(ParseError):
    """A row lacks a required field such as doc_id or query_id."""


class DuplicateId(PipelineError):
    """A doc_id occurs more than once in a collection."""


class DuplicateQuery(PipelineError):
    """A query_id has more than one gold row."""


class UnknownDocument(PipelineError):
    """A referenced doc_id does not exist in the collection/index."""


class EmptyInput(PipelineError):
    """An operation that needs at least one element received none."""


# --- text processing ------------------------------------------------------

class AllFieldsEmpty(PipelineError):
    """Every selected metadata field is empty for a document."""


# --- sparse retrieval -----------------------------------------------------

class EmptyCollection(PipelineError):
    """Index build requested over an empty collection."""


class InsufficientCandidates(PipelineError):
    """Hard-negative mining could not find enough non-gold candidates."""


# --- dense retrieval ------------------------------------------------------

class EmptyTokens(PipelineError):
    """Chunking received a zero-length token sequence."""


class EmptyChunkList(PipelineError):
    """Pooling received no chunk vectors."""


class DimensionMismatch(PipelineError):
    """Vector dimensions disagree."""


class ZeroVector(PipelineError):
    """Cosine similarity is undefined for a zero vector."""


class BadMagic(PipelineError):
    """Binary file does not start with the expected magic bytes."""


class TruncatedFile(PipelineError):
    """Binary file ended before the declared payload."""


# --- contrastive training -------------------------------------------------

class EmptyText(PipelineError):
    """Encoder received text with no tokens."""


class NonSquareMatrix(PipelineError):
    """In-batch loss requires an N x N similarity matrix."""


class NonFiniteInput(PipelineError):
    """A numeric input contains NaN or infinity."""


class KLessThanN(PipelineError):
    """Hard-negative loss requires at least N candidate columns."""


class EmptyTrainingSet(PipelineError):
    """Training requires at least one example."""


# --- re-ranking -----------------------------------------------------------

class MissingScore(PipelineError):
    """The scorer has no score for a required (query, doc) pair."""


class DuplicatePair(PipelineError):
    """A (query_id, doc_id) pair occurs twice in a score file."""


# --- evaluation -----------------------------------------------------------

class MissingGold(PipelineError):
    """A run query has no gold entry."""


class EmptyRun(PipelineError):
    """Metric computation over an empty run."""


class LengthMismatch(PipelineError):
    """Paired samples have different lengths."""


class QuerySetMismatch(PipelineError):
    """Compared runs cover different query sets."""


# --- CLI ------------------------------------------------------------------

class ConfigInvalid(PipelineError):
    """Pipeline configuration is malformed or contains unknown keys."""


class MissingArtifact(PipelineError):
    """A stage's upstream artifact is absent."""
