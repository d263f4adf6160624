"""Deterministic text analysis and document field composition.

Two analyzer modes are supported: a raw whitespace split, and a full
pipeline (alphanumeric segmentation, lowercasing, stopword removal and an
optional light suffix stemmer). Document texts are composed from metadata
fields joined with an explicit ``[SEP]`` marker.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import TYPE_CHECKING

from .errors import AllFieldsEmpty

if TYPE_CHECKING:
    from .corpus import Document

# Maximal runs of Unicode alphanumerics; underscore is excluded on purpose.
_ALNUM_RUN = re.compile(r"[^\W_]+", re.UNICODE)
_WS_RUN = re.compile(r"\s+")

# Fields whose values hold multiple ";"-separated entries.
MULTI_VALUE_FIELDS = frozenset({"authors", "source"})

DOCUMENT_FIELDS = ("title", "abstract", "authors", "journal", "source")

SEP_MARKER = "[SEP]"


def load_stopwords(path=None) -> frozenset[str]:
    """Load a stopword file (one lowercase term per line, '#' comments).

    Without a path, returns the bundled English list.
    """
    if path is None:
        text = (
            resources.files("evidence_pipeline")
            .joinpath("resources/stopwords_en.txt")
            .read_text(encoding="utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    words = set()
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@dataclass(frozen=True)
class AnalyzerConfig:
    """Tokenization settings.

    ``whitespace`` mode splits on whitespace and keeps tokens verbatim,
    ignoring the other flags. ``full`` mode segments alphanumeric runs,
    lowercases, removes stopwords and optionally stems.
    """

    mode: str = "full"
    lowercase: bool = True
    stopwords: frozenset[str] = field(default_factory=frozenset)
    stem: bool = False

    def __post_init__(self):
        if self.mode not in ("whitespace", "full"):
            raise ValueError(f"unknown analyzer mode: {self.mode!r}")
        object.__setattr__(self, "stopwords", frozenset(self.stopwords))
        if any(w != w.lower() for w in self.stopwords):
            raise ValueError("stopword entries must be lowercase")

    def cache_key(self) -> tuple:
        return (self.mode, self.lowercase, tuple(sorted(self.stopwords)), self.stem)


_STEM_SUFFIXES = (
    ("sses", "ss"),
    ("ies", "i"),
    ("ational", "ate"),
    ("tional", "tion"),
    ("ization", "ize"),
    ("fulness", "ful"),
    ("ousness", "ous"),
    ("iveness", "ive"),
    ("ement", "e"),
    ("ments", "ment"),
    ("ingly", ""),
    ("edly", ""),
    ("ing", ""),
    ("ed", ""),
    ("ly", ""),
    ("s", ""),
)


def light_stem(token: str) -> str:
    """Light suffix stemmer: first matching rule wins, stem stays >= 3 chars.

    A deterministic stand-in for lemmatization, not a full Porter stemmer.
    """
    for suffix, repl in _STEM_SUFFIXES:
        if token.endswith(suffix):
            stem = token[: len(token) - len(suffix)] + repl
            if len(stem) >= 3:
                return stem
            return token
    return token


def analyze(text: str, config: AnalyzerConfig) -> list[str]:
    """Tokenize ``text`` per the analyzer config; empty text yields []."""
    if config.mode == "whitespace":
        return text.split()
    tokens = _ALNUM_RUN.findall(text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.stopwords:
        tokens = [t for t in tokens if t not in config.stopwords]
    if config.stem:
        tokens = [light_stem(t) for t in tokens]
    return tokens


def normalize_text(text: str) -> str:
    """Lowercase, collapse whitespace runs to single spaces, trim."""
    return _WS_RUN.sub(" ", text).strip().lower()


def normalize_query(text: str) -> str:
    """Query normalization: identical to document-side normalization."""
    return normalize_text(text)


def validate_field_selection(fields) -> tuple[str, ...]:
    fields = tuple(fields)
    if not fields:
        raise ValueError("field selection must be non-empty")
    if len(set(fields)) != len(fields):
        raise ValueError(f"duplicate fields in selection: {fields}")
    unknown = [f for f in fields if f not in DOCUMENT_FIELDS]
    if unknown:
        raise ValueError(f"unknown document fields: {unknown}")
    return fields


def compose_document_text(doc: "Document", fields) -> str:
    """Compose a document's text from the selected metadata fields.

    Multi-value fields (authors, source) are split on ';' and re-joined with
    single spaces. Non-empty field blocks are joined with the ``[SEP]``
    marker, then the whole string is normalized (lowercased, whitespace
    collapsed), which also lowercases the marker itself.
    """
    fields = validate_field_selection(fields)
    blocks = []
    for name in fields:
        value = getattr(doc, name)
        if name in MULTI_VALUE_FIELDS:
            parts = [p.strip() for p in value.split(";")]
            value = " ".join(p for p in parts if p)
        value = value.strip()
        if value:
            blocks.append(value)
    if not blocks:
        raise AllFieldsEmpty(
            f"document {doc.doc_id!r}: all selected fields {fields} are empty"
        )
    return normalize_text(f" {SEP_MARKER} ".join(blocks))
