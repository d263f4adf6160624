import sys
from pathlib import Path

import pytest

from evidence_pipeline.corpus import Document, GoldMapping, Query
from evidence_pipeline.textproc import AnalyzerConfig

sys.path.insert(0, str(Path(__file__).parent))

REPO_ROOT = Path(__file__).resolve().parent.parent
SYNTH_SMALL = REPO_ROOT / "data" / "synthetic" / "small"
SYNTH_STUDY = REPO_ROOT / "data" / "synthetic" / "study"


@pytest.fixture
def whitespace_analyzer():
    return AnalyzerConfig(mode="whitespace")


@pytest.fixture
def full_analyzer():
    return AnalyzerConfig(mode="full")


@pytest.fixture
def three_doc_collection():
    """The hand-counted corpus: {"cat sat", "cat cat", "dog"}."""
    return [
        Document(doc_id="d1", title="cat sat"),
        Document(doc_id="d2", title="cat cat"),
        Document(doc_id="d3", title="dog"),
    ]


@pytest.fixture
def query_factory():
    def make(text, qid="q1", split="test"):
        return Query(query_id=qid, text=text, split=split)

    return make


@pytest.fixture
def gold_factory():
    def make(entries):
        return GoldMapping(entries=dict(entries))

    return make
