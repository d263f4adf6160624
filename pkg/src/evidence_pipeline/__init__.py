"""Two-stage evidence retrieval engine.

Sparse BM25 candidate generation and hard-negative mining, dense retrieval
over pooled chunk embeddings, depth-limited re-ranking via pluggable
scorers, and an evaluation harness with MRR/Recall metrics and paired
significance tests.
"""

__version__ = "0.1.0"
