"""specgraph: hybrid semantic/symbolic question answering over product-spec corpora.

The engine indexes a snapshot corpus twice: an entity-centric textual graph
for semantic chunk retrieval, and a typed triple graph for exact structured
querying (filtering, aggregation, exhaustive listing). Answers are produced
by configurable orchestration of the two retrievers.
"""

__version__ = "0.1.0"
