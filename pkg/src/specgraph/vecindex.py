"""Exact-search embedding index shared by pattern and entity retrieval.

A deliberate linear scan: corpora here are thousands of entries at most, and
exact, deterministic ranking matters more than speed. Cosine similarity with
zero vectors scoring 0.0 against everything; ties break by ascending key.
"""

from __future__ import annotations

import math
from pathlib import Path


class DimensionMismatch(ValueError):
    pass


def cosine(u: list[float], v: list[float]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return dot / (nu * nv)


class EmbeddingIndex:
    """Keyed vectors of one fixed dimension with top-k cosine search."""

    def __init__(self, dim: int | None = None):
        self.dim = dim
        self._entries: dict[str, tuple[list[float], object]] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self) -> list[str]:
        return sorted(self._entries)

    def vector(self, key: str) -> list[float]:
        return self._entries[key][0]

    def payload(self, key: str):
        return self._entries[key][1]

    def upsert(self, key: str, vector: list[float], payload=None) -> None:
        if self.dim is None:
            self.dim = len(vector)
        if len(vector) != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {len(vector)}")
        self._entries[key] = (list(vector), payload)

    def search(self, query: list[float], k: int) -> list[tuple[str, float]]:
        if self.dim is not None and len(query) != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {len(query)}")
        scored = [(key, cosine(query, vec)) for key, (vec, _) in self._entries.items()]
        scored.sort(key=lambda kv: (-kv[1], kv[0]))
        return scored[: max(k, 0)]

    # -- persistence: header line then one record per line -------------------

    def save(self, path: str | Path) -> None:
        lines = [f"{self.dim if self.dim is not None else 0} {len(self._entries)}"]
        for key in sorted(self._entries):
            vec, _ = self._entries[key]
            lines.append(key + "\t" + ",".join(repr(x) for x in vec))
        Path(path).write_text("\n".join(lines) + "\n", "utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingIndex":
        lines = Path(path).read_text("utf-8").splitlines()
        if not lines:
            raise ValueError(f"empty index file {path}")
        dim_s, count_s = lines[0].split()
        index = cls(dim=int(dim_s) or None)
        for line in lines[1 : 1 + int(count_s)]:
            key, _, vec_s = line.partition("\t")
            vec = [float(x) for x in vec_s.split(",")] if vec_s else []
            index.upsert(key, vec)
        return index
