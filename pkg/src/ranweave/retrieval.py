"""Document chunking, embedding and cosine top-k retrieval.

Documents are split into 500-character segments with 50-character overlaps
and ranked by cosine similarity. The reference embedder hashes character
trigrams into a fixed 256-dimensional unit vector, so retrieval is fully
deterministic and needs no network; a remote HTTP embedder with the same
interface can be plugged in instead.

The number of chunks injected per query grows with the iteration count:
top-10 on the first attempt, +10 per attempt, capped at 50.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

EMBEDDING_DIM = 256
CHUNK_SIZE = 500
CHUNK_OVERLAP = 50
K_START = 10
K_STEP = 10
K_CAP = 50

EMBED_BASE_URL_ENV = "RANWEAVE_EMBED_BASE_URL"
EMBED_MODEL_ENV = "RANWEAVE_EMBED_MODEL"
EMBED_API_KEY_ENV = "RANWEAVE_EMBED_API_KEY"
DEFAULT_REMOTE_EMBED_MODEL = "text-embedding-3-small"


class RetrievalUnavailableError(RuntimeError):
    """The remote embedding backend could not be reached or answered badly."""


@dataclass(frozen=True)
class DocChunk:
    doc_id: str
    start: int
    end: int
    text: str
    vector: np.ndarray

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def chunk_spans(length: int, size: int = CHUNK_SIZE, overlap: int = CHUNK_OVERLAP) -> list[tuple[int, int]]:
    """Character spans covering [0, length) with a fixed overlap stride."""
    if overlap < 0 or overlap >= size:
        raise ValueError(f"overlap must satisfy 0 <= overlap < size, got {overlap} and {size}")
    if length <= 0:
        return []
    stride = size - overlap
    spans = []
    start = 0
    while True:
        end = min(start + size, length)
        spans.append((start, end))
        if end == length:
            return spans
        start += stride


def chunk_document(
    doc_id: str,
    text: str,
    size: int = CHUNK_SIZE,
    overlap: int = CHUNK_OVERLAP,
    embed_fn: Callable[[str], np.ndarray] | None = None,
) -> list[DocChunk]:
    embedder = embed_fn or embed
    chunks = []
    for start, end in chunk_spans(len(text), size, overlap):
        piece = text[start:end]
        chunks.append(DocChunk(doc_id=doc_id, start=start, end=end, text=piece, vector=embedder(piece)))
    return chunks


def reconstruct(chunks: Iterable[DocChunk]) -> str:
    """Rebuild the original document from its overlapping chunks."""
    pieces = []
    cursor = 0
    for chunk in sorted(chunks, key=lambda c: c.start):
        pieces.append(chunk.text[cursor - chunk.start :])
        cursor = chunk.end
    return "".join(pieces)


def embed(text: str) -> np.ndarray:
    """Deterministic character-trigram feature hashing, L2-normalized.

    Empty text embeds to the zero vector.
    """
    vector = np.zeros(EMBEDDING_DIM, dtype=np.float64)
    normalized = text.casefold()
    if not normalized:
        return vector
    grams = (
        [normalized[i : i + 3] for i in range(len(normalized) - 2)]
        if len(normalized) >= 3
        else [normalized]
    )
    for gram in grams:
        digest = zlib.crc32(gram.encode("utf-8"))
        bucket = digest % EMBEDDING_DIM
        sign = 1.0 if (digest >> 8) & 1 else -1.0
        vector[bucket] += sign
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        return vector
    return vector / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product of normalized vectors; zero vectors score 0 by convention."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not np.any(a) or not np.any(b):
        return 0.0
    return float(np.dot(a, b))


def k_schedule(iteration: int) -> int:
    """Retrieval width for a given attempt: 10, 20, ..., capped at 50."""
    if iteration < 1:
        raise ValueError(f"iteration must be >= 1, got {iteration}")
    return min(K_START + K_STEP * (iteration - 1), K_CAP)


class VectorStore:
    """In-memory chunk index queried by cosine similarity."""

    def __init__(self, embed_fn: Callable[[str], np.ndarray] | None = None):
        self._embed = embed_fn or embed
        self._chunks: list[DocChunk] = []

    def __len__(self) -> int:
        return len(self._chunks)

    @property
    def chunks(self) -> tuple[DocChunk, ...]:
        return tuple(self._chunks)

    def add_document(self, doc_id: str, text: str) -> int:
        added = chunk_document(doc_id, text, embed_fn=self._embed)
        self._chunks.extend(added)
        return len(added)

    def add_directory(self, path: str | Path, suffixes: tuple[str, ...] = (".md", ".txt")) -> int:
        """Load every plain-text knowledge file under a directory."""
        root = Path(path)
        count = 0
        for file in sorted(root.rglob("*")):
            if file.suffix in suffixes and file.is_file():
                count += self.add_document(str(file.relative_to(root)), file.read_text(encoding="utf-8"))
        return count

    def query(self, query_text: str, iteration: int = 1) -> list[DocChunk]:
        """Top chunks for this attempt, ties broken by (doc_id, start)."""
        k = k_schedule(iteration)
        query_vector = self._embed(query_text)
        scored = [
            (-cosine(query_vector, chunk.vector), chunk.doc_id, chunk.start, chunk)
            for chunk in self._chunks
        ]
        scored.sort(key=lambda item: item[:3])
        return [chunk for _, _, _, chunk in scored[:k]]


class RemoteEmbedder:
    """HTTP embedding backend, interface-compatible with the reference one.

    Configuration comes from the environment unless passed explicitly; any
    transport or protocol failure surfaces as RetrievalUnavailableError.
    """

    def __init__(
        self,
        base_url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 30.0,
    ):
        self.base_url = (base_url or os.environ.get(EMBED_BASE_URL_ENV, "")).rstrip("/")
        self.model = model or os.environ.get(EMBED_MODEL_ENV, DEFAULT_REMOTE_EMBED_MODEL)
        self.api_key = api_key or os.environ.get(EMBED_API_KEY_ENV, "")
        self.timeout = timeout
        if not self.base_url:
            raise RetrievalUnavailableError(
                f"no embedding endpoint configured; set {EMBED_BASE_URL_ENV}"
            )

    def __call__(self, text: str) -> np.ndarray:
        payload = json.dumps({"model": self.model, "input": [text]}).encode("utf-8")
        request = urllib.request.Request(
            f"{self.base_url}/embeddings",
            data=payload,
            headers={
                "Content-Type": "application/json",
                "Authorization": f"Bearer {self.api_key}",
            },
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                body = json.loads(response.read().decode("utf-8"))
            components = body["data"][0]["embedding"]
        except (urllib.error.URLError, KeyError, IndexError, ValueError) as exc:
            raise RetrievalUnavailableError(f"embedding request failed: {exc}") from exc
        vector = np.asarray(components, dtype=np.float64)
        norm = float(np.linalg.norm(vector))
        return vector / norm if norm else vector
