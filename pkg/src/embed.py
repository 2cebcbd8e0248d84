"""
Embedding providers.

The local provider is a deterministic, corpus-aware stand-in for a sentence
encoder: each token is a signed feature-hashed bag of its character n-grams, a
text is the IDF-weighted sum of its token vectors. The remote provider calls the
model gateway's `embed` verb.
"""

import abc
import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import orjson
from sklearn.utils import murmurhash3_32

from .analysis import EMBED_ANALYZER, Analyzer
from .corpus import Passage
from .errors import EmbeddingError, InputError, ProtocolError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Unit-norm, finite real vector."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise EmbeddingError("embedding must be a non-empty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise EmbeddingError("embedding contains non-finite values")
        norm = float(np.linalg.norm(values))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise EmbeddingError(f"embedding is not unit-norm (norm={norm:.6g})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, EmbeddingVector) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


def normalize(values: np.ndarray) -> EmbeddingVector:
    norm = float(np.linalg.norm(values))
    if norm == 0.0 or not math.isfinite(norm):
        raise EmbeddingError("text produced a zero vector; nothing left to embed after filtering")
    return EmbeddingVector(values / norm)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch: {a.dim} != {b.dim}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


class EmbeddingProvider(abc.ABC):
    """Maps texts to unit vectors; identical text gives an identical vector."""

    name: str = "provider"

    def __init__(self, dim: int):
        if dim < 1:
            raise InputError(f"dim must be positive, got {dim}")
        self.dim = dim

    @abc.abstractmethod
    def embed(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        """Embed already-validated texts, preserving order."""


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str]) -> List[EmbeddingVector]:
    """Validate inputs then embed them in order."""
    if not texts:
        raise InputError("embed_texts needs at least one text")
    for i, text in enumerate(texts):
        if not text or not text.strip():
            raise InputError(f"text #{i} is empty")
    return provider.embed(list(texts))


class LocalEmbeddingProvider(EmbeddingProvider):
    """Hashed character n-gram token vectors combined with collection IDF."""

    name = "local"

    def __init__(
        self,
        dim: int = 512,
        seed: int = 13,
        ngram_range: Tuple[int, int] = (3, 5),
        idf: Optional[Mapping[str, float]] = None,
        default_idf: float = 1.0,
        analyzer: Analyzer = EMBED_ANALYZER,
    ):
        super().__init__(dim)
        self.seed = seed
        self.ngram_range = ngram_range
        self.idf: Dict[str, float] = dict(idf or {})
        self.default_idf = default_idf
        self.analyzer = analyzer
        self._token_cache: Dict[str, np.ndarray] = {}

    @classmethod
    def from_passages(cls, passages: Mapping[str, Passage], **kwargs) -> "LocalEmbeddingProvider":
        """Smoothed IDF, ln((1 + N) / (1 + df)) + 1, over the collection."""
        analyzer = kwargs.get("analyzer", EMBED_ANALYZER)
        df: Counter = Counter()
        for passage in passages.values():
            df.update(set(analyzer.tokenize(passage.text)))
        n = len(passages)
        idf = {t: math.log((1 + n) / (1 + c)) + 1.0 for t, c in df.items()}
        return cls(idf=idf, default_idf=math.log(1 + n) + 1.0, **kwargs)

    @property
    def config_hash(self) -> str:
        idf_digest = hashlib.sha256(orjson.dumps(sorted(self.idf.items()))).hexdigest()
        payload = {
            "dim": self.dim,
            "seed": self.seed,
            "ngram_range": list(self.ngram_range),
            "default_idf": self.default_idf,
            "analyzer": self.analyzer.to_dict(),
            "idf": idf_digest,
        }
        return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()

    def token_features(self, token: str) -> List[str]:
        features = [f"w:{token}"]
        low, high = self.ngram_range
        for n in range(low, high + 1):
            features.extend(f"g:{token[i:i + n]}" for i in range(len(token) - n + 1))
        return features

    def token_vector(self, token: str) -> np.ndarray:
        cached = self._token_cache.get(token)
        if cached is not None:
            return cached
        vec = np.zeros(self.dim, dtype=np.float64)
        for feature in self.token_features(token):
            h = murmurhash3_32(feature, seed=self.seed)
            vec[abs(h) % self.dim] += 1.0 if h >= 0 else -1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        vec.setflags(write=False)
        self._token_cache[token] = vec
        return vec

    def idf_of(self, token: str) -> float:
        return self.idf.get(token, self.default_idf)

    def text_vector(self, text: str) -> EmbeddingVector:
        counts = Counter(self.analyzer.tokenize(text))
        acc = np.zeros(self.dim, dtype=np.float64)
        # sorted accumulation keeps the sum exactly order-independent
        for token in sorted(counts):
            acc += counts[token] * self.idf_of(token) * self.token_vector(token)
        return normalize(acc)

    def embed(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        return [self.text_vector(text) for text in texts]


class RemoteEmbeddingProvider(EmbeddingProvider):
    """Batches texts to the gateway `embed` verb and renormalizes the answers."""

    name = "remote"

    def __init__(self, client, dim: int, batch_size: int = 32):
        super().__init__(dim)
        self.client = client
        self.batch_size = batch_size

    def embed(self, texts: Sequence[str]) -> List[EmbeddingVector]:
        vectors: List[EmbeddingVector] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start:start + self.batch_size])
            raw = self.client.embed(batch)
            if len(raw) != len(batch):
                raise ProtocolError(f"gateway returned {len(raw)} vectors for {len(batch)} texts")
            for row in raw:
                try:
                    values = np.asarray(row, dtype=np.float64)
                except (TypeError, ValueError) as e:
                    raise ProtocolError(f"gateway vector is not numeric: {e}") from e
                if values.shape != (self.dim,):
                    raise ProtocolError(f"gateway vector has shape {values.shape}, expected ({self.dim},)")
                if not np.all(np.isfinite(values)):
                    raise ProtocolError("gateway vector contains non-finite values")
                vectors.append(normalize(values))
        return vectors


def build_provider(config, passages: Optional[Mapping[str, Passage]] = None, client=None) -> EmbeddingProvider:
    """
    Provider selected by `config.embedding.provider`.

    The local provider takes its IDF table from `passages` when given; the
    remote one needs a gateway client.
    """
    settings = config.embedding
    if settings.provider == "remote":
        if client is None:
            raise InputError("the remote embedding provider needs a gateway client")
        return RemoteEmbeddingProvider(client, dim=settings.dim, batch_size=settings.batch_size)
    kwargs = dict(dim=settings.dim, seed=settings.seed, ngram_range=(settings.ngram_min, settings.ngram_max))
    if passages:
        return LocalEmbeddingProvider.from_passages(passages, **kwargs)
    return LocalEmbeddingProvider(**kwargs)
