"""Pre-trained word vectors and activity-name encoders.

Two interchangeable activity encoders feed the sequence models: an
embedding-based one that averages word vectors over the tokens of an
activity name, and a plain one-hot encoder fitted on a vocabulary.  Both
expose ``n_features`` and ``encode(activity)``.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ConfigurationError, FormatError

_TOKEN_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Split on whitespace and punctuation (underscore included), dropping
    empty tokens."""
    return [tok for tok in _TOKEN_SPLIT.split(text) if tok]


def activity_key(activity: str, casing: str = "uncased") -> str:
    """Key under which a whole activity name is stored: spaces become
    underscores, and uncased stores fold to lowercase."""
    key = activity.strip().replace(" ", "_")
    return key.lower() if casing == "uncased" else key


@dataclass(frozen=True)
class EmbeddingStore:
    """An in-memory word-vector table loaded from a text file.

    ``kind`` says what the keys are: ``token_level`` stores have one vector
    per word, ``activity_level`` stores one vector per full activity name
    (with spaces escaped as underscores).
    """

    dim: int
    vectors: dict[str, np.ndarray]
    casing: str = "uncased"
    kind: str = "token_level"

    def __post_init__(self):
        if self.casing not in ("cased", "uncased"):
            raise ConfigurationError(f"unknown casing {self.casing!r}")
        if self.kind not in ("token_level", "activity_level"):
            raise ConfigurationError(f"unknown store kind {self.kind!r}")

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, key):
        return key in self.vectors

    def get(self, key: str) -> np.ndarray | None:
        return self.vectors.get(key)


def load_embedding_store(
    source,
    casing: str = "uncased",
    kind: str = "token_level",
) -> EmbeddingStore:
    """Parse a word2vec-style text file: optional ``<count> <dim>`` header,
    then one ``token v1 .. vd`` line each.

    Uncased stores lowercase their keys; when folding makes two lines
    collide, the later line wins.  Raises :class:`FormatError` with the line
    number for dimension mismatches or unparseable values.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_embedding_store(fh, casing=casing, kind=kind)
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))

    vectors: dict[str, np.ndarray] = {}
    dim = None
    for lineno, raw in enumerate(source, start=1):
        parts = raw.rstrip("\n").split(" ")
        parts = [p for p in parts if p]
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2:
            try:
                int(parts[0]), int(parts[1])
            except ValueError:
                pass
            else:
                continue  # count/dim header
        key, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise FormatError(f"line {lineno}: no vector components")
        elif len(values) != dim:
            raise FormatError(
                f"line {lineno}: expected {dim} components, got {len(values)}"
            )
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if casing == "uncased":
            key = key.lower()
        vectors[key] = vec

    if not vectors:
        raise FormatError("embedding file contains no vectors")
    return EmbeddingStore(dim=dim, vectors=vectors, casing=casing, kind=kind)


def save_embedding_store(store: EmbeddingStore, path) -> None:
    """Write a store back out in word2vec text format, header included."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(store.vectors)} {store.dim}\n")
        for key, vec in store.vectors.items():
            fh.write(key + " " + " ".join(repr(float(v)) for v in vec) + "\n")


@dataclass
class ActivityEmbedder:
    """Turns an activity name into a fixed vector via the embedding store.

    Token-level stores average the vectors of in-vocabulary tokens; an
    activity-level store is probed with the whole escaped name first and
    falls back to token averaging.  Fully out-of-vocabulary names map to the
    zero vector and are recorded in ``oov_activities``.
    """

    store: EmbeddingStore
    oov_activities: set = field(default_factory=set)
    n_lookups: int = 0
    n_oov: int = 0

    @property
    def n_features(self) -> int:
        return self.store.dim

    def encode(self, activity: str) -> np.ndarray:
        self.n_lookups += 1
        if self.store.kind == "activity_level":
            whole = self.store.get(activity_key(activity, self.store.casing))
            if whole is not None:
                return whole
        tokens = tokenize(activity)
        if self.store.casing == "uncased":
            tokens = [t.lower() for t in tokens]
        hits = [self.store.vectors[t] for t in tokens if t in self.store.vectors]
        if not hits:
            self.n_oov += 1
            self.oov_activities.add(activity)
            return np.zeros(self.store.dim, dtype=np.float64)
        return np.mean(hits, axis=0)

    def transform(self, activities) -> np.ndarray:
        return np.stack([self.encode(a) for a in activities])

    def coverage(self) -> dict:
        return {
            "lookups": self.n_lookups,
            "oov": self.n_oov,
            "oov_activities": sorted(self.oov_activities),
        }


class OneHotActivityEncoder(BaseEstimator, TransformerMixin):
    """One-hot activity encoder fitted on a vocabulary.

    The index is sorted so the encoding does not depend on trace order.
    Unknown activities at encode time map to the all-zero vector.
    """

    def fit(self, vocabulary, y=None):
        vocab = sorted(set(vocabulary))
        if not vocab:
            raise ConfigurationError("cannot fit one-hot encoder on empty vocabulary")
        self.index_ = {a: i for i, a in enumerate(vocab)}
        self.size_ = len(vocab)
        return self

    @property
    def n_features(self) -> int:
        self._check_fitted()
        return self.size_

    def encode(self, activity: str) -> np.ndarray:
        self._check_fitted()
        vec = np.zeros(self.size_, dtype=np.float64)
        pos = self.index_.get(activity)
        if pos is not None:
            vec[pos] = 1.0
        return vec

    def transform(self, activities) -> np.ndarray:
        return np.stack([self.encode(a) for a in activities])

    def _check_fitted(self):
        if not hasattr(self, "index_"):
            raise NotFittedError("OneHotActivityEncoder is not fitted; call fit first")
