"""Feature-vector providers: static word vectors and precomputed contextual
vectors, plus the concept-embedding scheme.

Static tables are GloVe-style text files (``word v1 ... vd``).  Contextual
vectors arrive precomputed in the binary ``AMRE`` wire format produced by the
offline extractor tool; the core never runs a transformer.  Concept vectors
are always static: labels are sense-stripped and looked up in the word table
(`concept-source=none` yields zeros of the configured width).
"""

from __future__ import annotations

import re
import struct
import warnings
from dataclasses import dataclass

import numpy as np

MAGIC = b"AMRE"
FORMAT_VERSION = 1
STANDARD_DIMS = (768, 1024)

SENSE_SUFFIX_RE = re.compile(r"-\d+$")

WORD_STATIC = "static"
WORD_CONTEXTUAL = "contextual"
CONCEPT_STATIC = "static"
CONCEPT_NONE = "none"


class EmbeddingError(ValueError):
    pass


class EmbeddingFormatError(EmbeddingError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class MissingEmbedding(EmbeddingError):
    pass


class StaticTable:
    """Word -> vector table; lookups are total via the unknown vector."""

    def __init__(self, words, matrix):
        self.index = {w: i for i, w in enumerate(words)}
        self.matrix = np.asarray(matrix, dtype=np.float32)
        self.dim = self.matrix.shape[1]
        self.unknown = self.matrix.mean(axis=0)

    def __contains__(self, word):
        return word in self.index

    def __len__(self):
        return len(self.index)

    def row_index(self, word):
        return self.index.get(word)

    def lookup(self, word):
        i = self.index.get(word)
        return self.matrix[i] if i is not None else self.unknown


def load_static(path):
    """Load a GloVe-format text file into a StaticTable."""
    words = []
    rows = []
    dim = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            values = [float(v) for v in parts[1:]]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise EmbeddingError(
                    f"{path}: line {lineno} has {len(values)} dims, expected {dim}"
                )
            words.append(parts[0])
            rows.append(values)
    if not rows:
        raise EmbeddingError(f"{path}: empty embedding file")
    return StaticTable(words, rows)


# ---------------------------------------------------------------------------
# Contextual store and the AMRE wire format
# ---------------------------------------------------------------------------

class ContextualStore:
    """(sentence-id, token index) -> vector, loaded from an AMRE file."""

    def __init__(self, dim):
        self.dim = dim
        self.sentences = {}  # sid -> matrix (n_tokens x dim)

    def add_sentence(self, sentence_id, matrix):
        if sentence_id in self.sentences:
            raise EmbeddingError(f"duplicate sentence id {sentence_id!r} in embedding store")
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise EmbeddingError(
                f"sentence {sentence_id!r}: expected (n, {self.dim}) matrix, got {matrix.shape}"
            )
        self.sentences[sentence_id] = matrix

    def has_sentence(self, sentence_id):
        return sentence_id in self.sentences

    def token_count(self, sentence_id):
        return self.sentences[sentence_id].shape[0]

    def get(self, sentence_id, token_index):
        matrix = self.sentences.get(sentence_id)
        if matrix is None or not (0 <= token_index < matrix.shape[0]):
            raise MissingEmbedding(
                f"no contextual vector for sentence {sentence_id!r} token {token_index}"
            )
        return matrix[token_index]


def write_contextual(path, entries, dim):
    """Write sentences to the AMRE wire format.

    entries: iterable of (sentence_id, matrix) with matrix shaped (n, dim).
    Layout (little-endian): magic 'AMRE', u16 version, u16 dim, then per
    sentence a u16 length-prefixed UTF-8 id, u32 token count, and
    count x dim float32 values.
    """
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<HH", FORMAT_VERSION, dim))
        for sentence_id, matrix in entries:
            matrix = np.ascontiguousarray(matrix, dtype="<f4")
            if matrix.ndim != 2 or matrix.shape[1] != dim:
                raise EmbeddingError(
                    f"sentence {sentence_id!r}: expected (n, {dim}) matrix, got {matrix.shape}"
                )
            sid = sentence_id.encode("utf-8")
            handle.write(struct.pack("<H", len(sid)))
            handle.write(sid)
            handle.write(struct.pack("<I", matrix.shape[0]))
            handle.write(matrix.tobytes())


def load_contextual(path):
    """Read an AMRE file into a ContextualStore.

    Truncation and duplicate sentence ids are errors; a dimension outside
    {768, 1024} is only a warning so small test extractors stay usable.
    """
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != MAGIC:
        raise EmbeddingFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(data) < 8:
        raise EmbeddingFormatError("truncated header", offset=len(data))
    version, dim = struct.unpack_from("<HH", data, 4)
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"unsupported format version {version}", offset=4)
    if dim not in STANDARD_DIMS:
        warnings.warn(f"{path}: unusual embedding dimension {dim}", stacklevel=2)
    store = ContextualStore(dim)
    pos = 8
    n = len(data)
    while pos < n:
        if pos + 2 > n:
            raise EmbeddingFormatError("truncated sentence-id length", offset=pos)
        (sid_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + sid_len > n:
            raise EmbeddingFormatError("truncated sentence id", offset=pos)
        sentence_id = data[pos : pos + sid_len].decode("utf-8")
        pos += sid_len
        if pos + 4 > n:
            raise EmbeddingFormatError("truncated token count", offset=pos)
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        need = count * dim * 4
        if pos + need > n:
            raise EmbeddingFormatError(
                f"truncated vectors for sentence {sentence_id!r}", offset=pos
            )
        matrix = np.frombuffer(data, dtype="<f4", count=count * dim, offset=pos).reshape(
            count, dim
        )
        pos += need
        store.add_sentence(sentence_id, matrix.copy())
    return store


# ---------------------------------------------------------------------------
# Configured provider
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingConfig:
    word_source: str = WORD_STATIC
    concept_source: str = CONCEPT_STATIC
    pooling: str = "span-average"  # extraction-time metadata
    layer: str = "penultimate"  # extraction-time metadata
    concept_dim: int | None = None  # defaults to the static table's dim

    def describe(self):
        return (
            f"word-source={self.word_source} concept-source={self.concept_source} "
            f"pooling={self.pooling} layer={self.layer} concept-dim={self.concept_dim}"
        )


def strip_sense(label):
    return SENSE_SUFFIX_RE.sub("", label)


class Embeddings:
    """Resolved embedding provider: config plus the loaded tables."""

    def __init__(self, config, static=None, contextual=None):
        if config.word_source == WORD_STATIC and static is None:
            raise EmbeddingError("word-source=static requires a static table")
        if config.word_source == WORD_CONTEXTUAL and contextual is None:
            raise EmbeddingError("word-source=contextual requires a contextual store")
        if config.concept_source == CONCEPT_STATIC and static is None:
            raise EmbeddingError("concept-source=static requires a static table")
        self.config = config
        self.static = static
        self.contextual = contextual
        self.word_dim = static.dim if config.word_source == WORD_STATIC else contextual.dim
        if config.concept_source == CONCEPT_STATIC:
            self.concept_dim = static.dim
        else:
            self.concept_dim = config.concept_dim if config.concept_dim is not None else (
                static.dim if static is not None else 0
            )
        self._zero_concept = np.zeros(self.concept_dim, dtype=np.float32)

    def token_vector(self, sentence_id, token):
        """Vector for one token occurrence; contextual lookups must hit."""
        if self.config.word_source == WORD_CONTEXTUAL:
            return self.contextual.get(sentence_id, token.index)
        surface = token.surface.casefold()
        if surface in self.static:
            return self.static.lookup(surface)
        return self.static.lookup(token.lemma.casefold())

    def concept_vector(self, label):
        """Static vector for a concept label, or zeros when disabled."""
        if self.config.concept_source == CONCEPT_NONE:
            return self._zero_concept
        stem = strip_sense(label).casefold()
        if not stem or not stem[0].isalpha():
            return self.static.unknown  # quantities, polarity, quoted strings
        return self.static.lookup(stem)

    def word_index(self, sentence_id, token):
        """Static-table row index for indexed sample storage (-1 = unknown)."""
        surface = token.surface.casefold()
        i = self.static.row_index(surface)
        if i is None:
            i = self.static.row_index(token.lemma.casefold())
        return -1 if i is None else i

    def concept_index(self, label):
        if self.config.concept_source == CONCEPT_NONE:
            return -2  # materializes as zeros
        stem = strip_sense(label).casefold()
        if not stem or not stem[0].isalpha():
            return -1
        i = self.static.row_index(stem)
        return -1 if i is None else i

    def materialize_word(self, index):
        if index < 0:
            return self.static.unknown
        return self.static.matrix[index]

    def materialize_concept(self, index):
        if index == -2:
            return self._zero_concept
        if index < 0:
            return self.static.unknown
        return self.static.matrix[index]
