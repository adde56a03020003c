"""Binary training-sample files.

Wide rows (contextual embeddings are recorded directly in the features)
make text formats impractical, so samples are stored as packed float32
rows plus a 32-bit label id, with a text sidecar mapping label ids to
strings.

Two storage modes share one header:

* dense   -- each row holds the full materialized feature vector;
* indexed -- embedding blocks are collapsed to one table-index float each
             (static vectors only), recovering the classic lookup layout.

A dense row is exactly ``sum(block_width - 1)`` floats wider than its
indexed counterpart, i.e. (d - 1) * n for n embedded blocks of dimension d;
`expected_file_size` exposes the arithmetic so tests can pin byte sizes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"AMRS"
VERSION = 1
DENSE = 0
INDEXED = 1

BLOCK_WORD = 0
BLOCK_CONCEPT = 1

CLASSIFIER_IDS = {"action": 0, "label": 1, "reentrancy": 2}
CLASSIFIER_NAMES = {v: k for k, v in CLASSIFIER_IDS.items()}

_HEADER = struct.Struct("<4sHBBIII H".replace(" ", ""))  # + hash bytes + blocks
_BLOCK = struct.Struct("<IIB")


class SampleFileError(ValueError):
    pass


@dataclass
class SampleFile:
    classifier: str
    storage: int
    dense_width: int
    row_floats: int
    manifest_hash: str
    rows: np.ndarray  # (count, row_floats) float32
    label_ids: np.ndarray  # (count,) int64
    labels: list  # id -> string
    blocks: list  # (dense offset, width, kind) of the embedded blocks

    @property
    def count(self):
        return len(self.label_ids)


def header_size(manifest_hash, n_blocks=0):
    return _HEADER.size + len(manifest_hash.encode("utf-8")) + 4 + n_blocks * _BLOCK.size


def row_size(row_floats):
    return row_floats * 4 + 4


def expected_file_size(count, row_floats, manifest_hash, n_blocks=0):
    return header_size(manifest_hash, n_blocks) + count * row_size(row_floats)


def label_vocabulary(labels):
    """First-appearance label vocabulary; returns (vocab list, id array)."""
    vocab = []
    index = {}
    ids = np.empty(len(labels), dtype=np.int64)
    for i, label in enumerate(labels):
        if label not in index:
            index[label] = len(vocab)
            vocab.append(label)
        ids[i] = index[label]
    return vocab, ids


def write_samples(path, classifier, rows, labels, dense_width, storage, manifest_hash,
                  blocks=()):
    """Write one classifier's samples plus the `.labels` text sidecar.

    `blocks` describes the embedded blocks as (dense offset, width, kind)
    with kind in {'word', 'concept'}; required for indexed storage so the
    reader can materialize rows with just a static table.
    """
    rows = np.ascontiguousarray(rows, dtype="<f4")
    if rows.ndim != 2:
        raise SampleFileError(f"rows must be 2-D, got shape {rows.shape}")
    if storage == INDEXED and not blocks:
        raise SampleFileError("indexed storage requires the embedded block layout")
    vocab, ids = label_vocabulary(labels)
    if len(ids) != rows.shape[0]:
        raise SampleFileError("row/label count mismatch")
    hash_bytes = manifest_hash.encode("utf-8")
    kind_codes = {"word": BLOCK_WORD, "concept": BLOCK_CONCEPT}
    with open(path, "wb") as handle:
        handle.write(
            _HEADER.pack(
                MAGIC,
                VERSION,
                CLASSIFIER_IDS[classifier],
                storage,
                rows.shape[0],
                dense_width,
                rows.shape[1],
                len(hash_bytes),
            )
        )
        handle.write(hash_bytes)
        handle.write(struct.pack("<I", len(blocks)))
        for offset, width, kind in blocks:
            handle.write(_BLOCK.pack(offset, width, kind_codes[kind]))
        ids32 = ids.astype("<u4")
        for row, label_id in zip(rows, ids32):
            handle.write(row.tobytes())
            handle.write(struct.pack("<I", label_id))
    with open(str(path) + ".labels", "w", encoding="utf-8") as handle:
        handle.write("\n".join(vocab) + ("\n" if vocab else ""))


def read_samples(path):
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != MAGIC:
        raise SampleFileError(f"{path}: bad magic {data[:4]!r}")
    magic, version, cls_id, storage, count, dense_width, row_floats, hash_len = _HEADER.unpack_from(
        data, 0
    )
    if version != VERSION:
        raise SampleFileError(f"{path}: unsupported version {version}")
    pos = _HEADER.size
    manifest_hash = data[pos : pos + hash_len].decode("utf-8")
    pos += hash_len
    (n_blocks,) = struct.unpack_from("<I", data, pos)
    pos += 4
    kind_names = {BLOCK_WORD: "word", BLOCK_CONCEPT: "concept"}
    blocks = []
    for _ in range(n_blocks):
        offset, width, kind = _BLOCK.unpack_from(data, pos)
        pos += _BLOCK.size
        blocks.append((offset, width, kind_names[kind]))
    rsz = row_size(row_floats)
    if len(data) != pos + count * rsz:
        raise SampleFileError(
            f"{path}: expected {pos + count * rsz} bytes for {count} rows, file has {len(data)}"
        )
    rows = np.empty((count, row_floats), dtype=np.float32)
    ids = np.empty(count, dtype=np.int64)
    for i in range(count):
        rows[i] = np.frombuffer(data, dtype="<f4", count=row_floats, offset=pos)
        pos += row_floats * 4
        (label_id,) = struct.unpack_from("<I", data, pos)
        ids[i] = label_id
        pos += 4
    try:
        with open(str(path) + ".labels", encoding="utf-8") as handle:
            labels = [line.rstrip("\n") for line in handle if line.strip() != ""]
    except FileNotFoundError:
        raise SampleFileError(f"{path}: missing .labels sidecar")
    return SampleFile(
        CLASSIFIER_NAMES[cls_id], storage, dense_width, row_floats, manifest_hash, rows, ids,
        labels, blocks,
    )


def materialize_rows(sample_file, static_table=None):
    """Expand an indexed sample file to dense feature rows.

    Word index -1 and concept index -1 materialize as the static table's
    unknown vector; index -2 is an absent slot (zeros).
    """
    if sample_file.storage == DENSE:
        return sample_file.rows
    if static_table is None:
        raise SampleFileError("indexed samples need the static table to materialize")
    zeros = {}
    out = np.zeros((sample_file.count, sample_file.dense_width), dtype=np.float32)
    for r, row in enumerate(sample_file.rows):
        cursor = 0
        dense_pos = 0
        for offset, width, _ in sample_file.blocks:
            gap = offset - dense_pos
            out[r, dense_pos:offset] = row[cursor : cursor + gap]
            cursor += gap
            index = int(row[cursor])
            cursor += 1
            if index == -2:
                out[r, offset : offset + width] = zeros.setdefault(width, np.zeros(width))
            elif index == -1:
                out[r, offset : offset + width] = static_table.unknown[:width]
            else:
                out[r, offset : offset + width] = static_table.matrix[index][:width]
            dense_pos = offset + width
        out[r, dense_pos:] = row[cursor:]
    return out
