"""The AMRE embedding wire format (producer side).

Layout, all little-endian: magic ``AMRE``, u16 format version, u16 dim, then
one record per sentence: u16 length-prefixed UTF-8 sentence id, u32 token
count, then count x dim float32 vectors.  One file holds many sentences.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"AMRE"
FORMAT_VERSION = 1


class WireError(ValueError):
    pass


def write_amre(path, entries, dim):
    """entries: iterable of (sentence_id, float32 matrix shaped (n, dim))."""
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<HH", FORMAT_VERSION, dim))
        for sentence_id, matrix in entries:
            matrix = np.ascontiguousarray(matrix, dtype="<f4")
            if matrix.ndim != 2 or matrix.shape[1] != dim:
                raise WireError(
                    f"sentence {sentence_id!r}: expected (n, {dim}), got {matrix.shape}"
                )
            sid = sentence_id.encode("utf-8")
            handle.write(struct.pack("<H", len(sid)))
            handle.write(sid)
            handle.write(struct.pack("<I", matrix.shape[0]))
            handle.write(matrix.tobytes())


def read_amre(path):
    """Read back an AMRE file: (dim, ordered dict sentence id -> matrix)."""
    with open(path, "rb") as handle:
        data = handle.read()
    if data[:4] != MAGIC:
        raise WireError(f"bad magic {data[:4]!r}")
    version, dim = struct.unpack_from("<HH", data, 4)
    if version != FORMAT_VERSION:
        raise WireError(f"unsupported version {version}")
    pos = 8
    sentences = {}
    while pos < len(data):
        (sid_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        sentence_id = data[pos : pos + sid_len].decode("utf-8")
        pos += sid_len
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        need = count * dim * 4
        if pos + need > len(data):
            raise WireError(f"truncated vectors for sentence {sentence_id!r}")
        if sentence_id in sentences:
            raise WireError(f"duplicate sentence id {sentence_id!r}")
        sentences[sentence_id] = np.frombuffer(
            data, dtype="<f4", count=count * dim, offset=pos
        ).reshape(count, dim).copy()
        pos += need
    return dim, sentences
