"""Consistency checks between an embedding file and its source corpus."""

from __future__ import annotations

import numpy as np

from .conllu import read_tokens
from .wire import read_amre


def verify(embeddings_path, conllu_path):
    """Check coverage, per-sentence token counts, and vector finiteness.

    Returns a report dict; `report['ok']` is False when any sentence is
    missing, any token count disagrees, or any vector is non-finite.
    """
    dim, sentences = read_amre(embeddings_path)
    corpus = read_tokens(conllu_path)

    missing = sorted(set(corpus) - set(sentences))
    extra = sorted(set(sentences) - set(corpus))
    count_mismatch = []
    nonfinite = []
    for sentence_id, words in corpus.items():
        matrix = sentences.get(sentence_id)
        if matrix is None:
            continue
        if matrix.shape[0] != len(words):
            count_mismatch.append(
                f"{sentence_id}: {matrix.shape[0]} vectors for {len(words)} tokens"
            )
        bad = np.nonzero(~np.isfinite(matrix).all(axis=1))[0]
        for index in bad:
            nonfinite.append(f"{sentence_id}: token {int(index)}")

    return {
        "ok": not (missing or count_mismatch or nonfinite),
        "dim": dim,
        "sentences": len(sentences),
        "missing": missing,
        "extra": extra,
        "count_mismatch": count_mismatch,
        "nonfinite": nonfinite,
    }


def format_report(report):
    lines = [
        f"dim: {report['dim']}",
        f"sentences: {report['sentences']}",
        f"status: {'OK' if report['ok'] else 'FAIL'}",
    ]
    for key in ("missing", "extra", "count_mismatch", "nonfinite"):
        for item in report[key]:
            lines.append(f"{key}: {item}")
    return "\n".join(lines)
