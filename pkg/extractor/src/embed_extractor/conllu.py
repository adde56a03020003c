"""Minimal CoNLL-U reader: sentence ids and surface forms only.

The extractor needs exactly the tokens the annotation pipeline produced;
everything else in the file belongs to the parser's own ingestion.
"""

from __future__ import annotations

import re


class ConlluError(ValueError):
    pass


def read_tokens(path):
    """Ordered dict: sentence id -> list of surface forms."""
    sentences = {}
    sent_id = None
    tokens = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                if tokens:
                    if sent_id is None:
                        raise ConlluError(f"sentence ending at line {lineno} has no sent_id")
                    if sent_id in sentences:
                        raise ConlluError(f"duplicate sentence id {sent_id!r}")
                    sentences[sent_id] = tokens
                sent_id, tokens = None, []
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*sent_id\s*=\s*(\S+)", line)
                if m:
                    sent_id = m.group(1)
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise ConlluError(f"line {lineno}: not a CoNLL-U token line")
            if "-" in cols[0] or "." in cols[0]:
                continue
            tokens.append(cols[1])
    if tokens:
        if sent_id is None:
            raise ConlluError("final sentence has no sent_id")
        sentences[sent_id] = tokens
    return sentences
