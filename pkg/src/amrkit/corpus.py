"""Dataset ingestion: AMR banks, CoNLL-U annotations, and JAMR alignments.

AMR banks are blank-line-separated blocks of ``# ::`` metadata followed by a
PENMAN expression.  Syntactic annotations (lemma, POS, NER, dependency tree)
are ingested from CoNLL-U files keyed by ``# sent_id`` comments; nothing is
computed here.  `zip_examples` joins the sources by sentence id into
AnnotatedExamples and resolves JAMR node paths against the parsed graphs.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass

from .graph import PenmanError, parse_penman, serialize_penman

log = logging.getLogger(__name__)

NER_CLASSES = ("PER", "ORG", "LOC", "MISC", "O")

# Collapse assorted tagger outputs onto the fixed 4-class set plus O.
DEFAULT_NER_MAP = {
    "PER": "PER",
    "PERSON": "PER",
    "ORG": "ORG",
    "ORGANIZATION": "ORG",
    "LOC": "LOC",
    "LOCATION": "LOC",
    "GPE": "LOC",
    "CITY": "LOC",
    "COUNTRY": "LOC",
    "FAC": "LOC",
    "O": "O",
}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class IngestError:
    message: str
    block: int | None = None
    line: int | None = None

    def __str__(self):
        where = []
        if self.block is not None:
            where.append(f"block {self.block}")
        if self.line is not None:
            where.append(f"line {self.line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        return prefix + self.message


@dataclass(frozen=True)
class Token:
    index: int
    surface: str
    lemma: str
    pos: str
    ner: str = "O"
    dep_head: int = -1
    dep_label: str = "root"


@dataclass(frozen=True)
class TokenizedSentence:
    sentence_id: str
    tokens: tuple

    def __len__(self):
        return len(self.tokens)


class Alignment:
    """Partial node -> token mapping; one token at most per node.

    `spans` keeps the full JAMR token span per node as secondary context;
    only the first token of a span is used by the oracle.
    """

    def __init__(self, pairs=(), spans=None):
        self.pairs = []
        self._token_for = {}
        self.spans = dict(spans or {})
        for node_id, token_index in pairs:
            self.add(node_id, token_index)

    def add(self, node_id, token_index):
        if node_id in self._token_for:
            log.warning(
                "node %s already aligned to token %d; keeping the first pair",
                node_id,
                self._token_for[node_id],
            )
            return False
        self._token_for[node_id] = token_index
        self.pairs.append((node_id, token_index))
        return True

    def token_for(self, node_id):
        return self._token_for.get(node_id)

    def nodes_for(self, token_index):
        return [n for n, t in self.pairs if t == token_index]

    def __len__(self):
        return len(self.pairs)

    def __contains__(self, node_id):
        return node_id in self._token_for

    def __eq__(self, other):
        return isinstance(other, Alignment) and sorted(self.pairs) == sorted(other.pairs)


@dataclass
class AnnotatedExample:
    sentence: TokenizedSentence
    graph: AmrGraph
    alignment: Alignment

    @property
    def id(self):
        return self.sentence.sentence_id


# ---------------------------------------------------------------------------
# AMR bank files
# ---------------------------------------------------------------------------

@dataclass
class AmrRecord:
    id: str
    snt: str
    tokens: list | None
    alignments: list | None  # list of AlignSpan, unresolved
    graph: AmrGraph
    block: int
    line: int


@dataclass(frozen=True)
class AlignSpan:
    start: int
    end: int
    paths: tuple


_SPAN_RE = re.compile(r"^(\d+)-(\d+)\|([0-9.+r]+)$")


def parse_jamr_alignments(text):
    """Parse a JAMR alignment string: space-separated ``start-end|0.1+0.2``."""
    spans = []
    for chunk in text.split():
        m = _SPAN_RE.match(chunk)
        if not m:
            raise CorpusError(f"malformed JAMR alignment chunk {chunk!r}")
        start, end = int(m.group(1)), int(m.group(2))
        if end <= start:
            raise CorpusError(f"empty token span in alignment chunk {chunk!r}")
        paths = tuple(m.group(3).split("+"))
        spans.append(AlignSpan(start, end, paths))
    return spans


def _parse_metadata_line(line):
    fields = {}
    for part in re.split(r"\s::(?=\S)", line[1:].strip()):
        part = part.lstrip(":")
        if not part:
            continue
        key, _, value = part.partition(" ")
        fields[key] = value.strip()
    return fields


def load_amr_file(path):
    """Read an AMR bank file.

    Returns (records, errors): one AmrRecord per well-formed block; malformed
    blocks are reported with their block index and line number and skipped.
    """
    with open(path, encoding="utf-8") as handle:
        lines = handle.read().split("\n")

    blocks = []
    current = []
    start_line = 1
    for i, line in enumerate(lines, start=1):
        if line.strip() == "":
            if current:
                blocks.append((start_line, current))
                current = []
        else:
            if not current:
                start_line = i
            current.append((i, line))
    if current:
        blocks.append((start_line, current))

    records = []
    errors = []
    for block_idx, (first_line, block_lines) in enumerate(blocks):
        meta = {}
        penman_parts = []
        penman_line = first_line
        for lineno, line in block_lines:
            if line.startswith("# ::"):
                meta.update(_parse_metadata_line(line))
            elif line.startswith("#"):
                continue
            else:
                if not penman_parts:
                    penman_line = lineno
                penman_parts.append(line)
        text = "\n".join(penman_parts)
        if not text.strip():
            errors.append(IngestError("block has no PENMAN expression", block_idx, first_line))
            continue
        try:
            graph = parse_penman(text)
        except PenmanError as exc:
            errors.append(IngestError(f"bad PENMAN: {exc}", block_idx, penman_line))
            continue
        alignments = None
        if "alignments" in meta:
            try:
                alignments = parse_jamr_alignments(meta["alignments"])
            except CorpusError as exc:
                errors.append(IngestError(str(exc), block_idx, first_line))
                continue
        tokens = meta["tok"].split() if "tok" in meta else None
        records.append(
            AmrRecord(
                id=meta.get("id", f"b{block_idx}"),
                snt=meta.get("snt", ""),
                tokens=tokens,
                alignments=alignments,
                graph=graph,
                block=block_idx,
                line=first_line,
            )
        )
    return records, errors


# ---------------------------------------------------------------------------
# CoNLL-U annotations
# ---------------------------------------------------------------------------

def _misc_value(misc, key):
    if misc in ("", "_"):
        return None
    for item in misc.split("|"):
        k, _, v = item.partition("=")
        if k == key:
            return v
    return None


def _check_tree(tokens, sent_id, line):
    n = len(tokens)
    roots = [t for t in tokens if t.dep_head == -1]
    if len(roots) != 1:
        raise CorpusError(f"sentence {sent_id!r} near line {line}: dependency structure has {len(roots)} roots")
    for t in tokens:
        if not (-1 <= t.dep_head < n):
            raise CorpusError(f"sentence {sent_id!r} near line {line}: head {t.dep_head} out of range")
        seen = set()
        cur = t.index
        while cur != -1:
            if cur in seen:
                raise CorpusError(f"sentence {sent_id!r} near line {line}: non-tree dependency structure (cycle)")
            seen.add(cur)
            cur = tokens[cur].dep_head


def load_conllu_annotations(path, ner_map=None):
    """Read a CoNLL-U file into sentence-id -> TokenizedSentence.

    NER tags come from the MISC column key ``NER=`` (absent means O) and are
    collapsed onto {PER, ORG, LOC, MISC} + O.  The dependency structure must
    be a tree; the 1-based HEAD column becomes a 0-based index, root -1.
    """
    ner_map = dict(DEFAULT_NER_MAP if ner_map is None else ner_map)
    sentences = {}
    sent_id = None
    rows = []

    def flush(at_line):
        nonlocal sent_id, rows
        if not rows:
            sent_id = None
            return
        if sent_id is None:
            raise CorpusError(f"sentence ending at line {at_line} has no '# sent_id' comment")
        if sent_id in sentences:
            raise CorpusError(f"duplicate sentence id {sent_id!r} at line {at_line}")
        tokens = tuple(rows)
        _check_tree(tokens, sent_id, at_line)
        sentences[sent_id] = TokenizedSentence(sent_id, tokens)
        sent_id = None
        rows = []

    with open(path, encoding="utf-8") as handle:
        lineno = 0
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if line.strip() == "":
                flush(lineno)
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*sent_id\s*=\s*(\S+)", line)
                if m:
                    sent_id = m.group(1)
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise CorpusError(f"line {lineno}: expected 10 columns, found {len(cols)}")
            if "-" in cols[0] or "." in cols[0]:
                continue  # multiword ranges / empty nodes carry no annotation we use
            head = int(cols[6])
            raw_ner = _misc_value(cols[9], "NER")
            ner = ner_map.get(raw_ner, "MISC") if raw_ner not in (None, "") else "O"
            rows.append(
                Token(
                    index=len(rows),
                    surface=cols[1],
                    lemma=cols[2],
                    pos=cols[3],
                    ner=ner,
                    dep_head=head - 1 if head > 0 else -1,
                    dep_label=cols[7],
                )
            )
        flush(lineno + 1)
    return sentences


# ---------------------------------------------------------------------------
# Joining the sources
# ---------------------------------------------------------------------------

def node_at_path(graph, path):
    """Resolve a JAMR node path ('0', '0.1.0', ...) to a node id.

    The leading 0 addresses the root; each further index picks the n-th
    outgoing edge (document order, attributes included).
    """
    parts = path.split(".")
    if parts[0] != "0":
        raise CorpusError(f"node path {path!r} must start at the root (0)")
    node = graph.root
    for step in parts[1:]:
        if step.startswith("r"):
            step = step[1:]
        children = graph.out_edges(node)
        i = int(step)
        if i >= len(children):
            raise CorpusError(f"node path {path!r}: node {node!r} has no child {i}")
        node = children[i].target
    return node


def jamr_path_map(graph):
    """Document-order DFS path for every node (first path reached wins)."""
    paths = {graph.root: "0"}
    stack = [graph.root]
    seen = {graph.root}
    order = [graph.root]
    while stack:
        node = stack.pop()
        for i, edge in enumerate(graph.out_edges(node)):
            if edge.target in paths:
                continue
            paths[edge.target] = f"{paths[node]}.{i}"
            if edge.target not in seen:
                seen.add(edge.target)
                order.append(edge.target)
                stack.append(edge.target)
    return paths


def format_jamr(alignment, graph):
    """Render an Alignment in the JAMR span string format."""
    paths = jamr_path_map(graph)
    chunks = []
    for node_id, token_index in sorted(alignment.pairs, key=lambda p: (p[1], paths.get(p[0], ""))):
        span = alignment.spans.get(node_id, (token_index, token_index + 1))
        chunks.append(f"{span[0]}-{span[1]}|{paths[node_id]}")
    return " ".join(chunks)


def resolve_alignment(graph, spans, n_tokens):
    """Turn parsed AlignSpans into an Alignment against a specific graph."""
    alignment = Alignment()
    for span in spans:
        if span.start >= n_tokens or span.end > n_tokens:
            raise CorpusError(f"alignment span {span.start}-{span.end} outside {n_tokens} tokens")
        for path in span.paths:
            node = node_at_path(graph, path)
            alignment.add(node, span.start)
            alignment.spans.setdefault(node, (span.start, span.end))
    return alignment


def zip_examples(records, annotations, alignments=None):
    """Join AMR records with annotations (and optional external alignments).

    `alignments` maps sentence id -> list of AlignSpan and overrides the
    records' own ``::alignments`` metadata.  Token counts from ``::tok``
    lines must agree with the CoNLL-U tokenization; a mismatch is an error,
    never a silent re-tokenization.  Returns (examples, errors).
    """
    examples = []
    errors = []
    seen_ids = set()
    for record in records:
        seen_ids.add(record.id)
        sentence = annotations.get(record.id)
        if sentence is None:
            errors.append(IngestError(f"no annotation for id {record.id!r}", record.block, record.line))
            continue
        if record.tokens is not None and len(record.tokens) != len(sentence.tokens):
            errors.append(
                IngestError(
                    f"id {record.id!r}: ::tok has {len(record.tokens)} tokens, "
                    f"annotations have {len(sentence.tokens)}",
                    record.block,
                    record.line,
                )
            )
            continue
        spans = record.alignments
        if alignments is not None and record.id in alignments:
            spans = alignments[record.id]
        try:
            alignment = resolve_alignment(record.graph, spans or [], len(sentence.tokens))
        except CorpusError as exc:
            errors.append(IngestError(f"id {record.id!r}: {exc}", record.block, record.line))
            continue
        examples.append(AnnotatedExample(sentence, record.graph, alignment))
    for sent_id in annotations:
        if sent_id not in seen_ids:
            errors.append(IngestError(f"annotation id {sent_id!r} missing from the AMR bank"))
    return examples, errors


def load_alignment_file(path):
    """Read a two-column alignment file: ``id<TAB>jamr-alignment-string``."""
    table = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            sent_id, _, rest = line.partition("\t")
            if not rest:
                raise CorpusError(f"line {lineno}: expected 'id<TAB>alignment'")
            table[sent_id] = parse_jamr_alignments(rest)
    return table


# ---------------------------------------------------------------------------
# Archive serialization (preprocess output)
# ---------------------------------------------------------------------------

def example_to_dict(example):
    return {
        "id": example.id,
        "tokens": [
            {
                "surface": t.surface,
                "lemma": t.lemma,
                "pos": t.pos,
                "ner": t.ner,
                "head": t.dep_head,
                "deprel": t.dep_label,
            }
            for t in example.sentence.tokens
        ],
        "penman": serialize_penman(example.graph),
        "alignment": sorted(example.alignment.pairs),
        "spans": sorted((n, s[0], s[1]) for n, s in example.alignment.spans.items()),
    }


def example_from_dict(data):
    tokens = tuple(
        Token(i, t["surface"], t["lemma"], t["pos"], t["ner"], t["head"], t["deprel"])
        for i, t in enumerate(data["tokens"])
    )
    graph = parse_penman(data["penman"])
    alignment = Alignment(
        [(n, i) for n, i in data["alignment"]],
        {n: (s, e) for n, s, e in data.get("spans", [])},
    )
    return AnnotatedExample(TokenizedSentence(data["id"], tokens), graph, alignment)


def write_archive(examples, path):
    with open(path, "w", encoding="utf-8") as handle:
        for example in examples:
            handle.write(json.dumps(example_to_dict(example), sort_keys=True) + "\n")


def read_archive(path):
    examples = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                examples.append(example_from_dict(json.loads(line)))
    return examples
