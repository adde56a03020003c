"""Heuristic fallback aligner for node <-> token alignments.

Used when a corpus ships no JAMR alignments.  A greedy pass over five rule
tiers in fixed priority: exact label/lemma match, 4-character prefix match,
named-entity ``:name``/``:op`` matching, negation words for ``:polarity -``,
and numeric constants against numeric tokens.  Within a tier each token is
consumed at most once; a node is never re-aligned by a later tier, so adding
tiers only ever adds pairs.
"""

from __future__ import annotations

import re

from .corpus import Alignment
from .graph import NUMBER_RE

SENSE_SUFFIX_RE = re.compile(r"-\d+$")
NEGATION_WORDS = frozenset({"not", "no", "never", "n't", "without"})


def strip_sense(label):
    return SENSE_SUFFIX_RE.sub("", label)


def _node_depths(graph):
    depths = {graph.root: 0}
    frontier = [graph.root]
    while frontier:
        nxt = []
        for node in frontier:
            for e in graph.out_edges(node):
                if e.target not in depths:
                    depths[e.target] = depths[node] + 1
                    nxt.append(e.target)
        frontier = nxt
    fallback = len(graph.nodes)
    return {n.id: depths.get(n.id, fallback) for n in graph.nodes}


def _assign(tier_pairs, alignment, depths, doc_order):
    """Greedily commit a tier's candidate pairs: leftmost token first, then
    shallowest node, then document order."""
    used_tokens = set()
    for node_id, token_index in sorted(
        tier_pairs, key=lambda p: (p[1], depths[p[0]], doc_order[p[0]])
    ):
        if node_id in alignment or token_index in used_tokens:
            continue
        alignment.add(node_id, token_index)
        used_tokens.add(token_index)


def align(sentence, graph):
    """Produce a node -> token Alignment for one (sentence, graph) pair."""
    alignment = Alignment()
    depths = _node_depths(graph)
    doc_order = {n.id: i for i, n in enumerate(graph.nodes)}
    tokens = sentence.tokens

    # tier 1: exact match on the sense-stripped label vs surface or lemma
    tier = []
    for node in graph.nodes:
        stem = strip_sense(node.label).casefold()
        for tok in tokens:
            if stem == tok.surface.casefold() or stem == tok.lemma.casefold():
                tier.append((node.id, tok.index))
    _assign(tier, alignment, depths, doc_order)

    # tier 2: shared 4-character prefix
    tier = []
    for node in graph.nodes:
        stem = strip_sense(node.label).casefold()
        if len(stem) < 4:
            continue
        for tok in tokens:
            for form in (tok.surface.casefold(), tok.lemma.casefold()):
                if len(form) >= 4 and form[:4] == stem[:4]:
                    tier.append((node.id, tok.index))
                    break
    _assign(tier, alignment, depths, doc_order)

    # tier 3: named entities; the parent entity lands on the first name token
    tier = []
    for edge in graph.edges:
        if edge.label != ":name":
            continue
        name_node = graph.node(edge.target)
        if not name_node.is_variable or name_node.label != "name":
            continue
        op_labels = [
            graph.node(e.target).label.casefold()
            for e in graph.out_edges(name_node.id)
            if re.match(r"^:op\d+$", e.label) and not graph.node(e.target).is_variable
        ]
        if not op_labels:
            continue
        matched = []
        available = {t.index for t in tokens}
        for label in op_labels:
            hit = next(
                (t.index for t in tokens if t.index in available and t.surface.casefold() == label),
                None,
            )
            if hit is None:
                matched = []
                break
            matched.append(hit)
            available.discard(hit)
        if matched:
            tier.append((edge.source, min(matched)))
    _assign(tier, alignment, depths, doc_order)

    # tier 4: polarity constants on negation words
    tier = []
    for edge in graph.edges:
        target = graph.node(edge.target)
        if edge.label == ":polarity" and not target.is_variable and target.label == "-":
            for tok in tokens:
                if tok.surface.casefold() in NEGATION_WORDS:
                    tier.append((target.id, tok.index))
    _assign(tier, alignment, depths, doc_order)

    # tier 5: numeric constants on numeric tokens
    tier = []
    for node in graph.nodes:
        if node.is_variable or not NUMBER_RE.match(node.label):
            continue
        for tok in tokens:
            if NUMBER_RE.match(tok.surface) and float(tok.surface) == float(node.label):
                tier.append((node.id, tok.index))
    _assign(tier, alignment, depths, doc_order)

    return alignment


def alignment_coverage(alignment, graph):
    """Fraction of graph nodes that carry an alignment, in [0, 1]."""
    if not graph.nodes:
        return 0.0
    return len(alignment) / len(graph.nodes)
