"""Smatch scoring and the fine-grained metric suite.

Graphs are compared as triple multisets (instances, attributes incl. the TOP
marker, relations) under the best injective variable mapping.  The default
scorer hill-climbs from several initializations (the first seeded by concept
matching); `smatch_exact` exhaustively maximizes over all injective mappings
and serves as the test oracle for small graphs.

The fine-grained suite decomposes the score: Unlabeled, No WSD, Reentrancy,
Concepts, Named Entities, Wikification, Negations, and SRL.  Sub-graph
extraction rules are documented on `fine_grained`.
"""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass
from itertools import permutations

from .graph import canonical_constant, normalize_inverse_edges, to_triples

SENSE_SUFFIX_RE = re.compile(r"-\d+$")
ARG_RE = re.compile(r"^:arg\d+$")

METRIC_NAMES = (
    "smatch",
    "unlabeled",
    "no_wsd",
    "reentrancy",
    "concepts",
    "named_ent",
    "wikification",
    "negations",
    "srl",
)


@dataclass(frozen=True)
class SmatchResult:
    matched: int
    total_a: int
    total_b: int

    @property
    def precision(self):
        return self.matched / self.total_a if self.total_a else 0.0

    @property
    def recall(self):
        return self.matched / self.total_b if self.total_b else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other):
        return SmatchResult(
            self.matched + other.matched,
            self.total_a + other.total_a,
            self.total_b + other.total_b,
        )


ZERO = SmatchResult(0, 0, 0)


def _norm_label(text):
    return text.casefold()


class _Side:
    """One graph's triples prepared for mapping search."""

    def __init__(self, triples):
        variables = [t.subject for t in triples if t.kind == "instance"]
        self.vars = variables
        self.index = {v: i for i, v in enumerate(variables)}
        self.concepts = [
            _norm_label(t.object) for t in triples if t.kind == "instance"
        ]
        self.attributes = Counter()
        self.relations = []
        for t in triples:
            if t.kind == "attribute":
                if t.subject in self.index:
                    self.attributes[(t.predicate.casefold(), self.index[t.subject],
                                     canonical_constant(t.object))] += 1
            elif t.kind == "relation":
                if t.subject in self.index and t.object in self.index:
                    self.relations.append(
                        (t.predicate.casefold(), self.index[t.subject], self.index[t.object])
                    )
        self.total = len(self.concepts) + sum(self.attributes.values()) + len(self.relations)


def _score(a, b, mapping):
    """Matched triples under mapping (a-var index -> b-var index or -1)."""
    matched = 0
    b_concepts = b.concepts
    for i, j in enumerate(mapping):
        if j >= 0 and a.concepts[i] == b_concepts[j]:
            matched += 1
    mapped_attrs = Counter()
    for (pred, i, value), n in a.attributes.items():
        j = mapping[i]
        if j >= 0:
            mapped_attrs[(pred, j, value)] += n
    matched += sum((mapped_attrs & b.attributes).values())
    mapped_rels = Counter()
    for pred, i, k in a.relations:
        ji, jk = mapping[i], mapping[k]
        if ji >= 0 and jk >= 0:
            mapped_rels[(pred, ji, jk)] += 1
    b_rels = Counter(b.relations)
    matched += sum((mapped_rels & b_rels).values())
    return matched


def _smart_init(a, b):
    mapping = [-1] * len(a.vars)
    used = set()
    for i, concept in enumerate(a.concepts):
        for j, other in enumerate(b.concepts):
            if j not in used and concept == other:
                mapping[i] = j
                used.add(j)
                break
    return mapping


def _random_init(a, b, rng):
    """Random injective start; half the time a random same-predicate
    relation pair is pinned first, which seeds basins that single-variable
    climbing cannot enter."""
    n_a, n_b = len(a.vars), len(b.vars)
    k = min(n_a, n_b)
    targets = rng.sample(range(n_b), k)
    sources = rng.sample(range(n_a), k)
    mapping = [-1] * n_a
    for i, j in zip(sources, targets):
        mapping[i] = j
    if a.relations and b.relations and rng.random() < 0.5:
        pred, i, k2 = rng.choice(a.relations)
        compatible = [r for r in b.relations if r[0] == pred and (r[1] == r[2]) == (i == k2)]
        if compatible:
            _, j, l = rng.choice(compatible)
            for var, target in ((i, j), (k2, l)):
                for other in range(n_a):
                    if mapping[other] == target and other != var:
                        mapping[other] = -1
                mapping[var] = target
    return mapping


def _climb(a, b, mapping):
    """Steepest-ascent over three move kinds: remap one variable to a free
    target (or unmap it), swap two variables' targets, and bump (claim an
    occupied target, unmapping its previous owner)."""
    n_b = len(b.vars)
    current = _score(a, b, mapping)
    improved = True
    while improved:
        improved = False
        best_gain = 0
        best_mapping = None

        def consider(candidate):
            nonlocal best_gain, best_mapping
            gain = _score(a, b, candidate) - current
            if gain > best_gain:
                best_gain = gain
                best_mapping = candidate

        owner = {j: i for i, j in enumerate(mapping) if j >= 0}
        for i in range(len(mapping)):
            original = mapping[i]
            for j in list(range(n_b)) + [-1]:
                if j == original:
                    continue
                candidate = list(mapping)
                candidate[i] = j
                if j >= 0 and j in owner and owner[j] != i:
                    candidate[owner[j]] = -1  # bump the previous owner
                consider(candidate)
        for i1 in range(len(mapping)):
            for i2 in range(i1 + 1, len(mapping)):
                if mapping[i1] == mapping[i2]:
                    continue
                candidate = list(mapping)
                candidate[i1], candidate[i2] = candidate[i2], candidate[i1]
                consider(candidate)
        # relation-driven pair moves: matching a relation triple requires both
        # endpoints to move together, which no single-variable step can do
        for pred_a, i, k in a.relations:
            for pred_b, j, l in b.relations:
                if pred_a != pred_b or (mapping[i] == j and mapping[k] == l):
                    continue
                if (i == k) != (j == l):
                    continue  # a self-loop can only match a self-loop
                candidate = list(mapping)
                for var, target in ((i, j), (k, l)):
                    if target in owner and owner[target] not in (i, k):
                        candidate[owner[target]] = -1
                    candidate[var] = target
                consider(candidate)
        if best_mapping is not None:
            mapping = best_mapping
            current += best_gain
            improved = True
    return mapping, current


def score_triples(triples_a, triples_b, restarts=4, seed=0):
    """Hill-climbing Smatch over two triple lists."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    a, b = _Side(triples_a), _Side(triples_b)
    if not a.vars or not b.vars:
        return SmatchResult(0, a.total, b.total)
    rng = random.Random(seed)
    best = -1
    for r in range(restarts):
        mapping = _smart_init(a, b) if r == 0 else _random_init(a, b, rng)
        _, matched = _climb(a, b, mapping)
        if matched > best:
            best = matched
    return SmatchResult(best, a.total, b.total)


def score_triples_exact(triples_a, triples_b):
    """Exhaustive optimum over injective mappings (test oracle, <= 8 vars)."""
    a, b = _Side(triples_a), _Side(triples_b)
    if not a.vars or not b.vars:
        return SmatchResult(0, a.total, b.total)
    n_a, n_b = len(a.vars), len(b.vars)
    if max(n_a, n_b) > 8:
        raise ValueError("exact matcher limited to 8 variables per graph")
    best = 0
    if n_a <= n_b:
        for perm in permutations(range(n_b), n_a):
            matched = _score(a, b, list(perm))
            if matched > best:
                best = matched
    else:
        for perm in permutations(range(n_a), n_b):
            mapping = [-1] * n_a
            for j, i in enumerate(perm):
                mapping[i] = j
            matched = _score(a, b, mapping)
            if matched > best:
                best = matched
    return SmatchResult(best, a.total, b.total)


def _prepared(graph):
    return to_triples(normalize_inverse_edges(graph))


def smatch(a, b, restarts=4, seed=0):
    """Smatch between two graphs (a scored as prediction, b as gold)."""
    return score_triples(_prepared(a), _prepared(b), restarts, seed)


def smatch_exact(a, b):
    return score_triples_exact(_prepared(a), _prepared(b))


# ---------------------------------------------------------------------------
# Fine-grained metrics
# ---------------------------------------------------------------------------

def _strip_wsd(triples):
    return [
        t.__class__(t.kind, t.subject, t.predicate, SENSE_SUFFIX_RE.sub("", t.object))
        if t.kind == "instance"
        else t
        for t in triples
    ]


def _unlabel(triples):
    return [
        t.__class__(t.kind, t.subject, ":dep", t.object) if t.kind == "relation" else t
        for t in triples
    ]


def _concept_multiset(triples):
    return Counter(_norm_label(t.object) for t in triples if t.kind == "instance")


def _wiki_multiset(triples):
    return Counter(
        canonical_constant(t.object)
        for t in triples
        if t.kind == "attribute" and t.predicate.casefold() == ":wiki"
    )


def _negated_concepts(triples):
    concepts = {t.subject: _norm_label(t.object) for t in triples if t.kind == "instance"}
    negated = [
        t.subject
        for t in triples
        if t.kind == "attribute"
        and t.predicate.casefold() == ":polarity"
        and canonical_constant(t.object) == "-"
    ]
    return Counter(concepts[v] for v in negated if v in concepts)


def _named_entity_triples(triples):
    heads = {t.subject for t in triples if t.kind == "relation" and t.predicate.casefold() == ":name"}
    names = {t.object for t in triples if t.kind == "relation" and t.predicate.casefold() == ":name"}
    keep = []
    for t in triples:
        if t.kind == "instance" and t.subject in heads | names:
            keep.append(t)
        elif t.kind == "relation" and t.predicate.casefold() == ":name":
            keep.append(t)
        elif t.kind == "attribute" and t.subject in names and t.predicate.casefold().startswith(":op"):
            keep.append(t)
    return keep


def _reentrancy_triples(triples):
    indegree = Counter(t.object for t in triples if t.kind == "relation")
    reentrant = {v for v, n in indegree.items() if n >= 2}
    parents = {t.subject for t in triples if t.kind == "relation" and t.object in reentrant}
    keep = []
    for t in triples:
        if t.kind == "instance" and t.subject in reentrant | parents:
            keep.append(t)
        elif t.kind == "relation" and t.object in reentrant:
            keep.append(t)
    return keep


def _srl_triples(triples):
    args = [t for t in triples if t.kind == "relation" and ARG_RE.match(t.predicate.casefold())]
    endpoints = {t.subject for t in args} | {t.object for t in args}
    keep = [t for t in triples if t.kind == "instance" and t.subject in endpoints]
    return keep + args


def _multiset_f1(counter_a, counter_b):
    matched = sum((counter_a & counter_b).values())
    return SmatchResult(matched, sum(counter_a.values()), sum(counter_b.values()))


def fine_grained(a, b, restarts=4, seed=0):
    """All metrics for one pair, keyed by METRIC_NAMES.

    Definitions: Unlabeled replaces relation predicates with one dummy label;
    No WSD strips ``-NN`` sense suffixes from instance concepts; Concepts is
    multiset F1 over concept labels (no mapping search); Named Ent. restricts
    Smatch to ``:name`` sub-graphs plus their entity heads; Wikification is
    F1 over ``:wiki`` values; Negations is F1 over concepts carrying
    ``:polarity -``; Reentrancy restricts Smatch to reentrant nodes and their
    parents; SRL restricts Smatch to ``:ARG*`` relations and their endpoint
    instances.
    """
    ta, tb = _prepared(a), _prepared(b)
    return {
        "smatch": score_triples(ta, tb, restarts, seed),
        "unlabeled": score_triples(_unlabel(ta), _unlabel(tb), restarts, seed),
        "no_wsd": score_triples(_strip_wsd(ta), _strip_wsd(tb), restarts, seed),
        "reentrancy": score_triples(_reentrancy_triples(ta), _reentrancy_triples(tb),
                                    restarts, seed),
        "concepts": _multiset_f1(_concept_multiset(ta), _concept_multiset(tb)),
        "named_ent": score_triples(_named_entity_triples(ta), _named_entity_triples(tb),
                                   restarts, seed),
        "wikification": _multiset_f1(_wiki_multiset(ta), _wiki_multiset(tb)),
        "negations": _multiset_f1(_negated_concepts(ta), _negated_concepts(tb)),
        "srl": score_triples(_srl_triples(ta), _srl_triples(tb), restarts, seed),
    }


def corpus_score(pred, gold, metrics=None, restarts=4, seed=0):
    """Micro-averaged metrics over id-aligned corpora.

    pred, gold: lists of (sentence id, AmrGraph).  Returns (results, errors)
    where results maps metric name -> aggregate SmatchResult and errors lists
    id mismatches.  Per-pair seeds derive from the pair index so parallel
    scoring stays deterministic.
    """
    metrics = list(metrics) if metrics is not None else list(METRIC_NAMES)
    gold_map = dict(gold)
    pred_map = dict(pred)
    errors = []
    for sid, _ in pred:
        if sid not in gold_map:
            errors.append(f"prediction id {sid!r} missing from gold")
    for sid, _ in gold:
        if sid not in pred_map:
            errors.append(f"gold id {sid!r} missing from predictions")
    totals = {m: ZERO for m in metrics}
    for index, (sid, graph) in enumerate(pred):
        if sid not in gold_map:
            continue
        pair = fine_grained(graph, gold_map[sid], restarts, seed + index)
        for m in metrics:
            totals[m] = totals[m] + pair[m]
    return totals, errors


def format_report(results):
    """Aligned text table, percentages with one decimal."""
    width = max(len(m) for m in results)
    lines = [f"{'metric'.ljust(width)}      P      R     F1"]
    for name in results:
        r = results[name]
        lines.append(
            f"{name.ljust(width)}  {100 * r.precision:5.1f}  {100 * r.recall:5.1f}  {100 * r.f1:5.1f}"
        )
    return "\n".join(lines)


def format_records(results):
    """Machine-readable line-delimited records: metric, P, R, F1."""
    return "\n".join(
        f"{name}\t{r.precision:.4f}\t{r.recall:.4f}\t{r.f1:.4f}" for name, r in results.items()
    )
