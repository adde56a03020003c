"""The shift-reduce transition system and the concept dictionary.

A configuration holds a stack of graph nodes (a sentinel at the bottom), a
buffer of token indices, the edge set built so far, and the per-token
subgraph record.  Four actions drive parsing:

* Shift    -- consume the front buffer token; if the concept dictionary maps
              it to a subgraph, instantiate the fragment and push its root.
* LArc(l)  -- add an edge from the top stack node to the second.
* RArc(l)  -- add an edge from the second stack node to the top.
* Reduce   -- pop the top; optionally add a reentrant edge from the popped
              node to its sibling candidate (see `reentrancy_candidate`).

Arc actions relate the top two stack nodes and pop nothing.  Legality caps
each arc direction at one edge per stack-adjacent pair, which bounds arc runs
and guarantees termination.  The sentinel may receive exactly one outgoing
edge (the root designation); it is reduced last, when the buffer is empty.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from .graph import CONSTANT, VARIABLE, AmrGraph, Edge, Node, parse_penman, serialize_penman

ROOT_ID = "<root>"
ROOT_EDGE_LABEL = ":TOP"

SHIFT = "shift"
LARC = "larc"
RARC = "rarc"
REDUCE = "reduce"
ACTION_KINDS = (SHIFT, LARC, RARC, REDUCE)

NER_CONCEPT = {"PER": "person", "ORG": "organization", "LOC": "city", "MISC": "thing"}

ARTICLES = frozenset({"a", "an", "the"})


class TransitionError(ValueError):
    pass


@dataclass(frozen=True)
class Action:
    kind: str
    label: str | None = None  # arc relation; reentrant edge label for Reduce
    template: "Template | None" = None  # Shift subgraph; None = empty
    reentrancy: bool = False  # Reduce decision

    def __str__(self):
        if self.kind == SHIFT:
            return f"shift({self.template.to_penman() if self.template else ''})"
        if self.kind in (LARC, RARC):
            return f"{self.kind}({self.label})"
        return f"reduce({'+' + (self.label or '?') if self.reentrancy else '-'})"


# ---------------------------------------------------------------------------
# Subgraph templates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Template:
    """A connected graph fragment with a designated root (node index 0).

    nodes: tuple of (label, kind, quoted); edges: tuple of (src, label, tgt)
    index pairs.  The empty template (no nodes) means the token maps to no
    graph material at all.
    """

    nodes: tuple = ()
    edges: tuple = ()

    def __bool__(self):
        return bool(self.nodes)

    @staticmethod
    def single(label, kind=VARIABLE, quoted=False):
        return Template(((label, kind, quoted),), ())

    @staticmethod
    def entity(kind_concept, surface):
        return Template(
            ((kind_concept, VARIABLE, False), ("name", VARIABLE, False), (surface, CONSTANT, True)),
            ((0, ":name", 1), (1, ":op1", 2)),
        )

    @staticmethod
    def from_graph(graph, root, include):
        """Extract the fragment spanning `include` (must contain root)."""
        order = []
        seen = set()
        stack = [root]
        while stack:
            node = stack.pop()
            if node in seen or node not in include:
                continue
            seen.add(node)
            order.append(node)
            for e in reversed(graph.out_edges(node)):
                if e.target in include and e.target not in seen:
                    stack.append(e.target)
        index = {n: i for i, n in enumerate(order)}
        nodes = tuple(
            (graph.node(n).label, graph.node(n).kind, graph.node(n).quoted) for n in order
        )
        edges = tuple(
            sorted(
                (index[e.source], e.label, index[e.target])
                for e in graph.edges
                if e.source in index and e.target in index
            )
        )
        return Template(nodes, edges)

    def to_penman(self):
        if not self.nodes:
            return "NULL"
        if self.nodes[0][1] == CONSTANT:
            # a constant cannot head a PENMAN context; it is always alone
            label, _, quoted = self.nodes[0]
            return f'"{label}"' if quoted else label
        nodes = []
        for i, (label, kind, quoted) in enumerate(self.nodes):
            nodes.append(Node(f"t{i}", label, kind, quoted))
        edges = [Edge(f"t{s}", lbl, f"t{t}") for s, lbl, t in self.edges]
        return serialize_penman(AmrGraph(nodes, edges, "t0"))

    @staticmethod
    def from_penman(text):
        if text == "NULL":
            return Template()
        if not text.startswith("("):
            if text.startswith('"') and text.endswith('"') and len(text) >= 2:
                return Template.single(text[1:-1], CONSTANT, quoted=True)
            return Template.single(text, CONSTANT)
        graph = parse_penman(text)
        order = [graph.root] + [n.id for n in graph.nodes if n.id != graph.root]
        index = {n: i for i, n in enumerate(order)}
        nodes = tuple((graph.node(n).label, graph.node(n).kind, graph.node(n).quoted) for n in order)
        edges = tuple(sorted((index[e.source], e.label, index[e.target]) for e in graph.edges))
        return Template(nodes, edges)


EMPTY_TEMPLATE = Template()


# ---------------------------------------------------------------------------
# Configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfigNode:
    id: str
    label: str
    kind: str
    quoted: bool = False
    token: int | None = None  # aligned token index


class Configuration:
    """Parser state.  Value semantics: `apply` returns a fresh object."""

    def __init__(self, stack, buffer, edges, nodes, subgraph_roots):
        self.stack = tuple(stack)  # node ids, top = last
        self.buffer = tuple(buffer)  # token indices, front = first
        self.edges = tuple(edges)
        self.nodes = dict(nodes)  # id -> ConfigNode (sentinel excluded)
        self.subgraph_roots = dict(subgraph_roots)  # token -> node id or None

    @staticmethod
    def initial(n_tokens):
        return Configuration([ROOT_ID], range(n_tokens), [], {}, {})

    @property
    def is_terminal(self):
        return not self.stack and not self.buffer

    @property
    def top(self):
        return self.stack[-1] if self.stack else None

    @property
    def second(self):
        return self.stack[-2] if len(self.stack) >= 2 else None

    def is_variable(self, node_id):
        if node_id == ROOT_ID:
            return False
        return self.nodes[node_id].kind == VARIABLE

    def has_edge(self, source, target):
        return any(e.source == source and e.target == target for e in self.edges)

    def root_designated(self):
        return any(e.source == ROOT_ID for e in self.edges)

    def parent_count(self, node_id):
        return sum(1 for e in self.edges if e.target == node_id and e.source != ROOT_ID)

    def child_count(self, node_id):
        return sum(1 for e in self.edges if e.source == node_id)

    def subgraph_depth(self, node_id):
        """Longest downward path from the node over the current edge set."""
        children = {}
        for e in self.edges:
            children.setdefault(e.source, []).append(e.target)

        def walk(node, path):
            best = 0
            for child in children.get(node, ()):
                if child in path:
                    continue  # fuzzing can build cycles; cap the walk
                best = max(best, 1 + walk(child, path | {child}))
            return best

        return walk(node_id, {node_id})

    def fresh_variable(self, concept):
        letter = concept[0].lower() if concept[:1].isalpha() else "x"
        used = set(self.nodes)
        if letter not in used and letter != ROOT_ID:
            return letter
        k = 2
        while f"{letter}{k}" in used:
            k += 1
        return f"{letter}{k}"

    def fresh_constant(self):
        k = 0
        while f"_k{k}" in self.nodes:
            k += 1
        return f"_k{k}"


def legal_actions(config):
    """Action kinds legal in this configuration; never empty off terminal."""
    legal = set()
    if config.buffer:
        legal.add(SHIFT)
    if len(config.stack) >= 2:
        top, second = config.top, config.second
        if config.is_variable(top) and second != ROOT_ID and not config.has_edge(top, second):
            legal.add(LARC)
        rarc_source_ok = config.is_variable(second) or (
            second == ROOT_ID and not config.root_designated()
        )
        if rarc_source_ok and not config.has_edge(second, top):
            legal.add(RARC)
        legal.add(REDUCE)
    elif len(config.stack) == 1 and not config.buffer:
        legal.add(REDUCE)  # the sentinel goes last
    return legal


def reentrancy_candidate(config):
    """(top node, sibling) eligible for a reentrant edge at Reduce, or None.

    The sibling is the most recently attached other child of the top node's
    most recent parent in the edge set.
    """
    popped = config.top
    if popped is None or popped == ROOT_ID or not config.is_variable(popped):
        return None
    parent = next((e.source for e in reversed(config.edges) if e.target == popped), None)
    if parent is None or parent == ROOT_ID:
        return None
    sibling = next(
        (e.target for e in reversed(config.edges) if e.source == parent and e.target != popped),
        None,
    )
    if sibling is None:
        return None
    return popped, sibling


def _instantiate(config, template, token):
    """Create fresh nodes/edges for a template; returns (nodes, edges, root)."""
    new_nodes = []
    names = []
    taken = set(config.nodes)
    const_k = 0
    for i, (label, kind, quoted) in enumerate(template.nodes):
        if kind == VARIABLE:
            letter = label[0].lower() if label[:1].isalpha() else "x"
            name = letter
            k = 2
            while name in taken:
                name = f"{letter}{k}"
                k += 1
        else:
            name = f"_k{const_k}"
            while name in taken:
                const_k += 1
                name = f"_k{const_k}"
        taken.add(name)
        names.append(name)
        new_nodes.append(ConfigNode(name, label, kind, quoted, token if i == 0 else None))
    new_edges = [Edge(names[s], lbl, names[t]) for s, lbl, t in template.edges]
    return new_nodes, new_edges, names[0]


def apply(config, action):
    """Apply one action, returning the successor configuration."""
    legal = legal_actions(config)
    if action.kind not in legal:
        raise TransitionError(f"action {action.kind} illegal here (legal: {sorted(legal)})")

    if action.kind == SHIFT:
        token = config.buffer[0]
        rest = config.buffer[1:]
        template = action.template
        if not template:
            roots = dict(config.subgraph_roots)
            roots[token] = None
            return Configuration(config.stack, rest, config.edges, config.nodes, roots)
        new_nodes, new_edges, root = _instantiate(config, template, token)
        nodes = dict(config.nodes)
        for node in new_nodes:
            nodes[node.id] = node
        roots = dict(config.subgraph_roots)
        roots[token] = root
        return Configuration(
            config.stack + (root,), rest, config.edges + tuple(new_edges), nodes, roots
        )

    if action.kind == LARC:
        if not action.label:
            raise TransitionError("LArc needs a relation label")
        edge = Edge(config.top, action.label, config.second)
        return Configuration(
            config.stack, config.buffer, config.edges + (edge,), config.nodes, config.subgraph_roots
        )

    if action.kind == RARC:
        if not action.label:
            raise TransitionError("RArc needs a relation label")
        label = ROOT_EDGE_LABEL if config.second == ROOT_ID else action.label
        edge = Edge(config.second, label, config.top)
        return Configuration(
            config.stack, config.buffer, config.edges + (edge,), config.nodes, config.subgraph_roots
        )

    # Reduce
    popped = config.top
    edges = config.edges
    if action.reentrancy:
        candidate = reentrancy_candidate(config)
        if candidate is None:
            raise TransitionError("positive reentrancy decision without a candidate")
        if not config.is_variable(popped):
            raise TransitionError("constant nodes cannot head a reentrant edge")
        edges = edges + (Edge(popped, action.label or ":mod", candidate[1]),)
    return Configuration(
        config.stack[:-1], config.buffer, edges, config.nodes, config.subgraph_roots
    )


# ---------------------------------------------------------------------------
# Graph assembly
# ---------------------------------------------------------------------------

def build_graph(config, repair_label=":mod"):
    """Assemble the AmrGraph from a terminal configuration.

    The root is the sentinel's designated target when one exists, otherwise
    the first variable node without incoming edges (creation order), else the
    first variable node.  Stranded weakly-connected components are attached
    to the root with `repair_label`; the number of such repairs is returned
    so their incidence stays measurable.  A run that produced no nodes at all
    yields the smallest well-formed graph.
    """
    nodes = [Node(n.id, n.label, n.kind, n.quoted) for n in config.nodes.values()]
    edges = [e for e in config.edges if e.source != ROOT_ID]

    variables = [n for n in nodes if n.kind == VARIABLE]
    if not variables:
        root_node = Node("a", "amr-empty")
        nodes.insert(0, root_node)
        variables = [root_node]

    designated = next((e.target for e in config.edges if e.source == ROOT_ID), None)
    indeg = {}
    for e in edges:
        indeg[e.target] = indeg.get(e.target, 0) + 1
    if designated is not None and any(n.id == designated for n in variables):
        root = designated
    else:
        root = next((n.id for n in variables if indeg.get(n.id, 0) == 0), variables[0].id)

    # connect stranded components to the root
    neighbors = {n.id: set() for n in nodes}
    for e in edges:
        neighbors[e.source].add(e.target)
        neighbors[e.target].add(e.source)
    seen = set()
    components = []
    order = {n.id: i for i, n in enumerate(nodes)}
    for n in nodes:
        if n.id in seen:
            continue
        component = []
        stack = [n.id]
        seen.add(n.id)
        while stack:
            v = stack.pop()
            component.append(v)
            for w in neighbors[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        components.append(component)

    kinds = {n.id: n.kind for n in nodes}
    repairs = 0
    for component in components:
        if root in component:
            continue
        rep = min(
            component,
            key=lambda v: (
                0 if kinds[v] == VARIABLE and indeg.get(v, 0) == 0 else 1,
                order[v],
            ),
        )
        edges.append(Edge(root, repair_label, rep))
        repairs += 1

    return AmrGraph(nodes, edges, root), repairs


# ---------------------------------------------------------------------------
# Concept dictionary
# ---------------------------------------------------------------------------

SENSE_SUFFIX_RE = re.compile(r"-\d+$")


def is_stopword(token):
    if token.surface.casefold() in ARTICLES:
        return True
    if token.pos in ("AUX", "PUNCT"):
        return True
    if token.surface == "to" and token.pos in ("PART", "TO"):
        return True
    if token.surface and not any(c.isalnum() for c in token.surface):
        return True
    return False


def _is_verb(token):
    return token.pos == "VERB" or token.pos.startswith("VB")


class ConceptTable:
    """Token lemma -> ranked subgraph templates, with fallback rules.

    Lookup returns the most frequent stored template for the lemma (ties
    break on the serialized form), else falls through: verbs get
    ``lemma-01``, NER-tagged tokens an entity fragment, numbers a constant,
    stopwords nothing, anything else a bare ``lemma`` concept.
    """

    def __init__(self):
        self.entries = {}  # lemma -> Counter[Template]

    def record(self, lemma, template):
        self.entries.setdefault(lemma, Counter())[template] += 1

    def stored(self, lemma):
        counter = self.entries.get(lemma)
        if not counter:
            return None
        return min(counter.items(), key=lambda kv: (-kv[1], kv[0].to_penman()))[0]

    def lookup(self, token):
        hit = self.stored(token.lemma)
        if hit is not None:
            return hit
        if is_stopword(token):
            return EMPTY_TEMPLATE
        if _is_verb(token):
            return Template.single(f"{token.lemma.casefold()}-01")
        if token.ner in NER_CONCEPT:
            return Template.entity(NER_CONCEPT[token.ner], token.surface)
        if re.fullmatch(r"[+-]?\d+(\.\d+)?", token.surface):
            return Template.single(token.surface, CONSTANT)
        return Template.single(token.lemma.casefold())

    def write(self, path):
        rows = []
        for lemma in sorted(self.entries):
            for template, count in sorted(
                self.entries[lemma].items(), key=lambda kv: (-kv[1], kv[0].to_penman())
            ):
                rows.append(f"{lemma}\t{count}\t{template.to_penman()}")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(rows) + ("\n" if rows else ""))

    @staticmethod
    def read(path):
        table = ConceptTable()
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                lemma, count, penman = line.split("\t")
                table.entries.setdefault(lemma, Counter())[Template.from_penman(penman)] = int(count)
        return table


def gold_fragments(example):
    """token index -> (fragment root, node set) derived from the alignment.

    The fragment for a token is rooted at its shallowest aligned node and
    spans that node's descendants that are unaligned or aligned to the same
    token.  Aligned nodes of the token left outside their fragment are
    returned separately so callers can account for them.
    """
    graph = example.graph
    alignment = example.alignment
    depths = {}
    frontier = [(graph.root, 0)]
    while frontier:
        node, d = frontier.pop()
        if node in depths and depths[node] <= d:
            continue
        depths[node] = d
        for e in graph.out_edges(node):
            frontier.append((e.target, d + 1))
    doc_order = {n.id: i for i, n in enumerate(graph.nodes)}

    fragments = {}
    dropped = []
    by_token = {}
    for node_id, token in alignment.pairs:
        by_token.setdefault(token, []).append(node_id)
    for token, aligned in sorted(by_token.items()):
        root = min(aligned, key=lambda n: (depths.get(n, len(graph.nodes)), doc_order[n]))
        include = set()
        stack = [root]
        while stack:
            node = stack.pop()
            if node in include:
                continue
            include.add(node)
            for e in graph.out_edges(node):
                target = e.target
                if target in include:
                    continue
                target_token = alignment.token_for(target)
                if target_token is None or target_token == token:
                    stack.append(target)
        fragments[token] = (root, include)
        for node_id in aligned:
            if node_id not in include:
                dropped.append((token, node_id))
    return fragments, dropped


def build_concept_table(examples):
    """Extract the concept dictionary from aligned examples.

    Aligned tokens contribute their gold fragment under the token lemma;
    tokens never aligned to anything contribute the empty template, so the
    dictionary also learns which words carry no graph material.
    """
    table = ConceptTable()
    for example in examples:
        fragments, _ = gold_fragments(example)
        for token in example.sentence.tokens:
            if token.index in fragments:
                root, include = fragments[token.index]
                table.record(token.lemma, Template.from_graph(example.graph, root, include))
            else:
                table.record(token.lemma, EMPTY_TEMPLATE)
    return table
