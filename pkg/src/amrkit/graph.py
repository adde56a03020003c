"""AMR graph model and PENMAN reading/writing.

An AMR is a rooted, labeled, directed graph.  Nodes are either variables
carrying a concept label (``d / dog``) or constants (strings, numbers, ``-``).
Edges are relations whose labels start with ``:``.  The module provides the
PENMAN parser/serializer, conversion to/from the canonical triple form used
by the Smatch scorer, inverse-edge (``-of``) normalization, and an exact
isomorphism check used as a test oracle for small graphs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

VARIABLE = "variable"
CONSTANT = "constant"

# Relation labels ending in -of that are lexical, not inverses.
NON_INVERTIBLE = frozenset({":consist-of", ":prep-out-of", ":prep-on-behalf-of"})

# Bare (unquoted) alphabetic tokens that are constants, not variable references.
MODE_CONSTANTS = frozenset({"imperative", "expressive", "interrogative"})

NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
VARNAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")


class PenmanError(ValueError):
    """Malformed PENMAN input.  `offset` is the byte offset of the problem."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class GraphError(ValueError):
    """A graph violating the AmrGraph invariants was supplied."""


@dataclass(frozen=True)
class Node:
    id: str
    label: str
    kind: str = VARIABLE
    quoted: bool = False  # constant was written as a quoted string

    @property
    def is_variable(self):
        return self.kind == VARIABLE


@dataclass(frozen=True)
class Edge:
    source: str
    label: str
    target: str


@dataclass(frozen=True)
class Triple:
    kind: str  # "instance" | "attribute" | "relation"
    subject: str
    predicate: str
    object: str


class AmrGraph:
    """Rooted AMR graph: node list, edge list (document order), root id."""

    def __init__(self, nodes, edges, root):
        self.nodes = list(nodes)
        self.edges = list(edges)
        self.root = root
        self._by_id = {n.id: n for n in self.nodes}
        if len(self._by_id) != len(self.nodes):
            raise GraphError("duplicate node ids")
        if root not in self._by_id:
            raise GraphError(f"root {root!r} not among nodes")
        for e in self.edges:
            if e.source not in self._by_id or e.target not in self._by_id:
                raise GraphError(f"edge {e} references unknown node")
            if not e.label.startswith(":"):
                raise GraphError(f"edge label {e.label!r} lacks ':' prefix")
            if not self._by_id[e.source].is_variable:
                raise GraphError(f"constant node {e.source!r} has outgoing edge")

    def node(self, node_id):
        return self._by_id[node_id]

    def has_node(self, node_id):
        return node_id in self._by_id

    @property
    def variables(self):
        return [n for n in self.nodes if n.is_variable]

    def out_edges(self, node_id):
        return [e for e in self.edges if e.source == node_id]

    def in_edges(self, node_id):
        return [e for e in self.edges if e.target == node_id]

    def copy(self):
        return AmrGraph(list(self.nodes), list(self.edges), self.root)

    def __eq__(self, other):
        if not isinstance(other, AmrGraph):
            return NotImplemented
        return (
            self.root == other.root
            and sorted(self.nodes, key=lambda n: n.id) == sorted(other.nodes, key=lambda n: n.id)
            and sorted((e.source, e.label, e.target) for e in self.edges)
            == sorted((e.source, e.label, e.target) for e in other.edges)
        )

    def __repr__(self):
        return f"AmrGraph(root={self.root!r}, {len(self.nodes)} nodes, {len(self.edges)} edges)"


# ---------------------------------------------------------------------------
# PENMAN parsing
# ---------------------------------------------------------------------------

_LPAREN, _RPAREN, _SLASH, _STRING, _ATOM = range(5)


def _tokenize(text):
    """Yield (kind, value, byte_offset) over a PENMAN expression."""
    tokens = []
    i = 0
    n = len(text)
    byte_pos = 0
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            byte_pos += len(ch.encode("utf-8"))
            i += 1
            continue
        start_byte = byte_pos
        if ch == "(":
            tokens.append((_LPAREN, "(", start_byte))
            i += 1
            byte_pos += 1
        elif ch == ")":
            tokens.append((_RPAREN, ")", start_byte))
            i += 1
            byte_pos += 1
        elif ch == "/":
            tokens.append((_SLASH, "/", start_byte))
            i += 1
            byte_pos += 1
        elif ch == '"':
            j = i + 1
            buf = []
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                elif text[j] == '"':
                    break
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise PenmanError("unterminated string", start_byte)
            tokens.append((_STRING, "".join(buf), start_byte))
            byte_pos += len(text[i : j + 1].encode("utf-8"))
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t\r\n()"/':
                j += 1
            tokens.append((_ATOM, text[i:j], start_byte))
            byte_pos += len(text[i:j].encode("utf-8"))
            i = j
    return tokens


def _is_constant_atom(atom):
    if NUMBER_RE.match(atom):
        return True
    if atom in ("-", "+"):
        return True
    if atom in MODE_CONSTANTS:
        return True
    return False


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.text_len = len(text.encode("utf-8"))
        self.nodes = []
        self.edges = []
        self.defined = {}  # variable name -> Node
        self.pending_refs = []  # (source var, label, referenced var, offset, edge slot)
        self.const_count = 0

    def peek(self):
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return (None, None, self.text_len)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def fresh_const_id(self):
        while True:
            cid = f"_k{self.const_count}"
            self.const_count += 1
            if cid not in self.defined:
                return cid

    def parse(self):
        kind, _, off = self.peek()
        if kind != _LPAREN:
            raise PenmanError("expected '(' at start of PENMAN expression", off)
        root = self.parse_node()
        kind, val, off = self.peek()
        if kind is not None:
            raise PenmanError(f"unbalanced parentheses: trailing content {val!r}", off)
        # Resolve bare variable references collected during the walk.
        for source, label, ref, ref_off, slot in self.pending_refs:
            if ref not in self.defined:
                raise PenmanError(f"dangling variable reference {ref!r}", ref_off)
            self.edges[slot] = Edge(source, label, ref)
        return AmrGraph(self.nodes, self.edges, root)

    def parse_node(self):
        kind, _, open_off = self.take()  # consumes '('
        kind, var, off = self.take()
        if kind != _ATOM or not VARNAME_RE.match(var or ""):
            raise PenmanError("expected variable name after '('", off)
        if var in self.defined:
            raise PenmanError(f"duplicate variable definition {var!r}", off)
        kind, _, off = self.take()
        if kind != _SLASH:
            raise PenmanError(f"expected '/' after variable {var!r}", off)
        kind, concept, off = self.take()
        if kind == _STRING:
            pass  # quoted concept: keep the unquoted content
        elif kind != _ATOM:
            raise PenmanError(f"expected concept after '{var} /'", off)
        node = Node(var, concept, VARIABLE)
        self.defined[var] = node
        self.nodes.append(node)
        while True:
            kind, val, off = self.peek()
            if kind == _RPAREN:
                self.take()
                return var
            if kind is None:
                raise PenmanError("unbalanced parentheses: unexpected end of input", off)
            if kind != _ATOM or not val.startswith(":"):
                raise PenmanError(f"expected relation starting with ':', got {val!r}", off)
            self.take()
            label = val
            kind, tval, toff = self.peek()
            if kind == _LPAREN:
                child = self.parse_node()
                self.edges.append(Edge(var, label, child))
            elif kind == _STRING:
                self.take()
                cid = self.fresh_const_id()
                self.nodes.append(Node(cid, tval, CONSTANT, quoted=True))
                self.edges.append(Edge(var, label, cid))
            elif kind == _ATOM:
                self.take()
                if _is_constant_atom(tval):
                    cid = self.fresh_const_id()
                    self.nodes.append(Node(cid, tval, CONSTANT))
                    self.edges.append(Edge(var, label, cid))
                elif VARNAME_RE.match(tval):
                    # Reentrant reference; may point forward, resolve at the end.
                    slot = len(self.edges)
                    self.edges.append(Edge(var, label, var))  # placeholder
                    self.pending_refs.append((var, label, tval, toff, slot))
                else:
                    raise PenmanError(f"cannot interpret token {tval!r}", toff)
            else:
                raise PenmanError(f"expected a value after relation {label}", toff)


def parse_penman(text):
    """Parse a single PENMAN expression into an AmrGraph.

    Bare variable tokens become reentrant edges to the defined node (forward
    references allowed).  ``-of`` edges are stored as written; see
    `normalize_inverse_edges`.  Raises PenmanError with a byte offset on
    unbalanced parentheses, duplicate variable definitions, relation tokens
    without the ``:`` prefix, and dangling variable references.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# PENMAN serialization
# ---------------------------------------------------------------------------

_QUOTE_TRIGGERS = set(' \t\r\n()"/:')


def _needs_quotes(label):
    return label == "" or any(c in _QUOTE_TRIGGERS for c in label)


def _format_constant(node):
    if node.quoted or _needs_quotes(node.label):
        escaped = node.label.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return node.label


def _format_concept(label):
    if _needs_quotes(label):
        escaped = label.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return label


def invert_label(label):
    """:R <-> :R-of, leaving the lexicalized -of relations alone."""
    if label.endswith("-of") and label not in NON_INVERTIBLE:
        return label[: -len("-of")]
    return label + "-of"


def is_inverse_label(label):
    return label.endswith("-of") and label not in NON_INVERTIBLE


def _forward_closure(g, seeds, out_map):
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        v = stack.pop()
        for t in out_map.get(v, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def serialize_penman(g):
    """Serialize an AmrGraph deterministically.

    Children are ordered by (edge label as printed, target node id); each
    node's full form is printed at its first visit in DFS order, reentrant
    visits as bare variables.  Edges print forward from their source; a node
    not forward-reachable from the root is entered through one of its
    outgoing edges printed with the inverted (``-of``) label.  Raises
    GraphError if some node stays unreachable even allowing inversion.
    """
    out_map = {}
    for e in g.edges:
        out_map.setdefault(e.source, []).append(e.target)

    # Pick an inverted entry edge for every node the root cannot reach forward.
    entry = {}
    reached = _forward_closure(g, [g.root], out_map)
    while True:
        cands = [
            (e.source, idx)
            for idx, e in enumerate(g.edges)
            if e.source not in reached and e.target in reached
        ]
        if not cands:
            break
        v, idx = min(cands)
        entry[v] = idx
        reached |= _forward_closure(g, [v], out_map)
    unreachable = sorted(n.id for n in g.nodes if n.id not in reached)
    if unreachable:
        raise GraphError(f"nodes unreachable from root: {unreachable}")

    incident = {n.id: [] for n in g.nodes}
    for idx, e in enumerate(g.edges):
        incident[e.source].append((idx, e, True))
        if e.target != e.source:
            incident[e.target].append((idx, e, False))

    printed_edges = set()
    expanded = set()
    out = []

    def expand(node_id):
        node = g.node(node_id)
        expanded.add(node_id)
        out.append(f"({node_id} / {_format_concept(node.label)}")
        while True:
            candidates = []
            for idx, e, forward in incident[node_id]:
                if idx in printed_edges:
                    continue
                if forward:
                    candidates.append((e.label, e.target, idx))
                elif entry.get(e.source) == idx:
                    candidates.append((invert_label(e.label), e.source, idx))
            if not candidates:
                break
            label, neighbor, idx = min(candidates, key=lambda c: (c[0], c[1]))
            printed_edges.add(idx)
            target = g.node(neighbor)
            if not target.is_variable:
                out.append(f" {label} {_format_constant(target)}")
            elif neighbor in expanded:
                out.append(f" {label} {neighbor}")
            else:
                out.append(f" {label} ")
                expand(neighbor)
        out.append(")")

    expand(g.root)
    return "".join(out)


# ---------------------------------------------------------------------------
# Triples
# ---------------------------------------------------------------------------

TOP_PREDICATE = "TOP"
TOP_VALUE = "top"


def _attribute_object(node):
    # Keep the quoting in the triple so graph -> triples -> graph is lossless.
    if node.quoted:
        return f'"{node.label}"'
    return node.label


def to_triples(g):
    """Canonical triple form: instance/attribute/relation plus one TOP."""
    triples = [Triple("attribute", g.root, TOP_PREDICATE, TOP_VALUE)]
    for n in g.nodes:
        if n.is_variable:
            triples.append(Triple("instance", n.id, "instance", n.label))
    for e in g.edges:
        target = g.node(e.target)
        if target.is_variable:
            triples.append(Triple("relation", e.source, e.label, e.target))
        else:
            triples.append(Triple("attribute", e.source, e.label, _attribute_object(target)))
    return triples


def from_triples(triples):
    """Rebuild an AmrGraph from to_triples output (inverse conversion)."""
    nodes = []
    edges = []
    root = None
    const_count = 0
    var_ids = {t.subject for t in triples if t.kind == "instance"}
    for t in triples:
        if t.kind == "instance":
            nodes.append(Node(t.subject, t.object, VARIABLE))
    for t in triples:
        if t.kind == "attribute" and t.predicate == TOP_PREDICATE:
            root = t.subject
        elif t.kind == "attribute":
            while f"_k{const_count}" in var_ids:
                const_count += 1
            cid = f"_k{const_count}"
            const_count += 1
            if t.object.startswith('"') and t.object.endswith('"') and len(t.object) >= 2:
                nodes.append(Node(cid, t.object[1:-1], CONSTANT, quoted=True))
            else:
                nodes.append(Node(cid, t.object, CONSTANT))
            edges.append(Edge(t.subject, t.predicate, cid))
        elif t.kind == "relation":
            edges.append(Edge(t.subject, t.predicate, t.object))
    if root is None:
        raise GraphError("triple set has no TOP attribute")
    return AmrGraph(nodes, edges, root)


def normalize_inverse_edges(g):
    """Reverse every variable-to-variable ``-of`` edge (lexical -of excepted).

    Edges into constants are never reversed: constants cannot head an edge.
    Idempotent; returns a new graph.
    """
    edges = []
    for e in g.edges:
        if is_inverse_label(e.label) and g.node(e.target).is_variable:
            edges.append(Edge(e.target, invert_label(e.label), e.source))
        else:
            edges.append(e)
    return AmrGraph(list(g.nodes), edges, g.root)


def reentrancy_count(g):
    """Variable nodes with in-degree >= 2 after inverse normalization."""
    norm = normalize_inverse_edges(g)
    indeg = {}
    for e in norm.edges:
        indeg[e.target] = indeg.get(e.target, 0) + 1
    return sum(1 for n in norm.variables if indeg.get(n.id, 0) >= 2)


# ---------------------------------------------------------------------------
# Exact isomorphism (test oracle for small graphs)
# ---------------------------------------------------------------------------

def canonical_constant(text):
    """Constants compare modulo quoting and numeric formatting (4 == 4.0)."""
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        text = text[1:-1]
    if NUMBER_RE.match(text):
        value = float(text)
        if value == int(value):
            return str(int(value))
        return repr(value)
    return text.casefold()


def _signature(g):
    norm = normalize_inverse_edges(g)
    instances = sorted((n.id, n.label) for n in norm.variables)
    relations = sorted((e.source, e.label, e.target) for e in norm.edges if norm.node(e.target).is_variable)
    attributes = sorted(
        (e.source, e.label, canonical_constant(_attribute_object(norm.node(e.target))))
        for e in norm.edges
        if not norm.node(e.target).is_variable
    )
    return norm, instances, relations, attributes


def isomorphic(a, b, max_vars=8):
    """Exact isomorphism under variable renaming, modulo -of normalization.

    Exhaustive search over concept-compatible variable bijections; intended
    as a test oracle for graphs of at most `max_vars` variables.
    """
    na, inst_a, rel_a, attr_a = _signature(a)
    nb, inst_b, rel_b, attr_b = _signature(b)
    vars_a = [n.id for n in na.variables]
    vars_b = [n.id for n in nb.variables]
    if len(vars_a) != len(vars_b) or len(rel_a) != len(rel_b) or len(attr_a) != len(attr_b):
        return False
    if sorted(c for _, c in inst_a) != sorted(c for _, c in inst_b):
        return False
    if len(vars_a) > max_vars:
        raise GraphError(f"isomorphism oracle limited to {max_vars} variables")

    label_a = {n.id: n.label for n in na.variables}
    candidates = {
        v: [w for w in vars_b if nb.node(w).label == label_a[v]] for v in vars_a
    }
    rel_b_set = set(rel_b)
    attr_b_set = set(attr_b)
    order = sorted(vars_a, key=lambda v: len(candidates[v]))

    def check(mapping):
        if mapping.get(a.root) != b.root:
            return False
        for s, lbl, t in rel_a:
            if (mapping[s], lbl, mapping[t]) not in rel_b_set:
                return False
        for s, lbl, val in attr_a:
            if (mapping[s], lbl, val) not in attr_b_set:
                return False
        return True

    used = set()
    mapping = {}

    def search(i):
        if i == len(order):
            return check(mapping)
        v = order[i]
        for w in candidates[v]:
            if w in used:
                continue
            mapping[v] = w
            used.add(w)
            if search(i + 1):
                return True
            used.discard(w)
            del mapping[v]
        return False

    return search(0)
