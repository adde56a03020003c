"""Seeded random AMR graph generator shared by the test suite.

Graphs are rooted, have unique first-letter-plus-counter variable names, and
exercise reentrancies, written ``-of`` labels, back-pointing nodes that force
inverted serialization, and constant attributes (quoted strings, numbers,
polarity).  Acyclic by construction unless `with_cycle` is requested.
"""

import random

from amrkit.graph import AmrGraph, CONSTANT, Edge, Node

CONCEPTS = [
    "want-01", "eat-01", "go-02", "see-01", "run-02", "try-01", "say-01",
    "dog", "boy", "girl", "city", "person", "name", "thing", "country",
    "house", "tree", "possible-01", "sleep-01", "book",
]
RELATIONS = [":ARG0", ":ARG1", ":ARG2", ":mod", ":location", ":time", ":manner", ":poss", ":topic"]
ATTR_RELATIONS = [":polarity", ":quant", ":op1", ":wiki", ":value"]
CONST_POOL = [("-", False), ("3", False), ("4.5", False), ("Rome", True), ("imperative", False)]


def _fresh_name(concept, used):
    letter = concept[0]
    if letter not in used:
        used.add(letter)
        return letter
    k = 2
    while f"{letter}{k}" in used:
        k += 1
    used.add(f"{letter}{k}")
    return f"{letter}{k}"


def random_graph(rng: random.Random, max_vars=8, with_cycle=False):
    n_vars = rng.randint(1, max_vars)
    used = set()
    names = []
    nodes = []
    for _ in range(n_vars):
        concept = rng.choice(CONCEPTS)
        name = _fresh_name(concept, used)
        names.append(name)
        nodes.append(Node(name, concept))

    edges = []
    backpointers = set()  # nodes attached by an edge INTO the tree
    for i in range(1, n_vars):
        j = rng.randrange(i)
        while j in backpointers:
            j = rng.randrange(i)  # keep back-pointing nodes leaf-like
        rel = rng.choice(RELATIONS)
        roll = rng.random()
        if roll < 0.15:
            # i is only reachable by inverting this edge at serialization time
            edges.append(Edge(names[i], rel, names[j]))
            backpointers.add(i)
        elif roll < 0.35:
            # same parent-child meaning, written in -of form
            edges.append(Edge(names[i], rel + "-of", names[j]))
        else:
            edges.append(Edge(names[j], rel, names[i]))

    # reentrancies between forward nodes, low -> high index keeps the DAG
    normal = [i for i in range(n_vars) if i not in backpointers]
    for _ in range(rng.randint(0, max(0, n_vars - 2))):
        if len(normal) < 2:
            break
        u, v = sorted(rng.sample(normal, 2))
        edges.append(Edge(names[u], rng.choice(RELATIONS), names[v]))

    const_count = 0
    for i in range(n_vars):
        if rng.random() < 0.3:
            label, quoted = rng.choice(CONST_POOL)
            cid = f"_k{const_count}"
            const_count += 1
            nodes.append(Node(cid, label, CONSTANT, quoted=quoted))
            edges.append(Edge(names[i], rng.choice(ATTR_RELATIONS), cid))

    if with_cycle and n_vars >= 2:
        edges.append(Edge(names[n_vars - 1], ":cycle", names[0]))

    return AmrGraph(nodes, edges, names[0])
