import random

import pytest

from amrkit.graph import (
    CONSTANT,
    AmrGraph,
    Edge,
    GraphError,
    Node,
    PenmanError,
    Triple,
    from_triples,
    isomorphic,
    normalize_inverse_edges,
    parse_penman,
    reentrancy_count,
    serialize_penman,
    to_triples,
)
from gen import random_graph

FIG1 = "(w / want-01 :ARG0 (d / dog) :ARG1 (e / eat-01 :ARG0 d))"


class TestParse:
    def test_fig1_shape(self):
        g = parse_penman(FIG1)
        assert len(g.variables) == 3
        assert len(g.edges) == 3
        assert len(g.in_edges("d")) == 2  # reentrant node

    def test_single_node(self):
        g = parse_penman("(a / amr-empty)")
        assert len(g.nodes) == 1
        assert g.edges == []
        assert g.root == "a"

    def test_forward_reference(self):
        g = parse_penman("(w / want-01 :ARG1 (e / eat-01 :ARG0 d) :ARG0 (d / dog))")
        assert any(e.source == "e" and e.target == "d" for e in g.edges)

    def test_constants(self):
        g = parse_penman('(s / sleep-01 :polarity - :quant 3 :wiki "Q1")')
        kinds = {n.label: n.kind for n in g.nodes}
        assert kinds["-"] == CONSTANT
        assert kinds["3"] == CONSTANT
        assert kinds["Q1"] == CONSTANT
        assert g.node([e.target for e in g.edges if e.label == ":wiki"][0]).quoted

    def test_unbalanced_missing_close(self):
        text = "(w / want-01 :ARG0 (d / dog)"
        with pytest.raises(PenmanError) as exc:
            parse_penman(text)
        assert exc.value.offset == len(text)

    def test_unbalanced_trailing(self):
        text = "(a / amr-empty))"
        with pytest.raises(PenmanError) as exc:
            parse_penman(text)
        assert exc.value.offset == text.rindex(")")

    def test_duplicate_variable(self):
        text = "(d / dog :ARG0 (d / cat))"
        with pytest.raises(PenmanError) as exc:
            parse_penman(text)
        assert exc.value.offset == text.index("(d / cat") + 1
        assert "duplicate" in str(exc.value)

    def test_relation_without_colon(self):
        text = "(d / dog ARG0 (c / cat))"
        with pytest.raises(PenmanError) as exc:
            parse_penman(text)
        assert exc.value.offset == text.index("ARG0")

    def test_dangling_reference(self):
        text = "(w / want-01 :ARG0 d)"
        with pytest.raises(PenmanError) as exc:
            parse_penman(text)
        assert exc.value.offset == text.rindex("d")
        assert "dangling" in str(exc.value)

    def test_roundtrip_five_node_nested(self):
        text = (
            "(s / say-01 :ARG0 (p / person :name (n / name :op1 \"Ida\")) "
            ":ARG1 (g / go-02 :ARG0 p :ARG4 (c / city)))"
        )
        g = parse_penman(text)
        again = parse_penman(serialize_penman(g))
        assert isomorphic(g, again)


class TestSerialize:
    def test_single_node_exact(self):
        g = AmrGraph([Node("a", "amr-empty")], [], "a")
        assert serialize_penman(g) == "(a / amr-empty)"

    def test_fig1_roundtrip(self):
        g = parse_penman(FIG1)
        assert isomorphic(g, parse_penman(serialize_penman(g)))

    def test_child_order_by_label(self):
        g = AmrGraph(
            [Node("s", "see-01"), Node("d", "dog"), Node("c", "cat")],
            [Edge("s", ":ARG1", "c"), Edge("s", ":ARG0", "d")],
            "s",
        )
        assert serialize_penman(g) == "(s / see-01 :ARG0 (d / dog) :ARG1 (c / cat))"

    def test_deterministic(self):
        rng = random.Random(7)
        for _ in range(25):
            g = random_graph(rng)
            assert serialize_penman(g) == serialize_penman(g.copy())

    def test_inverted_entry(self):
        g = AmrGraph(
            [Node("r", "run-01"), Node("y", "yard"), Node("x", "x-ray")],
            [Edge("r", ":location", "y"), Edge("x", ":ARG0", "y")],
            "r",
        )
        assert serialize_penman(g) == "(r / run-01 :location (y / yard :ARG0-of (x / x-ray)))"

    def test_unreachable_error(self):
        g = AmrGraph([Node("a", "alpha"), Node("b", "beta")], [], "a")
        with pytest.raises(GraphError, match="unreachable"):
            serialize_penman(g)

    def test_quoting_roundtrip(self):
        g = AmrGraph(
            [Node("t", "thing"), Node("_k0", 'say "hi" (loudly)', CONSTANT, quoted=True)],
            [Edge("t", ":value", "_k0")],
            "t",
        )
        s = serialize_penman(g)
        assert '\\"hi\\"' in s
        assert isomorphic(g, parse_penman(s))

    def test_cycle_roundtrip(self):
        g = AmrGraph(
            [Node("a", "alpha"), Node("b", "beta")],
            [Edge("a", ":ARG0", "b"), Edge("b", ":ARG1", "a")],
            "a",
        )
        assert isomorphic(g, parse_penman(serialize_penman(g)))

    def test_roundtrip_property_seeded(self):
        rng = random.Random(20240801)
        for _ in range(300):
            g = random_graph(rng)
            again = parse_penman(serialize_penman(g))
            assert isomorphic(g, again)

    def test_reentrancy_count_invariant(self):
        rng = random.Random(99)
        for _ in range(100):
            g = random_graph(rng)
            again = parse_penman(serialize_penman(g))
            assert reentrancy_count(g) == reentrancy_count(again)


class TestTriples:
    def test_single_node(self):
        triples = to_triples(parse_penman("(a / amr-empty)"))
        assert triples == [
            Triple("attribute", "a", "TOP", "top"),
            Triple("instance", "a", "instance", "amr-empty"),
        ]

    def test_fig1_counts(self):
        triples = to_triples(parse_penman(FIG1))
        kinds = [t.kind for t in triples]
        assert kinds.count("instance") == 3
        assert kinds.count("relation") == 3
        assert kinds.count("attribute") == 1  # TOP

    def test_inverse_normalized_triple(self):
        g = normalize_inverse_edges(parse_penman("(b / boy :ARG0-of (g / go-01))"))
        rel = [t for t in to_triples(g) if t.kind == "relation"]
        assert rel == [Triple("relation", "g", ":ARG0", "b")]

    def test_lossless_roundtrip(self):
        rng = random.Random(41)
        for _ in range(100):
            g = random_graph(rng)
            assert isomorphic(g, from_triples(to_triples(g)))


class TestNormalize:
    def test_reverses_inverse_edge(self):
        g = normalize_inverse_edges(parse_penman("(b / boy :ARG0-of (g / go-01))"))
        assert g.edges == [Edge("g", ":ARG0", "b")]

    def test_lexicalized_exceptions_unchanged(self):
        for rel in (":consist-of", ":prep-out-of", ":prep-on-behalf-of"):
            g = parse_penman(f"(t / thing {rel} (w / wood))")
            norm = normalize_inverse_edges(g)
            assert norm.edges == g.edges

    def test_idempotent(self):
        rng = random.Random(5)
        for _ in range(100):
            g = random_graph(rng)
            once = normalize_inverse_edges(g)
            twice = normalize_inverse_edges(once)
            assert once.edges == twice.edges

    def test_constant_target_not_reversed(self):
        g = parse_penman("(t / thing :part-of 3)")
        norm = normalize_inverse_edges(g)
        assert norm.edges == g.edges


class TestInvariants:
    def test_duplicate_node_id_rejected(self):
        with pytest.raises(GraphError):
            AmrGraph([Node("a", "alpha"), Node("a", "beta")], [], "a")

    def test_root_must_exist(self):
        with pytest.raises(GraphError):
            AmrGraph([Node("a", "alpha")], [], "b")

    def test_edge_endpoints_must_exist(self):
        with pytest.raises(GraphError):
            AmrGraph([Node("a", "alpha")], [Edge("a", ":mod", "zz")], "a")

    def test_constant_cannot_head_edge(self):
        with pytest.raises(GraphError):
            AmrGraph(
                [Node("a", "alpha"), Node("_k0", "-", CONSTANT)],
                [Edge("_k0", ":mod", "a")],
                "a",
            )

    def test_isomorphic_distinguishes(self):
        a = parse_penman(FIG1)
        b = parse_penman("(w / want-01 :ARG0 (d / dog) :ARG1 (e / eat-01))")
        assert not isomorphic(a, b)

    def test_isomorphic_renamed(self):
        a = parse_penman("(x / want-01 :ARG0 (y / dog))")
        b = parse_penman("(w / want-01 :ARG0 (d / dog))")
        assert isomorphic(a, b)
