"""Training oracle: derive gold action sequences from aligned examples.

Given an annotated example whose gold graph is acyclic (after inverse
normalization) and whose alignment maps each node to at most one token, the
oracle runs a deterministic rule cascade over configurations:

1. a not-yet-realized gold edge connects the top two stack nodes -> arc with
   the gold label;
2. the top node has no unrealized gold edge that could still be realized
   later -> Reduce, positive when the gold graph holds an unrealized edge
   from the popped node to the sibling candidate;
3. buffer non-empty -> Shift with the token's gold fragment (empty when the
   token aligns to nothing);
4. otherwise -> Reduce.

Gold edges the cascade cannot realize (nodes never stack-adjacent,
reentrancies outside the sibling pattern, edges across fragment internals)
are charged to the loss report instead of failing the run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import AmrGraph, normalize_inverse_edges
from .transition import (
    LARC,
    RARC,
    REDUCE,
    ROOT_EDGE_LABEL,
    ROOT_ID,
    SHIFT,
    Action,
    Configuration,
    Template,
    apply,
    build_graph,
    gold_fragments,
    legal_actions,
    reentrancy_candidate,
)

THETA = "action"
LAMBDA = "label"
RHO = "reentrancy"
CLASSIFIERS = (THETA, LAMBDA, RHO)


class OracleError(ValueError):
    pass


@dataclass
class LossReport:
    gold_edges: int = 0
    realized_edges: int = 0
    reentrant_dropped: int = 0
    adjacency_dropped: int = 0
    cross_fragment_dropped: int = 0
    gold_nodes: int = 0
    dropped_nodes: int = 0
    root_designated: bool = False

    @property
    def dropped_edges(self):
        return self.reentrant_dropped + self.adjacency_dropped + self.cross_fragment_dropped

    def as_dict(self):
        return {
            "gold_edges": self.gold_edges,
            "realized_edges": self.realized_edges,
            "reentrant_dropped": self.reentrant_dropped,
            "adjacency_dropped": self.adjacency_dropped,
            "cross_fragment_dropped": self.cross_fragment_dropped,
            "gold_nodes": self.gold_nodes,
            "dropped_nodes": self.dropped_nodes,
            "root_designated": self.root_designated,
        }


@dataclass
class OracleResult:
    actions: list
    reconstructed: AmrGraph
    loss: LossReport
    repairs: int = 0


@dataclass
class TrainingSample:
    classifier: str  # one of CLASSIFIERS
    features: object  # dense vector, provided by the feature extractor
    label: str


def _check_acyclic(graph):
    children = {}
    for e in graph.edges:
        children.setdefault(e.source, []).append(e.target)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n.id: WHITE for n in graph.nodes}

    for start in color:
        if color[start] != WHITE:
            continue
        stack = [(start, iter(children.get(start, ())))]
        color[start] = GRAY
        while stack:
            node, it = stack[-1]
            advanced = False
            for child in it:
                if color[child] == GRAY:
                    raise OracleError(f"gold graph is cyclic at node {child!r} (assumption i)")
                if color[child] == WHITE:
                    color[child] = GRAY
                    stack.append((child, iter(children.get(child, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()


class _GoldState:
    """Bookkeeping for one oracle run over the normalized gold graph."""

    def __init__(self, example):
        self.gold = normalize_inverse_edges(example.graph)
        _check_acyclic(self.gold)
        self.fragments, _ = gold_fragments(example)
        self.frag_root = {token: root for token, (root, _) in self.fragments.items()}
        roots = set(self.frag_root.values())
        covered = set()
        for _, include in self.fragments.values():
            covered |= include

        self.loss = LossReport(
            gold_edges=len(self.gold.edges),
            gold_nodes=len(self.gold.nodes),
            dropped_nodes=sum(1 for n in self.gold.nodes if n.id not in covered),
        )

        # classify gold edges; only root-to-root edges go through arc actions
        self.internal = set()
        self.stackpair = set()
        self.cross = set()
        for idx, e in enumerate(self.gold.edges):
            same_fragment = any(
                e.source in include and e.target in include for _, include in self.fragments.values()
            )
            if same_fragment:
                self.internal.add(idx)
            elif e.source in roots and e.target in roots:
                self.stackpair.add(idx)
            else:
                self.cross.add(idx)

        self.realized = set()
        self.gold2cfg = {}
        self.cfg2gold = {}
        self.gold_root_designatable = self.gold.root in roots

    def register_shift(self, token, config_before, config_after):
        """Map the freshly instantiated fragment nodes to their gold ids."""
        root, include = self.fragments[token]
        order = _fragment_order(self.gold, root, include)
        new_ids = [n for n in config_after.nodes if n not in config_before.nodes]
        for gold_id, cfg_id in zip(order, new_ids):
            self.gold2cfg[gold_id] = cfg_id
            self.cfg2gold[cfg_id] = gold_id
        for idx in self.internal:
            e = self.gold.edges[idx]
            if e.source in include and e.target in include:
                self.realized.add(idx)

    def pending_arc(self, config):
        """Gold edge realizable between the top two stack nodes right now."""
        top, second = config.top, config.second
        if second == ROOT_ID:
            if (
                self.gold_root_designatable
                and not config.root_designated()
                and self.cfg2gold.get(top) == self.gold.root
            ):
                return Action(RARC, label=ROOT_EDGE_LABEL)
            return None
        g_top, g_second = self.cfg2gold.get(top), self.cfg2gold.get(second)
        if g_top is None or g_second is None:
            return None
        legal = legal_actions(config)
        for idx in sorted(self.stackpair - self.realized):
            e = self.gold.edges[idx]
            if e.source == g_top and e.target == g_second and LARC in legal:
                self.realized.add(idx)
                return Action(LARC, label=e.label)
            if e.source == g_second and e.target == g_top and RARC in legal:
                self.realized.add(idx)
                return Action(RARC, label=e.label)
        return None

    def reduce_action(self, config):
        """Reduce decision for the current top, or None when unsafe to pop."""
        top = config.top
        g_top = self.cfg2gold.get(top)
        if g_top is not None:
            instantiated = set(self.gold2cfg)
            for idx in self.stackpair - self.realized:
                e = self.gold.edges[idx]
                if g_top not in (e.source, e.target):
                    continue
                other = e.target if e.source == g_top else e.source
                if other not in instantiated:
                    return None  # the partner is still in the buffer; keep the node
        candidate = reentrancy_candidate(config)
        if candidate is not None and g_top is not None and config.is_variable(top):
            g_sibling = self.cfg2gold.get(candidate[1])
            if g_sibling is not None:
                for idx in sorted(self.stackpair - self.realized):
                    e = self.gold.edges[idx]
                    if e.source == g_top and e.target == g_sibling:
                        self.realized.add(idx)
                        return Action(REDUCE, label=e.label, reentrancy=True)
        return Action(REDUCE)

    def finish(self, config):
        self.loss.realized_edges = len(self.realized)
        self.loss.root_designated = config.root_designated()
        indeg = {}
        for e in self.gold.edges:
            indeg[e.target] = indeg.get(e.target, 0) + 1
        for idx, e in enumerate(self.gold.edges):
            if idx in self.realized:
                continue
            if idx in self.cross:
                self.loss.cross_fragment_dropped += 1
            elif indeg.get(e.target, 0) >= 2:
                self.loss.reentrant_dropped += 1
            else:
                self.loss.adjacency_dropped += 1


def _fragment_order(graph, root, include):
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
    return order


def run_oracle(example):
    """Compute the gold action sequence and its replayed graph."""
    state = _GoldState(example)
    config = Configuration.initial(len(example.sentence.tokens))
    actions = []

    while not config.is_terminal:
        legal = legal_actions(config)
        action = None
        if len(config.stack) >= 2:
            action = state.pending_arc(config)
        if action is None and REDUCE in legal and config.top != ROOT_ID:
            action = state.reduce_action(config)
        if action is None and SHIFT in legal:
            token = config.buffer[0]
            if token in state.fragments:
                root, include = state.fragments[token]
                template = Template.from_graph(state.gold, root, include)
            else:
                template = None
            action = Action(SHIFT, template=template)
            before = config
            config = apply(config, action)
            if template:
                state.register_shift(token, before, config)
            actions.append(action)
            continue
        if action is None:
            action = Action(REDUCE)  # forced: only the sentinel is left
        config = apply(config, action)
        actions.append(action)

    state.finish(config)
    reconstructed, repairs = build_graph(config)
    return OracleResult(actions, reconstructed, state.loss, repairs)


def replay(actions, n_tokens):
    """Fold the actions over the initial configuration; returns the terminal
    configuration (raises if any action is illegal at its step)."""
    config = Configuration.initial(n_tokens)
    for action in actions:
        config = apply(config, action)
    return config


def emit_training_samples(example, result, feature_extractor):
    """Emit classifier samples by replaying the oracle actions.

    One `action` sample per action; one `label` sample per arc and per
    positive reentrancy; one `reentrancy` sample per Reduce that had a
    defined candidate.  Features are extracted from the configuration before
    the action is applied.
    """
    samples = []
    config = Configuration.initial(len(example.sentence.tokens))
    for action in result.actions:
        features = feature_extractor(config)
        samples.append(TrainingSample(THETA, features, action.kind))
        if action.kind in (LARC, RARC):
            samples.append(TrainingSample(LAMBDA, features, action.label))
        elif action.kind == REDUCE:
            if reentrancy_candidate(config) is not None and config.is_variable(config.top):
                samples.append(TrainingSample(RHO, features, "1" if action.reentrancy else "0"))
            if action.reentrancy:
                samples.append(TrainingSample(LAMBDA, features, action.label))
        config = apply(config, action)
    return samples
