"""Greedy end-to-end parsing: compose the action/label/reentrancy
classifiers and the concept dictionary over configurations until both stack
and buffer are empty, then assemble the graph.

Illegal actions are masked before the argmax, so the parser terminates for
any classifier (see the transition module's progress guarantees).  Ties
break toward the lowest label id.  The reentrancy decision thresholds the
positive-class probability at `reentrancy_threshold` (default 0.5).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .transition import (
    LARC,
    RARC,
    REDUCE,
    ROOT_EDGE_LABEL,
    ROOT_ID,
    SHIFT,
    Action,
    Configuration,
    apply,
    build_graph,
    legal_actions,
    reentrancy_candidate,
)

log = logging.getLogger(__name__)


class ParserError(ValueError):
    pass


class ModelMismatch(ParserError):
    """A model was trained against a different feature manifest."""


class Predictor:
    """Probability interface over a trained net plus its label vocabulary."""

    def __init__(self, model, labels):
        self.model = model
        self.labels = list(labels)

    def probabilities(self, features):
        return self.model.forward(features)


@dataclass
class ParseStats:
    repairs: int = 0
    root_designated: bool = False


class GreedyParser:
    def __init__(self, predictors, concept_table, template, embeddings,
                 reentrancy_threshold=0.5, expected_hash=None):
        """predictors: {'action': p, 'label': p, 'reentrancy': p} where each
        exposes .labels and .probabilities(features).  `expected_hash`
        entries (classifier -> manifest hash) are verified against the
        runtime template before any parsing happens."""
        self.predictors = predictors
        self.concept_table = concept_table
        self.template = template
        self.embeddings = embeddings
        self.reentrancy_threshold = reentrancy_threshold
        if expected_hash:
            runtime = template.manifest_hash(embeddings)
            for name, model_hash in expected_hash.items():
                if model_hash != runtime:
                    raise ModelMismatch(
                        f"{name} model was trained with manifest {model_hash[:12]}..., "
                        f"runtime template is {runtime[:12]}..."
                    )

    def _argmax_label(self, predictor, features, exclude=()):
        probs = np.asarray(predictor.probabilities(features), dtype=np.float64)
        masked = probs.copy()
        for i, label in enumerate(predictor.labels):
            if label in exclude:
                masked[i] = -1.0
        return predictor.labels[int(np.argmax(masked))]

    def _pick_action_kind(self, features, legal):
        predictor = self.predictors["action"]
        probs = np.asarray(predictor.probabilities(features), dtype=np.float64)
        masked = np.full(len(probs), -1.0)
        for i, label in enumerate(predictor.labels):
            if label in legal:
                masked[i] = probs[i]
        if masked.max() < 0:
            return sorted(legal)[0]  # vocabulary never saw any legal kind
        return predictor.labels[int(np.argmax(masked))]

    def _step(self, config, sentence):
        legal = legal_actions(config)
        features = self.template.extract(self.embeddings, config, sentence)
        kind = self._pick_action_kind(features, legal)
        if kind == SHIFT:
            token = sentence.tokens[config.buffer[0]]
            template = self.concept_table.lookup(token)
            return Action(SHIFT, template=template if template else None)
        if kind in (LARC, RARC):
            if kind == RARC and config.second == ROOT_ID:
                return Action(RARC, label=ROOT_EDGE_LABEL)
            label = self._argmax_label(self.predictors["label"], features,
                                       exclude=(ROOT_EDGE_LABEL,))
            return Action(kind, label=label)
        candidate = reentrancy_candidate(config)
        if candidate is not None:
            rho = self.predictors["reentrancy"]
            probs = np.asarray(rho.probabilities(features), dtype=np.float64)
            try:
                positive = probs[rho.labels.index("1")]
            except ValueError:
                positive = 0.0
            if positive >= self.reentrancy_threshold:
                label = self._argmax_label(self.predictors["label"], features,
                                           exclude=(ROOT_EDGE_LABEL,))
                return Action(REDUCE, label=label, reentrancy=True)
        return Action(REDUCE)

    def parse(self, sentence):
        """Parse one TokenizedSentence into an AmrGraph."""
        graph, _ = self.parse_with_stats(sentence)
        return graph

    def parse_with_stats(self, sentence):
        if len(sentence.tokens) == 0:
            raise ParserError(f"sentence {sentence.sentence_id!r} has no tokens")
        config = Configuration.initial(len(sentence.tokens))
        while not config.is_terminal:
            config = apply(config, self._step(config, sentence))
        graph, repairs = build_graph(config)
        if repairs:
            log.info("sentence %s: %d stranded components attached to the root",
                     sentence.sentence_id, repairs)
        return graph, ParseStats(repairs=repairs, root_designated=config.root_designated())


def parse_corpus(sentences, parser, jobs=1):
    """Parse many sentences with per-sentence failure isolation.

    Returns (results, failures, stats): results holds (id, graph) in input
    order for the sentences that parsed; failures holds (id, error message);
    stats aggregates repair counts.  Output is independent of `jobs`.
    """
    sentences = list(sentences)

    def work(sentence):
        return parser.parse_with_stats(sentence)

    outcomes = [None] * len(sentences)
    if jobs <= 1:
        for i, sentence in enumerate(sentences):
            try:
                outcomes[i] = ("ok", work(sentence))
            except Exception as exc:  # per-sentence isolation
                outcomes[i] = ("err", str(exc))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(work, s) for s in sentences]
            for i, future in enumerate(futures):
                try:
                    outcomes[i] = ("ok", future.result())
                except Exception as exc:
                    outcomes[i] = ("err", str(exc))

    results = []
    failures = []
    total_repairs = 0
    for sentence, (status, payload) in zip(sentences, outcomes):
        if status == "ok":
            graph, stats = payload
            results.append((sentence.sentence_id, graph))
            total_repairs += stats.repairs
        else:
            failures.append((sentence.sentence_id, payload))
    return results, failures, {"repairs": total_repairs}
