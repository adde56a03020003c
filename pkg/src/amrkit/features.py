"""Fixed-width dense feature vectors for the three classifiers.

The default template reads three stack positions (top, second, third) and
two buffer positions (front, second).  Stack slots carry the aligned token's
word embedding, the node's concept embedding, POS/NER/dep-label one-hots and
three bounded scalars (subgraph depth, parent count, child count); buffer
slots carry the token's word embedding and one-hots.  Every slot ends with a
presence bit; absent positions are all-zero.  One pair block encodes the
dependency relation between the top two stack nodes' tokens (none bucket
when they are not directly related).

`use_dependency=False` (the ablation) zeroes the dep-label one-hots and the
pair block but never changes the width, so trained models stay shape
compatible and the flag is carried in the manifest hash instead.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .transition import ROOT_ID

STACK_SLOTS = 3
BUFFER_SLOTS = 2


@dataclass(frozen=True)
class Tagsets:
    pos: tuple
    ner: tuple
    dep: tuple

    @staticmethod
    def from_sentences(sentences):
        pos, ner, dep = set(), set(), set()
        for sentence in sentences:
            for token in sentence.tokens:
                pos.add(token.pos)
                ner.add(token.ner)
                dep.add(token.dep_label)
        return Tagsets(tuple(sorted(pos)), tuple(sorted(ner)), tuple(sorted(dep)))

    def describe(self):
        return (
            f"pos-tags: {' '.join(self.pos)}\n"
            f"ner-tags: {' '.join(self.ner)}\n"
            f"dep-labels: {' '.join(self.dep)}"
        )


def _one_hot(tags, value):
    vec = np.zeros(len(tags) + 1, dtype=np.float32)  # trailing OOV bucket
    try:
        vec[tags.index(value)] = 1.0
    except ValueError:
        vec[-1] = 1.0
    return vec


def _scalar(value):
    return min(max(value, 0), 10) / 10.0


class FeatureTemplate:
    """Slot layout over a configuration; width is fixed by the tagsets and
    the embedding dimensions, never by the corpus content."""

    def __init__(self, tagsets, use_dependency=True,
                 stack_slots=STACK_SLOTS, buffer_slots=BUFFER_SLOTS):
        self.tagsets = tagsets
        self.use_dependency = use_dependency
        self.stack_slots = stack_slots
        self.buffer_slots = buffer_slots

    def _dims(self, embeddings):
        pos_w = len(self.tagsets.pos) + 1
        ner_w = len(self.tagsets.ner) + 1
        dep_w = len(self.tagsets.dep) + 1
        return embeddings.word_dim, embeddings.concept_dim, pos_w, ner_w, dep_w

    def layout(self, embeddings):
        """Ordered (name, width, kind) blocks; kind in {word, concept, tag,
        scalar, presence, dep-tag, pair}."""
        wd, cd, pos_w, ner_w, dep_w = self._dims(embeddings)
        blocks = []
        for i in range(self.stack_slots):
            blocks.append((f"stack{i}.word", wd, "word"))
            blocks.append((f"stack{i}.concept", cd, "concept"))
            blocks.append((f"stack{i}.pos", pos_w, "tag"))
            blocks.append((f"stack{i}.ner", ner_w, "tag"))
            blocks.append((f"stack{i}.dep", dep_w, "dep-tag"))
            blocks.append((f"stack{i}.depth", 1, "scalar"))
            blocks.append((f"stack{i}.parents", 1, "scalar"))
            blocks.append((f"stack{i}.children", 1, "scalar"))
            blocks.append((f"stack{i}.present", 1, "presence"))
        for j in range(self.buffer_slots):
            blocks.append((f"buffer{j}.word", wd, "word"))
            blocks.append((f"buffer{j}.pos", pos_w, "tag"))
            blocks.append((f"buffer{j}.ner", ner_w, "tag"))
            blocks.append((f"buffer{j}.dep", dep_w, "dep-tag"))
            blocks.append((f"buffer{j}.present", 1, "presence"))
        blocks.append(("pair.dep", dep_w + 1, "pair"))  # extra none bucket
        return blocks

    def width(self, embeddings):
        return sum(w for _, w, _ in self.layout(embeddings))

    def embedded_blocks(self, embeddings):
        """(offset, width, kind) of word/concept blocks in the dense layout;
        these are the coordinates the indexed sample storage compresses."""
        out = []
        offset = 0
        for name, w, kind in self.layout(embeddings):
            if kind in ("word", "concept") and w > 0:
                out.append((offset, w, kind, name))
            offset += w
        return out

    def dependency_coordinates(self, embeddings):
        """Dense coordinates zeroed by the ablation flag."""
        coords = []
        offset = 0
        for _, w, kind in self.layout(embeddings):
            if kind in ("dep-tag", "pair"):
                coords.extend(range(offset, offset + w))
            offset += w
        return coords

    # -- manifest ----------------------------------------------------------

    def manifest(self, embeddings):
        lines = [
            "feature-template v1",
            f"use-dependency: {str(self.use_dependency).lower()}",
            f"stack-slots: {self.stack_slots}",
            f"buffer-slots: {self.buffer_slots}",
            f"word-dim: {embeddings.word_dim}",
            f"concept-dim: {embeddings.concept_dim}",
            f"embedding: {embeddings.config.describe()}",
            self.tagsets.describe(),
            "slots:",
        ]
        offset = 0
        for name, w, kind in self.layout(embeddings):
            lines.append(f"  {name} offset={offset} width={w} kind={kind}")
            offset += w
        lines.append(f"total-width: {offset}")
        return "\n".join(lines) + "\n"

    def manifest_hash(self, embeddings):
        return hashlib.sha256(self.manifest(embeddings).encode("utf-8")).hexdigest()

    @staticmethod
    def from_manifest(text):
        """Rebuild the template (and the embedding description) from a
        manifest written by `manifest`; returns (template, meta dict)."""
        fields = {}
        tags = {}
        for line in text.splitlines():
            if line.startswith("  ") or line == "slots:":
                continue
            key, _, value = line.partition(": ")
            if key in ("pos-tags", "ner-tags", "dep-labels"):
                tags[key] = tuple(value.split()) if value else ()
            elif value:
                fields[key] = value
        tagsets = Tagsets(tags["pos-tags"], tags["ner-tags"], tags["dep-labels"])
        template = FeatureTemplate(
            tagsets,
            use_dependency=fields["use-dependency"] == "true",
            stack_slots=int(fields["stack-slots"]),
            buffer_slots=int(fields["buffer-slots"]),
        )
        meta = {
            "word_dim": int(fields["word-dim"]),
            "concept_dim": int(fields["concept-dim"]),
            "embedding": dict(
                pair.split("=", 1) for pair in fields["embedding"].split() if "=" in pair
            ),
        }
        return template, meta

    # -- extraction --------------------------------------------------------

    def _stack_slot(self, out, pos, node_id, config, sentence, embeddings):
        wd, cd, pos_w, ner_w, dep_w = self._dims(embeddings)
        token = None
        if node_id != ROOT_ID:
            node = config.nodes[node_id]
            if node.token is not None:
                token = sentence.tokens[node.token]
            out[pos + wd : pos + wd + cd] = embeddings.concept_vector(node.label)
        if token is not None:
            out[pos : pos + wd] = embeddings.token_vector(sentence.sentence_id, token)
            out[pos + wd + cd : pos + wd + cd + pos_w] = _one_hot(self.tagsets.pos, token.pos)
            out[pos + wd + cd + pos_w : pos + wd + cd + pos_w + ner_w] = _one_hot(
                self.tagsets.ner, token.ner
            )
            if self.use_dependency:
                out[pos + wd + cd + pos_w + ner_w : pos + wd + cd + pos_w + ner_w + dep_w] = (
                    _one_hot(self.tagsets.dep, token.dep_label)
                )
        base = pos + wd + cd + pos_w + ner_w + dep_w
        out[base] = _scalar(config.subgraph_depth(node_id))
        out[base + 1] = _scalar(config.parent_count(node_id))
        out[base + 2] = _scalar(config.child_count(node_id))
        out[base + 3] = 1.0  # presence

    def _buffer_slot(self, out, pos, token, sentence, embeddings):
        wd, _, pos_w, ner_w, dep_w = self._dims(embeddings)
        out[pos : pos + wd] = embeddings.token_vector(sentence.sentence_id, token)
        out[pos + wd : pos + wd + pos_w] = _one_hot(self.tagsets.pos, token.pos)
        out[pos + wd + pos_w : pos + wd + pos_w + ner_w] = _one_hot(self.tagsets.ner, token.ner)
        if self.use_dependency:
            out[pos + wd + pos_w + ner_w : pos + wd + pos_w + ner_w + dep_w] = _one_hot(
                self.tagsets.dep, token.dep_label
            )
        out[pos + wd + pos_w + ner_w + dep_w] = 1.0  # presence

    def _pair_block(self, out, pos, config, sentence, embeddings):
        _, _, _, _, dep_w = self._dims(embeddings)
        if not self.use_dependency:
            return
        top, second = config.top, config.second
        t_top = t_second = None
        if top is not None and top != ROOT_ID:
            idx = config.nodes[top].token
            t_top = sentence.tokens[idx] if idx is not None else None
        if second is not None and second != ROOT_ID:
            idx = config.nodes[second].token
            t_second = sentence.tokens[idx] if idx is not None else None
        if t_top is not None and t_second is not None:
            if t_top.dep_head == t_second.index:
                out[pos : pos + dep_w] = _one_hot(self.tagsets.dep, t_top.dep_label)
                return
            if t_second.dep_head == t_top.index:
                out[pos : pos + dep_w] = _one_hot(self.tagsets.dep, t_second.dep_label)
                return
        out[pos + dep_w] = 1.0  # none bucket

    def extract(self, embeddings, config, sentence):
        """Dense feature vector for one configuration."""
        wd, cd, pos_w, ner_w, dep_w = self._dims(embeddings)
        stack_w = wd + cd + pos_w + ner_w + dep_w + 4
        buffer_w = wd + pos_w + ner_w + dep_w + 1
        out = np.zeros(self.width(embeddings), dtype=np.float32)
        for i in range(self.stack_slots):
            if i < len(config.stack):
                node_id = config.stack[-1 - i]
                self._stack_slot(out, i * stack_w, node_id, config, sentence, embeddings)
        base = self.stack_slots * stack_w
        for j in range(self.buffer_slots):
            if j < len(config.buffer):
                token = sentence.tokens[config.buffer[j]]
                self._buffer_slot(out, base + j * buffer_w, token, sentence, embeddings)
        self._pair_block(out, base + self.buffer_slots * buffer_w, config, sentence, embeddings)
        if not np.isfinite(out).all():
            raise ValueError("non-finite feature values")
        return out

    def compress(self, embeddings, config, sentence, dense):
        """Indexed row: embedding blocks replaced by one table index each.

        Valid only for static word vectors.  The remainder of the dense row
        is copied verbatim, so dense and indexed rows differ by exactly
        (block width - 1) floats per embedded block.
        """
        row = []
        cursor = 0
        for offset, width, kind, name in self.embedded_blocks(embeddings):
            row.extend(dense[cursor:offset])
            slot = name.split(".")[0]
            if kind == "word":
                row.append(float(self._slot_word_index(slot, embeddings, config, sentence)))
            else:
                row.append(float(self._slot_concept_index(slot, embeddings, config)))
            cursor = offset + width
        row.extend(dense[cursor:])
        return np.asarray(row, dtype=np.float32)

    def _slot_node(self, slot, config):
        if slot.startswith("stack"):
            i = int(slot[len("stack"):])
            if i < len(config.stack):
                return config.stack[-1 - i]
        return None

    def _slot_word_index(self, slot, embeddings, config, sentence):
        if slot.startswith("buffer"):
            j = int(slot[len("buffer"):])
            if j < len(config.buffer):
                token = sentence.tokens[config.buffer[j]]
                return embeddings.word_index(sentence.sentence_id, token)
            return -2  # absent slot: zeros
        node_id = self._slot_node(slot, config)
        if node_id is None or node_id == ROOT_ID:
            return -2
        token_idx = config.nodes[node_id].token
        if token_idx is None:
            return -2
        return embeddings.word_index(sentence.sentence_id, sentence.tokens[token_idx])

    def _slot_concept_index(self, slot, embeddings, config):
        node_id = self._slot_node(slot, config)
        if node_id is None or node_id == ROOT_ID:
            return -2
        return embeddings.concept_index(config.nodes[node_id].label)

    def materialize(self, embeddings, row):
        """Expand an indexed row back to the dense layout."""
        out = np.zeros(self.width(embeddings), dtype=np.float32)
        cursor = 0  # position in the indexed row
        dense_pos = 0
        for offset, width, kind, _ in self.embedded_blocks(embeddings):
            gap = offset - dense_pos
            out[dense_pos:offset] = row[cursor : cursor + gap]
            cursor += gap
            index = int(row[cursor])
            cursor += 1
            if index == -2:
                pass  # zeros
            elif kind == "word":
                out[offset : offset + width] = embeddings.materialize_word(index)
            else:
                out[offset : offset + width] = embeddings.materialize_concept(index)
            dense_pos = offset + width
        out[dense_pos:] = row[cursor:]
        return out

    def indexed_width(self, embeddings):
        dense = self.width(embeddings)
        saved = sum(w - 1 for _, w, _, _ in self.embedded_blocks(embeddings))
        return dense - saved
