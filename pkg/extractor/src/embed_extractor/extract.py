"""Frozen-encoder feature extraction with sub-word-to-token span pooling.

The alignment method tokenizes each corpus token separately to learn its
sub-word span, then runs the encoder once over the concatenated piece
sequence (with the model's special tokens) and reduces each span to one
vector.  Supported layer choices: the second-to-last hidden layer, or the
arithmetic mean of the last four hidden layers (counting encoder layers
only; the embedding output is not a layer).  Supported pooling: the span's
head piece, or the span average.

Sentences longer than the encoder's maximum piece length are split into
overlapping windows (64-piece overlap by default); each absolute piece
position is owned by exactly one window and the run is flagged in the log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

log = logging.getLogger(__name__)

KNOWN_MODELS = {
    "bert-base-uncased": 768,
    "bert-base-cased": 768,
    "bert-large-cased": 1024,
    "bert-large-uncased": 1024,
    "roberta-base": 768,
    "roberta-large": 1024,
}

# model families with byte-level BPE vocabularies: in-sentence tokens need a
# leading space so their pieces match the forms the encoder saw in training
SPACE_MARKER_TYPES = ("roberta", "gpt2", "bart", "longformer", "deberta")

LAYER_CHOICES = ("penultimate", "mean-last-four")
POOLING_CHOICES = ("head", "span-average")


class ExtractorError(ValueError):
    pass


@dataclass
class ExtractorConfig:
    model: str  # one of KNOWN_MODELS or a local checkpoint path
    layer: str = "penultimate"
    pooling: str = "span-average"
    max_pieces: int | None = None  # default: the encoder's own limit
    window_overlap: int = 64
    device: str = "cpu"

    def __post_init__(self):
        if self.layer not in LAYER_CHOICES:
            raise ExtractorError(f"layer must be one of {LAYER_CHOICES}")
        if self.pooling not in POOLING_CHOICES:
            raise ExtractorError(f"pooling must be one of {POOLING_CHOICES}")


class Encoder:
    """Tokenizer plus frozen model, with the piece-to-token span logic."""

    def __init__(self, config):
        from transformers import AutoModel, AutoTokenizer

        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model)
        self.model = AutoModel.from_pretrained(config.model)
        self.model.eval()
        self.model.to(config.device)
        self.dim = self.model.config.hidden_size
        expected = KNOWN_MODELS.get(config.model)
        if expected is not None and expected != self.dim:
            raise ExtractorError(
                f"{config.model}: expected hidden size {expected}, model reports {self.dim}"
            )
        self.space_marker = self.model.config.model_type in SPACE_MARKER_TYPES
        self.n_layers = self.model.config.num_hidden_layers
        if self.n_layers < 4 and config.layer == "mean-last-four":
            raise ExtractorError("mean-last-four needs at least 4 encoder layers")
        self._prefix_len, self._suffix_len = self._special_token_shape()
        limit = getattr(self.tokenizer, "model_max_length", None) or 512
        limit = min(limit, getattr(self.model.config, "max_position_embeddings", limit))
        self.max_pieces = config.max_pieces or int(limit)

    def _wrap(self, ids):
        """Surround content pieces with the model's special tokens."""
        if hasattr(self.tokenizer, "build_inputs_with_special_tokens"):
            return self.tokenizer.build_inputs_with_special_tokens(list(ids))
        prefix = [] if self.tokenizer.cls_token_id is None else [self.tokenizer.cls_token_id]
        suffix = [] if self.tokenizer.sep_token_id is None else [self.tokenizer.sep_token_id]
        return prefix + list(ids) + suffix

    def _special_token_shape(self):
        probe = self.tokenizer.encode("a", add_special_tokens=False)[:1]
        if not probe:
            probe = [self.tokenizer.unk_token_id]
        wrapped = self._wrap(probe)
        at = wrapped.index(probe[0])
        return at, len(wrapped) - at - 1

    def token_spans(self, words):
        """Tokenize words one at a time; returns (piece ids, per-word spans).

        Spans partition the piece sequence: every non-special piece belongs
        to exactly one word.  Words the vocabulary cannot represent fall
        back to the unknown piece so no span is ever empty.
        """
        pieces = []
        spans = []
        for i, word in enumerate(words):
            text = f" {word}" if (self.space_marker and i > 0) else word
            ids = self.tokenizer.encode(text, add_special_tokens=False)
            if not ids:
                ids = [self.tokenizer.unk_token_id]
            spans.append((len(pieces), len(pieces) + len(ids)))
            pieces.extend(ids)
        return pieces, spans

    def _layer_states(self, piece_ids):
        input_ids = self._wrap(piece_ids)
        batch = torch.tensor([input_ids], dtype=torch.long, device=self.config.device)
        with torch.no_grad():
            output = self.model(input_ids=batch, output_hidden_states=True)
        hidden = output.hidden_states  # (embedding output, layer 1, ..., layer L)
        if self.config.layer == "penultimate":
            states = hidden[-2]
        else:
            states = torch.stack(hidden[-4:], dim=0).mean(dim=0)
        states = states[0]
        end = states.shape[0] - self._suffix_len
        return states[self._prefix_len : end]  # content pieces only

    def hidden_for_pieces(self, pieces, sentence_id="?"):
        """Hidden vectors for every content piece, windowing long inputs."""
        capacity = self.max_pieces - self._prefix_len - self._suffix_len
        if capacity <= self.config.window_overlap and len(pieces) > capacity:
            raise ExtractorError(
                f"window overlap {self.config.window_overlap} does not fit the "
                f"piece budget {capacity}"
            )
        if len(pieces) <= capacity:
            return self._layer_states(pieces)
        stride = capacity - self.config.window_overlap
        out = torch.empty((len(pieces), self.dim))
        n_windows = 0
        start = 0
        while start < len(pieces):
            window = pieces[start : start + capacity]
            states = self._layer_states(window)
            own_from = 0 if start == 0 else self.config.window_overlap
            own_to = len(window)
            out[start + own_from : start + own_to] = states[own_from:own_to]
            n_windows += 1
            if start + capacity >= len(pieces):
                break
            start += stride
        log.warning(
            "sentence %s: %d pieces exceed the %d-piece budget; used %d windows "
            "with %d-piece overlap",
            sentence_id, len(pieces), capacity, n_windows, self.config.window_overlap,
        )
        return out

    def encode_sentence(self, sentence_id, words):
        """float32 matrix (len(words), dim) for one sentence."""
        pieces, spans = self.token_spans(words)
        hidden = self.hidden_for_pieces(pieces, sentence_id)
        matrix = np.empty((len(words), self.dim), dtype=np.float32)
        for i, (start, end) in enumerate(spans):
            if self.config.pooling == "head":
                vector = hidden[start]
            else:
                vector = hidden[start:end].mean(dim=0)
            matrix[i] = vector.numpy().astype(np.float32, copy=False)
        return matrix


def extract_corpus(conllu_path, config, out_path):
    """Run the encoder over every sentence and write the AMRE file."""
    from .conllu import read_tokens
    from .wire import write_amre

    sentences = read_tokens(conllu_path)
    if not sentences:
        raise ExtractorError(f"{conllu_path}: no sentences")
    encoder = Encoder(config)

    def entries():
        for sentence_id, words in sentences.items():
            yield sentence_id, encoder.encode_sentence(sentence_id, words)

    write_amre(out_path, entries(), encoder.dim)
    return {"sentences": len(sentences), "dim": encoder.dim}
