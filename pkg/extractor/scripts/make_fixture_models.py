"""Build the tiny seeded encoder checkpoints used by the test suite.

Run from the extractor directory:

    python3 scripts/make_fixture_models.py

Writes tests/fixtures/tiny-bert and tests/fixtures/tiny-roberta.  The BERT
vocabulary keeps a handful of whole words as single pieces (for head-pooling
equivalence tests) and splits everything else into character pieces; the
RoBERTa vocabulary has no merges at all, so every word becomes byte-level
pieces and the leading-space marker path is always exercised.
"""

import json
from pathlib import Path

import torch
from transformers import (
    BertConfig,
    BertModel,
    BertTokenizer,
    RobertaConfig,
    RobertaModel,
    RobertaTokenizer,
)

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

WHOLE_WORDS = ["the", "dog", "cat", "eats"]


def make_tiny_bert():
    out = FIXTURES / "tiny-bert"
    out.mkdir(parents=True, exist_ok=True)
    letters = [chr(c) for c in range(ord("a"), ord("z") + 1)]
    vocab = (
        ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
        + WHOLE_WORDS
        + letters
        + ["##" + l for l in letters]
        + [str(d) for d in range(10)]
        + ["##" + str(d) for d in range(10)]
    )
    (out / "vocab.txt").write_text("\n".join(vocab) + "\n")
    (out / "tokenizer_config.json").write_text(
        json.dumps({"do_lower_case": True, "model_max_length": 64}) + "\n"
    )
    torch.manual_seed(101)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=16,
        num_hidden_layers=4,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
        type_vocab_size=2,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(out)
    tokenizer = BertTokenizer(str(out / "vocab.txt"), do_lower_case=True, model_max_length=64)
    tokenizer.save_pretrained(out)
    print("tiny-bert:", len(vocab), "pieces")


def make_tiny_roberta():
    out = FIXTURES / "tiny-roberta"
    out.mkdir(parents=True, exist_ok=True)
    byte_tokens = list(_bytes_to_unicode().values())
    vocab_list = ["<s>", "<pad>", "</s>", "<unk>", "<mask>"] + byte_tokens
    vocab = {token: i for i, token in enumerate(vocab_list)}
    (out / "vocab.json").write_text(json.dumps(vocab))
    (out / "merges.txt").write_text("#version: 0.2\n")  # no merges: byte pieces only
    torch.manual_seed(202)
    config = RobertaConfig(
        vocab_size=len(vocab_list),
        hidden_size=16,
        num_hidden_layers=4,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=130,
        type_vocab_size=1,
        pad_token_id=1,
        bos_token_id=0,
        eos_token_id=2,
    )
    model = RobertaModel(config)
    model.eval()
    model.save_pretrained(out)
    tokenizer = RobertaTokenizer(
        str(out / "vocab.json"), str(out / "merges.txt"), model_max_length=128
    )
    tokenizer.save_pretrained(out)
    print("tiny-roberta:", len(vocab_list), "pieces")


def _bytes_to_unicode():
    """The standard byte-level BPE byte-to-unicode table."""
    bs = (
        list(range(ord("!"), ord("~") + 1))
        + list(range(ord("\xa1"), ord("\xac") + 1))
        + list(range(ord("\xae"), ord("\xff") + 1))
    )
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, [chr(c) for c in cs]))


if __name__ == "__main__":
    make_tiny_bert()
    make_tiny_roberta()
