import numpy as np
import pytest

from amrkit.corpus import Token, TokenizedSentence
from amrkit.embeddings import EmbeddingConfig, Embeddings, StaticTable
from amrkit.features import FeatureTemplate, Tagsets
from amrkit.transition import Action, Configuration, SHIFT, LARC, Template, apply

POS = ("DET", "NOUN", "PART", "VERB")
NER = ("LOC", "O", "PER")
DEP = ("det", "mark", "nsubj", "root", "xcomp")


@pytest.fixture
def tagsets():
    return Tagsets(POS, NER, DEP)


@pytest.fixture
def embeddings():
    words = ["the", "dog", "want", "to", "eat", "wants"]
    matrix = np.arange(len(words) * 4, dtype=np.float32).reshape(len(words), 4) / 10.0
    return Embeddings(EmbeddingConfig(), static=StaticTable(words, matrix))


@pytest.fixture
def sentence():
    rows = [
        ("The", "the", "DET", "O", 1, "det"),
        ("dog", "dog", "NOUN", "O", 2, "nsubj"),
        ("wants", "want", "VERB", "O", -1, "root"),
        ("to", "to", "PART", "O", 4, "mark"),
        ("eat", "eat", "VERB", "O", 2, "xcomp"),
    ]
    tokens = tuple(Token(i, s, l, p, n, h, d) for i, (s, l, p, n, h, d) in enumerate(rows))
    return TokenizedSentence("fig1", tokens)


def mid_configuration():
    """Stack [ROOT, d, w] with w->d drawn, buffer [to, eat]."""
    config = Configuration.initial(5)
    config = apply(config, Action(SHIFT))
    config = apply(config, Action(SHIFT, template=Template.single("dog")))
    config = apply(config, Action(SHIFT, template=Template.single("want-01")))
    config = apply(config, Action(LARC, label=":ARG0"))
    return config


class TestWidth:
    def test_arithmetic(self, tagsets, embeddings):
        template = FeatureTemplate(tagsets)
        wd, cd = 4, 4
        pos_w, ner_w, dep_w = len(POS) + 1, len(NER) + 1, len(DEP) + 1
        stack_w = wd + cd + pos_w + ner_w + dep_w + 4
        buffer_w = wd + pos_w + ner_w + dep_w + 1
        expected = 3 * stack_w + 2 * buffer_w + (dep_w + 1)
        assert template.width(embeddings) == expected
        assert template.extract(embeddings, Configuration.initial(5),
                                _dummy_sentence()).shape == (expected,)

    def test_width_independent_of_corpus(self, tagsets, embeddings, sentence):
        template = FeatureTemplate(tagsets)
        w = template.width(embeddings)
        assert template.extract(embeddings, mid_configuration(), sentence).shape == (w,)

    def test_indexed_width(self, tagsets, embeddings):
        template = FeatureTemplate(tagsets)
        # 3 stack word + 3 stack concept + 2 buffer word blocks, dim 4 each
        assert template.width(embeddings) - template.indexed_width(embeddings) == 8 * (4 - 1)


def _dummy_sentence():
    tokens = tuple(Token(i, "x", "x", "NOUN", "O", -1, "root") for i in range(5))
    return TokenizedSentence("dummy", tokens)


class TestExtract:
    def test_initial_config_slots(self, tagsets, embeddings, sentence):
        template = FeatureTemplate(tagsets)
        vec = template.extract(embeddings, Configuration.initial(5), sentence)
        blocks = {}
        offset = 0
        for name, w, _ in template.layout(embeddings):
            blocks[name] = vec[offset : offset + w]
            offset += w
        # top slot is the sentinel: present, everything else zeroed
        assert blocks["stack0.present"] == 1.0
        assert not blocks["stack0.word"].any()
        assert not blocks["stack0.concept"].any()
        # deeper stack slots are PAD
        assert blocks["stack1.present"] == 0.0
        assert not blocks["stack1.pos"].any()
        # buffer front is "The"
        the = embeddings.static.lookup("the")
        assert np.array_equal(blocks["buffer0.word"], the)
        assert blocks["buffer0.pos"][POS.index("DET")] == 1.0
        assert blocks["buffer0.dep"][DEP.index("det")] == 1.0
        assert blocks["buffer0.present"] == 1.0
        assert np.array_equal(blocks["buffer1.word"], embeddings.static.lookup("dog"))
        # no top/second token pair yet -> none bucket
        assert blocks["pair.dep"][-1] == 1.0

    def test_mid_config_golden(self, tagsets, embeddings, sentence):
        template = FeatureTemplate(tagsets)
        vec = template.extract(embeddings, mid_configuration(), sentence)
        blocks = {}
        offset = 0
        for name, w, _ in template.layout(embeddings):
            blocks[name] = vec[offset : offset + w]
            offset += w
        # top = want-01 aligned to "wants"
        assert np.array_equal(blocks["stack0.word"], embeddings.static.lookup("wants"))
        assert np.array_equal(blocks["stack0.concept"], embeddings.static.lookup("want"))
        assert blocks["stack0.pos"][POS.index("VERB")] == 1.0
        assert blocks["stack0.depth"] == pytest.approx(0.1)  # one child
        assert blocks["stack0.children"] == pytest.approx(0.1)
        assert blocks["stack0.parents"] == 0.0
        # second = dog
        assert np.array_equal(blocks["stack1.word"], embeddings.static.lookup("dog"))
        assert blocks["stack1.parents"] == pytest.approx(0.1)
        # third = sentinel
        assert blocks["stack2.present"] == 1.0
        assert not blocks["stack2.word"].any()
        # pair: dog's head is wants -> nsubj
        assert blocks["pair.dep"][DEP.index("nsubj")] == 1.0
        assert blocks["pair.dep"][-1] == 0.0

    def test_deterministic(self, tagsets, embeddings, sentence):
        template = FeatureTemplate(tagsets)
        config = mid_configuration()
        a = template.extract(embeddings, config, sentence)
        b = template.extract(embeddings, config, sentence)
        assert np.array_equal(a, b)

    def test_extraction_order_irrelevant(self, tagsets, embeddings, sentence):
        template = FeatureTemplate(tagsets)
        configs = [Configuration.initial(5), mid_configuration()]
        first = [template.extract(embeddings, c, sentence) for c in configs]
        second = [template.extract(embeddings, c, sentence) for c in reversed(configs)]
        assert np.array_equal(first[0], second[1])
        assert np.array_equal(first[1], second[0])


class TestAblation:
    def test_only_dependency_coordinates_change(self, tagsets, embeddings, sentence):
        with_dep = FeatureTemplate(tagsets, use_dependency=True)
        without = FeatureTemplate(tagsets, use_dependency=False)
        config = mid_configuration()
        a = with_dep.extract(embeddings, config, sentence)
        b = without.extract(embeddings, config, sentence)
        assert a.shape == b.shape
        dep_coords = set(with_dep.dependency_coordinates(embeddings))
        diff = np.nonzero(a != b)[0]
        assert set(diff.tolist()) <= dep_coords
        assert not b[sorted(dep_coords)].any()

    def test_manifest_hash_tracks_flag(self, tagsets, embeddings):
        a = FeatureTemplate(tagsets, use_dependency=True)
        b = FeatureTemplate(tagsets, use_dependency=False)
        assert a.manifest_hash(embeddings) != b.manifest_hash(embeddings)
        assert a.width(embeddings) == b.width(embeddings)


class TestIndexedStorage:
    def test_compress_materialize_roundtrip(self, tagsets, embeddings, sentence):
        template = FeatureTemplate(tagsets)
        for config in (Configuration.initial(5), mid_configuration()):
            dense = template.extract(embeddings, config, sentence)
            indexed = template.compress(embeddings, config, sentence, dense)
            assert indexed.shape == (template.indexed_width(embeddings),)
            back = template.materialize(embeddings, indexed)
            assert np.array_equal(back, dense)

    def test_oov_word_roundtrip(self, tagsets, embeddings):
        tokens = tuple(
            Token(i, s, s, "NOUN", "O", -1, "root") for i, s in enumerate(["zebra", "dog"])
        )
        sentence = TokenizedSentence("x", tokens)
        template = FeatureTemplate(tagsets)
        config = Configuration.initial(2)
        dense = template.extract(embeddings, config, sentence)
        back = template.materialize(
            embeddings, template.compress(embeddings, config, sentence, dense)
        )
        assert np.array_equal(back, dense)
