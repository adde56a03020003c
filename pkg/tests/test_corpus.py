import pytest

from amrkit.corpus import (
    Alignment,
    CorpusError,
    format_jamr,
    load_alignment_file,
    load_amr_file,
    load_conllu_annotations,
    node_at_path,
    parse_jamr_alignments,
    read_archive,
    resolve_alignment,
    write_archive,
    zip_examples,
)
from amrkit.graph import parse_penman

FIG1_BLOCK = """\
# ::id fig1
# ::snt The dog wants to eat
# ::tok The dog wants to eat
# ::alignments 1-2|0.0 2-3|0 4-5|0.1
(w / want-01
    :ARG0 (d / dog)
    :ARG1 (e / eat-01
        :ARG0 d))
"""

FIG1_CONLLU = """\
# sent_id = fig1
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tdog\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\twants\twant\tVERB\t_\t_\t0\troot\t_\t_
4\tto\tto\tPART\t_\t_\t5\tmark\t_\t_
5\teat\teat\tVERB\t_\t_\t3\txcomp\t_\t_
"""


class TestAmrFile:
    def test_fig1_block(self, tmp_path):
        path = tmp_path / "bank.amr"
        path.write_text(FIG1_BLOCK)
        records, errors = load_amr_file(path)
        assert errors == []
        assert len(records) == 1
        rec = records[0]
        assert rec.id == "fig1"
        assert rec.tokens == ["The", "dog", "wants", "to", "eat"]
        assert len(rec.alignments) == 3
        assert len(rec.graph.variables) == 3

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.amr"
        path.write_text("")
        assert load_amr_file(path) == ([], [])

    def test_malformed_block_positioned(self, tmp_path):
        bad = FIG1_BLOCK.replace("::id fig1", "::id bad").replace("(d / dog)", "(d / dog")
        path = tmp_path / "bank.amr"
        path.write_text(FIG1_BLOCK + "\n" + bad)
        records, errors = load_amr_file(path)
        assert [r.id for r in records] == ["fig1"]
        assert len(errors) == 1
        assert errors[0].block == 1
        assert errors[0].line is not None
        assert "PENMAN" in errors[0].message

    def test_jamr_syntax_error(self):
        with pytest.raises(CorpusError, match="malformed"):
            parse_jamr_alignments("1-2|0.0 nonsense")

    def test_multi_path_chunk(self):
        spans = parse_jamr_alignments("3-4|0.0+0.1")
        assert spans[0].paths == ("0.0", "0.1")


class TestConllu:
    def test_fig1_tree(self, tmp_path):
        path = tmp_path / "a.conllu"
        path.write_text(FIG1_CONLLU)
        sentences = load_conllu_annotations(path)
        sent = sentences["fig1"]
        assert [t.surface for t in sent.tokens] == ["The", "dog", "wants", "to", "eat"]
        root = [t for t in sent.tokens if t.dep_head == -1]
        assert [t.surface for t in root] == ["wants"]
        assert sent.tokens[0].dep_head == 1  # The -> dog
        assert sent.tokens[1].lemma == "dog"

    def test_single_token(self, tmp_path):
        path = tmp_path / "a.conllu"
        path.write_text("# sent_id = one\n1\tGo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n")
        sent = load_conllu_annotations(path)["one"]
        assert sent.tokens[0].dep_head == -1
        assert sent.tokens[0].dep_label == "root"

    def test_ner_default_and_map(self, tmp_path):
        path = tmp_path / "a.conllu"
        path.write_text(
            "# sent_id = ner\n"
            "1\tMary\tMary\tPROPN\t_\t_\t2\tnsubj\t_\tNER=PERSON\n"
            "2\tworks\twork\tVERB\t_\t_\t0\troot\t_\t_\n"
        )
        sent = load_conllu_annotations(path)["ner"]
        assert sent.tokens[0].ner == "PER"
        assert sent.tokens[1].ner == "O"

    def test_column_count_error(self, tmp_path):
        path = tmp_path / "a.conllu"
        path.write_text("# sent_id = x\n1\tGo\tgo\tVERB\t0\troot\n")
        with pytest.raises(CorpusError, match="10 columns"):
            load_conllu_annotations(path)

    def test_non_tree_error(self, tmp_path):
        path = tmp_path / "a.conllu"
        path.write_text(
            "# sent_id = x\n"
            "1\ta\ta\tX\t_\t_\t2\tdep\t_\t_\n"
            "2\tb\tb\tX\t_\t_\t1\tdep\t_\t_\n"
            "3\tc\tc\tX\t_\t_\t0\troot\t_\t_\n"
        )
        with pytest.raises(CorpusError, match="non-tree|roots"):
            load_conllu_annotations(path)

    def test_duplicate_id_error(self, tmp_path):
        path = tmp_path / "a.conllu"
        block = "# sent_id = x\n1\tGo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n\n"
        path.write_text(block + block)
        with pytest.raises(CorpusError, match="duplicate"):
            load_conllu_annotations(path)


class TestZip:
    def _fixture(self, tmp_path, amr_text=FIG1_BLOCK, conllu_text=FIG1_CONLLU):
        amr = tmp_path / "bank.amr"
        amr.write_text(amr_text)
        conllu = tmp_path / "a.conllu"
        conllu.write_text(conllu_text)
        records, errors = load_amr_file(amr)
        assert errors == []
        return records, load_conllu_annotations(conllu)

    def test_three_way_join(self, tmp_path):
        records, annotations = self._fixture(tmp_path)
        examples, errors = zip_examples(records, annotations)
        assert errors == []
        assert len(examples) == 1
        ex = examples[0]
        assert ex.alignment.token_for("d") == 1
        assert ex.alignment.token_for("w") == 2
        assert ex.alignment.token_for("e") == 4

    def test_missing_annotation(self, tmp_path):
        records, _ = self._fixture(tmp_path)
        examples, errors = zip_examples(records, {})
        assert examples == []
        assert any("fig1" in str(e) for e in errors)

    def test_extra_annotation(self, tmp_path):
        records, annotations = self._fixture(tmp_path)
        extra = dict(annotations)
        extra["ghost"] = annotations["fig1"]
        _, errors = zip_examples(records, extra)
        assert any("ghost" in str(e) for e in errors)

    def test_bad_node_path(self, tmp_path):
        bad_block = FIG1_BLOCK.replace("4-5|0.1", "4-5|0.9")
        records, annotations = self._fixture(tmp_path, amr_text=bad_block)
        examples, errors = zip_examples(records, annotations)
        assert examples == []
        assert any("0.9" in str(e) for e in errors)

    def test_token_count_mismatch(self, tmp_path):
        bad_block = FIG1_BLOCK.replace("# ::tok The dog wants to eat", "# ::tok The dog wants eat")
        records, annotations = self._fixture(tmp_path, amr_text=bad_block)
        examples, errors = zip_examples(records, annotations)
        assert examples == []
        assert any("tok" in str(e) for e in errors)

    def test_duplicate_node_alignment_keeps_first(self):
        graph = parse_penman("(w / want-01 :ARG0 (d / dog))")
        spans = parse_jamr_alignments("0-1|0.0 2-3|0.0 1-2|0")
        alignment = resolve_alignment(graph, spans, 5)
        assert alignment.token_for("d") == 0
        assert len(alignment) == 2

    def test_span_aligns_first_token(self):
        graph = parse_penman("(p / person :name (n / name))")
        alignment = resolve_alignment(graph, parse_jamr_alignments("1-3|0"), 4)
        assert alignment.token_for("p") == 1
        assert alignment.spans["p"] == (1, 3)

    def test_span_out_of_range(self):
        graph = parse_penman("(a / amr-empty)")
        with pytest.raises(CorpusError, match="outside"):
            resolve_alignment(graph, parse_jamr_alignments("7-8|0"), 5)

    def test_external_alignment_file(self, tmp_path):
        records, annotations = self._fixture(tmp_path)
        align_path = tmp_path / "x.align"
        align_path.write_text("fig1\t2-3|0\n")
        table = load_alignment_file(align_path)
        examples, errors = zip_examples(records, annotations, alignments=table)
        assert errors == []
        assert len(examples[0].alignment) == 1


class TestHelpers:
    def test_paths_roundtrip(self):
        graph = parse_penman("(w / want-01 :ARG0 (d / dog) :ARG1 (e / eat-01 :ARG0 d))")
        assert node_at_path(graph, "0") == "w"
        assert node_at_path(graph, "0.0") == "d"
        assert node_at_path(graph, "0.1") == "e"
        assert node_at_path(graph, "0.1.0") == "d"

    def test_format_jamr_roundtrip(self):
        graph = parse_penman("(w / want-01 :ARG0 (d / dog) :ARG1 (e / eat-01 :ARG0 d))")
        alignment = Alignment([("d", 1), ("w", 2), ("e", 4)])
        text = format_jamr(alignment, graph)
        again = resolve_alignment(graph, parse_jamr_alignments(text), 5)
        assert again == alignment

    def test_archive_roundtrip(self, tmp_path):
        amr = tmp_path / "bank.amr"
        amr.write_text(FIG1_BLOCK)
        conllu = tmp_path / "a.conllu"
        conllu.write_text(FIG1_CONLLU)
        records, _ = load_amr_file(amr)
        examples, _ = zip_examples(records, load_conllu_annotations(conllu))
        path = tmp_path / "archive.jsonl"
        write_archive(examples, path)
        loaded = read_archive(path)
        assert len(loaded) == 1
        assert loaded[0].id == "fig1"
        assert loaded[0].alignment == examples[0].alignment
        assert sorted(n.label for n in loaded[0].graph.nodes) == sorted(
            n.label for n in examples[0].graph.nodes
        )
