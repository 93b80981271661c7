import pytest
from hypothesis import given, strategies as st

from csgen.corpus import (
    BOS, EOS, UNK, Corpus, LanguageTag, Sentence, TranslationLexicon, Vocabulary, build_vocab, decode,
    encode, load_corpus, load_lexicon, save_corpus, save_lexicon, tag_language, tokenize,
)
from csgen.errors import DataError

A, B, NV = LanguageTag.LANG_A, LanguageTag.LANG_B, LanguageTag.NON_VERBAL


def pairs(sent):
    return [(t.surface, t.tag) for t in sent]


def test_tokenize_mixed_line():
    assert pairs(tokenize("我 like 咖啡")) == [("我", A), ("like", B), ("咖", A), ("啡", A)]


def test_tokenize_empty_and_latin():
    assert len(tokenize("")) == 0
    assert pairs(tokenize("hello world")) == [("hello", B), ("world", B)]


def test_tokenize_splits_glued_scripts():
    assert tokenize("我like你").surfaces == ["我", "like", "你"]


def test_tokenize_keeps_nonverbal_whole():
    assert pairs(tokenize("(笑) ok")) == [("(笑)", NV), ("ok", B)]


def test_word_mode_keeps_cjk_runs():
    assert tokenize("我们 like", split_cjk=False).surfaces == ["我们", "like"]


@pytest.mark.parametrize("surface,tag", [("(laugh)", NV), ("[noise]", NV), ("好", A), ("then", B), ("2016", B)])
def test_tag_language(surface, tag):
    assert tag_language(surface) is tag


def test_tag_language_rejects_empty():
    with pytest.raises(ValueError):
        tag_language("")


def test_build_vocab_counts_and_order():
    corpus = Corpus((tokenize("a a b"),))
    vocab = build_vocab([corpus], min_count=1)
    assert vocab.itos == ["<pad>", "<s>", "</s>", "<unk>", "a", "b"]
    assert len(vocab) == 6
    assert encode(tokenize("a b"), vocab) == [4, 5]
    assert encode(tokenize("a b"), vocab, frame=True) == [BOS, 4, 5, EOS]


def test_build_vocab_threshold():
    vocab = build_vocab([Corpus((tokenize("a a b"),))], min_count=2)
    assert encode(tokenize("b"), vocab) == [UNK]


def test_build_vocab_ties_lexicographic():
    vocab = build_vocab([Corpus((tokenize("c b a b c a"),))])
    assert vocab.tokens == ["a", "b", "c"]


def test_decode_roundtrip_and_bounds():
    vocab = build_vocab([Corpus((tokenize("x y z"),))])
    s = tokenize("z x y")
    assert decode(encode(s, vocab), vocab).surfaces == s.surfaces
    assert decode(encode(s, vocab, frame=True), vocab).surfaces == s.surfaces
    with pytest.raises(DataError):
        decode([10**9], Vocabulary(["a"] * 0 + list("abcdef")))


def test_vocab_rejects_duplicates():
    with pytest.raises(ValueError):
        Vocabulary(["a", "a"])


def test_corpus_file_roundtrip(tmp_path):
    c = Corpus((tokenize("我 like 咖 啡"), tokenize(""), tokenize("(laugh) ok")), "t")
    path = tmp_path / "c.txt"
    save_corpus(c, path)
    assert path.read_text(encoding="utf-8") == "我 like 咖 啡\n\n(laugh) ok\n"
    back = load_corpus(path)
    assert [s.surfaces for s in back] == [s.surfaces for s in c]


def test_load_corpus_errors(tmp_path):
    with pytest.raises(DataError):
        load_corpus(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_bytes(b"ok \xff\xfe\n")
    with pytest.raises(DataError, match="UTF-8"):
        load_corpus(bad)


def test_lexicon_file_accumulates_alternatives(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("物流\tlogistics\n市\tmarket\n市\tcity market\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert lex.get("市") == (("market",), ("city", "market"))
    save_lexicon(lex, tmp_path / "lex2.tsv")
    assert load_lexicon(tmp_path / "lex2.tsv") == lex


def test_lexicon_validation():
    with pytest.raises(DataError):
        TranslationLexicon({"cat": (("x",),)})
    with pytest.raises(DataError):
        TranslationLexicon({"猫": ()})


def test_corpus_sampling_is_seeded():
    import numpy as np

    c = Corpus(tuple(tokenize(w) for w in "a b c d e f".split()))
    s1 = c.sample(np.random.default_rng(3), 10)
    s2 = c.sample(np.random.default_rng(3), 10)
    assert s1 == s2


latin_word = st.text(alphabet="abcdefgxyz019", min_size=1, max_size=6)
cjk_char = st.sampled_from(list("我你他好的是在中国人"))
nonverbal = st.sampled_from(["(laugh)", "[noise]", "(um)"])
normalized_line = st.lists(st.one_of(latin_word, cjk_char, nonverbal), max_size=12).map(" ".join)


@given(normalized_line)
def test_roundtrip_on_normalized_lines(line):
    assert tokenize(line).text() == line


@given(st.text(max_size=40))
def test_tokenize_idempotent_and_total(line):
    once = tokenize(line)
    assert tokenize(once.text()).surfaces == once.surfaces
    for tok in once:
        assert tok.tag is tag_language(tok.surface)
        assert not any(ch.isspace() for ch in tok.surface)


@given(st.lists(normalized_line, min_size=1, max_size=8), st.integers(1, 3))
def test_vocab_deterministic(lines, k):
    c = Corpus(tuple(tokenize(l) for l in lines))
    assert build_vocab([c], k) == build_vocab([Corpus(tuple(tokenize(l) for l in lines))], k)


def test_sentence_from_surfaces_tags():
    s = Sentence.from_surfaces(["好", "ok"])
    assert s.tags == [A, B]
