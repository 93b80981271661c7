import math
from collections import Counter

import numpy as np
import pytest

from csgen import lm
from csgen.corpus import Corpus, Sentence, Vocabulary, build_vocab, tokenize
from csgen.errors import DataError


def corpus_of(lines, name="c"):
    return Corpus(tuple(tokenize(l) for l in lines), name)


CHAIN = {  # hand-built bigram chain; "<s>" starts, "</s>" ends
    "<s>": {"a": 0.6, "b": 0.4},
    "a": {"b": 0.5, "c": 0.3, "</s>": 0.2},
    "b": {"a": 0.2, "c": 0.5, "</s>": 0.3},
    "c": {"a": 0.7, "</s>": 0.3},
}


def sample_chain(n, seed):
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(n):
        tok, out = "<s>", []
        while len(out) < 12:
            nxt = list(CHAIN[tok])
            tok = nxt[rng.choice(len(nxt), p=list(CHAIN[tok].values()))]
            if tok == "</s>":
                break
            out.append(tok)
        if out:
            lines.append(" ".join(out))
    return lines


def bigram_oracle_ppl(train_lines, test_lines):
    counts, ctx = Counter(), Counter()
    for line in train_lines:
        toks = ["<s>", *line.split(), "</s>"]
        for a, b in zip(toks, toks[1:]):
            counts[a, b] += 1
            ctx[a] += 1
    nll = n = 0
    for line in test_lines:
        toks = ["<s>", *line.split(), "</s>"]
        for a, b in zip(toks, toks[1:]):
            nll -= math.log(counts[a, b] / ctx[a])
            n += 1
    return math.exp(nll / n)


SMALL = lm.LMConfig(emb_dim=16, hidden=16)


def test_uniform_model_ppl_is_vocab_size():
    vocab = Vocabulary([f"w{i}" for i in range(6)])  # 4 specials + 6 = 10
    model = lm.LanguageModel.uniform(vocab, SMALL)
    rep = lm.perplexity(model, corpus_of(["w1 w2 w3", "w5", "w0 w0 w4 w2"]))
    assert len(vocab) == 10
    assert rep.ppl == pytest.approx(10.0, abs=1e-9)
    assert rep.tokens == 3 + 1 + 1 + 1 + 4 + 1


def test_distributions_sum_to_one():
    c = corpus_of(["a b c", "c b a a"])
    model = lm.LanguageModel(build_vocab([c]), SMALL, seed=3)
    dist = model.next_token_distributions(lm.encode_corpus(c, model.vocab)[1])
    assert np.all(np.abs(dist.sum(axis=1) - 1) < 1e-9)


def test_ppl_invariant_to_sentence_order():
    c = corpus_of(["a b c", "c b a a", "b", "a c c b a"])
    model = lm.LanguageModel(build_vocab([c]), SMALL, seed=1)
    rev = Corpus(tuple(reversed(c.sentences)))
    assert lm.perplexity(model, c, batch=3).ppl == pytest.approx(lm.perplexity(model, rev, batch=2).ppl, abs=1e-9)


def test_batched_nll_matches_single():
    c = corpus_of(["a b c", "c b a a", "b", "a c c b a"])
    model = lm.LanguageModel(build_vocab([c]), SMALL, seed=2)
    batched, n = lm.corpus_nll(model, c, batch=4)
    single = sum(lm.corpus_nll(model, Corpus((s,)), batch=1)[0] for s in c)
    assert batched == pytest.approx(single, abs=1e-9) and n == 4 + 5 + 2 + 6


def test_ppl_at_least_one_and_oov_rejected():
    c = corpus_of(["a b", "b a"])
    model = lm.LanguageModel(build_vocab([c]), SMALL)
    assert lm.perplexity(model, c).ppl >= 1
    with pytest.raises(DataError):
        lm.perplexity(model, corpus_of(["a z"]))


def test_empty_corpus_rejected():
    with pytest.raises(DataError):
        lm.train_lm(Corpus(()), Vocabulary([]), SMALL)


def test_training_loss_decreases_and_lr_zero_is_flat():
    lines = sample_chain(500, seed=0)
    c = corpus_of(lines)
    _, rep = lm.train_lm(c, None, SMALL, lm.LMTrainConfig(epochs=10, batch=20, lr=3e-3, seed=1))
    assert all(b < a for a, b in zip(rep.epoch_losses, rep.epoch_losses[1:]))
    small = corpus_of(lines[:40])
    _, flat = lm.train_lm(small, None, SMALL, lm.LMTrainConfig(epochs=3, lr=0.0))
    assert max(flat.epoch_losses) - min(flat.epoch_losses) < 1e-12


def test_same_seed_same_parameters():
    c = corpus_of(sample_chain(60, seed=1))
    cfg = lm.LMTrainConfig(epochs=2, seed=4)
    m1, _ = lm.train_lm(c, None, SMALL, cfg)
    m2, _ = lm.train_lm(c, None, SMALL, cfg)
    assert all(a.data.tobytes() == b.data.tobytes() for a, b in zip(m1.parameters(), m2.parameters()))


def test_repeated_token_converges_to_ppl_one():
    c = corpus_of(["z z z z"] * 40)
    model, _ = lm.train_lm(c, None, SMALL, lm.LMTrainConfig(epochs=40, batch=4, lr=1e-2))
    assert lm.perplexity(model, c).ppl <= 1.05


def test_matches_count_bigram_oracle():
    train, test = sample_chain(1500, seed=11), sample_chain(300, seed=12)
    oracle = bigram_oracle_ppl(train, test)
    model, _ = lm.train_lm(corpus_of(train), None, SMALL, lm.LMTrainConfig(epochs=8, batch=20, lr=1e-2, seed=0))
    got = lm.perplexity(model, corpus_of(test)).ppl
    assert abs(got - oracle) / oracle < 0.05, (got, oracle)


def test_augmentation_with_empty_generated_is_neutral():
    base, held = corpus_of(sample_chain(80, 2)), corpus_of(sample_chain(30, 3))
    cfg = lm.LMTrainConfig(epochs=2, seed=0)
    res = lm.augmentation_experiment(base, Corpus(()), held, SMALL, cfg)
    assert res.augmented_ppl == res.baseline_ppl and res.delta == 0


def test_augmentation_with_heldout_copy_helps():
    base = corpus_of(["a b c a"] * 30)
    held = corpus_of(["c c b", "b b a c", "c b"] * 5)
    res = lm.augmentation_experiment(base, held, held, SMALL, lm.LMTrainConfig(epochs=4, seed=0, lr=1e-2))
    assert res.augmented_ppl <= res.baseline_ppl


def test_ab_report_formats():
    base, gen, held = corpus_of(["a b"] * 5), corpus_of(["b a"] * 5), corpus_of(["a a"])
    rep = lm.ab_experiment(base, {"+gen": gen}, {"dev": held, "eval": held}, SMALL, lm.LMTrainConfig(epochs=1))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "arm,dev_ppl,eval_ppl"
    assert [l.split(",")[0] for l in lines[1:]] == ["baseline", "+gen"]
    assert rep.rows[1].train_sentences == 10
    assert "baseline" in rep.to_text()


def test_checkpoint_roundtrip(tmp_path):
    c = corpus_of(["a b c"])
    model = lm.LanguageModel(build_vocab([c]), SMALL, seed=5)
    model.save(tmp_path / "lm.json")
    assert lm.perplexity(lm.LanguageModel.load(tmp_path / "lm.json"), c).ppl == lm.perplexity(model, c).ppl


def test_word_unit_keeps_cjk_words():
    assert lm.LMConfig(unit="word").unit == "word"
    with pytest.raises(ValueError):
        lm.LMConfig(unit="bpe")
