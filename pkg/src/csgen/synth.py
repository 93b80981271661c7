"""Pseudo-parallel pair synthesis by lexicon substitution, and toy bilingual corpora."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, LanguageTag, Sentence, Token, TranslationLexicon, _read_lines, tokenize
from .errors import DataError
from .rng import substream

TOY_A_BASE = 0x4E00
_ONSETS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class SubstitutionPolicy:
    rate: float = 0.35
    max_phrase_len: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate must lie in [0, 1], got {self.rate}")
        if self.max_phrase_len < 1:
            raise ValueError("max_phrase_len must be >= 1")


def sentence_stream(seed: int, index: int) -> np.random.Generator:
    """Per-sentence random stream; substitution of sentence ``index`` draws only from it."""
    return substream(seed, "synth", index)


def substitute(
    sentence: Sentence,
    lexicon: TranslationLexicon,
    policy: SubstitutionPolicy,
    index: int = 0,
    rate: float | None = None,
) -> Sentence:
    """Replace each substitutable LangA token with probability ``rate`` by one translation.

    For every LangA token with at least one admissible translation, one uniform
    draw decides replacement; a second draw picks the alternative only when the
    token is replaced.
    """
    rate = policy.rate if rate is None else rate
    rng = sentence_stream(policy.seed, index)
    out: list[Token] = []
    for tok in sentence:
        alts = ()
        if tok.tag is LanguageTag.LANG_A:
            alts = tuple(a for a in lexicon.get(tok.surface) if len(a) <= policy.max_phrase_len)
        if alts and rng.random() < rate:
            phrase = alts[int(rng.integers(len(alts)))] if len(alts) > 1 else alts[0]
            out.extend(Token.of(s) for s in phrase)
        else:
            out.append(tok)
    return Sentence(tuple(out), sentence.id)


def make_pairs(
    corpus: Corpus, lexicon: TranslationLexicon, policy: SubstitutionPolicy
) -> list[tuple[Sentence, Sentence]]:
    return [(s, substitute(s, lexicon, policy, index=i)) for i, s in enumerate(corpus)]


def toy_words(n: int) -> list[str]:
    """``n`` distinct pronounceable Latin words, e.g. 'ba', 'be', ..., 'baba'."""
    sylls = [c + v for c in _ONSETS for v in _VOWELS]
    words: list[str] = []
    width = 1
    while len(words) < n:
        idx = [0] * width
        while len(words) < n:
            words.append("".join(sylls[i] for i in idx))
            k = width - 1
            while k >= 0:
                idx[k] += 1
                if idx[k] < len(sylls):
                    break
                idx[k] = 0
                k -= 1
            if k < 0:
                break
        width += 1
    return words


def toy_characters(n: int) -> list[str]:
    return [chr(TOY_A_BASE + i) for i in range(n)]


@dataclass(frozen=True)
class ToySpec:
    """Synthetic bilingual setup: a sparse bigram chain over LangA plus a bijective lexicon.

    Both corpora are drawn independently from the same chain; the CS corpus is
    then code-switched with a per-sentence rate drawn uniformly from
    ``target_rate``, which places most sentences in the C2-C4 CMI groups.
    """

    vocab_a_size: int = 60
    vocab_b_size: int = 60
    min_len: int = 5
    max_len: int = 10
    corpus_size: int = 1000
    cs_corpus_size: int | None = None
    successors: int = 4
    target_rate: tuple[float, float] = (0.15, 0.35)
    seed: int = 0

    def __post_init__(self):
        if self.vocab_a_size < 1 or self.vocab_b_size < 1:
            raise ValueError("vocabulary sizes must be >= 1")
        if self.vocab_b_size < self.vocab_a_size:
            raise ValueError("vocab_b_size must be >= vocab_a_size for a bijective lexicon")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if self.corpus_size < 1 or (self.cs_corpus_size is not None and self.cs_corpus_size < 1):
            raise ValueError("corpus sizes must be >= 1")
        if self.successors < 1:
            raise ValueError("successors must be >= 1")
        lo, hi = self.target_rate
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError("target_rate must be an ordered pair within [0, 1]")


class BigramChain:
    """Sparse first-order chain over ``n`` symbols; each symbol has a few weighted successors."""

    def __init__(self, n: int, successors: int, rng: np.random.Generator):
        k = min(successors, n)
        self.n = n
        self.start = rng.dirichlet(np.ones(n))
        self.trans = np.zeros((n, n))
        for i in range(n):
            nxt = rng.choice(n, size=k, replace=False)
            self.trans[i, nxt] = rng.dirichlet(np.ones(k))

    def sample(self, length: int, rng: np.random.Generator) -> list[int]:
        seq = [int(rng.choice(self.n, p=self.start))]
        while len(seq) < length:
            seq.append(int(rng.choice(self.n, p=self.trans[seq[-1]])))
        return seq


def generate_toy(spec: ToySpec) -> tuple[Corpus, Corpus, TranslationLexicon]:
    """Returns (LangA monolingual corpus, code-switched target corpus, lexicon)."""
    chars = toy_characters(spec.vocab_a_size)
    words = toy_words(spec.vocab_b_size)
    perm = substream(spec.seed, "toy:lexicon").permutation(spec.vocab_b_size)
    lexicon = TranslationLexicon({c: ((words[perm[i]],),) for i, c in enumerate(chars)})
    chain = BigramChain(spec.vocab_a_size, spec.successors, substream(spec.seed, "toy:chain"))

    def draw(name: str, size: int) -> list[Sentence]:
        rng = substream(spec.seed, name)
        out = []
        for i in range(size):
            length = int(rng.integers(spec.min_len, spec.max_len + 1))
            out.append(Sentence.from_surfaces([chars[j] for j in chain.sample(length, rng)], f"{name}-{i}"))
        return out

    mono = Corpus(tuple(draw("toy:mono", spec.corpus_size)), "mono")
    cs_size = spec.cs_corpus_size or spec.corpus_size
    base = draw("toy:cs", cs_size)
    rate_rng = substream(spec.seed, "toy:cs-rate")
    policy = SubstitutionPolicy(rate=0.0, max_phrase_len=1, seed=int(substream(spec.seed, "toy:cs-seed").integers(2**62)))
    lo, hi = spec.target_rate
    cs = tuple(
        substitute(s, lexicon, policy, index=i, rate=float(rate_rng.uniform(lo, hi)))
        for i, s in enumerate(base)
    )
    return mono, Corpus(cs, "cs"), lexicon


def save_pairs(pairs: list[tuple[Sentence, Sentence]], path) -> None:
    """One ``source<TAB>target`` line per pair."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x, y in pairs:
            fh.write(f"{x.text()}\t{y.text()}\n")


def load_pairs(path, split_cjk: bool = True) -> list[tuple[Sentence, Sentence]]:
    pairs = []
    for lineno, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        if line.count("\t") != 1:
            raise DataError(f"{path}:{lineno}: expected 'source<TAB>target'")
        src, tgt = line.split("\t")
        pairs.append((tokenize(src, split_cjk), tokenize(tgt, split_cjk)))
    return pairs
