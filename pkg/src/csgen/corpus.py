"""Tokenization, language tagging, vocabularies, lexicons and corpus files.

Language tags are role based: ``LANG_A`` is the matrix/monolingual script
(CJK in the real setting) and ``LANG_B`` the embedded script (Latin).
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<s>", "</s>", "<unk>")

_CJK_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2A6DF),
    (0x2A700, 0x2EBEF),
    (0x30000, 0x3134F),
)


class LanguageTag(enum.Enum):
    LANG_A = "A"
    LANG_B = "B"
    NON_VERBAL = "NV"


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def is_non_verbal(surface: str) -> bool:
    return len(surface) >= 2 and (
        (surface[0] == "(" and surface[-1] == ")") or (surface[0] == "[" and surface[-1] == "]")
    )


def tag_language(surface: str) -> LanguageTag:
    if not surface:
        raise ValueError("cannot tag an empty surface")
    if is_non_verbal(surface):
        return LanguageTag.NON_VERBAL
    if any(is_cjk(ch) for ch in surface):
        return LanguageTag.LANG_A
    return LanguageTag.LANG_B


@dataclass(frozen=True)
class Token:
    surface: str
    tag: LanguageTag

    def __post_init__(self):
        if not self.surface or any(ch.isspace() for ch in self.surface):
            raise ValueError(f"invalid token surface {self.surface!r}")

    @classmethod
    def of(cls, surface: str) -> "Token":
        return cls(surface, tag_language(surface))


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...] = ()
    id: str | None = None

    @classmethod
    def from_surfaces(cls, surfaces: Iterable[str], id: str | None = None) -> "Sentence":
        return cls(tuple(Token.of(s) for s in surfaces), id)

    @property
    def surfaces(self) -> list[str]:
        return [t.surface for t in self.tokens]

    @property
    def tags(self) -> list[LanguageTag]:
        return [t.tag for t in self.tokens]

    def text(self) -> str:
        return " ".join(self.surfaces)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...] = ()
    name: str = "corpus"

    def __post_init__(self):
        if not isinstance(self.sentences, tuple):
            object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def __getitem__(self, i):
        return self.sentences[i]

    def sample(self, rng: np.random.Generator, k: int) -> list[Sentence]:
        """Uniform sampling with replacement."""
        if not self.sentences:
            raise DataError(f"cannot sample from empty corpus '{self.name}'")
        idx = rng.integers(0, len(self.sentences), size=k)
        return [self.sentences[i] for i in idx]

    def renamed(self, name: str) -> "Corpus":
        return Corpus(self.sentences, name)

    def __add__(self, other: "Corpus") -> "Corpus":
        return Corpus(self.sentences + other.sentences, f"{self.name}+{other.name}")


def _split_piece(piece: str, split_cjk: bool) -> list[str]:
    if is_non_verbal(piece) or not split_cjk:
        return [piece]
    out: list[str] = []
    buf = ""
    for ch in piece:
        if is_cjk(ch):
            if buf:
                out.append(buf)
                buf = ""
            out.append(ch)
        else:
            buf += ch
    if buf:
        out.append(buf)
    return out


def tokenize(line: str, split_cjk: bool = True, id: str | None = None) -> Sentence:
    """Whitespace split; CJK runs become one token per character unless ``split_cjk`` is off."""
    surfaces: list[str] = []
    for piece in line.split():
        surfaces.extend(_split_piece(piece, split_cjk))
    return Sentence.from_surfaces(surfaces, id)


class Vocabulary:
    """Bijective token <-> id map; ids 0..3 are PAD, BOS, EOS, UNK."""

    def __init__(self, tokens: Sequence[str]):
        self.itos: list[str] = list(SPECIALS) + [t for t in tokens]
        self.stoi: dict[str, int] = {}
        for i, tok in enumerate(self.itos):
            if tok in self.stoi:
                raise ValueError(f"duplicate vocabulary entry {tok!r}")
            self.stoi[tok] = i

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, tok: str) -> bool:
        return tok in self.stoi and self.stoi[tok] >= len(SPECIALS)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def __hash__(self):
        return hash(tuple(self.itos))

    def id(self, tok: str) -> int:
        return self.stoi.get(tok, UNK)

    @property
    def tokens(self) -> list[str]:
        return self.itos[len(SPECIALS):]


def build_vocab(corpora: Iterable[Corpus], min_count: int = 1) -> Vocabulary:
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for corpus in corpora:
        for sent in corpus:
            counts.update(sent.surfaces)
    kept = [t for t, c in counts.items() if c >= min_count and t not in SPECIALS]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


def encode(sentence: Sentence, vocab: Vocabulary, frame: bool = False) -> list[int]:
    ids = [vocab.id(s) for s in sentence.surfaces]
    if frame:
        ids = [BOS] + ids + [EOS]
    return ids


def decode(ids: Iterable[int], vocab: Vocabulary) -> Sentence:
    """Inverse of ``encode``: drops BOS/PAD, stops at the first EOS."""
    surfaces = []
    size = len(vocab)
    for i in ids:
        i = int(i)
        if i < 0 or i >= size:
            raise DataError(f"id {i} out of range for vocabulary of size {size}")
        if i == EOS:
            break
        if i in (BOS, PAD):
            continue
        surfaces.append(vocab.itos[i])
    return Sentence.from_surfaces(surfaces)


@dataclass(frozen=True)
class TranslationLexicon:
    entries: dict[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict)
    direction: str = "A->B"

    def __post_init__(self):
        for src, alts in self.entries.items():
            if tag_language(src) is not LanguageTag.LANG_A:
                raise DataError(f"lexicon source {src!r} is not a LangA token")
            if not alts or any(len(a) == 0 for a in alts):
                raise DataError(f"empty translation for {src!r}")

    def __contains__(self, src: str) -> bool:
        return src in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, src: str) -> tuple[tuple[str, ...], ...]:
        return self.entries.get(src, ())


def _read_lines(path: str | Path) -> list[str]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8 (byte {exc.start})") from exc
    return text.splitlines()


def load_corpus(path: str | Path, name: str | None = None, split_cjk: bool = True) -> Corpus:
    lines = _read_lines(path)
    sents = tuple(tokenize(line, split_cjk=split_cjk, id=str(i)) for i, line in enumerate(lines))
    return Corpus(sents, name or Path(path).stem)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sent in corpus:
            fh.write(sent.text() + "\n")


def load_lexicon(path: str | Path) -> TranslationLexicon:
    entries: dict[str, list[tuple[str, ...]]] = {}
    for lineno, line in enumerate(_read_lines(path), 1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise DataError(f"{path}:{lineno}: expected 'source<TAB>translation'")
        src, tgt = line.split("\t", 1)
        src, phrase = src.strip(), tuple(tgt.split())
        if not src or not phrase:
            raise DataError(f"{path}:{lineno}: empty source or translation")
        alts = entries.setdefault(src, [])
        if phrase not in alts:
            alts.append(phrase)
    return TranslationLexicon({k: tuple(v) for k, v in entries.items()})


def save_lexicon(lexicon: TranslationLexicon, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for src, alts in lexicon.entries.items():
            for phrase in alts:
                fh.write(f"{src}\t{' '.join(phrase)}\n")
