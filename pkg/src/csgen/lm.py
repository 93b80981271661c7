"""Recurrent language model, perplexity, and the text-augmentation comparison."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import nn
from .corpus import PAD, UNK, Corpus, Vocabulary, build_vocab, encode
from .errors import DataError
from .nn import Tensor
from .nn import checkpoint as ckpt
from .rng import substream
from .seq2seq import iter_batches, pad_batch


@dataclass
class LMConfig:
    emb_dim: int = 64
    hidden: int = 64
    layers: int = 1
    unit: str = "char"  # "char": CJK split per character; "word": whitespace tokens only
    init_scale: float = 0.1

    def __post_init__(self):
        if self.unit not in ("char", "word"):
            raise ValueError(f"unit must be 'char' or 'word', got {self.unit!r}")


@dataclass
class LMTrainConfig:
    epochs: int = 10
    batch: int = 20
    lr: float = 3e-3
    seed: int = 0
    clip: float | None = 5.0


# word LM: 1 x 650 LSTM, batch 20; subword analog: 2 x 650, batch 256
WORD_LM_PAPER = (LMConfig(emb_dim=300, hidden=650, layers=1, unit="word"), LMTrainConfig(batch=20))
SUBWORD_LM_PAPER = (LMConfig(emb_dim=300, hidden=650, layers=2, unit="char"), LMTrainConfig(batch=256))


@dataclass
class PerplexityReport:
    corpus: str
    tokens: int
    mean_nll: float
    ppl: float


@dataclass
class LMTrainReport:
    epoch_losses: list[float] = field(default_factory=list)


class LanguageModel(nn.Module):
    def __init__(self, vocab: Vocabulary, config: LMConfig | None = None, seed: int = 0):
        self.vocab = vocab
        self.config = config = config or LMConfig()
        rng = substream(seed, "init:lm")
        V, s = len(vocab), config.init_scale
        self.emb = nn.Embedding(V, config.emb_dim, rng, s)
        self.rnn = nn.LSTM(config.emb_dim, config.hidden, config.layers, rng, s)
        self.out = nn.Linear(config.hidden, V, rng, s)

    @classmethod
    def uniform(cls, vocab: Vocabulary, config: LMConfig | None = None) -> "LanguageModel":
        """Model whose every next-token distribution is uniform over the vocabulary."""
        model = cls(vocab, config)
        model.out.weight.data[:] = 0.0
        model.out.bias.data[:] = 0.0
        return model

    def logits(self, ids: np.ndarray) -> Tensor:
        """Time-major logits ((T-1)*B, V) predicting ids[:, 1:] from ids[:, :-1]."""
        inputs = [self.emb(ids[:, t]) for t in range(ids.shape[1] - 1)]
        hs, _ = self.rnn.run(inputs, self.rnn.zero_state(ids.shape[0]))
        return self.out(nn.concat(hs, axis=0))

    def loss_batch(self, seqs: Sequence[Sequence[int]], reduction: str = "mean") -> Tensor:
        ids, _ = pad_batch(seqs)
        targets = ids[:, 1:].T.reshape(-1)
        return nn.cross_entropy(self.logits(ids), targets, ignore_index=PAD, reduction=reduction)

    def next_token_distributions(self, seq: Sequence[int]) -> np.ndarray:
        """(len(seq)-1, V) predictive distributions along a framed sequence."""
        with nn.no_grad():
            logits = self.logits(np.asarray([seq])).data
        return np.exp(nn.tensor._log_softmax(logits, 1))

    def save(self, path: str | Path):
        meta = {"kind": "lm", "config": asdict(self.config), "vocab": self.vocab.tokens}
        ckpt.save(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path: str | Path) -> "LanguageModel":
        params, meta = ckpt.load(path)
        if meta.get("kind") != "lm":
            raise DataError(f"{path} is not a language-model checkpoint")
        model = cls(Vocabulary(meta["vocab"]), LMConfig(**meta["config"]))
        model.load_state_dict(params)
        return model


def encode_corpus(corpus: Corpus, vocab: Vocabulary, allow_unk: bool = False) -> list[list[int]]:
    seqs = [encode(s, vocab, frame=True) for s in corpus]
    if not allow_unk:
        for sent, seq in zip(corpus, seqs):
            if UNK in seq[1:-1]:
                oov = [t for t in sent.surfaces if t not in vocab]
                raise DataError(f"corpus '{corpus.name}' has tokens outside the model vocabulary: {oov[:5]}")
    return seqs


def train_lm(corpus: Corpus, vocab: Vocabulary | None = None, config: LMConfig | None = None,
             train_config: LMTrainConfig | None = None, log=None) -> tuple[LanguageModel, LMTrainReport]:
    """Next-token cross-entropy training with BOS/EOS framing and PAD masking."""
    if len(corpus) == 0:
        raise DataError("cannot train a language model on an empty corpus")
    train_config = train_config or LMTrainConfig()
    vocab = vocab or build_vocab([corpus])
    model = LanguageModel(vocab, config, seed=train_config.seed)
    seqs = encode_corpus(corpus, vocab, allow_unk=True)
    opt = nn.Adam(model.parameters(), lr=train_config.lr, clip=train_config.clip)
    report = LMTrainReport()
    for epoch in range(train_config.epochs):
        rng = substream(train_config.seed, "lm:batch-order", epoch)
        total, count = 0.0, 0
        for idx in iter_batches(len(seqs), train_config.batch, rng):
            batch = [seqs[i] for i in idx]
            opt.zero_grad()
            loss = model.loss_batch(batch, "mean")
            loss.backward()
            opt.step()
            n = sum(len(s) - 1 for s in batch)
            total += loss.item() * n
            count += n
        report.epoch_losses.append(total / count)
        if log is not None:
            log(f"lm epoch {epoch + 1}/{train_config.epochs} nll/token={total / count:.4f}")
    return model, report


def corpus_nll(model: LanguageModel, corpus: Corpus, batch: int = 64, allow_unk: bool = False) -> tuple[float, int]:
    """Summed NLL over all predicted tokens (EOS included, BOS and PAD excluded) and their count."""
    seqs = encode_corpus(corpus, model.vocab, allow_unk)
    total, count = 0.0, 0
    with nn.no_grad():
        for i in range(0, len(seqs), batch):
            chunk = seqs[i : i + batch]
            total += model.loss_batch(chunk, "sum").item()
            count += sum(len(s) - 1 for s in chunk)
    return total, count


def perplexity(model: LanguageModel, corpus: Corpus, batch: int = 64, allow_unk: bool = False) -> PerplexityReport:
    total, count = corpus_nll(model, corpus, batch, allow_unk)
    if count == 0:
        raise DataError(f"corpus '{corpus.name}' is empty")
    mean = total / count
    return PerplexityReport(corpus.name, count, mean, float(np.exp(mean)))


@dataclass
class ABRow:
    arm: str
    train_sentences: int
    ppl: dict[str, float]


@dataclass
class ABReport:
    heldouts: list[str]
    rows: list[ABRow]

    def ppl(self, arm: str, heldout: str) -> float:
        return next(r.ppl[heldout] for r in self.rows if r.arm == arm)

    def to_csv(self) -> str:
        cols = [f"{h}_ppl" for h in self.heldouts]
        lines = [",".join(["arm", *cols])]
        for r in self.rows:
            lines.append(",".join([r.arm, *(f"{r.ppl[h]:.6f}" for h in self.heldouts)]))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        width = max(len(r.arm) for r in self.rows) + 2
        head = "arm".ljust(width) + "".join(h.rjust(12) for h in self.heldouts)
        body = [r.arm.ljust(width) + "".join(f"{r.ppl[h]:12.2f}" for h in self.heldouts) for r in self.rows]
        return "\n".join([head, *body]) + "\n"


def ab_experiment(base: Corpus, arms: Mapping[str, Corpus], heldouts: Mapping[str, Corpus],
                  config: LMConfig | None = None, train_config: LMTrainConfig | None = None,
                  baseline_name: str = "baseline", log=None) -> ABReport:
    """LM on ``base`` alone and on ``base`` + each generated corpus, scored on every held-out set.

    All arms share one vocabulary (the union of every corpus involved), one seed
    and one schedule, so the training text is the only thing that differs.
    """
    vocab = build_vocab([base, *arms.values(), *heldouts.values()])
    train_config = train_config or LMTrainConfig()
    runs = {baseline_name: base, **{name: base + gen for name, gen in arms.items()}}
    rows = []
    for name, corpus in runs.items():
        if log is not None:
            log(f"training LM arm '{name}' on {len(corpus)} sentences")
        model, _ = train_lm(corpus, vocab, config, train_config)
        rows.append(ABRow(name, len(corpus), {h: perplexity(model, c).ppl for h, c in heldouts.items()}))
    return ABReport(list(heldouts), rows)


@dataclass
class AugmentationResult:
    baseline_ppl: float
    augmented_ppl: float

    @property
    def delta(self) -> float:
        return self.augmented_ppl - self.baseline_ppl


def augmentation_experiment(base: Corpus, generated: Corpus, heldout: Corpus,
                            config: LMConfig | None = None, train_config: LMTrainConfig | None = None) -> AugmentationResult:
    report = ab_experiment(base, {"augmented": generated}, {"heldout": heldout}, config, train_config)
    return AugmentationResult(report.ppl("baseline", "heldout"), report.ppl("augmented", "heldout"))
