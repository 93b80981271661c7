"""LSTM encoder-decoder without attention.

The decoder starts from the encoder's final state, so the whole source is
summarized by that one vector. Sequences are framed with BOS/EOS; batches are
right-padded with PAD and masked.
"""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .corpus import BOS, EOS, PAD, Sentence, Vocabulary, encode
from .errors import DataError
from .nn import Tensor
from .nn import checkpoint as ckpt
from .rng import substream


@dataclass
class Seq2SeqConfig:
    emb_dim: int = 64
    hidden: int = 64
    layers: int = 1
    init_scale: float = 0.1


# encoder + decoder of 650 LSTM units, 300-dim embeddings
PAPER_SCALE = Seq2SeqConfig(emb_dim=300, hidden=650, layers=1)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch: int = 16
    lr: float = 3e-3
    seed: int = 0
    clip: float | None = 5.0


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)


@dataclass
class DecodeResult:
    ids: list[int]
    logprobs: list[float]
    probs: list[np.ndarray] | None = None


def straight_through_onehot(p: Tensor) -> Tensor:
    """Argmax one-hot forward, identity gradient to ``p``."""
    hard = np.zeros_like(p.data)
    np.put_along_axis(hard, p.data.argmax(axis=-1)[..., None], 1.0, axis=-1)
    return nn.add(p, Tensor(hard - p.data))


def pad_batch(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id lists with PAD; returns (ids (B, T), mask (B, T))."""
    T = max(len(s) for s in seqs)
    ids = np.full((len(seqs), T), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return ids, mask


def soft_sequence(probs: Sequence[Tensor], lengths: np.ndarray, vocab_size: int):
    """Prepends a hard BOS step to decoder distributions; returns (steps, mask)."""
    B = len(lengths)
    bos = np.zeros((B, vocab_size))
    bos[:, BOS] = 1.0
    steps = [Tensor(bos)] + list(probs)
    mask = np.zeros((B, len(steps)))
    mask[:, 0] = 1.0
    for b, n in enumerate(lengths):
        mask[b, 1 : 1 + int(n)] = 1.0
    return steps, mask


class Seq2SeqModel(nn.Module):
    def __init__(self, vocab: Vocabulary, config: Seq2SeqConfig | None = None, seed: int = 0):
        self.vocab = vocab
        self.config = config = config or Seq2SeqConfig()
        rng = substream(seed, "init:seq2seq")
        V, E, H, s = len(vocab), config.emb_dim, config.hidden, config.init_scale
        self.src_emb = nn.Embedding(V, E, rng, s)
        self.encoder = nn.LSTM(E, H, config.layers, rng, s)
        self.tgt_emb = nn.Embedding(V, E, rng, s)
        self.decoder = nn.LSTM(E, H, config.layers, rng, s)
        self.out = nn.Linear(H, V, rng, s)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def clone(self) -> "Seq2SeqModel":
        return copy.deepcopy(self)

    # -- encoder -------------------------------------------------------
    def encode_ids(self, ids: np.ndarray, mask: np.ndarray) -> list[Tensor]:
        self._check_ids(ids)
        steps = [self.src_emb(ids[:, t]) for t in range(ids.shape[1])]
        _, states = self.encoder.run(steps, self.encoder.zero_state(ids.shape[0]), mask)
        return states

    def encode_soft(self, probs: Sequence[Tensor], mask: np.ndarray) -> list[Tensor]:
        steps = [self.src_emb.soft(p) for p in probs]
        _, states = self.encoder.run(steps, self.encoder.zero_state(mask.shape[0]), mask)
        return states

    def _check_ids(self, ids: np.ndarray):
        if ids.size and (ids.min() < 0 or ids.max() >= self.vocab_size):
            raise DataError(f"token id out of range for vocabulary of size {self.vocab_size}")

    # -- decoder -------------------------------------------------------
    def teacher_forced_loss(self, states: list[Tensor], tgt: np.ndarray, reduction: str = "mean") -> Tensor:
        """Cross-entropy of framed, padded targets ``tgt`` (B, T) given encoder states."""
        self._check_ids(tgt)
        inputs = [self.tgt_emb(tgt[:, t]) for t in range(tgt.shape[1] - 1)]
        hs, _ = self.decoder.run(inputs, states)
        logits = self.out(nn.concat(hs, axis=0))
        targets = tgt[:, 1:].T.reshape(-1)
        return nn.cross_entropy(logits, targets, ignore_index=PAD, reduction=reduction)

    def soft_decode(self, states: list[Tensor], max_len: int, temperature: float = 1.0,
                    straight_through: bool = False):
        """Free-running decode feeding expected embeddings back in.

        Returns per-step distributions (B, V) and each row's length, fixed by the
        first step whose argmax is EOS (inclusive) or ``max_len``. With
        ``straight_through`` every step is the argmax one-hot in the forward pass
        while gradients still flow through the softmax.
        """
        B = states[0].shape[0]
        inp = self.tgt_emb(np.full(B, BOS))
        probs: list[Tensor] = []
        lengths = np.full(B, max_len, dtype=np.int64)
        done = np.zeros(B, dtype=bool)
        for t in range(max_len):
            h, states = self.decoder.step(inp, states)
            p = nn.softmax(self.out(h), temperature=temperature)
            if straight_through:
                p = straight_through_onehot(p)
            probs.append(p)
            hit = (~done) & (p.data.argmax(axis=1) == EOS)
            lengths[hit] = t + 1
            done |= hit
            if done.all():
                break
            inp = self.tgt_emb.soft(p)
        return probs, lengths

    def _decode(self, xs: Sequence[Sequence[int]], max_len: int, pick) -> list[DecodeResult]:
        ids, mask = pad_batch(xs)
        with nn.no_grad():
            states = self.encode_ids(ids, mask)
            B = len(xs)
            tok = np.full(B, BOS)
            results = [DecodeResult([], []) for _ in range(B)]
            done = np.zeros(B, dtype=bool)
            for _ in range(max_len):
                h, states = self.decoder.step(self.tgt_emb(tok), states)
                logits = self.out(h).data
                tok, logp = pick(logits)
                for b in np.flatnonzero(~done):
                    if tok[b] == EOS:
                        done[b] = True
                    else:
                        results[b].ids.append(int(tok[b]))
                    results[b].logprobs.append(float(logp[b]))
                if done.all():
                    break
        return results

    def greedy_decode_batch(self, xs: Sequence[Sequence[int]], max_len: int) -> list[DecodeResult]:
        if max_len < 1:
            raise ValueError("max_len must be >= 1")

        def pick(logits):
            logp = nn.tensor._log_softmax(logits, 1)
            tok = logits.argmax(axis=1)
            return tok, logp[np.arange(len(tok)), tok]

        return self._decode(xs, max_len, pick)

    def greedy_decode(self, x: Sequence[int], max_len: int) -> DecodeResult:
        return self.greedy_decode_batch([x], max_len)[0]

    def sample_decode_batch(self, xs, temperature: float, seed: int, max_len: int, stream: int = 0) -> list[DecodeResult]:
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        rng = substream(seed, "sample-decode", stream)

        def pick(logits):
            logp = nn.tensor._log_softmax(logits / temperature, 1)
            p = np.exp(logp)
            u = rng.random(len(p))
            tok = np.minimum((p.cumsum(axis=1) < u[:, None]).sum(axis=1), p.shape[1] - 1)
            return tok, logp[np.arange(len(tok)), tok]

        return self._decode(xs, max_len, pick)

    def sample_decode(self, x: Sequence[int], temperature: float, seed: int, max_len: int) -> DecodeResult:
        return self.sample_decode_batch([x], temperature, seed, max_len)[0]

    # -- likelihood ----------------------------------------------------
    def nll_batch(self, xs: Sequence[Sequence[int]], ys: Sequence[Sequence[int]], reduction: str = "sum") -> Tensor:
        src, smask = pad_batch(xs)
        tgt, _ = pad_batch(ys)
        return self.teacher_forced_loss(self.encode_ids(src, smask), tgt, reduction)

    def nll(self, x: Sequence[int], y: Sequence[int], mean: bool = False) -> float:
        """-sum_t log P(y_t | v, y_<t) for one framed pair; per-token mean if ``mean``."""
        with nn.no_grad():
            return self.nll_batch([x], [y], "mean" if mean else "sum").item()

    # -- persistence ---------------------------------------------------
    def save(self, path: str | Path, extra: dict | None = None):
        meta = {"kind": "seq2seq", "config": asdict(self.config), "vocab": self.vocab.tokens, **(extra or {})}
        ckpt.save(path, self.state_dict(), meta)

    @classmethod
    def from_state(cls, params: dict, meta: dict) -> "Seq2SeqModel":
        model = cls(Vocabulary(meta["vocab"]), Seq2SeqConfig(**meta["config"]))
        model.load_state_dict(params)
        return model

    @classmethod
    def load(cls, path: str | Path) -> "Seq2SeqModel":
        params, meta = ckpt.load(path)
        if meta.get("kind") != "seq2seq":
            raise DataError(f"{path} is not a seq2seq checkpoint")
        return cls.from_state(params, meta)


def encode_pairs(pairs: Sequence[tuple[Sentence, Sentence]], vocab: Vocabulary) -> list[tuple[list[int], list[int]]]:
    return [(encode(s, vocab, frame=True), encode(t, vocab, frame=True)) for s, t in pairs]


def iter_batches(n: int, batch: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for i in range(0, n, batch):
        yield order[i : i + batch]


def train(model: Seq2SeqModel, pairs: Sequence[tuple[Sentence, Sentence]], config: TrainConfig | None = None, log=None) -> TrainReport:
    """Teacher-forced maximum likelihood with Adam; one report entry per epoch (mean token NLL)."""
    config = config or TrainConfig()
    if not pairs:
        raise DataError("cannot train on an empty pair list")
    data = encode_pairs(pairs, model.vocab)
    opt = nn.Adam(model.parameters(), lr=config.lr, clip=config.clip)
    report = TrainReport()
    for epoch in range(config.epochs):
        rng = substream(config.seed, "batch-order", epoch)
        total, count = 0.0, 0
        for idx in iter_batches(len(data), config.batch, rng):
            xs = [data[i][0] for i in idx]
            ys = [data[i][1] for i in idx]
            opt.zero_grad()
            loss = model.nll_batch(xs, ys, "mean")
            loss.backward()
            opt.step()
            n_tok = sum(len(y) - 1 for y in ys)
            total += loss.item() * n_tok
            count += n_tok
        report.epoch_losses.append(total / count)
        if log is not None:
            log(f"seq2seq epoch {epoch + 1}/{config.epochs} nll/token={total / count:.4f}")
    return report


def translate(model: Seq2SeqModel, sentences: Sequence[Sentence], batch: int = 64, mode: str = "greedy",
              temperature: float = 1.0, seed: int = 0, max_len: int | None = None) -> list[Sentence]:
    """Decodes each sentence; outputs are re-tagged from their surfaces."""
    from .corpus import decode

    out: list[Sentence] = []
    for start in range(0, len(sentences), batch):
        chunk = sentences[start : start + batch]
        xs = [encode(s, model.vocab, frame=True) for s in chunk]
        cap = max_len or (2 * max(len(x) for x in xs) + 4)
        if mode == "greedy":
            res = model.greedy_decode_batch(xs, cap)
        elif mode == "sample":
            res = model.sample_decode_batch(xs, temperature, seed, cap, stream=start)
        else:
            raise ValueError(f"unknown decode mode {mode!r}")
        out.extend(Sentence(decode(r.ids, model.vocab).tokens, s.id) for r, s in zip(res, chunk))
    return out
