"""Cycle-consistent adversarial transfer between monolingual (X) and code-switched (Y) text.

Two seq2seq generators, G: X -> Y and F: Y -> X, start from supervised
pretraining on pseudo-parallel pairs. Two recurrent discriminators score
domain membership. The generator objective is

    adv_G + adv_F + lambda1 * cyc_X + lambda2 * cyc_Y

with cyc_X = reconstruction loss of x from G(x) under F and cyc_Y the mirror
term. Generators hand their per-step softmax outputs downstream as expected
embeddings, which keeps the whole objective differentiable.
"""
from __future__ import annotations

import copy
import csv
import io
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from . import seq2seq as s2s
from .corpus import BOS, EOS, PAD, Corpus, Sentence, Vocabulary, build_vocab, encode
from .errors import DataError
from .nn import Tensor
from .nn import checkpoint as ckpt
from .rng import derive_seed, substream

DEFAULT_LAMBDA1_GRID = (0.0, 0.1, 0.2, 0.3, 0.4)
DEFAULT_LAMBDA2_GRID = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class CycleGanConfig:
    lambda1: float = 0.3
    lambda2: float = 0.8
    generator: s2s.Seq2SeqConfig = field(default_factory=s2s.Seq2SeqConfig)
    disc_emb: int = 32
    disc_hidden: int = 32
    temperature: float = 1.0
    length_slack: int = 2
    cycle_mode: str = "ce"  # "ce": teacher-forced reconstruction; "l1": fixed-length soft L1
    straight_through: bool = False  # hard one-hot translations forward, softmax gradients backward

    def __post_init__(self):
        if isinstance(self.generator, dict):
            self.generator = s2s.Seq2SeqConfig(**self.generator)
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("cycle weights must be non-negative")
        if self.cycle_mode not in ("ce", "l1"):
            raise ValueError(f"unknown cycle_mode {self.cycle_mode!r}")


@dataclass
class CycleTrainConfig:
    steps: int = 2000
    d_steps_per_g: int = 1
    batch: int = 16
    lr: float = 1e-3
    d_lr: float = 1e-3
    seed: int = 0
    clip: float | None = 5.0
    checkpoint_every: int = 0
    log_every: int = 100


@dataclass
class LossReport:
    adv_G: float
    adv_F: float
    cyc_X: float
    cyc_Y: float
    disc_X: float
    disc_Y: float
    total: float
    lambda1: float = 0.3
    lambda2: float = 0.8

    def weighted_total(self) -> float:
        return self.adv_G + self.adv_F + self.lambda1 * self.cyc_X + self.lambda2 * self.cyc_Y

    CSV_FIELDS = ("adv_G", "adv_F", "cyc_X", "cyc_Y", "disc_X", "disc_Y", "total")


def combine_losses(adv_G, adv_F, cyc_X, cyc_Y, lambda1: float, lambda2: float):
    """The generator objective; works on floats and on tensors alike."""
    return adv_G + adv_F + lambda1 * cyc_X + lambda2 * cyc_Y


class Discriminator(nn.Module):
    """Embedding + LSTM + linear head on the final hidden state; one logit, positive = real."""

    def __init__(self, vocab_size: int, emb_dim: int, hidden: int, rng: np.random.Generator, scale: float = 0.1):
        self.emb = nn.Embedding(vocab_size, emb_dim, rng, scale)
        self.rnn = nn.LSTM(emb_dim, hidden, 1, rng, scale)
        self.head = nn.Linear(hidden, 1, rng, scale)

    def _score(self, steps: list[Tensor], mask: np.ndarray) -> Tensor:
        _, states = self.rnn.run(steps, self.rnn.zero_state(mask.shape[0]), mask)
        return self.head(self.rnn.cells[-1].h(states[-1]))

    def logits_ids(self, ids: np.ndarray, mask: np.ndarray) -> Tensor:
        return self._score([self.emb(ids[:, t]) for t in range(ids.shape[1])], mask)

    def logits_soft(self, probs: Sequence[Tensor], mask: np.ndarray) -> Tensor:
        return self._score([self.emb.soft(p) for p in probs], mask)


class CycleGanModel(nn.Module):
    def __init__(self, G: s2s.Seq2SeqModel, F: s2s.Seq2SeqModel, config: CycleGanConfig, seed: int = 0):
        if G.vocab != F.vocab:
            raise ValueError("generators must share one vocabulary")
        self.config = config
        self.vocab = G.vocab
        self.G = G
        self.F = F
        V = len(G.vocab)
        self.D_X = Discriminator(V, config.disc_emb, config.disc_hidden, substream(seed, "init:D_X"))
        self.D_Y = Discriminator(V, config.disc_emb, config.disc_hidden, substream(seed, "init:D_Y"))

    @property
    def lambda1(self) -> float:
        return self.config.lambda1

    @property
    def lambda2(self) -> float:
        return self.config.lambda2

    def generator_parameters(self) -> list[Tensor]:
        return self.G.parameters() + self.F.parameters()

    def clone(self) -> "CycleGanModel":
        return copy.deepcopy(self)

    def with_lambdas(self, lambda1: float, lambda2: float) -> "CycleGanModel":
        out = self.clone()
        out.config = CycleGanConfig(**{**_config_dict(self.config), "lambda1": lambda1, "lambda2": lambda2})
        return out

    # -- forward legs --------------------------------------------------
    def _cap(self, seqs: Sequence[Sequence[int]]) -> int:
        return max(len(s) for s in seqs) - 1 + self.config.length_slack

    def translate_soft(self, gen: s2s.Seq2SeqModel, seqs: Sequence[Sequence[int]], fixed_len: int | None = None):
        """Soft decode of ``seqs`` by ``gen``; returns (steps with leading BOS, mask)."""
        ids, mask = s2s.pad_batch(seqs)
        states = gen.encode_ids(ids, mask)
        if fixed_len is None:
            probs, lengths = gen.soft_decode(states, self._cap(seqs), self.config.temperature,
                                             self.config.straight_through)
        else:
            probs, lengths = _fixed_soft_decode(gen, states, fixed_len, self.config.temperature,
                                                self.config.straight_through)
        return s2s.soft_sequence(probs, lengths, len(self.vocab))

    def cycle_loss(self, fwd: s2s.Seq2SeqModel, back: s2s.Seq2SeqModel, seqs: Sequence[Sequence[int]], soft=None) -> Tensor:
        """Loss of reconstructing ``seqs`` with ``back`` from ``fwd``'s soft output."""
        ids, mask = s2s.pad_batch(seqs)
        if self.config.cycle_mode == "l1":
            steps, smask = self.translate_soft(fwd, seqs, fixed_len=ids.shape[1] - 1)
            states = back.encode_soft(steps, smask)
            probs, _ = _fixed_soft_decode(back, states, ids.shape[1] - 1, self.config.temperature, False)
            pred = nn.mul(nn.stack(probs, axis=1), Tensor(mask[:, 1:, None]))
            target = np.zeros(pred.shape)
            np.put_along_axis(target, ids[:, 1:, None], 1.0, axis=2)
            return nn.l1_loss(pred, Tensor(target * mask[:, 1:, None]))
        steps, smask = soft if soft is not None else self.translate_soft(fwd, seqs)
        return back.teacher_forced_loss(back.encode_soft(steps, smask), ids, "mean")

    def generator_objective(self, xs: Sequence[Sequence[int]], ys: Sequence[Sequence[int]]):
        """Returns (total tensor, component tensors) for one batch from each domain."""
        if not xs or not ys:
            raise DataError("generator step needs non-empty batches from both domains")
        fake_y = self.translate_soft(self.G, xs)
        fake_x = self.translate_soft(self.F, ys)
        adv_G = nn.bce_with_logits(self.D_Y.logits_soft(*fake_y), real=True)
        adv_F = nn.bce_with_logits(self.D_X.logits_soft(*fake_x), real=True)
        cyc_X = self.cycle_loss(self.G, self.F, xs, soft=fake_y)
        cyc_Y = self.cycle_loss(self.F, self.G, ys, soft=fake_x)
        total = combine_losses(adv_G, adv_F, cyc_X, cyc_Y, self.lambda1, self.lambda2)
        return total, (adv_G, adv_F, cyc_X, cyc_Y)

    def discriminator_loss(self, domain: str, real: Sequence[Sequence[int]], source: Sequence[Sequence[int]]):
        """BCE on real samples of ``domain`` plus fakes translated from ``source``; generators get no gradient."""
        if not real or not source:
            raise DataError("discriminator step needs non-empty batches")
        if domain not in ("X", "Y"):
            raise ValueError(f"domain must be 'X' or 'Y', got {domain!r}")
        D, gen = (self.D_Y, self.G) if domain == "Y" else (self.D_X, self.F)
        with nn.no_grad():
            steps, fmask = self.translate_soft(gen, source)
            steps = [Tensor(s.data) for s in steps]
        ids, rmask = s2s.pad_batch(real)
        real_logit = D.logits_ids(ids, rmask)
        fake_logit = D.logits_soft(steps, fmask)
        loss = nn.add(nn.bce_with_logits(real_logit, True), nn.bce_with_logits(fake_logit, False))
        correct = int((real_logit.data > 0).sum() + (fake_logit.data <= 0).sum())
        return loss, correct / (len(real) + len(source))

    # -- inference -----------------------------------------------------
    def generate(self, sentences: Sequence[Sentence], mode: str = "greedy", seed: int = 0, temperature: float = 1.0) -> list[Sentence]:
        return s2s.translate(self.G, sentences, mode=mode, seed=seed, temperature=temperature)

    def reconstruct(self, sentences: Sequence[Sentence]) -> list[Sentence]:
        """Hard F(G(x)) with greedy decoding on both legs."""
        return s2s.translate(self.F, s2s.translate(self.G, sentences))

    # -- persistence ---------------------------------------------------
    def save(self, path: str | Path, extra: dict | None = None):
        meta = {"kind": "cyclegan", "config": _config_dict(self.config), "vocab": self.vocab.tokens, **(extra or {})}
        ckpt.save(path, self.state_dict(), meta)

    @classmethod
    def load(cls, path: str | Path) -> "CycleGanModel":
        params, meta = ckpt.load(path)
        if meta.get("kind") != "cyclegan":
            raise DataError(f"{path} is not a CycleGAN checkpoint")
        config = CycleGanConfig(**meta["config"])
        vocab = Vocabulary(meta["vocab"])
        model = cls(s2s.Seq2SeqModel(vocab, config.generator), s2s.Seq2SeqModel(vocab, config.generator), config)
        model.load_state_dict(params)
        return model


def _config_dict(config: CycleGanConfig) -> dict:
    return asdict(config)


def _fixed_soft_decode(gen: s2s.Seq2SeqModel, states, steps: int, temperature: float, straight_through: bool):
    B = states[0].shape[0]
    inp = gen.tgt_emb(np.full(B, BOS))
    probs = []
    for _ in range(steps):
        h, states = gen.decoder.step(inp, states)
        p = nn.softmax(gen.out(h), temperature=temperature)
        if straight_through:
            p = s2s.straight_through_onehot(p)
        probs.append(p)
        inp = gen.tgt_emb.soft(p)
    return probs, np.full(B, steps, dtype=np.int64)


def token_accuracy(refs: Sequence[Sentence], hyps: Sequence[Sentence]) -> float:
    """Position-aligned token matches over the longer of each pair, pooled over the set."""
    hits = total = 0
    for r, h in zip(refs, hyps):
        a, b = r.surfaces, h.surfaces
        hits += sum(x == y for x, y in zip(a, b))
        total += max(len(a), len(b))
    return hits / total if total else 1.0


def reconstruction_accuracy(model: CycleGanModel, sentences: Sequence[Sentence]) -> float:
    return token_accuracy(sentences, model.reconstruct(sentences))


# -- pretraining -------------------------------------------------------------

def pretrain(pairs_xy, pairs_yx, config: CycleGanConfig | None = None, train_config: s2s.TrainConfig | None = None,
             vocab: Vocabulary | None = None, seed: int = 0, extra_corpora: Sequence[Corpus] = (), log=None):
    """Supervised pretraining of G on (x -> y) and F on (y -> x); discriminators start random.

    Returns the model and both generators' training reports.
    """
    if not pairs_xy or not pairs_yx:
        raise DataError("pretraining needs non-empty pair lists in both directions")
    config = config or CycleGanConfig()
    train_config = train_config or s2s.TrainConfig()
    if vocab is None:
        sents = [s for p in list(pairs_xy) + list(pairs_yx) for s in p]
        vocab = build_vocab([Corpus(tuple(sents)), *extra_corpora])
    G = s2s.Seq2SeqModel(vocab, config.generator, seed=derive_seed(seed, "init:G"))
    F = s2s.Seq2SeqModel(vocab, config.generator, seed=derive_seed(seed, "init:F"))
    cfg_g = s2s.TrainConfig(**{**asdict(train_config), "seed": derive_seed(seed, "pretrain:G")})
    cfg_f = s2s.TrainConfig(**{**asdict(train_config), "seed": derive_seed(seed, "pretrain:F")})
    rep_g = s2s.train(G, pairs_xy, cfg_g, log=_prefixed(log, "G"))
    rep_f = s2s.train(F, pairs_yx, cfg_f, log=_prefixed(log, "F"))
    return CycleGanModel(G, F, config, seed=seed), (rep_g, rep_f)


def _prefixed(log, tag):
    if log is None:
        return None
    return lambda msg: log(f"[{tag}] {msg}")


# -- adversarial training ----------------------------------------------------

class CycleGanTrainer:
    """Owns the optimizers and the batch stream for one training run."""

    def __init__(self, model: CycleGanModel, config: CycleTrainConfig | None = None):
        self.model = model
        self.config = config = config or CycleTrainConfig()
        self.opt_g = nn.Adam(model.generator_parameters(), lr=config.lr, clip=config.clip)
        self.opt_dx = nn.Adam(model.D_X.parameters(), lr=config.d_lr, clip=config.clip)
        self.opt_dy = nn.Adam(model.D_Y.parameters(), lr=config.d_lr, clip=config.clip)
        self.step_count = 0
        self.last_disc = {"X": float("nan"), "Y": float("nan")}
        self.last_acc = {"X": float("nan"), "Y": float("nan")}

    def discriminator_step(self, real: Sequence[Sequence[int]], source: Sequence[Sequence[int]], domain: str) -> float:
        model = self.model
        opt = self.opt_dy if domain == "Y" else self.opt_dx
        opt.zero_grad()
        loss, acc = model.discriminator_loss(domain, real, source)
        loss.backward()
        opt.step()
        self.last_disc[domain] = loss.item()
        self.last_acc[domain] = acc
        return loss.item()

    def generator_step(self, xs: Sequence[Sequence[int]], ys: Sequence[Sequence[int]]) -> LossReport:
        model = self.model
        self.opt_g.zero_grad()
        total, (adv_G, adv_F, cyc_X, cyc_Y) = model.generator_objective(xs, ys)
        total.backward()
        self.opt_g.step()
        model.D_X.zero_grad()
        model.D_Y.zero_grad()
        return LossReport(
            adv_G.item(), adv_F.item(), cyc_X.item(), cyc_Y.item(),
            self.last_disc["X"], self.last_disc["Y"], total.item(), model.lambda1, model.lambda2,
        )

    def train(self, corpus_x: Corpus, corpus_y: Corpus, out_dir: str | Path | None = None, log=None) -> "TrainLog":
        if len(corpus_x) == 0 or len(corpus_y) == 0:
            raise DataError("CycleGAN training needs non-empty corpora for both domains")
        cfg = self.config
        vocab = self.model.vocab
        xs_all = [encode(s, vocab, frame=True) for s in corpus_x]
        ys_all = [encode(s, vocab, frame=True) for s in corpus_y]
        history = TrainLog()
        for _ in range(cfg.steps):
            step = self.step_count
            rng = substream(cfg.seed, "cyclegan:batches", step)
            accs = []
            for _k in range(cfg.d_steps_per_g):
                bx = _pick(xs_all, rng, cfg.batch)
                by = _pick(ys_all, rng, cfg.batch)
                self.discriminator_step(by, bx, "Y")
                self.discriminator_step(bx, by, "X")
                accs.append((self.last_acc["X"] + self.last_acc["Y"]) / 2)
            bx = _pick(xs_all, rng, cfg.batch)
            by = _pick(ys_all, rng, cfg.batch)
            report = self.generator_step(bx, by)
            self.step_count += 1
            history.reports.append(report)
            history.disc_accuracy.append(float(np.mean(accs)) if accs else float("nan"))
            if log is not None and cfg.log_every and self.step_count % cfg.log_every == 0:
                log(f"step {self.step_count}: total={report.total:.4f} adv_G={report.adv_G:.3f} "
                    f"adv_F={report.adv_F:.3f} cyc_X={report.cyc_X:.3f} cyc_Y={report.cyc_Y:.3f} "
                    f"D_acc={history.disc_accuracy[-1]:.3f}")
            if out_dir is not None and cfg.checkpoint_every and self.step_count % cfg.checkpoint_every == 0:
                self.model.save(Path(out_dir) / f"cyclegan-step{self.step_count:06d}.json")
        return history


def _pick(seqs, rng: np.random.Generator, k: int):
    idx = rng.integers(0, len(seqs), size=min(k, len(seqs)) if k > 0 else 1)
    return [seqs[i] for i in idx]


@dataclass
class TrainLog:
    reports: list[LossReport] = field(default_factory=list)
    disc_accuracy: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", *LossReport.CSV_FIELDS])
        for i, r in enumerate(self.reports, 1):
            w.writerow([i, *(repr(getattr(r, f)) for f in LossReport.CSV_FIELDS)])
        return buf.getvalue()


def train(model: CycleGanModel, corpus_x: Corpus, corpus_y: Corpus, config: CycleTrainConfig | None = None,
          out_dir=None, log=None) -> TrainLog:
    return CycleGanTrainer(model, config).train(corpus_x, corpus_y, out_dir, log)


def generate(model: CycleGanModel, corpus_x: Corpus, decode: str = "greedy", seed: int = 0, name: str | None = None) -> Corpus:
    return Corpus(tuple(model.generate(list(corpus_x), mode=decode, seed=seed)), name or f"{corpus_x.name}.G")


# -- lambda sweep ------------------------------------------------------------

@dataclass
class SweepCorpora:
    mono: Corpus  # X: CycleGAN source domain, also the text that gets transferred
    cs: Corpus  # Y: real code-switched training text, also the LM base
    heldout: Corpus  # code-switched held-out text for perplexity


@dataclass
class SweepCell:
    lambda1: float
    lambda2: float
    ppl: float
    final_total: float


@dataclass
class SweepConfig:
    cycle: CycleTrainConfig = field(default_factory=CycleTrainConfig)
    lm: "object" = None  # lm.LMConfig
    lm_train: "object" = None  # lm.LMTrainConfig
    decode: str = "greedy"
    seed: int = 0


def run_cell(pretrained: CycleGanModel, corpora: SweepCorpora, lambda1: float, lambda2: float, config: SweepConfig) -> SweepCell:
    """One grid cell: CycleGAN training at (lambda1, lambda2), transfer, LM on base + generated, held-out PPL."""
    from . import lm as lm_mod

    model = pretrained.with_lambdas(lambda1, lambda2)
    cell_seed = derive_seed(config.seed, "sweep-cell", int(round(lambda1 * 1000)), int(round(lambda2 * 1000)))
    cycle_cfg = CycleTrainConfig(**{**asdict(config.cycle), "seed": cell_seed, "checkpoint_every": 0})
    log = train(model, corpora.mono, corpora.cs, cycle_cfg)
    generated = generate(model, corpora.mono, config.decode, seed=cell_seed)
    report = lm_mod.ab_experiment(corpora.cs, {"generated": generated}, {"heldout": corpora.heldout},
                                  config.lm, config.lm_train)
    return SweepCell(lambda1, lambda2, report.ppl("generated", "heldout"), log.reports[-1].total if log.reports else float("nan"))


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class SweepTable:
    lambda1_grid: list[float]
    lambda2_grid: list[float]
    cells: list[SweepCell]

    def lookup(self, lambda1: float, lambda2: float) -> SweepCell:
        return next(c for c in self.cells if c.lambda1 == lambda1 and c.lambda2 == lambda2)

    def to_csv(self) -> str:
        """lambda2 rows by lambda1 columns."""
        lines = ["lambda2\\lambda1," + ",".join(f"{l1:g}" for l1 in self.lambda1_grid)]
        for l2 in self.lambda2_grid:
            lines.append(f"{l2:g}," + ",".join(f"{self.lookup(l1, l2).ppl:.6f}" for l1 in self.lambda1_grid))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        head = "l2 \\ l1".ljust(9) + "".join(f"{l1:>9g}" for l1 in self.lambda1_grid)
        rows = [f"{l2:<9g}" + "".join(f"{self.lookup(l1, l2).ppl:9.2f}" for l1 in self.lambda1_grid) for l2 in self.lambda2_grid]
        return "\n".join([head, *rows]) + "\n"


def lambda_sweep(pretrained: CycleGanModel, corpora: SweepCorpora, grid_lambda1: Sequence[float] = DEFAULT_LAMBDA1_GRID,
                 grid_lambda2: Sequence[float] = DEFAULT_LAMBDA2_GRID, config: SweepConfig | None = None,
                 jobs: int = 1) -> SweepTable:
    """Trains one CycleGAN per (lambda1, lambda2) cell from shared pretrained generators.

    Cells are independent and seeded by their lambda values, so results do not
    depend on ``jobs`` or on grid order.
    """
    if not grid_lambda1 or not grid_lambda2:
        raise ValueError("lambda grids must be non-empty")
    config = config or SweepConfig()
    cells_args = [(pretrained, corpora, l1, l2, config) for l2, l1 in itertools.product(grid_lambda2, grid_lambda1)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            cells = list(ex.map(_run_cell_args, cells_args))
    else:
        cells = [run_cell(*a) for a in cells_args]
    return SweepTable(list(grid_lambda1), list(grid_lambda2), cells)
