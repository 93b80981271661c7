"""Desk-scale end-to-end pipeline on synthetic bilingual data.

toy corpora -> pseudo-parallel pairs -> seq2seq pretraining of G and F ->
CycleGAN training -> transfer of the monolingual corpus -> CMI report ->
LM comparison (baseline / +S2S text / +CycleGAN text).
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import cmi as cmi_mod
from . import cyclegan as cg
from . import lm as lm_mod
from . import seq2seq as s2s
from .corpus import Corpus, build_vocab, save_corpus, save_lexicon
from .rng import derive_seed
from .synth import SubstitutionPolicy, ToySpec, generate_toy, make_pairs


@dataclass
class ToyExperimentConfig:
    seed: int = 1
    vocab_size: int = 60
    min_len: int = 4
    max_len: int = 8
    mono_train: int = 6000  # unpaired domain-X text seen by CycleGAN
    mono_pairs: int = 1500  # leading slice of mono_train turned into pseudo-parallel pairs
    mono_heldout: int = 200
    cs_train: int = 300
    cs_dev: int = 200
    cs_eval: int = 200
    pair_rate: float = 0.3
    generator: s2s.Seq2SeqConfig = field(default_factory=lambda: s2s.Seq2SeqConfig(emb_dim=96, hidden=96))
    pretrain: s2s.TrainConfig = field(default_factory=lambda: s2s.TrainConfig(epochs=25, batch=64, lr=1e-2))
    cycle: cg.CycleTrainConfig = field(default_factory=lambda: cg.CycleTrainConfig(lr=1e-4, d_lr=1e-4))
    lambda1: float = 0.3
    lambda2: float = 0.8
    temperature: float = 0.5
    straight_through: bool = False
    lm: lm_mod.LMConfig = field(default_factory=lambda: lm_mod.LMConfig(emb_dim=32, hidden=32))
    lm_train: lm_mod.LMTrainConfig = field(default_factory=lambda: lm_mod.LMTrainConfig(epochs=8, batch=20))
    decode: str = "greedy"

    @classmethod
    def from_dict(cls, d: dict) -> "ToyExperimentConfig":
        nested = {
            "generator": s2s.Seq2SeqConfig,
            "pretrain": s2s.TrainConfig,
            "cycle": cg.CycleTrainConfig,
            "lm": lm_mod.LMConfig,
            "lm_train": lm_mod.LMTrainConfig,
        }
        base = asdict(cls())
        kwargs = {}
        for k, v in d.items():
            if k not in base:
                raise KeyError(f"unknown toy-experiment setting {k!r}")
            kwargs[k] = nested[k](**{**base[k], **v}) if k in nested else v
        return cls(**kwargs)

    def __post_init__(self):
        if not 0 < self.mono_pairs <= self.mono_train:
            raise ValueError("mono_pairs must lie in [1, mono_train]")


@dataclass
class ToyData:
    mono_train: Corpus
    mono_heldout: Corpus
    cs_train: Corpus
    cs_dev: Corpus
    cs_eval: Corpus
    lexicon: object


def make_toy_data(cfg: ToyExperimentConfig) -> ToyData:
    spec = ToySpec(
        vocab_a_size=cfg.vocab_size, vocab_b_size=cfg.vocab_size, min_len=cfg.min_len, max_len=cfg.max_len,
        corpus_size=cfg.mono_train + cfg.mono_heldout, cs_corpus_size=cfg.cs_train + cfg.cs_dev + cfg.cs_eval,
        seed=derive_seed(cfg.seed, "toy-data"),
    )
    mono, cs, lexicon = generate_toy(spec)
    m, c = mono.sentences, cs.sentences
    a, b = cfg.cs_train, cfg.cs_train + cfg.cs_dev
    return ToyData(
        Corpus(m[: cfg.mono_train], "mono_train"), Corpus(m[cfg.mono_train :], "mono_heldout"),
        Corpus(c[:a], "cs_train"), Corpus(c[a:b], "cs_dev"), Corpus(c[b:], "cs_eval"), lexicon,
    )


@dataclass
class ToyRun:
    data: ToyData
    pretrained: cg.CycleGanModel
    model: cg.CycleGanModel
    train_log: cg.TrainLog
    s2s_text: Corpus
    cyclegan_text: Corpus
    recon_pretrain: float
    recon_cyclegan: float
    histograms: dict
    distances: dict
    ab: lm_mod.ABReport
    timings: dict = field(default_factory=dict)  # wall-clock seconds per stage; kept out of summary()

    def summary(self) -> dict:
        return {
            "reconstruction_accuracy": {"pretrain": self.recon_pretrain, "cyclegan": self.recon_cyclegan},
            "cmi_distance_to_cs_train": self.distances,
            "cmi_percent": {k: {g: round(100 * m, 2) for g, m in h.as_dict().items()} for k, h in self.histograms.items()},
            "perplexity": {r.arm: r.ppl for r in self.ab.rows},
            "final_losses": asdict(self.train_log.reports[-1]) if self.train_log.reports else None,
            "disc_accuracy_last_10pct": self.late_disc_accuracy(),
        }

    def late_disc_accuracy(self) -> float | None:
        acc = self.train_log.disc_accuracy
        if not acc:
            return None
        tail = acc[-max(1, len(acc) // 10):]
        return sum(tail) / len(tail)


def pretrain_on_toy(cfg: ToyExperimentConfig, data: ToyData, log=None) -> cg.CycleGanModel:
    policy = SubstitutionPolicy(rate=cfg.pair_rate, max_phrase_len=1, seed=derive_seed(cfg.seed, "synth"))
    pairs_xy = make_pairs(Corpus(data.mono_train.sentences[: cfg.mono_pairs]), data.lexicon, policy)
    pairs_yx = [(y, x) for x, y in pairs_xy]
    vocab = build_vocab([data.mono_train, data.mono_heldout, data.cs_train, data.cs_dev, data.cs_eval,
                         Corpus(tuple(y for _, y in pairs_xy))])
    config = cg.CycleGanConfig(lambda1=cfg.lambda1, lambda2=cfg.lambda2, generator=cfg.generator,
                               temperature=cfg.temperature, straight_through=cfg.straight_through)
    model, _ = cg.pretrain(pairs_xy, pairs_yx, config, cfg.pretrain, vocab=vocab,
                           seed=derive_seed(cfg.seed, "pretrain"), log=log)
    return model


def run_toy_experiment(cfg: ToyExperimentConfig, log=None) -> ToyRun:
    clock = time.perf_counter()
    timings = {}

    def lap(stage):
        nonlocal clock
        now = time.perf_counter()
        timings[stage] = now - clock
        clock = now

    data = make_toy_data(cfg)
    if log:
        log(f"toy data: mono {len(data.mono_train)}+{len(data.mono_heldout)}, cs {len(data.cs_train)}/{len(data.cs_dev)}/{len(data.cs_eval)}")
    pretrained = pretrain_on_toy(cfg, data, log)
    recon_pre = cg.reconstruction_accuracy(pretrained, list(data.mono_heldout))
    s2s_text = cg.generate(pretrained, data.mono_train, cfg.decode, name="s2s")
    lap("pretrain")

    model = pretrained.clone()
    cycle_cfg = cg.CycleTrainConfig(**{**asdict(cfg.cycle), "seed": derive_seed(cfg.seed, "cyclegan")})
    train_log = cg.train(model, data.mono_train, data.cs_train, cycle_cfg, log=log)
    recon_post = cg.reconstruction_accuracy(model, list(data.mono_heldout))
    cyclegan_text = cg.generate(model, data.mono_train, cfg.decode, name="cyclegan")
    lap("cyclegan")

    hists = {
        "cs_train": cmi_mod.histogram(data.cs_train),
        "mono": cmi_mod.histogram(data.mono_train),
        "s2s": cmi_mod.histogram(s2s_text),
        "cyclegan": cmi_mod.histogram(cyclegan_text),
    }
    target = hists["cs_train"]
    distances = {k: cmi_mod.histogram_distance(h, target) for k, h in hists.items() if k != "cs_train"}

    lm_train = lm_mod.LMTrainConfig(**{**asdict(cfg.lm_train), "seed": derive_seed(cfg.seed, "lm")})
    ab = lm_mod.ab_experiment(
        data.cs_train, {"+s2s": s2s_text, "+cyclegan": cyclegan_text},
        {"dev": data.cs_dev, "eval": data.cs_eval}, cfg.lm, lm_train, log=log,
    )
    lap("lm")
    return ToyRun(data, pretrained, model, train_log, s2s_text, cyclegan_text, recon_pre, recon_post, hists,
                  distances, ab, timings)


def write_toy_outputs(run: ToyRun, out: Path):
    """Fixed relative names under ``out``; see README. Only timings.json varies between identical runs."""
    out.mkdir(parents=True, exist_ok=True)
    d = run.data
    for c in (d.mono_train, d.mono_heldout, d.cs_train, d.cs_dev, d.cs_eval):
        save_corpus(c, out / "data" / f"{c.name}.txt")
    save_lexicon(d.lexicon, out / "data" / "lexicon.tsv")
    save_corpus(run.s2s_text, out / "generated_s2s.txt")
    save_corpus(run.cyclegan_text, out / "generated_cyclegan.txt")
    (out / "losses.csv").write_text(run.train_log.to_csv(), encoding="utf-8")
    (out / "cmi_report.txt").write_text(cmi_mod.format_report(run.histograms), encoding="utf-8")
    (out / "cmi_report.json").write_text(cmi_mod.report_json(run.histograms), encoding="utf-8")
    (out / "ppl.csv").write_text(run.ab.to_csv(), encoding="utf-8")
    (out / "ppl.txt").write_text(run.ab.to_text(), encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(run.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    run.pretrained.save(out / "pretrained.json")
    run.model.save(out / "cyclegan.json")
    (out / "timings.json").write_text(json.dumps({k: round(v, 3) for k, v in run.timings.items()}) + "\n", encoding="utf-8")
