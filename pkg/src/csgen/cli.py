"""``csgen`` command-line entry point.

Every command takes ``--config PATH`` (a JSON object of settings, or a
manifest written by an earlier run), ``--seed``, ``--out`` and ``--jobs``,
plus per-command flags that override the file. Outputs go under ``--out``
together with ``manifest.json``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import cmi as cmi_mod
from . import cyclegan as cg
from . import lm as lm_mod
from . import seq2seq as s2s
from .corpus import Corpus, build_vocab, load_corpus, load_lexicon, save_corpus, tokenize
from .errors import DataError, NumericError
from .experiment import ToyExperimentConfig, run_toy_experiment, write_toy_outputs
from .nn import checkpoint as ckpt
from .rng import derive_seed
from .synth import SubstitutionPolicy, load_pairs, make_pairs, save_pairs

log = logging.getLogger("csgen")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- settings ----------------------------------------------------------------
# Each option: (name, type, default, help). ``type`` is one of
# str, int, float, bool, "path", "paths", "floats", "named-paths".
# Paths default to None and are required unless marked optional.

OPTIONAL = "optional"

COMMON_MODEL = [
    ("emb_dim", int, 64, "embedding size"),
    ("hidden", int, 64, "LSTM units"),
    ("layers", int, 1, "LSTM layers"),
]
LM_OPTS = [
    ("lm_emb_dim", int, 64, "LM embedding size"),
    ("lm_hidden", int, 64, "LM LSTM units"),
    ("lm_layers", int, 1, "LM LSTM layers"),
    ("lm_epochs", int, 10, "LM epochs"),
    ("lm_batch", int, 20, "LM batch size"),
    ("lm_lr", float, 3e-3, "LM learning rate"),
    ("unit", str, "char", "LM unit: char (CJK split per character) or word"),
]
CYCLE_OPTS = [
    ("steps", int, 2000, "generator steps"),
    ("d_steps", int, 1, "discriminator steps per generator step"),
    ("batch", int, 16, "batch size"),
    ("lr", float, 1e-3, "generator learning rate"),
    ("d_lr", float, 1e-3, "discriminator learning rate"),
    ("temperature", float, 1.0, "softmax temperature of the differentiable decode"),
    ("straight_through", bool, False, "hard one-hot translations with softmax gradients"),
    ("cycle_mode", str, "ce", "cycle term: ce or l1"),
]

COMMANDS: dict[str, tuple[str, list]] = {
    "tokenize": ("Normalize and tokenize a corpus file.", [
        ("input", "path", None, "raw text file"),
        ("split_cjk", bool, True, "split CJK runs into characters"),
    ]),
    "cmi-report": ("CMI group histogram of one or more corpora.", [
        ("corpora", "paths", None, "corpus files"),
    ]),
    "synth-pairs": ("Pseudo-parallel pairs by lexicon substitution.", [
        ("corpus", "path", None, "monolingual corpus"),
        ("lexicon", "path", None, "lexicon TSV"),
        ("rate", float, 0.35, "substitution rate"),
        ("max_phrase_len", int, 4, "longest admissible translation"),
    ]),
    "train-s2s": ("Train a seq2seq model on a pair file.", [
        ("pairs", "path", None, "pair file (source<TAB>target)"),
        ("reverse", bool, False, "train target -> source"),
        *COMMON_MODEL,
        ("epochs", int, 20, "epochs"),
        ("batch", int, 16, "batch size"),
        ("lr", float, 3e-3, "learning rate"),
    ]),
    "train-cyclegan": ("Adversarial training of G (X->Y) and F (Y->X).", [
        ("mono", "path", None, "domain X corpus (monolingual)"),
        ("cs", "path", None, "domain Y corpus (code-switched)"),
        ("g", "path", OPTIONAL, "pretrained G checkpoint"),
        ("f", "path", OPTIONAL, "pretrained F checkpoint"),
        ("pairs", "path", OPTIONAL, "pair file to pretrain both generators when no checkpoints are given"),
        *COMMON_MODEL,
        ("pretrain_epochs", int, 20, "pretraining epochs"),
        ("pretrain_batch", int, 16, "pretraining batch"),
        ("pretrain_lr", float, 3e-3, "pretraining learning rate"),
        ("lambda1", float, 0.3, "weight of the X->Y->X cycle term"),
        ("lambda2", float, 0.8, "weight of the Y->X->Y cycle term"),
        *CYCLE_OPTS,
        ("checkpoint_every", int, 0, "save a checkpoint every N steps (0: never)"),
    ]),
    "generate": ("Translate a corpus with a trained generator.", [
        ("model", "path", None, "CycleGAN or seq2seq checkpoint"),
        ("input", "path", None, "corpus to transfer"),
        ("decode", str, "greedy", "greedy or sample"),
        ("temperature", float, 1.0, "sampling temperature"),
    ]),
    "train-lm": ("Train a recurrent LM.", [
        ("corpus", "path", None, "training corpus"),
        ("vocab_from", "paths", OPTIONAL, "extra corpora whose tokens join the vocabulary"),
        *LM_OPTS,
    ]),
    "eval-ppl": ("Perplexity of a trained LM on corpora.", [
        ("model", "path", None, "LM checkpoint"),
        ("corpora", "paths", None, "corpus files"),
    ]),
    "ab-experiment": ("LM on base text alone and with each generated corpus added.", [
        ("base", "path", None, "base training corpus"),
        ("arms", "named-paths", None, "NAME=PATH generated corpora"),
        ("dev", "path", None, "held-out dev corpus"),
        ("eval", "path", None, "held-out eval corpus"),
        *LM_OPTS,
    ]),
    "sweep-lambda": ("Downstream PPL over a lambda1 x lambda2 grid.", [
        ("model", "path", None, "pretrained CycleGAN checkpoint"),
        ("mono", "path", None, "domain X corpus"),
        ("cs", "path", None, "domain Y corpus, also the LM base"),
        ("heldout", "path", None, "held-out code-switched corpus"),
        ("grid_lambda1", "floats", list(cg.DEFAULT_LAMBDA1_GRID), "lambda1 values"),
        ("grid_lambda2", "floats", list(cg.DEFAULT_LAMBDA2_GRID), "lambda2 values"),
        *CYCLE_OPTS,
        *LM_OPTS,
        ("decode", str, "greedy", "greedy or sample"),
    ]),
    "toy-experiment": ("Full pipeline on synthetic bilingual data.", []),
}

PATH_TYPES = ("path", "paths", "named-paths")


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csgen", description="Code-switched text generation toolkit.")
    parser.add_argument("--version", action="version", version=f"csgen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON settings file or a previous run's manifest.json")
        p.add_argument("--seed", type=int, help="root seed (default 0)")
        p.add_argument("--out", help="output directory (default: out/<command>)")
        p.add_argument("--jobs", type=int, help="parallel workers where supported (default 1)")
        if name == "toy-experiment":
            p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                           help="override a toy setting, e.g. --set cycle.steps=200")
        for opt, typ, _default, h in opts:
            flag = _flag(opt)
            if typ is bool:
                p.add_argument(flag, dest=opt, action=argparse.BooleanOptionalAction, default=None, help=h)
            elif typ in ("paths", "named-paths"):
                p.add_argument(flag, dest=opt, nargs="+", default=None, help=h)
            elif typ == "floats":
                p.add_argument(flag, dest=opt, nargs="+", type=float, default=None, help=h)
            else:
                p.add_argument(flag, dest=opt, type=str if typ == "path" else typ, default=None, help=h)
    return parser


def _read_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config {path} must hold a JSON object")
    if "settings" in data and "command" in data:  # a manifest
        data = {**data["settings"], "seed": data.get("seed", 0)}
    return data


def resolve_settings(command: str, args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    _, opts = COMMANDS[command]
    file_cfg = _read_config(args.config)
    settings = {"seed": 0, "jobs": 1}
    if command == "toy-experiment":
        settings.update({k: v for k, v in asdict(ToyExperimentConfig()).items() if k != "seed"})
    else:
        settings.update({opt: (None if d == OPTIONAL else d) for opt, _, d, _ in opts})
    for k, v in file_cfg.items():
        if k not in settings:
            raise UsageError(f"unknown setting {k!r} for {command}")
        if isinstance(settings[k], dict) and isinstance(v, dict):
            settings[k] = {**settings[k], **v}
        else:
            settings[k] = v
    for k in ("seed", "jobs", *(o[0] for o in opts)):
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v
    for item in getattr(args, "set", []) or []:
        key, _, raw = item.partition("=")
        if not raw:
            raise UsageError(f"--set expects KEY=JSON, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        head, _, tail = key.partition(".")
        if head not in settings or head == "jobs":
            raise UsageError(f"unknown setting {head!r} for {command}")
        if tail:
            if not isinstance(settings[head], dict) or tail not in settings[head]:
                raise UsageError(f"unknown setting {key!r} for {command}")
            settings[head] = {**settings[head], tail: value}
        else:
            settings[head] = value
    if not isinstance(settings["seed"], int) or settings["seed"] < 0:
        raise UsageError("seed must be a non-negative integer")
    _validate_paths(command, settings)
    return settings


def _validate_paths(command: str, settings: dict):
    for opt, typ, default, _ in COMMANDS[command][1]:
        if typ not in PATH_TYPES:
            continue
        value = settings.get(opt)
        if value is None or value == []:
            if default == OPTIONAL:
                continue
            raise UsageError(f"{command} needs {_flag(opt)}")
        if typ == "path":
            paths = [value]
        elif typ == "paths":
            paths = list(value)
        else:
            paths = [_split_named(v)[1] for v in value]
        for p in paths:
            if not Path(p).is_file():
                raise DataError(f"file not found: {p}")


def _split_named(item: str) -> tuple[str, str]:
    name, sep, path = item.partition("=")
    if not sep or not name or not path:
        raise UsageError(f"expected NAME=PATH, got {item!r}")
    return name, path


# -- manifest ----------------------------------------------------------------

def manifest(command: str, settings: dict) -> dict:
    return {
        "command": command,
        "seed": settings["seed"],
        "settings": {k: v for k, v in settings.items() if k not in ("seed", "jobs")},
        "versions": {"csgen": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


# -- commands ----------------------------------------------------------------

def _corpus(path: str, split_cjk: bool = True) -> Corpus:
    return load_corpus(path, split_cjk=split_cjk)


def _lm_configs(s: dict, seed: int):
    cfg = lm_mod.LMConfig(emb_dim=s["lm_emb_dim"], hidden=s["lm_hidden"], layers=s["lm_layers"], unit=s["unit"])
    train = lm_mod.LMTrainConfig(epochs=s["lm_epochs"], batch=s["lm_batch"], lr=s["lm_lr"], seed=seed)
    return cfg, train


def _cycle_configs(s: dict, seed: int):
    train = cg.CycleTrainConfig(
        steps=s["steps"], d_steps_per_g=s["d_steps"], batch=s["batch"], lr=s["lr"], d_lr=s["d_lr"], seed=seed,
        checkpoint_every=s.get("checkpoint_every", 0),
    )
    return train


def cmd_tokenize(s: dict, out: Path):
    lines = Path(s["input"]).read_text(encoding="utf-8").splitlines()
    corpus = Corpus(tuple(tokenize(l, s["split_cjk"]) for l in lines), "tokenized")
    save_corpus(corpus, out / "tokenized.txt")
    log.info("tokenized %d lines", len(corpus))


def cmd_cmi_report(s: dict, out: Path):
    hists = {}
    for p in s["corpora"]:
        name = Path(p).stem
        if name in hists:
            raise UsageError(f"duplicate corpus name {name!r}")
        hists[name] = cmi_mod.histogram(_corpus(p))
    text = cmi_mod.format_report(hists)
    (out / "cmi_report.txt").write_text(text, encoding="utf-8")
    (out / "cmi_report.json").write_text(cmi_mod.report_json(hists), encoding="utf-8")
    sys.stdout.write(text)


def cmd_synth_pairs(s: dict, out: Path):
    policy = SubstitutionPolicy(rate=s["rate"], max_phrase_len=s["max_phrase_len"], seed=derive_seed(s["seed"], "synth"))
    pairs = make_pairs(_corpus(s["corpus"]), load_lexicon(s["lexicon"]), policy)
    save_pairs(pairs, out / "pairs.tsv")
    log.info("wrote %d pairs", len(pairs))


def _model_config(s: dict) -> s2s.Seq2SeqConfig:
    return s2s.Seq2SeqConfig(emb_dim=s["emb_dim"], hidden=s["hidden"], layers=s["layers"])


def cmd_train_s2s(s: dict, out: Path):
    pairs = load_pairs(s["pairs"])
    if s["reverse"]:
        pairs = [(y, x) for x, y in pairs]
    vocab = build_vocab([Corpus(tuple(t for p in pairs for t in p))])
    model = s2s.Seq2SeqModel(vocab, _model_config(s), seed=derive_seed(s["seed"], "init:s2s"))
    cfg = s2s.TrainConfig(epochs=s["epochs"], batch=s["batch"], lr=s["lr"], seed=derive_seed(s["seed"], "train:s2s"))
    report = s2s.train(model, pairs, cfg, log=log.info)
    model.save(out / "model.json")
    _write_losses(out / "losses.csv", report.epoch_losses)


def _write_losses(path: Path, losses):
    path.write_text("epoch,loss\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(losses, 1)), encoding="utf-8")


def cmd_train_cyclegan(s: dict, out: Path):
    mono, cs = _corpus(s["mono"]), _corpus(s["cs"])
    config = cg.CycleGanConfig(
        lambda1=s["lambda1"], lambda2=s["lambda2"], generator=_model_config(s), temperature=s["temperature"],
        cycle_mode=s["cycle_mode"], straight_through=s["straight_through"],
    )
    seed = s["seed"]
    if s["g"] and s["f"]:
        G, F = s2s.Seq2SeqModel.load(s["g"]), s2s.Seq2SeqModel.load(s["f"])
        if G.vocab != F.vocab:
            raise DataError(f"{s['g']} and {s['f']} use different vocabularies")
        if any(t not in G.vocab for c in (mono, cs) for sent in c for t in sent.surfaces):
            log.warning("some corpus tokens are outside the generator vocabulary and map to <unk>")
        model = cg.CycleGanModel(G, F, cg.CycleGanConfig(**{**asdict(config), "generator": G.config}),
                                 seed=derive_seed(seed, "init:D"))
    elif s["pairs"]:
        pairs = load_pairs(s["pairs"])
        pre = s2s.TrainConfig(epochs=s["pretrain_epochs"], batch=s["pretrain_batch"], lr=s["pretrain_lr"])
        model, _ = cg.pretrain(pairs, [(y, x) for x, y in pairs], config, pre, seed=derive_seed(seed, "pretrain"),
                               extra_corpora=[mono, cs], log=log.info)
        model.save(out / "pretrained.json")
    else:
        raise UsageError("train-cyclegan needs --g and --f checkpoints or a --pairs file")
    train_log = cg.train(model, mono, cs, _cycle_configs(s, derive_seed(seed, "cyclegan")), out_dir=out, log=log.info)
    model.save(out / "cyclegan.json")
    (out / "losses.csv").write_text(train_log.to_csv(), encoding="utf-8")


def cmd_generate(s: dict, out: Path):
    _, meta = ckpt.load(s["model"])
    kind = meta.get("kind")
    corpus = _corpus(s["input"])
    if kind == "cyclegan":
        G = cg.CycleGanModel.load(s["model"]).G
    elif kind == "seq2seq":
        G = s2s.Seq2SeqModel.load(s["model"])
    else:
        raise DataError(f"{s['model']} is not a generator checkpoint")
    sents = s2s.translate(G, list(corpus), mode=s["decode"], temperature=s["temperature"],
                          seed=derive_seed(s["seed"], "generate"))
    save_corpus(Corpus(tuple(sents), "generated"), out / "generated.txt")
    log.info("generated %d sentences", len(sents))


def cmd_train_lm(s: dict, out: Path):
    split = s["unit"] == "char"
    corpus = _corpus(s["corpus"], split)
    extra = [_corpus(p, split) for p in s["vocab_from"] or []]
    cfg, train = _lm_configs(s, derive_seed(s["seed"], "lm"))
    model, report = lm_mod.train_lm(corpus, build_vocab([corpus, *extra]), cfg, train, log=log.info)
    model.save(out / "lm.json")
    _write_losses(out / "losses.csv", report.epoch_losses)


def cmd_eval_ppl(s: dict, out: Path):
    model = lm_mod.LanguageModel.load(s["model"])
    split = model.config.unit == "char"
    rows = [lm_mod.perplexity(model, _corpus(p, split)) for p in s["corpora"]]
    lines = ["corpus,tokens,mean_nll,ppl"] + [f"{r.corpus},{r.tokens},{r.mean_nll!r},{r.ppl!r}" for r in rows]
    (out / "ppl.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    width = max(len(r.corpus) for r in rows) + 2
    text = "".join(f"{r.corpus.ljust(width)}{r.ppl:12.4f}\n" for r in rows)
    (out / "ppl.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_ab_experiment(s: dict, out: Path):
    split = s["unit"] == "char"
    arms = {}
    for item in s["arms"]:
        name, path = _split_named(item)
        arms[name] = _corpus(path, split)
    cfg, train = _lm_configs(s, derive_seed(s["seed"], "lm"))
    report = lm_mod.ab_experiment(_corpus(s["base"], split), arms,
                                  {"dev": _corpus(s["dev"], split), "eval": _corpus(s["eval"], split)},
                                  cfg, train, log=log.info)
    (out / "ppl.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "ppl.txt").write_text(report.to_text(), encoding="utf-8")
    sys.stdout.write(report.to_text())


def cmd_sweep_lambda(s: dict, out: Path):
    model = cg.CycleGanModel.load(s["model"])
    model.config = cg.CycleGanConfig(**{**asdict(model.config), "temperature": s["temperature"],
                                        "cycle_mode": s["cycle_mode"], "straight_through": s["straight_through"]})
    corpora = cg.SweepCorpora(_corpus(s["mono"]), _corpus(s["cs"]), _corpus(s["heldout"]))
    lm_cfg, lm_train = _lm_configs(s, derive_seed(s["seed"], "lm"))
    config = cg.SweepConfig(cycle=_cycle_configs(s, 0), lm=lm_cfg, lm_train=lm_train, decode=s["decode"],
                            seed=derive_seed(s["seed"], "sweep"))
    table = cg.lambda_sweep(model, corpora, s["grid_lambda1"], s["grid_lambda2"], config, jobs=s["jobs"])
    (out / "sweep.csv").write_text(table.to_csv(), encoding="utf-8")
    (out / "sweep.txt").write_text(table.to_text(), encoding="utf-8")
    sys.stdout.write(table.to_text())


def cmd_toy_experiment(s: dict, out: Path):
    cfg = ToyExperimentConfig.from_dict({k: v for k, v in s.items() if k != "jobs"})
    run = run_toy_experiment(cfg, log=log.info)
    write_toy_outputs(run, out)
    sys.stdout.write(json.dumps(run.summary(), indent=2, sort_keys=True) + "\n")


HANDLERS = {
    "tokenize": cmd_tokenize,
    "cmi-report": cmd_cmi_report,
    "synth-pairs": cmd_synth_pairs,
    "train-s2s": cmd_train_s2s,
    "train-cyclegan": cmd_train_cyclegan,
    "generate": cmd_generate,
    "train-lm": cmd_train_lm,
    "eval-ppl": cmd_eval_ppl,
    "ab-experiment": cmd_ab_experiment,
    "sweep-lambda": cmd_sweep_lambda,
    "toy-experiment": cmd_toy_experiment,
}


def _setup_logging(out: Path):
    log.setLevel(logging.INFO)
    log.handlers.clear()
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(console)
    file = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    file.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.addHandler(file)
    log.propagate = False


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: --help / --version give 0, errors give EXIT_USAGE
        return int(exc.code or 0)
    command = args.command
    try:
        settings = resolve_settings(command, args)
        out = Path(args.out or Path("out") / command)
        out.mkdir(parents=True, exist_ok=True)
        _setup_logging(out)
        write_json(out / "manifest.json", manifest(command, settings))
        log.info("%s -> %s", command, out)
        HANDLERS[command](settings, out)
        return 0
    except UsageError as exc:
        print(f"csgen {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TypeError, ValueError, KeyError) as exc:
        print(f"csgen {command}: invalid settings: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"csgen {command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"csgen {command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        for h in list(log.handlers):
            h.close()
        log.handlers.clear()


if __name__ == "__main__":
    sys.exit(main())
