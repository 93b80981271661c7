import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csgen import cyclegan as cg
from csgen import lm
from csgen import nn
from csgen import seq2seq as s2s
from csgen.corpus import Corpus, Sentence, build_vocab, encode
from csgen.errors import DataError
from csgen.rng import substream

finite = st.floats(0, 100, allow_nan=False)
lam = st.floats(0, 10, allow_nan=False)


@given(finite, finite, finite, finite, lam, lam)
def test_loss_report_identity(a, b, c, d, l1, l2):
    total = cg.combine_losses(a, b, c, d, l1, l2)
    rep = cg.LossReport(a, b, c, d, 0.0, 0.0, total, l1, l2)
    assert abs(rep.total - (a + b + l1 * c + l2 * d)) <= 1e-9 * max(1.0, abs(total))
    assert rep.weighted_total() == pytest.approx(rep.total, abs=1e-9)
    assert cg.combine_losses(a, b, c, d, 0.0, 0.0) == a + b


def test_loss_combination_example():
    assert cg.combine_losses(1.0, 1.0, 2.0, 3.0, 0.3, 0.8) == pytest.approx(5.0, abs=1e-12)


def test_default_grid_axes():
    assert cg.DEFAULT_LAMBDA1_GRID == (0.0, 0.1, 0.2, 0.3, 0.4)
    assert cg.DEFAULT_LAMBDA2_GRID == (0.5, 0.6, 0.7, 0.8, 0.9)


def test_negative_lambda_rejected():
    with pytest.raises(ValueError):
        cg.CycleGanConfig(lambda1=-0.1)


# -- tiny model fixtures -----------------------------------------------------

X_LINES = ["丁 七 万", "丈 三", "上 下 丌 七", "丁 丈"]
Y_LINES = ["ka 七 lo", "mi nu", "上 pe 丌 ka", "lo 丈"]


def sents(lines):
    return tuple(Sentence.from_surfaces(l.split()) for l in lines)


@pytest.fixture(scope="module")
def vocab():
    return build_vocab([Corpus(sents(X_LINES)), Corpus(sents(Y_LINES))])


def tiny_model(vocab, seed=0, dim=6, **kw):
    gcfg = s2s.Seq2SeqConfig(emb_dim=dim, hidden=dim, init_scale=0.5)
    cfg = cg.CycleGanConfig(generator=gcfg, disc_emb=dim, disc_hidden=dim, length_slack=1, **kw)
    G = s2s.Seq2SeqModel(vocab, gcfg, seed=seed)
    F = s2s.Seq2SeqModel(vocab, gcfg, seed=seed + 1000)
    return cg.CycleGanModel(G, F, cfg, seed=seed)


def ids(lines, vocab):
    return [encode(s, vocab, frame=True) for s in sents(lines)]


def snapshot(params):
    return [p.data.tobytes() for p in params]


def test_gradient_isolation_bitwise(vocab):
    model = tiny_model(vocab)
    trainer = cg.CycleGanTrainer(model, cg.CycleTrainConfig(lr=1e-2, d_lr=1e-2))
    xs, ys = ids(X_LINES, vocab), ids(Y_LINES, vocab)
    gens, discs = model.generator_parameters(), model.D_X.parameters() + model.D_Y.parameters()
    g0, d0 = snapshot(gens), snapshot(discs)
    trainer.discriminator_step(ys, xs, "Y")
    trainer.discriminator_step(xs, ys, "X")
    assert snapshot(gens) == g0
    assert snapshot(discs) != d0
    d1 = snapshot(discs)
    trainer.generator_step(xs, ys)
    assert snapshot(discs) == d1
    assert snapshot(gens) != g0


@pytest.mark.parametrize("mode", ["ce", "l1"])
def test_composed_generator_objective_gradcheck(vocab, mode):
    worst = 0.0
    for seed in range(20):
        model = tiny_model(vocab, seed=seed, dim=4, cycle_mode=mode)
        rng = np.random.default_rng(seed)
        xs = [ids(X_LINES, vocab)[i] for i in rng.choice(4, 2, replace=False)]
        ys = [ids(Y_LINES, vocab)[i] for i in rng.choice(4, 2, replace=False)]
        f = lambda: model.generator_objective(xs, ys)[0]
        worst = max(worst, nn.grad_check(f, model.generator_parameters(), h=1e-5, max_coords=25, rng=rng))
    assert worst < 1e-3


def test_cycle_loss_bounds_untrained(vocab):
    model = tiny_model(vocab, dim=8)
    model.G.out.weight.data *= 0.01
    model.F.out.weight.data *= 0.01
    with nn.no_grad():
        loss = model.cycle_loss(model.G, model.F, ids(X_LINES, vocab)).item()
    assert loss >= 0
    assert abs(loss - math.log(len(vocab))) <= 0.2 * math.log(len(vocab))


def test_cycle_loss_small_for_copiers():
    lines = [" ".join(np.random.default_rng(i).choice(list("丁七万丈三上下"), size=3)) for i in range(60)]
    corpus = Corpus(sents(lines))
    vocab = build_vocab([corpus])
    pairs = [(s, s) for s in corpus]
    cfg = s2s.Seq2SeqConfig(emb_dim=24, hidden=24)
    G = s2s.Seq2SeqModel(vocab, cfg, seed=1)
    s2s.train(G, pairs, s2s.TrainConfig(epochs=120, batch=10, lr=1e-2))
    model = cg.CycleGanModel(G, G.clone(), cg.CycleGanConfig(generator=cfg))
    with nn.no_grad():
        loss = model.cycle_loss(model.G, model.F, [encode(s, vocab, frame=True) for s in corpus]).item()
    assert loss < 0.05


def test_discriminator_chance_on_identical_distributions(vocab):
    rng = np.random.default_rng(0)
    D = cg.Discriminator(len(vocab), 8, 8, rng)
    opt = nn.Adam(D.parameters(), lr=1e-3)
    pool = ids(X_LINES + Y_LINES, vocab)
    losses = []
    for step in range(200):
        r = substream(0, "d-test", step)
        real = [pool[i] for i in r.integers(0, len(pool), 8)]
        fake = [pool[i] for i in r.integers(0, len(pool), 8)]
        rid, rmask = s2s.pad_batch(real)
        fid, fmask = s2s.pad_batch(fake)
        onehots = [nn.Tensor(np.eye(len(vocab))[fid[:, t]]) for t in range(fid.shape[1])]
        opt.zero_grad()
        loss = nn.add(nn.bce_with_logits(D.logits_ids(rid, rmask), True),
                      nn.bce_with_logits(D.logits_soft(onehots, fmask), False))
        loss.backward()
        opt.step()
        losses.append(loss.item())
    assert abs(np.mean(losses[-50:]) - 2 * math.log(2)) < 0.1


def test_discriminator_separates_disjoint_domains():
    x = Corpus(sents(["丁 七 万", "丈 三 上", "下 丌", "七 七 丁 丈"]))
    y = Corpus(sents(["ka lo", "mi nu pe", "lo ka mi", "pe"]))
    vocab = build_vocab([x, y])
    model = tiny_model(vocab, dim=8)
    trainer = cg.CycleGanTrainer(model, cg.CycleTrainConfig(d_lr=1e-2))
    xs, ys = [encode(s, vocab, frame=True) for s in x], [encode(s, vocab, frame=True) for s in y]
    for _ in range(200):
        trainer.discriminator_step(ys, xs, "Y")
    _, acc = model.discriminator_loss("Y", ys, xs)
    assert acc > 0.95


def test_discriminator_batches(vocab):
    model = tiny_model(vocab)
    loss, acc = model.discriminator_loss("X", ids(X_LINES[:1], vocab), ids(Y_LINES[:1], vocab))
    assert np.isfinite(loss.item()) and acc in (0.0, 0.5, 1.0)
    with pytest.raises(DataError):
        model.discriminator_loss("X", [], ids(Y_LINES, vocab))
    with pytest.raises(DataError):
        model.generator_objective([], ids(Y_LINES, vocab))


def test_generator_step_descends(vocab):
    wins, trials = 0, 20
    xs, ys = ids(X_LINES, vocab), ids(Y_LINES, vocab)
    for seed in range(trials):
        model = tiny_model(vocab, seed=seed, dim=8)
        trainer = cg.CycleGanTrainer(model, cg.CycleTrainConfig(lr=1e-4))
        before = trainer.generator_step(xs, ys).total
        with nn.no_grad():
            after = model.generator_objective(xs, ys)[0].item()
        wins += after < before
    assert wins >= 0.9 * trials


def test_training_log_and_determinism(vocab, tmp_path):
    x, y = Corpus(sents(X_LINES)), Corpus(sents(Y_LINES))
    cfg = cg.CycleTrainConfig(steps=4, batch=2, seed=3, checkpoint_every=2)
    a, b = tiny_model(vocab), tiny_model(vocab)
    la = cg.train(a, x, y, cfg, out_dir=tmp_path)
    lb = cg.train(b, x, y, cfg)
    assert la.to_csv() == lb.to_csv()
    assert la.to_csv().splitlines()[0] == "step,adv_G,adv_F,cyc_X,cyc_Y,disc_X,disc_Y,total"
    assert all(abs(r.total - r.weighted_total()) < 1e-9 for r in la.reports)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["cyclegan-step000002.json", "cyclegan-step000004.json"]
    with pytest.raises(DataError):
        cg.train(a, Corpus(()), y, cfg)


def test_pretrain_rejects_empty():
    with pytest.raises(DataError):
        cg.pretrain([], [])


def test_generate_empty_and_deterministic(vocab):
    model = tiny_model(vocab)
    assert len(cg.generate(model, Corpus(()))) == 0
    x = Corpus(sents(X_LINES))
    assert [s.text() for s in cg.generate(model, x)] == [s.text() for s in cg.generate(model, x)]


def test_straight_through_translations_are_onehot(vocab):
    model = tiny_model(vocab, straight_through=True)
    steps, _ = model.translate_soft(model.G, ids(X_LINES, vocab))
    for s in steps:
        assert np.allclose(np.sort(s.data, axis=1)[:, -1], 1.0)


def test_checkpoint_roundtrip(vocab, tmp_path):
    model = tiny_model(vocab, seed=4)
    model.save(tmp_path / "c.json")
    back = cg.CycleGanModel.load(tmp_path / "c.json")
    assert snapshot(back.parameters()) == snapshot(model.parameters())
    assert back.config == model.config


@pytest.fixture(scope="module")
def sweep_setup(vocab):
    corpora = cg.SweepCorpora(Corpus(sents(X_LINES)), Corpus(sents(Y_LINES)), Corpus(sents(Y_LINES[:2])))
    config = cg.SweepConfig(
        cycle=cg.CycleTrainConfig(steps=2, batch=2),
        lm=lm.LMConfig(emb_dim=8, hidden=8), lm_train=lm.LMTrainConfig(epochs=1), seed=7,
    )
    return tiny_model(vocab), corpora, config


def test_sweep_single_cell_equals_run_cell(sweep_setup):
    model, corpora, config = sweep_setup
    table = cg.lambda_sweep(model, corpora, [0.3], [0.8], config)
    assert len(table.cells) == 1
    assert table.cells[0] == cg.run_cell(model, corpora, 0.3, 0.8, config)


def test_sweep_shape(sweep_setup):
    model, corpora, config = sweep_setup
    table = cg.lambda_sweep(model, corpora, [0.0, 0.2], [0.5], config)
    assert len(table.cells) == 2
    csv_lines = table.to_csv().splitlines()
    assert csv_lines[0] == "lambda2\\lambda1,0,0.2" and csv_lines[1].startswith("0.5,")
    assert all(np.isfinite(c.ppl) and c.ppl > 1 for c in table.cells)
    with pytest.raises(ValueError):
        cg.lambda_sweep(model, corpora, [], [0.5], config)
