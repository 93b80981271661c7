"""Lambda grid on toy data: pretrain once, then one CycleGAN + LM per (lambda1, lambda2) cell.

    python3 scripts/run_sweep.py --micro --jobs 1 --out runs/sweep
"""
import argparse
from dataclasses import replace
from pathlib import Path

from csgen import cyclegan as cg
from csgen.experiment import ToyExperimentConfig, make_toy_data, pretrain_on_toy
from csgen.rng import derive_seed


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--micro", action="store_true", help="2x2 grid {0, 0.3} x {0.5, 0.8} instead of the full 5x5")
    ap.add_argument("--steps", type=int, default=300, help="CycleGAN steps per cell")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("runs/sweep"))
    args = ap.parse_args()

    cfg = ToyExperimentConfig(seed=args.seed)
    data = make_toy_data(cfg)
    pretrained = pretrain_on_toy(cfg, data, log=print)
    grid1, grid2 = ((0.0, 0.3), (0.5, 0.8)) if args.micro else (cg.DEFAULT_LAMBDA1_GRID, cg.DEFAULT_LAMBDA2_GRID)
    config = cg.SweepConfig(
        cycle=replace(cfg.cycle, steps=args.steps),
        lm=cfg.lm, lm_train=cfg.lm_train, seed=derive_seed(args.seed, "sweep"),
    )
    corpora = cg.SweepCorpora(data.mono_train, data.cs_train, data.cs_dev)
    table = cg.lambda_sweep(pretrained, corpora, grid1, grid2, config, jobs=args.jobs)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "sweep.csv").write_text(table.to_csv())
    (args.out / "sweep.txt").write_text(table.to_text())
    print(table.to_text())


if __name__ == "__main__":
    main()
