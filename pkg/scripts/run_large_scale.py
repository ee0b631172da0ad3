#!/usr/bin/env python3
"""Large-configuration run: 16x16 surface, 192 samples per snapshot.

Training and the structured solver scale fine; the full-size semidefinite
baseline does not (its PSD block has side 257), so anm-denoise only joins
the sweep with --include-full, and expect roughly a minute per trial for
it.
"""

import argparse
import sys
from pathlib import Path

from risdoa.config import PlanConfig, SourceSpec, TrainSettings, large_scenario
from risdoa.harness import run_bench, run_compare, run_train

# oversampled schedule, same 3:2 ratio to the element count as the desk run
NUM_SAMPLES = 192

# fixed evaluation scene (amplitude phases, hardware, and noise random)
SCENE = SourceSpec(count=2, elevations=(45.4, 72.8), azimuths=(-22.3, 18.9))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("results/large"))
    parser.add_argument("--epochs", type=int, default=1000)
    parser.add_argument("--dataset-size", type=int, default=12000)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--snr", default="0,5,10,15,20,25,30")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--seed", type=int, default=2626)
    parser.add_argument("--skip-train", action="store_true")
    parser.add_argument(
        "--include-full",
        action="store_true",
        help="add the full-size semidefinite baseline (slow)",
    )
    args = parser.parse_args()

    train_scenario = large_scenario(seed=args.seed, num_samples=NUM_SAMPLES)
    bench_scenario = large_scenario(seed=args.seed, num_samples=NUM_SAMPLES, sources=SCENE)
    model_path = args.out / "model.bin"
    if args.skip_train and model_path.exists():
        print(f"reusing {model_path}")
    else:
        settings = TrainSettings(
            dataset_size=args.dataset_size,
            epochs=args.epochs,
            hidden_widths=(64, 64, 64, 64),
            seed=77,
        )
        model_path, loss_path = run_train(train_scenario, settings, args.out)
        print(f"trained model -> {model_path}")
        print(f"loss history  -> {loss_path}")

    methods = ["fft", "omp", "fft-denoise", "omp-denoise", "dnn-danm", "crb"]
    if args.include_full:
        methods.insert(4, "anm-denoise")
    plan = PlanConfig(
        methods=tuple(methods),
        snr_list=tuple(float(v) for v in args.snr.split(",")),
        trials=args.trials,
        seed=31,
        workers=args.workers,
        full_solver_cap=1024,
    )
    paths = run_bench(bench_scenario, plan, args.out, model_path=model_path)
    print(f"benchmark     -> {paths.summary}")
    for row in run_compare(paths.summary, out_path=args.out / "compare.csv"):
        rmse = "n/a" if row["rmse_deg"] is None else f"{row['rmse_deg']:.4f} deg"
        print(f"  snr {row['snr_db']:>5g}  {row['rank']:>5}  {row['method']:<12} {rmse}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
