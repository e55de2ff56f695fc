#!/usr/bin/env python3
"""Monte Carlo tables: Z-statistic moments, coverage, and losses.

Runs the full cell grid (estimator x block count x sample size x noise
level) on a chosen model preset and prints a compact table alongside the
JSON report. At the default M=2000 this takes a while on one core;
use --workers or VOLBLOCKS_WORKERS on a larger machine.
"""
import argparse

from volblocks import harness as H


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="model2",
                    choices=["model1", "model2", "model3"])
    ap.add_argument("-M", "--reps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sizes", default="23400")
    ap.add_argument("--xi2", default="0.001")
    ap.add_argument("--blocks", default="1,2,4,6,8")
    ap.add_argument("--estimators", default="rk(th2),qmle")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="mc_report.json")
    args = ap.parse_args()

    cfg = H.McConfig(
        model=args.model, M=args.reps, base_seed=args.seed,
        sizes=tuple(int(x) for x in args.sizes.split(",")),
        xi2_levels=tuple(float(x) for x in args.xi2.split(",")),
        blocks=tuple(int(x) for x in args.blocks.split(",")),
        estimators=tuple(args.estimators.split(",")),
        workers=args.workers)
    report = H.run_mc(cfg)
    H.emit(report, "json", args.out)

    hdr = (f"{'estimator':>10} {'B':>3} {'n':>6} {'xi2':>7} "
           f"{'z_mean':>8} {'z_sd':>7} {'fz_sd':>7} "
           f"{'cov95':>7} {'emp_loss':>9} {'theo_loss':>9}")
    print(hdr)
    print("-" * len(hdr))
    for c in report.cells:
        cov95 = c.coverage[4] - c.coverage[1]  # mass inside +-1.96
        print(f"{c.estimator:>10} {c.B:>3} {c.n:>6} {c.xi2:>7.4f} "
              f"{c.z_mean:>8.3f} {c.z_sd:>7.3f} {c.fz_sd:>7.3f} "
              f"{cov95:>6.1f}% {c.emp_loss:>9.3f} {c.theo_loss:>9.3f}")
    print(f"\nfailures={report.failures} "
          f"nonconverged={report.nonconverged}; report in {args.out}")


if __name__ == "__main__":
    main()
