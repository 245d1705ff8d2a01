"""Run the shipped figure sweeps and write raw + aggregated CSVs.

    python scripts/reproduce_figures.py                 # all figures, 100 trials
    python scripts/reproduce_figures.py fig3 --trials 20 --workers 4

Raw rows go to results/<name>.csv and per-cell means to
results/<name>_summary.csv. Plotting is left to external tools.
"""

import argparse
import dataclasses
import logging
import time
from pathlib import Path

from masim.experiments import SweepSpec, aggregate, run_sweep, write_results, write_summary

ROOT = Path(__file__).resolve().parents[1]
FIGURES = ("fig2_k3", "fig2_k5", "fig3", "fig4")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("figures", nargs="*", default=list(FIGURES), choices=FIGURES)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--outdir", default=str(ROOT / "results"))
    args = parser.parse_args()
    logging.basicConfig(level=logging.ERROR)

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in args.figures:
        spec = SweepSpec.load(ROOT / "configs" / f"{name}.json")
        if args.trials:
            spec = dataclasses.replace(spec, trials=args.trials)
        t0 = time.perf_counter()
        rows = run_sweep(spec, workers=args.workers)
        summary = aggregate(rows)
        write_results(rows, outdir / f"{name}.csv")
        write_summary(summary, outdir / f"{name}_summary.csv")
        print(f"{name}: {len(rows)} rows in {time.perf_counter() - t0:.0f} s")
        for s in summary:
            mean = f"{s.mean_dbm:7.2f} ± {s.half_width_db:4.2f}" if s.optimal else "    n/a"
            print(f"  {s.sweep_param}={s.sweep_value!s:>4} {s.scheme:>9}: {mean} dBm ({s.optimal}/{s.trials})")


if __name__ == "__main__":
    main()
