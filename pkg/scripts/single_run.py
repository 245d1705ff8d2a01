"""Solve one scenario with every scheme and print the power trace.

    python scripts/single_run.py --seed 3 --K 2 --N 4 --L 10 --A 4
"""

import argparse

import numpy as np

from masim import AlgorithmOptions, ScenarioConfig, Scheme, build_scenario, run
from masim.scenario import watts_to_dbm


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--K", type=int, default=2)
    parser.add_argument("--N", type=int, default=4)
    parser.add_argument("--L", type=int, default=10)
    parser.add_argument("--A", type=float, default=4.0)
    args = parser.parse_args()

    scenario = build_scenario(ScenarioConfig(K=args.K, N=args.N, L=args.L, A=args.A, seed=args.seed))
    print(f"scenario {scenario.digest()}")
    for scheme in Scheme:
        res = run(scenario, AlgorithmOptions(scheme))
        if not res.trace.power:
            print(f"{scheme.value:>9}: {res.status.value}")
            continue
        trace = " -> ".join(f"{watts_to_dbm(p):.2f}" for p in res.trace.power[:: max(1, len(res.trace.power) // 6)])
        print(f"{scheme.value:>9}: {watts_to_dbm(res.solution.total_power):6.2f} dBm, "
              f"{res.trace.iterations} iterations [{trace}]")
        if scheme.movable:
            print(" " * 11 + "antenna positions (wavelengths):", np.round(res.positions / scenario.wavelength, 2).tolist())


if __name__ == "__main__":
    main()
