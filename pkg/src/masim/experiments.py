"""Monte Carlo sweeps over one scenario parameter, with paired schemes.

Every (value, trial) cell builds one scenario with seed ``base.seed + trial``
and runs all requested schemes on it, so scheme comparisons are paired.
Results are plain rows that round-trip through CSV; :func:`aggregate` turns
them into per-cell mean powers in dBm.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .driver import AlgorithmOptions, Scheme, run
from .scenario import ScenarioConfig, build_scenario, watts_to_dbm
from .socp import Status

# sweep parameter name -> ScenarioConfig field
SWEEP_PARAMS = {"L": "L", "A_over_lambda": "A", "N": "N", "K": "K"}

CSV_COLUMNS = (
    "sweep_param",
    "sweep_value",
    "scheme",
    "trial",
    "seed",
    "scenario_hash",
    "status",
    "power_dbm",
    "iters",
    "wall_ms",
)

SUMMARY_COLUMNS = ("sweep_param", "sweep_value", "scheme", "trials", "optimal", "mean_dbm", "half_width_db")

_OPTION_KEYS = {f.name for f in dataclasses.fields(AlgorithmOptions)} - {"scheme"}


@dataclass
class SweepSpec:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    param: str = "L"
    values: list = field(default_factory=lambda: [10])
    trials: int = 100
    schemes: list = field(default_factory=lambda: list(Scheme))
    output: str | None = None
    record_timing: bool = True
    options: dict = field(default_factory=dict)  # AlgorithmOptions overrides

    def __post_init__(self):
        if isinstance(self.base, dict):
            self.base = ScenarioConfig.from_dict(self.base)
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"param must be one of {sorted(SWEEP_PARAMS)}, got {self.param!r}")
        if not self.values:
            raise ValueError("values must be nonempty")
        self.schemes = [Scheme(s) for s in self.schemes]
        if not self.schemes:
            raise ValueError("schemes must be nonempty")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        unknown = set(self.options) - _OPTION_KEYS
        if unknown:
            raise ValueError(f"unknown option keys: {sorted(unknown)}")
        # fail early on values the scenario config rejects
        for v in self.values:
            self.config_for(v, 0)

    def config_for(self, value, trial: int) -> ScenarioConfig:
        return self.base.replace(**{SWEEP_PARAMS[self.param]: value, "seed": self.base.seed + trial})

    def algorithm_options(self, scheme: Scheme) -> AlgorithmOptions:
        return AlgorithmOptions(scheme=scheme, **self.options)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "param": self.param,
            "values": list(self.values),
            "trials": self.trials,
            "schemes": [s.value for s in self.schemes],
            "output": self.output,
            "record_timing": self.record_timing,
            "options": dict(self.options),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SweepSpec keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "SweepSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TrialResult:
    sweep_param: str
    sweep_value: object
    scheme: str
    trial: int
    seed: int
    scenario_hash: str
    status: str
    power_dbm: float  # nan unless status is Optimal
    iters: int
    wall_ms: float

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL.value


def run_trial(spec: SweepSpec, value, trial: int) -> list:
    """All schemes of one (value, trial) cell on a shared scenario."""
    cfg = spec.config_for(value, trial)
    scenario = build_scenario(cfg)
    digest = scenario.digest()
    rows = []
    for scheme in spec.schemes:
        t0 = time.perf_counter()
        result = run(scenario, spec.algorithm_options(scheme))
        elapsed = (time.perf_counter() - t0) * 1e3 if spec.record_timing else 0.0
        ok = result.status is Status.OPTIMAL
        rows.append(
            TrialResult(
                sweep_param=spec.param,
                sweep_value=value,
                scheme=scheme.value,
                trial=trial,
                seed=cfg.seed,
                scenario_hash=digest,
                status=result.status.value,
                power_dbm=float(watts_to_dbm(result.solution.total_power)) if ok else math.nan,
                iters=result.trace.iterations,
                wall_ms=elapsed,
            )
        )
    return rows


def _run_cell(args):
    spec, value, trial = args
    return run_trial(spec, value, trial)


def run_sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Run every (value, trial) cell; rows come back sorted by value, trial, scheme."""
    cells = [(spec, v, t) for v in spec.values for t in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        chunks = [_run_cell(c) for c in cells]
    value_rank = {repr(v): i for i, v in enumerate(spec.values)}
    scheme_rank = {s.value: i for i, s in enumerate(spec.schemes)}
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (value_rank[repr(r.sweep_value)], r.trial, scheme_rank[r.scheme]))
    return rows


# ---------------------------------------------------------------------------
# CSV


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else repr(float(x))
    return str(x)


def write_results(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def read_results(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [
            TrialResult(
                sweep_param=row["sweep_param"],
                sweep_value=_parse_value(row["sweep_value"]) if row["sweep_value"] else "",
                scheme=row["scheme"],
                trial=int(row["trial"]),
                seed=int(row["seed"]),
                scenario_hash=row["scenario_hash"],
                status=row["status"],
                power_dbm=float(row["power_dbm"]) if row["power_dbm"] else math.nan,
                iters=int(row["iters"]),
                wall_ms=float(row["wall_ms"]),
            )
            for row in reader
        ]


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class CellSummary:
    sweep_param: str
    sweep_value: object
    scheme: str
    trials: int
    optimal: int
    mean_dbm: float  # nan when no trial is Optimal
    half_width_db: float  # 95% normal-approximation half-width

    @property
    def flagged(self) -> bool:
        return self.optimal == 0


def aggregate(rows) -> list:
    """Per (value, scheme) mean dBm over Optimal trials, in first-seen order."""
    if not rows:
        raise ValueError("nothing to aggregate")
    cells: dict = {}
    for r in rows:
        cells.setdefault((r.sweep_param, repr(r.sweep_value), r.scheme), []).append(r)
    out = []
    for group in cells.values():
        first = group[0]
        powers = np.array([r.power_dbm for r in group if r.ok])
        if powers.size:
            mean = float(powers.mean())
            half = float(1.96 * powers.std(ddof=1) / np.sqrt(powers.size)) if powers.size > 1 else 0.0
        else:
            mean, half = math.nan, math.nan
        out.append(
            CellSummary(first.sweep_param, first.sweep_value, first.scheme, len(group), int(powers.size), mean, half)
        )
    return out


def write_summary(summary, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for s in summary:
            writer.writerow([_fmt(getattr(s, c)) for c in SUMMARY_COLUMNS])


def mean_dbm(summary, scheme, value) -> float:
    """Look up one cell's mean; handy in scripts."""
    for s in summary:
        if s.scheme == str(scheme) and s.sweep_value == value:
            return s.mean_dbm
    raise KeyError((scheme, value))
