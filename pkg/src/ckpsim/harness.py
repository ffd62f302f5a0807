"""Batch experiment driver and artifact writers.

A run is a seeded set of independent trials over one parameter point (or
a sweep grid), executed on a thread pool and written to a directory of
artifacts: manifest.json (inputs and environment), series.csv (per-trial
time series), summary.json (aggregates), events.jsonl (notable per-trial
events) and, for sweeps, phase.csv (one row per grid point).

Reproducibility contract: every artifact except the manifest timestamp
is a pure function of (config, master seed). Each trial owns a private
counter-based stream derived from (seed, trial index), results are
assembled in trial order whatever the completion order, and number
formatting is locale-free, so the bytes of series.csv and summary.json
do not depend on the thread count.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _kernels
from .analysis import (MetricsRecord, SurvivalEstimate, metrics,
                       survival_estimate, wilson_interval)
from .evolution import MetricsPlan, run
from .rng import split
from .state import (ExplicitInit, GeneralRootCT, InitKind, KnowledgeState,
                    Params, SimpleRootCF, UnivalentInit, new_state)

SERIES_COLUMNS = [
    "trial", "t", "n_nodes", "n_pt", "n_true_pt", "n_false_pt", "n_pf",
    "n_components", "max_component", "m_t", "height", "uni", "iuni",
    "phi_exp", "phi_lc", "extinct",
]

INIT_NAMES = {
    "simple": SimpleRootCF,
    "general": GeneralRootCT,
    "univalent": UnivalentInit,
}


class ConfigError(ValueError):
    """A run configuration that cannot be executed."""


def make_init(name: str) -> InitKind:
    try:
        return INIT_NAMES[name]()
    except KeyError:
        raise ConfigError(f"unknown init {name!r}; "
                          f"choose from {sorted(INIT_NAMES)}")


def _frac_str(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 \
        else f"{x.numerator}/{x.denominator}"


def _k_str(k: Optional[int]) -> str:
    return "inf" if k is None else str(k)


@dataclass(frozen=True)
class RunConfig:
    """One experiment: a parameter point, an initial state, a horizon,
    a trial count, and the master seed."""

    eps: Fraction
    p: Fraction
    k: Optional[int]
    init: str
    t_max: int
    trials: int
    seed: int
    threads: Optional[int] = None
    sample_times: Optional[Tuple[int, ...]] = None

    @classmethod
    def make(cls, eps, p, k, init: str, t_max: int, trials: int, seed: int,
             threads: Optional[int] = None,
             sample_times: Optional[Sequence[int]] = None) -> "RunConfig":
        params = Params.make(eps, p, k)
        if init not in INIT_NAMES:
            raise ConfigError(f"unknown init {init!r}")
        if t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if trials < 1:
            raise ConfigError("trials must be >= 1")
        return cls(eps=params.eps, p=params.p, k=params.k, init=init,
                   t_max=int(t_max), trials=int(trials), seed=int(seed),
                   threads=threads,
                   sample_times=tuple(sample_times) if sample_times else None)

    @property
    def params(self) -> Params:
        return Params(self.eps, self.p, self.k)

    def to_manifest(self) -> dict:
        return {
            "eps": _frac_str(self.eps),
            "p": _frac_str(self.p),
            "k": _k_str(self.k),
            "init": self.init,
            "t_max": self.t_max,
            "trials": self.trials,
            "seed": self.seed,
            "sample_times": list(self.sample_times)
            if self.sample_times else None,
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "RunConfig":
        return cls.make(doc["eps"], doc["p"], doc["k"], doc["init"],
                        doc["t_max"], doc["trials"], doc["seed"],
                        sample_times=doc.get("sample_times"))


def thread_count(config_threads: Optional[int] = None) -> int:
    """Worker count: explicit config, else CKP_THREADS, else cpu count."""
    if config_threads is not None:
        return max(1, int(config_threads))
    env = os.environ.get("CKP_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# trial execution
# ---------------------------------------------------------------------------

@dataclass
class TrialResult:
    index: int
    records: List[MetricsRecord]
    extinct: bool
    extinction_time: Optional[int]


def run_one_trial(config: RunConfig, index: int) -> TrialResult:
    rng = split(config.seed, index)
    st = new_state(config.params, make_init(config.init),
                   capacity=min(config.t_max + 8, 1 << 22))
    plan = MetricsPlan(times=config.sample_times)
    traj = run(st, config.t_max, rng, stop_on_extinction=True, plan=plan,
               record=metrics)
    return TrialResult(index=index, records=traj.records,
                       extinct=traj.extinct,
                       extinction_time=traj.extinction_time)


def run_trials(config: RunConfig) -> List[TrialResult]:
    """All trials of one config, in index order. Trials are independent
    (private streams, private states), so the thread count changes the
    wall time and nothing else."""
    workers = thread_count(config.threads)
    if workers == 1 or config.trials == 1:
        return [run_one_trial(config, i) for i in range(config.trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(run_one_trial, config, i)
                for i in range(config.trials)]
        return [f.result() for f in futs]


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def summarize(config: RunConfig, results: List[TrialResult]) -> dict:
    n = len(results)
    survived = sum(1 for r in results if not r.extinct)
    low, high = wilson_interval(survived, n)
    ext_times = sorted(r.extinction_time for r in results if r.extinct)
    finals = [r.records[-1] for r in results if r.records]
    max_components = [max((rec.max_component for rec in r.records),
                          default=0) for r in results]
    return {
        "config": config.to_manifest(),
        "trials": n,
        "survived": survived,
        "survival_frequency": survived / n,
        "survival_wilson95": [low, high],
        "extinction_times": {
            "count": len(ext_times),
            "median": ext_times[len(ext_times) // 2] if ext_times else None,
            "max": ext_times[-1] if ext_times else None,
        },
        "final_mean_n_pt": (sum(f.n_pt for f in finals) / len(finals))
        if finals else None,
        "final_mean_false_pt": (sum(f.n_false_pt for f in finals)
                                / len(finals)) if finals else None,
        "max_component_running_max_mean":
            (sum(max_components) / n) if n else None,
        "regime": classify_regime(survived, n),
    }


def classify_regime(survived: int, trials: int) -> str:
    """Artifact convention: "surviving" when the Wilson lower bound clears
    zero by more than a percent, "eliminating" when survival is under a
    percent, else "inconclusive"."""
    freq = survived / trials
    low, _ = wilson_interval(survived, trials)
    if low > 0.01:
        return "surviving"
    if freq < 0.01:
        return "eliminating"
    return "inconclusive"


# ---------------------------------------------------------------------------
# artifact writers
# ---------------------------------------------------------------------------

def write_manifest(path: Path, config: RunConfig, mode: str,
                   extra: Optional[dict] = None) -> None:
    doc = {
        "mode": mode,
        "config": config.to_manifest() if config else None,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "numpy": np.__version__,
        "python": platform.python_version(),
        "kernel": "numba" if _kernels.NUMBA_ENABLED else "python",
    }
    if extra:
        doc.update(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_series(path: Path, results: List[TrialResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for r in results:
            for rec in r.records:
                w.writerow([
                    r.index, rec.t, rec.n_nodes, rec.n_pt, rec.n_true_pt,
                    rec.n_false_pt, rec.n_pf, rec.n_components,
                    rec.max_component, rec.m_t, rec.height, rec.uni,
                    rec.iuni, str(rec.phi_exp), _frac_str(rec.phi_lc),
                    int(rec.extinct),
                ])


def write_summary(path: Path, summary: dict) -> None:
    path.write_text(json.dumps(summary, sort_keys=True,
                               separators=(",", ": "), indent=2) + "\n")


def write_events(path: Path, results: List[TrialResult]) -> None:
    with open(path, "w") as fh:
        for r in results:
            if r.extinct:
                fh.write(json.dumps(
                    {"trial": r.index, "event": "extinct",
                     "t": r.extinction_time},
                    separators=(",", ":"), sort_keys=True) + "\n")


def write_run(out_dir: Union[str, Path], config: RunConfig,
              results: List[TrialResult], mode: str = "simulate") -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(config, results)
    write_manifest(out / "manifest.json", config, mode)
    write_series(out / "series.csv", results)
    write_summary(out / "summary.json", summary)
    write_events(out / "events.jsonl", results)
    return summary


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over (eps, p, k) at fixed init/horizon/trials."""

    eps_values: Tuple[Fraction, ...]
    p_values: Tuple[Fraction, ...]
    k_values: Tuple[Optional[int], ...]
    init: str
    t_max: int
    trials: int
    seed: int

    @classmethod
    def make(cls, eps_values, p_values, k_values, init, t_max, trials,
             seed) -> "SweepGrid":
        from .state import as_probability
        evs = tuple(as_probability(e, "eps") for e in eps_values)
        pvs = tuple(as_probability(p, "p") for p in p_values)
        kvs = tuple(Params.make(0, 0, k).k for k in k_values)
        if not (evs and pvs and kvs):
            raise ConfigError("sweep grid must be nonempty on every axis")
        return cls(evs, pvs, kvs, init, int(t_max), int(trials), int(seed))

    def points(self) -> List[RunConfig]:
        out = []
        for idx_e, e in enumerate(self.eps_values):
            for idx_p, p in enumerate(self.p_values):
                for idx_k, k in enumerate(self.k_values):
                    point_seed = self.seed + 1_000_003 * (
                        idx_e * len(self.p_values) * len(self.k_values)
                        + idx_p * len(self.k_values) + idx_k)
                    out.append(RunConfig.make(e, p, k, self.init, self.t_max,
                                              self.trials, point_seed))
        return out


def run_sweep(grid: SweepGrid, out_dir: Union[str, Path]) -> List[dict]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for cfg in grid.points():
        results = run_trials(cfg)
        rows.append(summarize(cfg, results))
    with open(out / "phase.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "p", "k", "trials", "survived",
                    "survival_frequency", "wilson_low", "wilson_high",
                    "regime"])
        for s in rows:
            c = s["config"]
            w.writerow([c["eps"], c["p"], c["k"], s["trials"], s["survived"],
                        repr(s["survival_frequency"]),
                        repr(s["survival_wilson95"][0]),
                        repr(s["survival_wilson95"][1]),
                        s["regime"]])
    write_manifest(out / "manifest.json", None, "sweep",
                   extra={"grid": {
                       "eps_values": [_frac_str(e) for e in grid.eps_values],
                       "p_values": [_frac_str(p) for p in grid.p_values],
                       "k_values": [_k_str(k) for k in grid.k_values],
                       "init": grid.init, "t_max": grid.t_max,
                       "trials": grid.trials, "seed": grid.seed}})
    summary = {"points": rows}
    write_summary(out / "summary.json", summary)
    return rows
