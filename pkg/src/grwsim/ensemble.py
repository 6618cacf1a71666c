"""Seeded Monte Carlo orchestration over independent trajectories.

Each trajectory gets its own RNG stream derived as child(master_seed, index)
through numpy SeedSequence spawn keys, so the aggregate is a deterministic
function of (master_seed, n) regardless of scheduling or thread count.
Failed trajectories are recorded per index and excluded from aggregates —
never silently dropped.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dynamics import child_rng
from .errors import EmptyEnsembleError, ParameterError

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, total: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score 95% interval for a binomial frequency."""
    if total <= 0:
        raise ParameterError("total must be >= 1")
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2.0 * total)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / total + z * z / (4.0 * total * total)) / denom
    return (center - half, center + half)


def aggregate(digests: Sequence[Mapping]) -> dict:
    """Summary statistics over trajectory digests.

    Boolean keys become frequencies with Wilson 95% intervals; numeric keys
    become means with standard errors.  Keys are taken from the first digest.
    """
    if not digests:
        raise EmptyEnsembleError("no digests to aggregate")
    stats: dict = {"count": len(digests)}
    for key in digests[0]:
        values = [d[key] for d in digests]
        if all(isinstance(v, (bool, np.bool_)) for v in values):
            k = sum(bool(v) for v in values)
            low, high = wilson_interval(k, len(values))
            stats[key] = {
                "frequency": k / len(values),
                "successes": k,
                "ci95": [low, high],
            }
        else:
            arr = np.asarray(values, dtype=float)
            se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
            stats[key] = {"mean": float(arr.mean()), "se": se,
                          "min": float(arr.min()), "max": float(arr.max())}
    return stats


@dataclass(frozen=True)
class EnsembleManifest:
    """Reproducible record of one ensemble run."""

    master_seed: int
    n_trajectories: int
    parameter_hash: str
    digests: tuple[dict, ...]
    failures: tuple[tuple[int, str], ...]
    statistics: dict

    def to_json(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "n_trajectories": self.n_trajectories,
            "parameter_hash": self.parameter_hash,
            "n_failed": len(self.failures),
            "failures": [[i, msg] for i, msg in self.failures],
            "digests": list(self.digests),
            "statistics": self.statistics,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    def digests_to_csv(self, path) -> None:
        if not self.digests:
            return
        keys = list(self.digests[0].keys())
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index"] + keys)
            for i, d in enumerate(self.digests):
                writer.writerow([i] + [d.get(k) for k in keys])


def run_ensemble(trajectory_fn: Callable[[int, np.random.Generator], Mapping],
                 n_trajectories: int, master_seed: int,
                 parallelism_hint: int = 1,
                 parameter_hash: str = "") -> EnsembleManifest:
    """Run trajectory_fn(index, rng) for each index and aggregate the digests.

    Results are keyed by index and aggregated in index order, so the manifest
    is bitwise independent of parallelism_hint and completion order.
    """
    if n_trajectories < 1:
        raise ParameterError("n_trajectories must be >= 1")

    results: list[Mapping | None] = [None] * n_trajectories
    failures: list[tuple[int, str]] = []

    def _one(index: int):
        return trajectory_fn(index, child_rng(master_seed, index))

    if parallelism_hint > 1:
        with ThreadPoolExecutor(max_workers=parallelism_hint) as pool:
            futures = {i: pool.submit(_one, i) for i in range(n_trajectories)}
        for i in range(n_trajectories):
            try:
                results[i] = dict(futures[i].result())
            except Exception as exc:  # noqa: BLE001 - failures isolate by design
                failures.append((i, f"{type(exc).__name__}: {exc}"))
    else:
        for i in range(n_trajectories):
            try:
                results[i] = dict(_one(i))
            except Exception as exc:  # noqa: BLE001
                failures.append((i, f"{type(exc).__name__}: {exc}"))

    digests = tuple(r for r in results if r is not None)
    if not digests:
        raise EmptyEnsembleError("every trajectory failed")
    return EnsembleManifest(
        master_seed=master_seed,
        n_trajectories=n_trajectories,
        parameter_hash=parameter_hash,
        digests=digests,
        failures=tuple(failures),
        statistics=aggregate(digests),
    )
