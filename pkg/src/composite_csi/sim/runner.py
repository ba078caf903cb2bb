"""Deterministic, trial-parallel experiment runner."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..rng import substream
from .config import validate
from .scenarios import SIMULATORS, outer_points, theory_rows

N_BATCHES = 20


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    keys: tuple
    metric: str
    value: float
    n: int
    stderr: float

    def key_dict(self):
        return dict(self.keys)


def _tasks(cfg):
    tasks = []
    n_drops = math.ceil(cfg.n_trials / cfg.trials_per_drop)
    for pi, point in enumerate(outer_points(cfg)):
        for di in range(n_drops):
            n = min(cfg.trials_per_drop, cfg.n_trials - di * cfg.trials_per_drop)
            tasks.append((pi, di, n))
    return tasks


def _run_task(args):
    cfg, (pi, di, n) = args
    point = outer_points(cfg)[pi]
    rng = substream(cfg.seed, pi, di)
    acc = SIMULATORS[cfg.scenario](cfg, point, rng, n)
    return pi, acc.items


def _ratio(num, den):
    total = den.sum()
    return num.sum() / total if total > 0 else float("nan")


def _reduce(num, den, scale):
    value = _ratio(num, den) * scale
    n_b = min(N_BATCHES, num.size)
    if n_b < 2:
        return value, 0.0
    means = np.array(
        [_ratio(a, b) * scale for a, b in zip(np.array_split(num, n_b), np.array_split(den, n_b))]
    )
    means = means[np.isfinite(means)]
    if means.size < 2:
        return value, 0.0
    return value, float(np.std(means, ddof=1) / np.sqrt(means.size))


def run_experiment(cfg, workers=None):
    """Run ``cfg`` and return its result rows.

    Output is bitwise identical for any worker count: every drop draws from
    its own ``(seed, point, drop)`` substream and drops are reduced in order.
    """
    validate(cfg)
    if cfg.scenario == "theory_mse_surface":
        return [ResultRow(cfg.scenario, tuple(k.items()), metric, v, n, se)
                for k, metric, v, n, se in theory_rows(cfg)]

    workers = cfg.workers if workers is None else workers
    tasks = _tasks(cfg)
    jobs = [(cfg, t) for t in tasks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, jobs, chunksize=1))
    else:
        results = [_run_task(j) for j in jobs]

    points = outer_points(cfg)
    merged = [dict() for _ in points]
    for pi, items in results:
        for key, (num, den, scale) in items.items():
            slot = merged[pi].setdefault(key, ([], [], scale))
            slot[0].append(num)
            slot[1].append(den)

    rows = []
    for point, items in zip(points, merged):
        for (metric, inner), (nums, dens, scale) in items.items():
            num, den = np.concatenate(nums), np.concatenate(dens)
            value, se = _reduce(num, den, scale)
            keys = tuple(point.items()) + inner
            rows.append(ResultRow(cfg.scenario, keys, metric, float(value), int(num.size), se))
    return rows
