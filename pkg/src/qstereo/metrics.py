"""Disparity metrics against ground truth and QUBO problem-graph statistics."""

from __future__ import annotations

import json

import numpy as np

from .errors import UndefinedStatisticError
from .imaging import DisparityMap
from .onehot import QuboInstance


def rmse(est: DisparityMap, gt: DisparityMap) -> float:
    """Root mean squared disparity error over the ground truth's valid mask."""
    if est.values.shape != gt.values.shape:
        raise ValueError("estimate and ground truth dimensions differ")
    mask = gt.valid
    n = int(mask.sum())
    if n == 0:
        raise UndefinedStatisticError("ground truth has no valid pixels")
    diff = est.values[mask] - gt.values[mask]
    return float(np.sqrt(np.mean(diff * diff)))


def bpp(est: DisparityMap, gt: DisparityMap, delta: float = 1.0) -> float:
    """Percentage of valid pixels with |est - gt| strictly above delta."""
    if est.values.shape != gt.values.shape:
        raise ValueError("estimate and ground truth dimensions differ")
    mask = gt.valid
    n = int(mask.sum())
    if n == 0:
        raise UndefinedStatisticError("ground truth has no valid pixels")
    bad = np.abs(est.values[mask] - gt.values[mask]) > delta
    return float(100.0 * bad.sum() / n)


def graph_stats(q: QuboInstance) -> dict:
    """Problem-graph summary: variables that appear in at least one stored
    entry, distinct coupler pairs, degree histogram, and edge density."""
    nodes = set()
    pairs = set()
    degree: dict[int, int] = {}
    for i, j in q.entries:
        nodes.add(i)
        nodes.add(j)
        if i != j:
            pairs.add((i, j))
    for i, j in pairs:
        degree[i] = degree.get(i, 0) + 1
        degree[j] = degree.get(j, 0) + 1
    hist: dict[int, int] = {}
    for v in nodes:
        d = degree.get(v, 0)
        hist[d] = hist.get(d, 0) + 1
    n = len(nodes)
    density = 2.0 * len(pairs) / (n * (n - 1)) if n > 1 else 0.0
    return {
        "nodes": n,
        "edges": len(pairs),
        "degree_histogram": dict(sorted(hist.items())),
        "density": density,
    }


def metrics_record(
    rmse_value: float,
    bpp_value: float,
    n_valid: int,
    config_hash: str,
    solver: str,
    elapsed_ms: float | None = None,
) -> dict:
    return {
        "rmse": rmse_value,
        "bpp": bpp_value,
        "n_valid": n_valid,
        "config_hash": config_hash,
        "solver": solver,
        "elapsed_ms": elapsed_ms,
    }


def dump_metrics(record: dict) -> str:
    """Canonical JSON text: sorted keys, repr floats, trailing newline.
    Identical inputs serialize byte-identically."""
    return json.dumps(record, sort_keys=True, indent=1) + "\n"
