"""Shared generators and dataset discovery for the test suite."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from qstereo.mrf import MarkovRandomField


def mixed_label_mrf(
    seed: int,
    max_label_sum: int = 20,
    edge_prob: float = 0.6,
    cost_range: tuple[float, float] = (-1.0, 1.0),
) -> MarkovRandomField:
    """Random MRF with per-vertex label counts and mixed-sign costs,
    sized so one-hot exhaustion stays tractable."""
    rng = np.random.default_rng(seed)
    nv = int(rng.integers(2, 6))
    counts = []
    remaining = max_label_sum
    for v in range(nv):
        hi = min(4, remaining - 2 * (nv - v - 1))
        if hi < 2:
            break
        counts.append(int(rng.integers(2, hi + 1)))
        remaining -= counts[-1]
    nv = len(counts)
    lo, hi = cost_range
    unary = [rng.uniform(lo, hi, size=c) for c in counts]
    edges = []
    pairwise = []
    for p in range(nv):
        for q in range(p + 1, nv):
            if rng.random() < edge_prob:
                edges.append((p, q))
                pairwise.append(rng.uniform(lo, hi, size=(counts[p], counts[q])))
    return MarkovRandomField(counts, unary, edges, pairwise)


def smooth_rows(a: np.ndarray, k: int = 9) -> np.ndarray:
    ker = np.ones(k) / k
    return np.apply_along_axis(lambda r: np.convolve(r, ker, mode="same"), 1, a)


def shifted_pair(
    seed: int, width: int, height: int, shift: int
) -> tuple[np.ndarray, np.ndarray]:
    """Textured pair with uniform true disparity ``shift``:
    IL(i) == IR(i - shift) wherever i - shift >= 0."""
    rng = np.random.default_rng(seed)
    base = smooth_rows(rng.random((height, width + shift)), k=5)
    return base[:, :width].copy(), base[:, shift:].copy()


# --- Middlebury 2001 discovery -------------------------------------------------
#
# The reproduction criteria need the real dataset, which is not
# redistributable here.  Place (or symlink) the four pairs under
# data/middlebury2001/<name>/ with recognizable file names, or point
# QSTEREO_DATA at such a directory; tests skip when absent.

MIDDLEBURY_PAIRS = {
    "tsukuba": {"gt_scale": 16.0, "rmse": 1.53},
    "bull": {"gt_scale": 8.0, "rmse": 0.58},
    "sawtooth": {"gt_scale": 8.0, "rmse": 1.89},
    "venus": {"gt_scale": 8.0, "rmse": 0.96},
}

_LEFT_NAMES = ["left.ppm", "left.pgm", "im2.ppm", "im2.pgm", "scene1.row3.col3.ppm"]
_RIGHT_NAMES = ["right.ppm", "right.pgm", "im6.ppm", "im6.pgm", "scene1.row3.col4.ppm"]
_GT_NAMES = ["gt.pgm", "disp2.pgm", "truedisp.row3.col3.pgm", "truedisp.pgm"]


def middlebury_root() -> Path | None:
    candidates = []
    if os.environ.get("QSTEREO_DATA"):
        candidates.append(Path(os.environ["QSTEREO_DATA"]))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "middlebury2001")
    for c in candidates:
        if c.is_dir():
            return c
    return None


def _find(directory: Path, names: list[str]) -> Path | None:
    for name in names:
        p = directory / name
        if p.is_file():
            return p
    return None


def middlebury_pair_paths(name: str):
    root = middlebury_root()
    if root is None:
        return None
    d = root / name
    if not d.is_dir():
        return None
    left = _find(d, _LEFT_NAMES)
    right = _find(d, _RIGHT_NAMES)
    gt = _find(d, _GT_NAMES)
    if left is None or right is None or gt is None:
        return None
    return left, right, gt


def require_middlebury(name: str):
    paths = middlebury_pair_paths(name)
    if paths is None:
        pytest.skip(
            f"Middlebury 2001 pair {name!r} not found; place it under "
            "data/middlebury2001/ or set QSTEREO_DATA (see README)"
        )
    return paths
