"""Coarse-to-fine stereo matching via MRF MAP inference.

Rectified grayscale pairs are matched by minimizing, per pyramid level,

    E(D) = sum_pixels (IL(i,j) - IR(i-d, j))^2
         + sum_neighbors E_s(d, d'),

where the regularizer is truncated and edge-aware:

    R = min(m, s * |d - d'|),    E_s = R if |IL(p)-IL(p')| <= tau else R/q.

Each level solves bundles of epipolar lines as independent MRFs whose
labels are per-pixel candidate disparities, upsamples the solved map to
full resolution, and median-filters it; candidates at the next level
are a 4-wide window around the doubled previous estimate.  A bilateral
filter runs once after the final level.
"""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import imaging
from .imaging import DisparityMap
from .mrf import MarkovRandomField, energy
from .onehot import decode, encode_one_hot
from .solve import solve_chain_dp, solve_exhaustive, solve_sa

# Data cost for a candidate whose match would fall outside the right
# image: the maximum possible squared intensity difference.
OUT_OF_RANGE_COST = 1.0

# Disparity values are multiplied by this before bilateral filtering so
# the color sigma operates on the customary scaled-PGM range.
BILATERAL_VALUE_SCALE = 8.0

REGULARIZERS = ("nonlinear", "linear", "off")
SOLVERS = ("chain-dp", "sa", "exhaustive")


@dataclass
class LevelConfig:
    factor: float
    labels: int
    tau: float
    q: float
    m: float
    s: float
    median_window: int

    def validate(self):
        if self.factor not in imaging.SUPPORTED_FACTORS:
            raise ValueError(f"unsupported resolution factor {self.factor}")
        if self.labels < 2:
            raise ValueError("need at least 2 disparity labels per level")
        if self.tau < 0 or self.q <= 0 or self.s < 0 or not self.m > 0:
            raise ValueError("level regularizer parameters out of range")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ValueError("median window must be odd")


@dataclass
class SolverConfig:
    name: str = "chain-dp"
    reads: int = 500
    sweeps: int = 1000
    beta_range: tuple[float, float] | None = None
    seed: int = 0

    def validate(self):
        if self.name not in SOLVERS:
            raise ValueError(f"unknown solver {self.name!r}")
        if self.reads < 1 or self.sweeps < 1:
            raise ValueError("reads and sweeps must be positive")


@dataclass
class RectifierConfig:
    epsilon: float | None = None  # None = relative rule per instance
    t: float = 1.0

    def validate(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.t < 0:
            raise ValueError("rectifier strength t must be non-negative")


@dataclass
class StereoConfig:
    levels: list[LevelConfig]
    bundle_height: int = 1
    bilateral_diameter: int = 12
    bilateral_sigma_color: float = 75.0
    bilateral_sigma_space: float = 75.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    rectifier: RectifierConfig = field(default_factory=RectifierConfig)
    regularizer: str = "nonlinear"
    median_filtering: bool = True
    bilateral_filtering: bool = True

    def validate(self):
        if not self.levels:
            raise ValueError("config needs at least one level")
        factors = [lv.factor for lv in self.levels]
        if factors != sorted(factors) or factors[-1] != 1.0:
            raise ValueError("resolution factors must ascend to 1")
        for lv in self.levels:
            lv.validate()
        if self.bundle_height < 1:
            raise ValueError("bundle_height must be >= 1")
        if self.regularizer not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.regularizer!r}")
        self.solver.validate()
        self.rectifier.validate()
        return self


def middlebury_config() -> StereoConfig:
    """Three-level defaults tuned for the Middlebury 2001 pairs."""
    mk = LevelConfig
    return StereoConfig(
        levels=[
            mk(0.25, 6, 0.15, 10.0, 0.0015, 0.0005, 7),
            mk(0.5, 4, 0.15, 10.0, 0.0015, 0.0003, 7),
            mk(1.0, 4, 0.30, 10.0, math.inf, 0.0005, 7),
        ]
    )


def sintel_config() -> StereoConfig:
    """Six-level defaults for the larger-displacement Sintel pairs."""
    mk = LevelConfig
    return StereoConfig(
        levels=[
            mk(1 / 32, 6, 0.15, 10.0, 0.0015, 0.0005, 3),
            mk(1 / 16, 6, 0.15, 10.0, 0.0015, 0.0005, 3),
            mk(1 / 8, 6, 0.15, 10.0, 0.0015, 0.0005, 3),
            mk(1 / 4, 4, 0.15, 10.0, 0.0015, 0.0005, 3),
            mk(1 / 2, 4, 0.15, 10.0, 0.0015, 0.0003, 3),
            mk(1.0, 4, 0.30, 10.0, math.inf, 0.0005, 7),
        ]
    )


# --- config (de)serialization --------------------------------------------------


def _m_to_json(m: float):
    return "inf" if math.isinf(m) else m


def _m_from_json(v) -> float:
    if v is None or (isinstance(v, str) and v.lower() in ("inf", "infinity")):
        return math.inf
    return float(v)


def config_to_dict(cfg: StereoConfig) -> dict:
    return {
        "levels": [
            {
                "factor": lv.factor,
                "labels": lv.labels,
                "tau": lv.tau,
                "q": lv.q,
                "m": _m_to_json(lv.m),
                "s": lv.s,
                "median_window": lv.median_window,
            }
            for lv in cfg.levels
        ],
        "bundle_height": cfg.bundle_height,
        "bilateral": {
            "diameter": cfg.bilateral_diameter,
            "sigma_color": cfg.bilateral_sigma_color,
            "sigma_space": cfg.bilateral_sigma_space,
        },
        "solver": {
            "name": cfg.solver.name,
            "reads": cfg.solver.reads,
            "sweeps": cfg.solver.sweeps,
            "beta_range": list(cfg.solver.beta_range) if cfg.solver.beta_range else None,
            "seed": cfg.solver.seed,
        },
        "rectifier": {"epsilon": cfg.rectifier.epsilon, "t": cfg.rectifier.t},
        "regularizer": cfg.regularizer,
        "median_filtering": cfg.median_filtering,
        "bilateral_filtering": cfg.bilateral_filtering,
    }


def config_from_dict(data: dict) -> StereoConfig:
    levels = [
        LevelConfig(
            factor=float(lv["factor"]),
            labels=int(lv["labels"]),
            tau=float(lv["tau"]),
            q=float(lv["q"]),
            m=_m_from_json(lv["m"]),
            s=float(lv["s"]),
            median_window=int(lv.get("median_window", 7)),
        )
        for lv in data["levels"]
    ]
    bil = data.get("bilateral", {})
    sol = data.get("solver", {})
    rect = data.get("rectifier", {})
    beta = sol.get("beta_range")
    cfg = StereoConfig(
        levels=levels,
        bundle_height=int(data.get("bundle_height", 1)),
        bilateral_diameter=int(bil.get("diameter", 12)),
        bilateral_sigma_color=float(bil.get("sigma_color", 75.0)),
        bilateral_sigma_space=float(bil.get("sigma_space", 75.0)),
        solver=SolverConfig(
            name=sol.get("name", "chain-dp"),
            reads=int(sol.get("reads", 500)),
            sweeps=int(sol.get("sweeps", 1000)),
            beta_range=(float(beta[0]), float(beta[1])) if beta else None,
            seed=int(sol.get("seed", 0)),
        ),
        rectifier=RectifierConfig(
            epsilon=None if rect.get("epsilon") in (None, "relative") else float(rect["epsilon"]),
            t=float(rect.get("t", 1.0)),
        ),
        regularizer=data.get("regularizer", "nonlinear"),
        median_filtering=bool(data.get("median_filtering", True)),
        bilateral_filtering=bool(data.get("bilateral_filtering", True)),
    )
    return cfg.validate()


def load_config(path) -> StereoConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(cfg: StereoConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=1)
        fh.write("\n")


def config_hash(cfg: StereoConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


# --- energy terms ---------------------------------------------------------------


def data_term(il: np.ndarray, ir: np.ndarray, i: int, j: int, d: int) -> float:
    """Brightness-constancy cost (IL(i,j) - IR(i-d,j))^2, or the
    out-of-range penalty when i-d leaves the image."""
    src = i - d
    if src < 0 or src >= ir.shape[1]:
        return OUT_OF_RANGE_COST
    diff = il[j, i] - ir[j, src]
    return float(diff * diff)


def smoothness_term(
    il: np.ndarray,
    p: tuple[int, int],
    p2: tuple[int, int],
    d: float,
    d2: float,
    tau: float,
    q: float,
    m: float,
    s: float,
) -> float:
    """Truncated edge-aware regularizer between neighboring pixels
    ``p = (i, j)`` and ``p2``; the cost drops by ``q`` across intensity
    edges stronger than ``tau``."""
    r = min(m, s * abs(d - d2))
    if abs(il[p[1], p[0]] - il[p2[1], p2[0]]) <= tau:
        return float(r)
    return float(r / q)


def _pairwise_matrix(
    cand_a: np.ndarray,
    cand_b: np.ndarray,
    intensity_step: float,
    level: LevelConfig,
    regularizer: str,
) -> np.ndarray:
    dd = np.abs(cand_a[:, None].astype(np.float64) - cand_b[None, :])
    if regularizer == "off":
        return np.zeros_like(dd)
    if regularizer == "linear":
        return level.s * dd
    r = np.minimum(level.m, level.s * dd)
    if intensity_step <= level.tau:
        return r
    return r / level.q


# --- candidates ------------------------------------------------------------------


def candidates_at_level(
    level_index: int,
    prev: DisparityMap | None,
    cfg: StereoConfig,
    width: int,
    height: int,
) -> np.ndarray:
    """Per-pixel candidate disparities in current-level units, shape
    ``(height, width, labels)``.

    The first level considers ``0..labels-1`` everywhere.  Later levels
    center an asymmetric window ``{2d-1, 2d, 2d+1, 2d+2, ...}`` on the
    doubled previous estimate and shift it inward so all candidates stay
    in ``[0, width-1]``.
    """
    level = cfg.levels[level_index]
    dr = level.labels
    if width < dr:
        raise ValueError(f"level width {width} cannot host {dr} distinct candidates")
    if level_index == 0:
        if prev is not None:
            raise ValueError("first level takes no previous estimate")
        return np.broadcast_to(
            np.arange(dr, dtype=np.int64), (height, width, dr)
        ).copy()
    if prev is None:
        raise ValueError("later levels need the previous level's estimate")

    factor = level.factor
    rows = np.minimum((np.arange(height) / factor).astype(np.int64), prev.height - 1)
    cols = np.minimum((np.arange(width) / factor).astype(np.int64), prev.width - 1)
    sampled = prev.values[np.ix_(rows, cols)]
    # full-resolution units -> current-level units; this doubles the
    # previous level's integer estimate
    base = np.rint(sampled * factor).astype(np.int64)
    lo = np.clip(base - 1, 0, (width - 1) - (dr - 1))
    return lo[..., None] + np.arange(dr, dtype=np.int64)


# --- bundle construction -----------------------------------------------------------


def build_bundle_mrf(
    il: np.ndarray,
    ir: np.ndarray,
    rows: tuple[int, int],
    cand: np.ndarray,
    level: LevelConfig,
    regularizer: str = "nonlinear",
) -> MarkovRandomField:
    """MRF over one bundle of epipolar lines.

    Vertex ``(j - row0) * width + i`` is pixel ``(i, j)``; its labels are
    the pixel's candidate disparities.  Edges connect 4-neighbors inside
    the bundle (all horizontal pairs row by row, then vertical pairs),
    so a single-row bundle is a path.
    """
    row0, row1 = rows
    h, w = il.shape
    if not (0 <= row0 < row1 <= h):
        raise ValueError(f"row range {rows} outside image of height {h}")
    nrows = row1 - row0
    dr = cand.shape[2]

    def vid(j, i):
        return (j - row0) * w + i

    unary = []
    for j in range(row0, row1):
        for i in range(w):
            costs = np.empty(dr, dtype=np.float64)
            for k in range(dr):
                costs[k] = data_term(il, ir, i, j, int(cand[j, i, k]))
            unary.append(costs)

    edges = []
    pairwise = []
    for j in range(row0, row1):
        for i in range(w - 1):
            edges.append((vid(j, i), vid(j, i + 1)))
            pairwise.append(
                _pairwise_matrix(
                    cand[j, i], cand[j, i + 1], abs(il[j, i] - il[j, i + 1]),
                    level, regularizer,
                )
            )
    for j in range(row0, row1 - 1):
        for i in range(w):
            edges.append((vid(j, i), vid(j + 1, i)))
            pairwise.append(
                _pairwise_matrix(
                    cand[j, i], cand[j + 1, i], abs(il[j, i] - il[j + 1, i]),
                    level, regularizer,
                )
            )

    return MarkovRandomField([dr] * (nrows * w), unary, edges, pairwise)


def _bundle_seed(base_seed: int, level_index: int, bundle_index: int) -> int:
    return (base_seed * 1_000_003 + level_index * 8_191 + bundle_index * 131) & 0x7FFFFFFF


def _solve_bundle(
    bundle_mrf: MarkovRandomField,
    cfg: StereoConfig,
    level_index: int,
    bundle_index: int,
) -> tuple[np.ndarray, float]:
    """Labelling of one bundle plus its MRF energy."""
    name = cfg.solver.name
    if name == "chain-dp":
        return solve_chain_dp(bundle_mrf)
    q = encode_one_hot(bundle_mrf, epsilon=cfg.rectifier.epsilon, t=cfg.rectifier.t)
    if name == "exhaustive":
        res = solve_exhaustive(q)
    else:
        res = solve_sa(
            q,
            reads=cfg.solver.reads,
            sweeps=cfg.solver.sweeps,
            beta_range=cfg.solver.beta_range,
            seed=_bundle_seed(cfg.solver.seed, level_index, bundle_index),
        )
    lab, _ = decode(q, res.best_x)
    return lab, energy(bundle_mrf, lab)


@dataclass
class StereoResult:
    disparity: DisparityMap
    bundle_energies: list[list[float]]  # per level, per bundle


def stereo_match(
    il: np.ndarray, ir: np.ndarray, cfg: StereoConfig, jobs: int = 1
) -> StereoResult:
    """Full coarse-to-fine pipeline; see the module docstring.

    Bundles within one level are independent, so results do not depend
    on ``jobs`` or scheduling order.  The returned map is in
    full-resolution pixels and full-resolution disparity units.
    """
    il = np.asarray(il, dtype=np.float64)
    ir = np.asarray(ir, dtype=np.float64)
    if il.shape != ir.shape or il.ndim != 2:
        raise ValueError("left and right images must be 2-d and the same shape")
    cfg.validate()
    full_h, full_w = il.shape

    current: DisparityMap | None = None
    all_energies: list[list[float]] = []
    for level_index, level in enumerate(cfg.levels):
        ilr = imaging.resize_area(il, level.factor)
        irr = imaging.resize_area(ir, level.factor)
        lh, lw = ilr.shape
        cand = candidates_at_level(level_index, current, cfg, lw, lh)

        bundles = [
            (r0, min(r0 + cfg.bundle_height, lh))
            for r0 in range(0, lh, cfg.bundle_height)
        ]

        def solve_one(args):
            bundle_index, rows = args
            try:
                bmrf = build_bundle_mrf(ilr, irr, rows, cand, level, cfg.regularizer)
                lab, e = _solve_bundle(bmrf, cfg, level_index, bundle_index)
            except Exception as exc:
                raise type(exc)(
                    f"level {level_index} bundle {bundle_index}: {exc}"
                ) from exc
            return bundle_index, rows, lab, e

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                solved = list(pool.map(solve_one, enumerate(bundles)))
        else:
            solved = [solve_one(ab) for ab in enumerate(bundles)]

        level_vals = np.zeros((lh, lw), dtype=np.float64)
        energies = [0.0] * len(bundles)
        for bundle_index, (row0, row1), lab, e in solved:
            energies[bundle_index] = e
            block = lab.reshape(row1 - row0, lw)
            for jj in range(row0, row1):
                level_vals[jj] = cand[jj, np.arange(lw), block[jj - row0]]
        all_energies.append(energies)

        full_vals = imaging.upscale_nearest(level_vals, full_h, full_w, level.factor)
        current = DisparityMap.full(full_vals / level.factor)
        if cfg.median_filtering:
            current = imaging.median_filter(current, level.median_window)

    if cfg.bilateral_filtering:
        scaled = DisparityMap(current.values * BILATERAL_VALUE_SCALE, current.valid)
        filtered = imaging.bilateral_filter(
            scaled,
            cfg.bilateral_diameter,
            cfg.bilateral_sigma_color,
            cfg.bilateral_sigma_space,
        )
        current = DisparityMap(filtered.values / BILATERAL_VALUE_SCALE, filtered.valid)

    return StereoResult(disparity=current, bundle_energies=all_energies)


def with_overrides(cfg: StereoConfig, **kwargs) -> StereoConfig:
    """Copy of the config with top-level fields replaced."""
    return replace(cfg, **kwargs)
