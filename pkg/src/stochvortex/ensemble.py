"""Ensembles of vortex runs, their statistics and phase-space histograms.

Members are integrated in fixed-size chunks.  The chunking never depends on
the number of workers, so a run with one worker and a run with many produce
the same bytes.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .fields import StreamParams
from .geometry import DiagnosticsSeries, VortexState, equilateral_state
from .integrators import BatchResult, MethodSpec, get_method, integrate_batch
from .noise import DrivingPath, brownian, fbm, pure_area

CHUNK = 50


@dataclass
class EnsembleConfig:
    members: int = 100
    seed: int = 0
    T: float = 40.0
    dt: float = 1.0 / 250.0
    method: MethodSpec = field(default_factory=lambda: get_method("Stratonovich"))
    params: StreamParams = field(default_factory=StreamParams)
    initial: VortexState = field(default_factory=equilateral_state)
    common_path: bool = True
    record_every: int = 1
    workers: int = 1

    def __post_init__(self):
        if int(self.members) != self.members or self.members < 1:
            raise ConfigError("members must be a positive integer")
        if not self.dt > 0 or not self.T > 0:
            raise ConfigError("T and dt must be positive")
        if abs(self.T / self.dt - round(self.T / self.dt)) > 1e-9 * max(1.0, self.T / self.dt):
            raise ConfigError("T / dt must be an integer")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


def member_seed(cfg: EnsembleConfig) -> int:
    """Seed used for member streams; salted per method when paths are not shared."""
    if cfg.common_path:
        return int(cfg.seed)
    ss = np.random.SeedSequence([int(cfg.seed), int(cfg.method.number)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def member_path(cfg: EnsembleConfig, k: int) -> DrivingPath:
    m, steps = cfg.params.m, cfg.steps
    if cfg.method.kind == "pure_area":
        return pure_area(steps, cfg.dt, cfg.params.s)
    if cfg.method.kind == "deterministic":
        return DrivingPath(dt=cfg.dt, increments=np.zeros((steps, m)), member=k)
    seed = member_seed(cfg)
    if cfg.method.kind == "fbm":
        return fbm(seed, steps, m, cfg.dt, cfg.method.hurst, member=k)
    return brownian(seed, steps, m, cfg.dt, member=k)


def _run_chunk(cfg: EnsembleConfig, lo: int, hi: int) -> BatchResult:
    paths = [member_path(cfg, k) for k in range(lo, hi)]
    return integrate_batch(cfg.method, cfg.initial, cfg.params, paths, cfg.record_every)


@dataclass
class EnsembleResult:
    t: np.ndarray
    positions: np.ndarray
    series: DiagnosticsSeries
    status: list
    blowup_step: np.ndarray
    method: str

    @property
    def all_ok(self) -> bool:
        return bool((self.blowup_step < 0).all())


def run_ensemble(cfg: EnsembleConfig) -> EnsembleResult:
    bounds = [(lo, min(cfg.members, lo + CHUNK)) for lo in range(0, cfg.members, CHUNK)]
    if cfg.workers > 1 and len(bounds) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_run_chunk, cfg, lo, hi) for lo, hi in bounds]
            parts = [f.result() for f in futures]
    else:
        parts = [_run_chunk(cfg, lo, hi) for lo, hi in bounds]
    # fold in member order whatever the completion order
    pos = np.concatenate([r.positions for r in parts], axis=0)
    W2 = np.concatenate([r.W2 for r in parts], axis=0)
    blown = np.concatenate([r.blowup_step for r in parts])
    status = [s for r in parts for s in r.status]
    merged = BatchResult(t=parts[0].t, positions=pos, strengths=parts[0].strengths,
                         W2=W2, status=status, blowup_step=blown, params=cfg.params)
    return EnsembleResult(t=merged.t, positions=pos, series=merged.diagnostics(),
                          status=status, blowup_step=blown, method=cfg.method.name)


# -- statistics -------------------------------------------------------------

def envelope(series) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise mean, sample standard deviation (n - 1) and twice it.

    ``series`` is ``(members, times)``; NaN rows (blown members) are skipped.
    A single member has zero spread by convention.
    """
    x = np.atleast_2d(np.asarray(series, dtype=float))
    ok = np.isfinite(x).all(axis=1)
    x = x[ok] if ok.any() else x
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.zeros(x.shape[1])
    return mean, std, 2.0 * std


@dataclass
class HistogramGrid:
    nx: int = 1024
    ny: int = 1024
    bounds: Optional[tuple] = None
    counts: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None
    overflow: int = 0
    total: int = 0

    @property
    def cell_area(self) -> float:
        x0, x1, y0, y1 = self.bounds
        return (x1 - x0) * (y1 - y0) / (self.nx * self.ny)

    def centers(self):
        x0, x1, y0, y1 = self.bounds
        xc = x0 + (np.arange(self.nx) + 0.5) * (x1 - x0) / self.nx
        yc = y0 + (np.arange(self.ny) + 0.5) * (y1 - y0) / self.ny
        return xc, yc


def auto_bounds(points: np.ndarray, pad: float = 0.05) -> tuple:
    pts = points[np.isfinite(points).all(axis=1)]
    if pts.size == 0:
        return (-1.0, 1.0, -1.0, 1.0)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = hi - lo
    # give a degenerate axis unit width so the cell area stays positive
    width = np.where(span > 0, span, 1.0)
    lo, hi = lo - pad * width, hi + pad * width
    return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


def histogram(positions, grid: Optional[HistogramGrid] = None) -> HistogramGrid:
    """Bin every recorded vortex position ``(..., 2)`` once.

    Density is ``counts / (total * cell_area)``; samples outside the bounds or
    non-finite count towards ``overflow``.
    """
    grid = grid or HistogramGrid()
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    bounds = grid.bounds or auto_bounds(pts)
    x0, x1, y0, y1 = bounds
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("histogram bounds must have positive extent")
    finite = np.isfinite(pts).all(axis=1)
    counts, _, _ = np.histogram2d(pts[finite, 0], pts[finite, 1], bins=(grid.nx, grid.ny),
                                  range=((x0, x1), (y0, y1)))
    counts = counts.astype(np.int64)
    total = pts.shape[0]
    out = HistogramGrid(nx=grid.nx, ny=grid.ny, bounds=bounds, counts=counts,
                        overflow=int(total - counts.sum()), total=int(total))
    out.density = counts / (total * out.cell_area) if total else np.zeros(counts.shape)
    return out


def pathwise_identities(series: DiagnosticsSeries, W2, params: StreamParams,
                        n: int) -> dict:
    """Residuals of the pathwise laws of a Stratonovich run with equal strengths.

    The translation field ``(-b, a)`` moves ``T_x`` by ``-n b W2`` and ``T_y``
    by ``+n a W2``, and ``R`` by ``int n (a y_c - b x_c) o dW2``; ``H`` is
    unchanged.  The Stratonovich integral uses midpoint sums on the recorded
    grid.  ``Tx_literal``/``Ty_literal`` hold the opposite-sign convention
    ``T_x - T_x(0) - n b W2`` and ``T_y - T_y(0) + n a W2`` for comparison.
    """
    W2 = np.atleast_2d(np.asarray(W2, dtype=float))
    a, b = params.a, params.b
    Tx, Ty = np.atleast_2d(series.T_x), np.atleast_2d(series.T_y)
    H, R = np.atleast_2d(series.H), np.atleast_2d(series.R)
    xc = series.x_c.reshape(Tx.shape + (2,))
    dTx, dTy = Tx - Tx[:, :1], Ty - Ty[:, :1]
    g = n * (a * xc[..., 1] - b * xc[..., 0])
    integral = np.zeros_like(W2)
    integral[:, 1:] = np.cumsum(0.5 * (g[:, 1:] + g[:, :-1]) * np.diff(W2, axis=1), axis=1)
    return {
        "t": np.asarray(series.t),
        "Tx": dTx + n * b * W2,
        "Ty": dTy - n * a * W2,
        "H": H - H[:, :1],
        "R": R - R[:, :1] - integral,
        "Tx_literal": dTx - n * b * W2,
        "Ty_literal": dTy + n * a * W2,
    }


# -- output -------------------------------------------------------------------

def write_diagnostics_csv(filename, series: DiagnosticsSeries, members=None) -> None:
    area = np.atleast_2d(series.area)
    ids = range(area.shape[0]) if members is None else members
    cols = [np.atleast_2d(v) for v in (series.area, series.angle, series.T_x,
                                        series.T_y, series.R, series.H)]
    xc = series.x_c.reshape(area.shape + (2,))
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["member", "t", "area", "angle", "Tx", "Ty", "R", "H", "xc_x", "xc_y"])
        for row, k in enumerate(ids):
            for i, t in enumerate(series.t):
                w.writerow([k, repr(float(t))] + [repr(float(c[row, i])) for c in cols]
                           + [repr(float(xc[row, i, 0])), repr(float(xc[row, i, 1]))])


def write_envelope_csv(filename, t, mean, std, std2) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "mean", "std", "std2"])
        for row in zip(t, mean, std, std2):
            w.writerow([repr(float(v)) for v in row])


def write_histogram_csv(filename, grid: HistogramGrid) -> None:
    """Nonzero cells only; the bounds and totals go in a leading comment."""
    xc, yc = grid.centers()
    ii, jj = np.nonzero(grid.counts)
    with open(filename, "w", newline="") as fh:
        fh.write(f"# bounds={list(grid.bounds)} nx={grid.nx} ny={grid.ny} "
                 f"total={grid.total} overflow={grid.overflow}\n")
        w = csv.writer(fh)
        w.writerow(["i", "j", "x_center", "y_center", "count", "density"])
        for i, j in zip(ii, jj):
            w.writerow([int(i), int(j), repr(float(xc[i])), repr(float(yc[j])),
                        int(grid.counts[i, j]), repr(float(grid.density[i, j]))])


def summary(result: EnsembleResult) -> dict:
    s = result.series
    return {
        "method": result.method,
        "members": int(s.area.shape[0]),
        "area_min": float(np.nanmin(s.area)),
        "area_max": float(np.nanmax(s.area)),
        "angle_min": float(np.nanmin(s.angle)),
        "angle_max": float(np.nanmax(s.angle)),
        "blown_members": [k for k, b in enumerate(result.blowup_step) if b >= 0],
    }


def write_json(filename, obj) -> None:
    with open(filename, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
