"""Driving paths: Brownian increments, Levy areas, fractional noise, pure area.

Random streams are derived from ``SeedSequence(seed, spawn_key=(member, channel))``
so member ``k`` of an ensemble sees the same numbers whichever process runs it
and in whatever order.  Channels:

    0  Brownian increments
    1  Levy areas
    2  fractional Gaussian noise
    3  fast Ornstein-Uhlenbeck process (homogenisation)

Within a channel draws are consumed step by step in a fixed layout, so the
result does not depend on the chunk size used to generate it.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, EmbeddingError

CH_INCREMENTS, CH_LEVY, CH_FBM, CH_OU = 0, 1, 2, 3


def stream(seed: int, member: int = 0, channel: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(member), int(channel)))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class DrivingPath:
    """Per-step increments ``(steps, m)`` with optional areas ``(steps, m, m)``."""

    dt: float
    increments: np.ndarray
    areas: Optional[np.ndarray] = None
    seed: int = 0
    member: int = 0
    hurst: Optional[float] = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        inc = np.array(self.increments, dtype=float)
        if inc.ndim != 2:
            raise DimensionError("increments must be a (steps, m) array")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        if self.areas is not None:
            ar = np.array(self.areas, dtype=float)
            if ar.shape != (inc.shape[0], inc.shape[1], inc.shape[1]):
                raise DimensionError(f"areas shape {ar.shape} does not match increments")
            if not np.array_equal(ar, -np.swapaxes(ar, 1, 2)):
                raise ConfigError("area matrices must be exactly antisymmetric")
            ar.setflags(write=False)
            object.__setattr__(self, "areas", ar)

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    @property
    def m(self) -> int:
        return self.increments.shape[1]

    def cumulative(self) -> np.ndarray:
        """``W`` at the grid points ``0, dt, ..., steps dt``, shape ``(steps+1, m)``."""
        out = np.zeros((self.steps + 1, self.m))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out


def _check(steps, m, dt):
    if steps < 1 or m < 1:
        raise ConfigError("steps and m must be at least 1")
    if not dt > 0:
        raise ConfigError("dt must be positive")


def brownian(seed: int, steps: int, m: int, dt: float, member: int = 0) -> DrivingPath:
    _check(steps, m, dt)
    rng = stream(seed, member, CH_INCREMENTS)
    inc = rng.standard_normal((steps, m)) * np.sqrt(dt)
    return DrivingPath(dt=dt, increments=inc, seed=seed, member=member)


# -- Levy area ----------------------------------------------------------------

def _tail(K: int) -> float:
    """``sum_{r>K} 1/(2 pi^2 r^2)``, the bridge variance left out by truncation."""
    r = np.arange(1, K + 1, dtype=float)
    return max(1.0 / 12.0 - (1.0 / r ** 2).sum() / (2.0 * np.pi ** 2), 0.0)


def _areas_from_normals(z, dW, dt, K):
    """Areas for a block of steps from standard normals.

    ``z`` has shape ``(N, 2*m*K + m)``: the ``a`` coefficients, the ``b``
    coefficients, then one normal per component for the omitted tail of the
    chord coefficient ``a_0``.
    """
    N, m = dW.shape
    a = z[:, :m * K].reshape(N, m, K)
    b = z[:, m * K:2 * m * K].reshape(N, m, K)
    mu = z[:, 2 * m * K:]
    inv_r = 1.0 / np.arange(1, K + 1, dtype=float)
    scale = np.sqrt(dt / (2.0 * np.pi ** 2))
    # a_{j,0} = -2 sum_r a_{j,r} - 2 sqrt(dt rho_K) mu_j
    a0 = -2.0 * scale * (a * inv_r).sum(axis=-1) - 2.0 * np.sqrt(dt * _tail(K)) * mu
    chord = 0.5 * (a0[:, :, None] * dW[:, None, :] - dW[:, :, None] * a0[:, None, :])
    # pi r a_r b_r with the r-scalings folded in: dt/(2 pi) sum_r (1/r) a b
    ab = np.einsum("nik,njk,k->nij", a, b, inv_r)
    area = chord + (dt / (2.0 * np.pi)) * (ab - np.swapaxes(ab, 1, 2))
    return 0.5 * (area - np.swapaxes(area, 1, 2))


def levy_area(rng: np.random.Generator, dW, dt: float, K: int) -> np.ndarray:
    """One ``m x m`` antisymmetric Levy-area matrix conditional on ``dW``.

    Truncated Fourier expansion of the Brownian bridge with ``K`` modes.  The
    chord coefficient ``a_0`` is sampled with its exact variance ``dt/3``; only
    the double sum is truncated, so the mean-square error is below
    ``dt**2 / (2 pi**2 K)``.
    """
    dW = np.asarray(dW, dtype=float).reshape(1, -1)
    if K < 1:
        raise ConfigError("K must be at least 1")
    m = dW.shape[1]
    z = rng.standard_normal((1, 2 * m * K + m))
    return _areas_from_normals(z, dW, dt, K)[0]


def levy_areas(rng: np.random.Generator, dW, dt: float, K: int,
               chunk: Optional[int] = None) -> np.ndarray:
    """Areas for every row of ``dW`` (shape ``(steps, m)``), drawn in step order."""
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    if K < 1:
        raise ConfigError("K must be at least 1")
    N, m = dW.shape
    width = 2 * m * K + m
    if chunk is None:
        chunk = max(1, 2_000_000 // width)
    out = np.empty((N, m, m))
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        z = rng.standard_normal((hi - lo, width))
        out[lo:hi] = _areas_from_normals(z, dW[lo:hi], dt, K)
    return out


def levy_area_refinement(rng: np.random.Generator, dW, dt: float, K: int,
                         K_fine: int) -> tuple[np.ndarray, np.ndarray]:
    """Coupled samples ``(A^K, A^K_fine)`` from shared Fourier coefficients.

    The coarse chord tail is the sum of the fine modes above ``K`` plus the fine
    tail, so both share one ``a_0`` and differ only by the extra double-sum modes.
    """
    dW = np.atleast_2d(np.asarray(dW, dtype=float))
    if not 1 <= K <= K_fine:
        raise ConfigError("need 1 <= K <= K_fine")
    N, m = dW.shape
    z = rng.standard_normal((N, 2 * m * K_fine + m))
    fine = _areas_from_normals(z, dW, dt, K_fine)
    a = z[:, :m * K_fine].reshape(N, m, K_fine)
    b = z[:, m * K_fine:2 * m * K_fine].reshape(N, m, K_fine)
    inv_r = 1.0 / np.arange(1, K_fine + 1, dtype=float)
    hi = slice(K, K_fine)
    ab = np.einsum("nik,njk,k->nij", a[..., hi], b[..., hi], inv_r[hi])
    coarse = fine - (dt / (2.0 * np.pi)) * (ab - np.swapaxes(ab, 1, 2))
    coarse = 0.5 * (coarse - np.swapaxes(coarse, 1, 2))
    return coarse, fine


def fine_mesh_area(rng: np.random.Generator, samples: int, dt: float,
                   substeps: int = 10_000, batch: int = 500):
    """Reference ``(dW, A_12)`` by left-point iterated sums on a fine grid.

    ``A = 1/2 sum (W^1 dW^2 - W^2 dW^1)``, with the discrete Ito and
    Stratonovich sums agreeing for this antisymmetric combination.
    """
    h = dt / substeps
    dWs, As = [], []
    for lo in range(0, samples, batch):
        nb = min(batch, samples - lo)
        inc = rng.standard_normal((nb, substeps, 2)) * np.sqrt(h)
        W = np.cumsum(inc, axis=1) - inc
        As.append(0.5 * (W[..., 0] * inc[..., 1] - W[..., 1] * inc[..., 0]).sum(axis=1))
        dWs.append(inc.sum(axis=1))
    return np.concatenate(dWs), np.concatenate(As)


def with_levy_areas(path: DrivingPath, K: int) -> DrivingPath:
    """Attach areas drawn from the path's own Levy channel."""
    rng = stream(path.seed, path.member, CH_LEVY)
    areas = levy_areas(rng, path.increments, path.dt, K)
    return DrivingPath(dt=path.dt, increments=path.increments, areas=areas,
                       seed=path.seed, member=path.member, hurst=path.hurst)


# -- fractional Gaussian noise ----------------------------------------------

def fgn_autocovariance(k, H: float) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=float))
    return 0.5 * ((k + 1) ** (2 * H) + np.abs(k - 1) ** (2 * H) - 2 * k ** (2 * H))


def circulant_sample(rng: np.random.Generator, gam, components: int = 1,
                     tol: float = 1e-10) -> np.ndarray:
    """Stationary Gaussian samples with autocovariance ``gam[0..N]``.

    Returns ``(N, components)``.  The circulant of size ``2N`` must be
    nonnegative definite; otherwise :class:`EmbeddingError` is raised rather
    than clipping to an approximate law.
    """
    gam = np.asarray(gam, dtype=float)
    N = gam.size - 1
    if N < 1:
        raise ConfigError("need at least two autocovariance values")
    c = np.concatenate([gam, gam[-2:0:-1]])
    lam = np.fft.fft(c).real
    if lam.min() < -tol * np.abs(lam).max():
        raise EmbeddingError(
            f"circulant embedding not nonnegative definite (min eigenvalue {lam.min():.3e})")
    w = np.sqrt(np.clip(lam, 0.0, None) / (2 * N))
    z = rng.standard_normal((components, 2, 2 * N))
    x = np.fft.fft(w * (z[:, 0] + 1j * z[:, 1]), axis=-1).real
    return x[:, :N].T.copy()


def davies_harte(rng: np.random.Generator, steps: int, H: float, components: int = 1,
                 tol: float = 1e-10) -> np.ndarray:
    """Unit-step fractional Gaussian noise, shape ``(steps, components)``.

    Circulant embedding of size ``2N`` with ``N`` the next power of two at or
    above ``steps``; the surplus is discarded.
    """
    N = 1 << max(0, int(steps - 1).bit_length())
    N = max(N, 2)
    gam = fgn_autocovariance(np.arange(N + 1), H)
    return circulant_sample(rng, gam, components, tol)[:steps]


def fbm(seed: int, steps: int, m: int, dt: float, H: float, member: int = 0) -> DrivingPath:
    _check(steps, m, dt)
    if not 1.0 / 3.0 < H < 1.0:
        raise ConfigError("Hurst parameter must lie in (1/3, 1)")
    rng = stream(seed, member, CH_FBM)
    inc = davies_harte(rng, steps, H, components=m) * dt ** H
    return DrivingPath(dt=dt, increments=inc, seed=seed, member=member, hurst=H)


def pure_area(steps: int, dt: float, s) -> DrivingPath:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError("s must be square")
    m = s.shape[0]
    areas = np.broadcast_to(s * dt, (steps, m, m))
    return DrivingPath(dt=dt, increments=np.zeros((steps, m)), areas=areas)


# -- dump / load ----------------------------------------------------------------

def dump_csv(path: DrivingPath, filename) -> None:
    m = path.m
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    header = ["step"] + [f"dW{i + 1}" for i in range(m)]
    if path.areas is not None:
        header += [f"A{i + 1}{j + 1}" for i, j in pairs]
    with open(filename, "w", newline="") as fh:
        fh.write(f"# dt={path.dt!r} seed={path.seed} member={path.member}"
                 f" hurst={path.hurst!r}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(path.steps):
            row = [k] + [repr(float(v)) for v in path.increments[k]]
            if path.areas is not None:
                row += [repr(float(path.areas[k, i, j])) for i, j in pairs]
            w.writerow(row)


def load_csv(filename, dt: Optional[float] = None) -> DrivingPath:
    meta = {}
    with open(filename, newline="") as fh:
        first = fh.readline()
        if first.startswith("#"):
            for tok in first[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
        else:
            fh.seek(0)
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    m = sum(1 for h in header if h.startswith("dW"))
    inc = body[:, 1:1 + m]
    areas = None
    if len(header) > 1 + m:
        areas = np.zeros((len(body), m, m))
        col = 1 + m
        for i in range(m):
            for j in range(i + 1, m):
                areas[:, i, j] = body[:, col]
                areas[:, j, i] = -body[:, col]
                col += 1
    if dt is None:
        if "dt" not in meta:
            raise ConfigError("dt missing from file header; pass it explicitly")
        dt = float(meta["dt"])
    hurst = meta.get("hurst", "None")
    return DrivingPath(dt=dt, increments=inc, areas=areas,
                       seed=int(meta.get("seed", 0)), member=int(meta.get("member", 0)),
                       hurst=None if hurst == "None" else float(hurst))
