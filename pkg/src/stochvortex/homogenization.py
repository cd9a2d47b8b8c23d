"""Green-Kubo estimation of homogenised coefficients from a fast OU process.

The fast variables solve

    d lambda = -(1/eps^2) A lambda dt + (1/eps) D dW,

whose stationary covariance ``S`` satisfies ``A S + S A^T = D D^T``.  The
integrated autocorrelation ``E = int_0^inf <lambda_0 lambda_s^T> ds`` (in
``eps = 1`` time) splits into a symmetric diffusion part ``M`` and an
antisymmetric area anomaly ``s'``.  For OU dynamics ``E = S A^{-T}`` exactly,
which gives an analytic check on the estimator.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import ConfigError, DimensionError, IndefiniteCovarianceError, UnstableDriftError
from .fields import StreamParams
from .noise import CH_OU, DrivingPath, stream


@dataclass(frozen=True)
class FastOU:
    A: np.ndarray
    D: np.ndarray
    eps: float = 1.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        D = np.array(self.D, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or D.shape[0] != A.shape[0]:
            raise DimensionError("A must be square and D must have as many rows as A")
        if not self.eps > 0:
            raise ConfigError("eps must be positive")
        if np.linalg.eigvals(A).real.min() <= 0:
            raise UnstableDriftError("A needs eigenvalues with positive real part")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def stationary_cov(self) -> np.ndarray:
        return linalg.solve_continuous_lyapunov(self.A, self.D @ self.D.T)

    def default_lag_cutoff(self) -> float:
        """Ten relaxation times, in the ``eps = 1`` time units of the estimator."""
        return 10.0 / np.linalg.eigvals(self.A).real.min()


def _psd_sqrt(Q):
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_fast(ou: FastOU, seed: int, steps: int, dt: float,
                  lam0=None, check_resolution: bool = True) -> np.ndarray:
    """Exact-transition OU trajectory of shape ``(steps + 1, m)``.

    Starts from a stationary draw unless ``lam0`` is given.  The update is
    ``lambda' = Phi lambda + L z`` with ``Phi = expm(-A dt / eps^2)`` and
    ``L L^T = S - Phi S Phi^T``.
    """
    if steps < 1 or not dt > 0:
        raise ConfigError("need steps >= 1 and dt > 0")
    if check_resolution and dt > ou.eps ** 2 / (10.0 * np.linalg.norm(ou.A, 2)):
        raise ConfigError("dt must resolve the fast scale: dt <= eps^2 / (10 |A|)")
    rng = stream(seed, 0, CH_OU)
    S = ou.stationary_cov()
    Phi = linalg.expm(-ou.A * dt / ou.eps ** 2)
    L = _psd_sqrt(S - Phi @ S @ Phi.T)
    m = ou.m
    x0 = _psd_sqrt(S) @ rng.standard_normal(m)
    if lam0 is not None:
        x0 = np.asarray(lam0, dtype=float).reshape(m)
    z = rng.standard_normal((steps, m)) @ L.T
    out = np.empty((steps + 1, m))
    out[0] = x0
    PT = Phi.T
    for k in range(steps):
        out[k + 1] = out[k] @ PT + z[k]
    return out


def _lags(dt: float, lag_cutoff: float, N: int) -> int:
    L = int(np.ceil(lag_cutoff / dt - 1e-9))
    if lag_cutoff < 0:
        raise ConfigError("lag cutoff must be nonnegative")
    if L >= N:
        raise ConfigError(f"lag cutoff {lag_cutoff} exceeds the trajectory length {N * dt}")
    return L


def _trapezoid_weights(L: int) -> np.ndarray:
    w = np.ones(L + 1)
    w[0] = w[-1] = 0.5
    if L == 0:
        w[0] = 0.0
    return w


def green_kubo(traj, dt: float, lag_cutoff: float) -> np.ndarray:
    """Trapezoid sum over lags of ``C_k = <lambda(t) lambda(t + k dt)^T>``.

    Time averages run over all available pairs; no mean is removed.
    ``E[i, j]`` pairs component ``i`` at the earlier time with ``j`` later.
    """
    X = np.asarray(traj, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N = X.shape[0]
    L = _lags(dt, lag_cutoff, N)
    w = _trapezoid_weights(L)
    E = np.zeros((X.shape[1], X.shape[1]))
    for k in range(L + 1):
        if w[k]:
            E += w[k] * (X[:N - k].T @ X[k:]) / (N - k)
    return E * dt


def block_bootstrap(traj, dt: float, lag_cutoff: float, blocks: int = 50,
                    replicates: int = 400, seed: int = 0) -> np.ndarray:
    """Bootstrap replicates of :func:`green_kubo`, shape ``(replicates, m, m)``.

    The lagged products are summed within contiguous blocks; each replicate
    resamples blocks with replacement and renormalises by the pair counts.
    """
    X = np.asarray(traj, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    N, m = X.shape
    L = _lags(dt, lag_cutoff, N)
    if blocks < 2 or N // blocks <= L:
        raise ConfigError("blocks must be at least 2 and longer than the lag window")
    starts = np.arange(blocks) * (N // blocks)
    w = _trapezoid_weights(L)
    S = np.zeros((blocks, L + 1, m, m))
    cnt = np.zeros((blocks, L + 1))
    for k in range(L + 1):
        prod = X[:N - k, :, None] * X[k:, None, :]
        S[:, k] = np.add.reduceat(prod, starts, axis=0)
        cnt[:, k] = np.diff(np.append(starts, N - k))
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0, CH_OU + 1)))
    idx = rng.integers(0, blocks, size=(replicates, blocks))
    hits = np.stack([np.bincount(row, minlength=blocks) for row in idx]).astype(float)
    num = np.einsum("rb,bkij->rkij", hits, S)
    den = hits @ cnt
    return dt * np.einsum("k,rkij->rij", w, num / den[..., None, None])


def lyapunov_oracle(ou: FastOU) -> np.ndarray:
    """``E = S A^{-T}`` with ``S`` from the vectorised Lyapunov system
    ``(I kron A + A kron I) vec(S) = vec(D D^T)``."""
    A, m = ou.A, ou.m
    I = np.eye(m)
    K = np.kron(I, A) + np.kron(A, I)
    S = np.linalg.solve(K, (ou.D @ ou.D.T).reshape(-1, order="F")).reshape(m, m, order="F")
    S = 0.5 * (S + S.T)
    return np.linalg.solve(A, S).T


@dataclass
class GreenKuboEstimate:
    E: np.ndarray
    M: np.ndarray
    s_prime: np.ndarray
    Dchol: np.ndarray
    s: np.ndarray
    lag_cutoff: float = float("nan")
    samples: int = 0
    stderr: dict = field(default_factory=dict)


def decompose(E, lag_cutoff: float = float("nan"), samples: int = 0,
              tol: float = 1e-12) -> GreenKuboEstimate:
    """Split ``E = M + s'`` and express ``s'`` in the basis of the Cholesky
    factor of ``M``: ``s' = Dchol s Dchol^T``."""
    E = np.asarray(E, dtype=float)
    M = 0.5 * (E + E.T)
    sp = 0.5 * (E - E.T)
    ev = np.linalg.eigvalsh(M)
    if ev.min() <= tol * max(1.0, np.abs(E).max()):
        raise IndefiniteCovarianceError(
            f"symmetric part is not positive definite (min eigenvalue {ev.min():.3e})")
    Dc = linalg.cholesky(M, lower=True)
    tmp = linalg.solve_triangular(Dc, sp, lower=True)
    s = linalg.solve_triangular(Dc, tmp.T, lower=True).T
    s = 0.5 * (s - s.T)
    return GreenKuboEstimate(E=E, M=M, s_prime=sp, Dchol=Dc, s=s,
                             lag_cutoff=float(lag_cutoff), samples=int(samples))


def estimate(ou: FastOU, seed: int, T: float, dt: float, lag_cutoff: Optional[float] = None,
             blocks: int = 50, replicates: int = 400) -> tuple[GreenKuboEstimate, np.ndarray]:
    """Simulate at ``eps = 1``, estimate ``E`` with bootstrap errors and decompose.

    Returns the estimate and the bootstrap replicates of ``E``.
    """
    unit = FastOU(ou.A, ou.D, 1.0)
    steps = int(round(T / dt))
    traj = simulate_fast(unit, seed, steps, dt)
    cut = unit.default_lag_cutoff() if lag_cutoff is None else lag_cutoff
    E = green_kubo(traj, dt, cut)
    reps = block_bootstrap(traj, dt, cut, blocks=blocks, replicates=replicates, seed=seed)
    est = decompose(E, cut, traj.shape[0])
    est.stderr = {
        "E": reps.std(axis=0, ddof=1),
        "s_prime": (0.5 * (reps - np.swapaxes(reps, 1, 2))).std(axis=0, ddof=1),
        "M": (0.5 * (reps + np.swapaxes(reps, 1, 2))).std(axis=0, ddof=1),
    }
    return est, reps


def oracle_report(ou: FastOU, est: GreenKuboEstimate, nsigma: float = 3.0) -> dict:
    E0 = lyapunov_oracle(ou)
    se = est.stderr
    sp0 = 0.5 * (E0 - E0.T)
    within = np.abs(est.E - E0) <= nsigma * se["E"]
    zero_ok = np.abs(est.s_prime) <= nsigma * se["s_prime"] + 1e-15
    return {
        "E": est.E.tolist(), "M": est.M.tolist(), "s_prime": est.s_prime.tolist(),
        "Dchol": est.Dchol.tolist(), "s": est.s.tolist(),
        "stderr": {k: v.tolist() for k, v in se.items()},
        "oracle": {"E": E0.tolist(), "M": (0.5 * (E0 + E0.T)).tolist(),
                   "s_prime": sp0.tolist()},
        "lag_cutoff": est.lag_cutoff, "samples": est.samples,
        "pass": {
            "E_within_nsigma": bool(within.all()),
            "anomaly_consistent_with_zero": bool(zero_ok.all()),
            "oracle_anomaly_zero": bool(np.allclose(sp0, 0.0, atol=1e-14)),
        },
        "nsigma": nsigma,
    }


# -- representations of the homogenised noise --------------------------------

def sigma_params(base: StreamParams, est: GreenKuboEstimate) -> StreamParams:
    """Noise fields mixed by ``Dchol`` with area anomaly ``s`` in driver basis."""
    return StreamParams(A=base.A, r=base.r, a=base.a, b=base.b, s=est.s, mix=est.Dchol)


def correlated_params(base: StreamParams, est: GreenKuboEstimate) -> StreamParams:
    """Unmixed fields with anomaly ``s'``, to be driven by correlated increments."""
    return StreamParams(A=base.A, r=base.r, a=base.a, b=base.b, s=est.s_prime, mix=None)


def correlated_path(path: DrivingPath, est: GreenKuboEstimate) -> DrivingPath:
    """Increments ``dB = Dchol dW``."""
    return DrivingPath(dt=path.dt, increments=path.increments @ est.Dchol.T,
                       seed=path.seed, member=path.member)


# -- file IO ------------------------------------------------------------------

def load_trajectory_csv(filename) -> tuple[np.ndarray, float]:
    """Read ``t,lambda1..lambdam``; returns the values and the (uniform) step."""
    with open(filename, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header = [h.strip() for h in rows[0]]
    if header[0] != "t" or len(header) < 2:
        raise ConfigError("trajectory CSV needs a header t,lambda1,...")
    data = np.array(rows[1:], dtype=float)
    t = data[:, 0]
    steps = np.diff(t)
    if steps.size == 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        raise ConfigError("trajectory times must be uniformly spaced")
    return data[:, 1:], float(steps[0])


def write_trajectory_csv(filename, traj, dt: float) -> None:
    traj = np.asarray(traj, dtype=float)
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"lambda{i + 1}" for i in range(traj.shape[1])])
        for k, row in enumerate(traj):
            w.writerow([repr(k * dt)] + [repr(float(v)) for v in row])
