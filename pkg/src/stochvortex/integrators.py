"""Explicit additive Runge-Kutta (ARK) stepping and the named vortex methods.

A double Butcher tableau pairs a drift table ``(c, b, Amat)`` with a diffusion
table ``(c~, b~, A~)``.  One step of

    dq = f(q) dt + G(q) o dW

computes stages ``Q^k = q + sum_{j<k} a_kj f(Q^j) dt + sum_{j<k} a~_kj G(Q^j) dW``
and returns ``q + sum_k b_k f(Q^k) dt + sum_k b~_k G(Q^k) dW``.  Using the RK4
table for both parts gives a Stratonovich scheme; pairing it with an Euler
diffusion table evaluates ``G`` only at the left point and so converges to the
Ito solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, ConfigError, IncompatiblePathError
from .fields import NoiseModel, StreamParams, VortexSystem, _commutator
from .geometry import (DiagnosticsSeries, VortexState, _batch_center,
                       batch_diagnostics, positions_to_q, q_to_positions)
from .noise import DrivingPath, with_levy_areas


@dataclass(frozen=True)
class ButcherTable:
    c: np.ndarray
    b: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        for name in ("c", "b", "A"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        s = self.b.shape[0]
        if self.c.shape != (s,) or self.A.shape != (s, s):
            raise ConfigError("inconsistent tableau shapes")
        if np.any(np.triu(self.A) != 0.0):
            raise ConfigError("tableau must be strictly lower triangular (explicit)")
        if not np.allclose(self.A.sum(axis=1), self.c, atol=1e-15):
            raise ConfigError("row sums of the tableau must equal c")

    @property
    def stages(self) -> int:
        return self.b.shape[0]

    @property
    def is_zero(self) -> bool:
        return not (self.b.any() or self.A.any())


_RK4 = ButcherTable(
    c=[0.0, 0.5, 0.5, 1.0],
    b=[1 / 6, 1 / 3, 1 / 3, 1 / 6],
    A=[[0.0, 0.0, 0.0, 0.0],
       [0.5, 0.0, 0.0, 0.0],
       [0.0, 0.5, 0.0, 0.0],
       [0.0, 0.0, 1.0, 0.0]],
)
_EULER = ButcherTable(
    c=[0.0, 1.0, 0.0, 0.0],
    b=[1.0, 0.0, 0.0, 0.0],
    A=[[0.0, 0.0, 0.0, 0.0],
       [1.0, 0.0, 0.0, 0.0],
       [0.0, 0.0, 0.0, 0.0],
       [0.0, 0.0, 0.0, 0.0]],
)
_ZERO = ButcherTable(c=np.zeros(4), b=np.zeros(4), A=np.zeros((4, 4)))

TABLEAUX = {"rk4": _RK4, "euler": _EULER, "zero": _ZERO}


@dataclass(frozen=True)
class DoubleButcherTableau:
    drift: ButcherTable
    diffusion: ButcherTable
    name: str = ""

    def __post_init__(self):
        if self.drift.stages != self.diffusion.stages:
            raise ConfigError("drift and diffusion tables need the same stage count")
        if not np.isclose(self.drift.b.sum(), 1.0, rtol=0, atol=1e-15):
            raise ConfigError("drift weights must sum to one")

    @property
    def stages(self) -> int:
        return self.drift.stages

    # field-style aliases
    @property
    def c(self):
        return self.drift.c

    @property
    def b(self):
        return self.drift.b

    @property
    def Amat(self):
        return self.drift.A

    @property
    def c_tilde(self):
        return self.diffusion.c

    @property
    def b_tilde(self):
        return self.diffusion.b

    @property
    def Amat_tilde(self):
        return self.diffusion.A

    @classmethod
    def from_names(cls, drift: str, diffusion: str) -> "DoubleButcherTableau":
        try:
            return cls(TABLEAUX[drift], TABLEAUX[diffusion], f"{drift}-{diffusion}")
        except KeyError as exc:
            raise ConfigError(f"unknown tableau {exc.args[0]!r}") from None


def ark_step(q, dt: float, dW, tab: DoubleButcherTableau,
             f: Callable, G: Optional[Callable]):
    """One ARK step.

    ``q`` is a state vector ``(2n,)`` or a batch ``(B, 2n)``; ``f`` maps it to
    an array of the same shape and ``G`` to ``(..., 2n, m)``.  ``G`` may be
    ``None`` (or return ``None``) for a noiseless system.
    """
    q = np.asarray(q, dtype=float)
    dW = np.asarray(dW, dtype=float)
    A, At = tab.drift.A, tab.diffusion.A
    b, bt = tab.drift.b, tab.diffusion.b
    s = tab.stages
    use_g = G is not None and not tab.diffusion.is_zero
    F = [None] * s
    N = [None] * s
    out = q.copy()
    for k in range(s):
        Q = q
        for j in range(k):
            if A[k, j] != 0.0:
                Q = Q + (A[k, j] * dt) * F[j]
            if use_g and At[k, j] != 0.0:
                Q = Q + At[k, j] * N[j]
        need_f = b[k] != 0.0 or A[k + 1:, k].any()
        need_g = use_g and (bt[k] != 0.0 or At[k + 1:, k].any())
        if need_f:
            F[k] = f(Q)
            if b[k] != 0.0:
                out = out + (b[k] * dt) * F[k]
        if need_g:
            Gk = G(Q)
            if Gk is None:
                use_g = False
            else:
                N[k] = (Gk * dW[..., None, :]).sum(axis=-1)
                if bt[k] != 0.0:
                    out = out + bt[k] * N[k]
    return out


# -- methods ------------------------------------------------------------------

@dataclass(frozen=True)
class MethodSpec:
    name: str
    tableau: DoubleButcherTableau
    kind: str
    uses_levy_area: bool = False
    K: Optional[int] = None
    number: int = 0
    hurst: Optional[float] = None

    @property
    def model(self) -> NoiseModel:
        K = self.K if self.uses_levy_area else None
        return NoiseModel(self.kind, K=K, hurst=self.hurst if self.kind == "fbm" else None)

    @property
    def needs_noise(self) -> bool:
        return self.kind not in ("deterministic", "pure_area")


def _method(number, name, drift, diff, kind, **kw):
    return MethodSpec(name=name, tableau=DoubleButcherTableau.from_names(drift, diff),
                      kind=kind, number=number, **kw)


METHODS = {
    "Deterministic": _method(1, "Deterministic", "rk4", "zero", "deterministic"),
    "Stratonovich": _method(2, "Stratonovich", "rk4", "rk4", "stratonovich"),
    "Ito": _method(3, "Ito", "rk4", "euler", "ito"),
    "TypeI-WZ": _method(4, "TypeI-WZ", "rk4", "rk4", "stratonovich_wz"),
    "TypeII-AreaProcess": _method(5, "TypeII-AreaProcess", "rk4", "zero", "pure_area"),
    "Stratonovich-NLA": _method(6, "Stratonovich-NLA", "rk4", "rk4", "stratonovich_nla",
                                uses_levy_area=True, K=10_000),
    "FBM": _method(7, "FBM", "rk4", "rk4", "fbm", hurst=0.4),
}
_ALIASES = {str(m.number): key for key, m in METHODS.items()}
_ALIASES.update({key.lower(): key for key in METHODS})


def get_method(name, K: Optional[int] = None, hurst: Optional[float] = None) -> MethodSpec:
    """Look up a method by name (case-insensitive) or number 1-7."""
    key = _ALIASES.get(str(name).strip().lower(), _ALIASES.get(str(name).strip()))
    if key is None:
        raise ConfigError(f"unknown method {name!r}; choose from {sorted(METHODS)} or 1-7")
    spec = METHODS[key]
    if K is not None and spec.uses_levy_area:
        spec = replace(spec, K=int(K))
    if hurst is not None and spec.kind == "fbm":
        spec = replace(spec, hurst=float(hurst))
    spec.model  # validates K / hurst
    return spec


def _nla_coeff(areas, p: StreamParams):
    # 1/2 sum_ij [g_i, g_j] A_ij = (mix A mix^T)_01 [xi1, xi2]
    mix = p.mix
    return np.einsum("i,...ij,j->...", mix[0], areas, mix[1])


def _batch_nla(pos, strengths, areas, p: StreamParams):
    coef = _nla_coeff(areas, p)
    rel = pos - _batch_center(pos, strengths)[..., None, :]
    return pos + coef[..., None, None] * _commutator(rel, p)


def nla_correction(state: VortexState, A, p: StreamParams) -> VortexState:
    """Displace each vortex by ``1/2 sum_ij [g_i, g_j](x) A_ij``, with the
    center taken from ``state`` itself."""
    A = np.asarray(A, dtype=float)
    if not np.array_equal(A, -A.T):
        raise ConfigError("area matrix must be antisymmetric")
    new = _batch_nla(state.positions, state.strengths, A, p)
    return state.with_positions(new)


@dataclass
class BatchResult:
    """Recorded positions ``(B, R, n, 2)`` plus per-member status."""

    t: np.ndarray
    positions: np.ndarray
    strengths: np.ndarray
    W2: np.ndarray
    status: list
    blowup_step: np.ndarray
    params: StreamParams

    @property
    def ok(self) -> np.ndarray:
        return self.blowup_step < 0

    def diagnostics(self) -> DiagnosticsSeries:
        with np.errstate(invalid="ignore", divide="ignore"):
            return batch_diagnostics(self.positions, self.strengths, self.t, self.W2,
                                     self.params.a, self.params.b)


@dataclass
class Trajectory:
    t: np.ndarray
    positions: np.ndarray
    series: DiagnosticsSeries
    method: str
    path: DrivingPath = field(repr=False, default=None)

    @property
    def records(self):
        return self.series.member(0)

    def states(self, strengths, reg_delta1):
        return [VortexState(p, strengths, reg_delta1) for p in self.positions]


def check_compatible(method: MethodSpec, path: DrivingPath, p: StreamParams) -> None:
    if method.needs_noise and path.m != p.m:
        raise IncompatiblePathError(f"path has m={path.m}, noise needs m={p.m}")
    if method.kind == "fbm" and path.hurst is None:
        raise IncompatiblePathError("FBM method needs a fractional driving path")
    if method.kind in ("ito", "stratonovich", "stratonovich_wz", "stratonovich_nla") \
            and path.hurst is not None:
        raise IncompatiblePathError(f"{method.name} expects Brownian increments")
    if method.uses_levy_area and path.areas is None and method.K is None:
        raise IncompatiblePathError("Levy-area method needs stored areas or K")


def _record_indices(steps: int, every: int) -> np.ndarray:
    if every < 1:
        raise ConfigError("record_every must be >= 1")
    idx = np.arange(0, steps + 1, every)
    if idx[-1] != steps:
        idx = np.append(idx, steps)
    return idx


def integrate_batch(method: MethodSpec, state0: VortexState, p: StreamParams,
                    paths: list, record_every: int = 1,
                    system: Optional[VortexSystem] = None) -> BatchResult:
    """Integrate one member per path from a common initial state.

    A member whose state becomes non-finite is frozen at NaN and
    reported in ``status``; the others carry on.
    """
    if not paths:
        raise ConfigError("need at least one driving path")
    dt, steps = paths[0].dt, paths[0].steps
    for path in paths:
        if path.steps != steps or path.dt != dt:
            raise IncompatiblePathError("all paths in a batch need the same grid")
        check_compatible(method, path, p)
    if method.uses_levy_area:
        paths = [pa if pa.areas is not None else with_levy_areas(pa, method.K) for pa in paths]
    sysm = system or VortexSystem(state0.strengths, p, method.model, state0.reg_delta1)
    G = sysm.diffusion if method.needs_noise else None
    B = len(paths)
    dW = np.stack([pa.increments for pa in paths], axis=0)
    areas = np.stack([pa.areas for pa in paths], axis=0) if method.uses_levy_area else None
    rec = _record_indices(steps, record_every)
    n = state0.n
    out = np.empty((B, rec.size, n, 2))
    q = np.broadcast_to(state0.to_q(), (B, 2 * n)).copy()
    blown = np.full(B, -1, dtype=int)
    ri = 0
    if rec[0] == 0:
        out[:, 0] = q_to_positions(q)
        ri = 1
    with np.errstate(all="ignore"):
        for k in range(steps):
            q = ark_step(q, dt, dW[:, k], method.tableau, sysm.drift, G)
            if areas is not None:
                pos = _batch_nla(q_to_positions(q), sysm.strengths, areas[:, k], p)
                q = positions_to_q(pos)
            bad = ~np.isfinite(q).all(axis=1)
            if bad.any():
                newly = bad & (blown < 0)
                blown[newly] = k + 1
                q[bad] = np.nan
            if ri < rec.size and rec[ri] == k + 1:
                out[:, ri] = q_to_positions(q)
                ri += 1
    W = np.zeros((B, steps + 1, p.m))
    np.cumsum(dW, axis=1, out=W[:, 1:])
    W2 = (W @ p.mix.T)[..., 1][:, rec] if method.needs_noise else np.zeros((B, rec.size))
    status = ["ok" if s < 0 else f"blowup@{s}" for s in blown]
    return BatchResult(t=rec * dt, positions=out, strengths=sysm.strengths, W2=W2,
                       status=status, blowup_step=blown, params=p)


def integrate(method: MethodSpec, state0: VortexState, p: StreamParams,
              path: DrivingPath, record_every: int = 1,
              system: Optional[VortexSystem] = None) -> Trajectory:
    """Single-member integration; raises :class:`BlowUpError` on divergence."""
    res = integrate_batch(method, state0, p, [path], record_every, system)
    if res.blowup_step[0] >= 0:
        raise BlowUpError(int(res.blowup_step[0]), f"{method.name} diverged at step {res.blowup_step[0]}")
    if method.uses_levy_area and path.areas is None:
        path = with_levy_areas(path, method.K)
    return Trajectory(t=res.t, positions=res.positions[0], series=res.diagnostics(),
                      method=method.name, path=path)
