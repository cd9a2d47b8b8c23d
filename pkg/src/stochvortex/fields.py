"""Velocity and noise vector fields, and their assembly into state-space form.

Sign convention: every field is the skew gradient ``(d/dy, -d/dx)`` of its
stream function, so

    xi1 = A r exp(-r |x~|^2 / 2) (y~, -x~),    psi1 = -A exp(-r |x~|^2 / 2)
    xi2 = (-b, a),                             psi2 = -b y - a x

with ``x~ = x - x_c``.  The center of vorticity is recomputed from each stage
state and held fixed while differentiating, so ``xi1`` is a rotation about a
frozen point.

Batched helpers take positions of shape ``(B, n, 2)`` and return arrays with
the same leading shape.  Pair sums reduce over a fixed axis so that a member's
result never depends on which other members share its batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError, NonPositiveSeparationError
from .geometry import (DEFAULT_DELTA1, VortexState, Vec2, _batch_center,
                       _batch_hamiltonian, positions_to_q, q_to_positions)

NOISE_KINDS = ("deterministic", "ito", "stratonovich", "stratonovich_wz",
               "pure_area", "stratonovich_nla", "fbm")


@dataclass(frozen=True)
class StreamParams:
    """Parameters of the rotation (``A``, ``r``) and translation (``a``, ``b``)
    noise, the area perturbation ``s`` and an optional ``2 x m`` mixing matrix.

    With a mixing matrix the diffusion columns are ``g_j = sum_i xi_i mix[i, j]``
    and ``s`` is ``m x m``.
    """

    A: float = 0.5
    r: float = 1.0
    a: float = 1.0
    b: float = -1.0
    s: np.ndarray = field(default_factory=lambda: np.array([[0.0, 1.0], [-1.0, 0.0]]))
    mix: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.A > 0 or not self.r > 0:
            raise ConfigError("A and r must be positive")
        s = np.array(self.s, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise DimensionError("s must be a square matrix")
        if not np.array_equal(s, -s.T):
            raise ConfigError("s must be exactly antisymmetric")
        mix = np.eye(2) if self.mix is None else np.array(self.mix, dtype=float)
        if mix.ndim != 2 or mix.shape[0] != 2:
            raise DimensionError("mix must have shape (2, m)")
        if mix.shape[1] != s.shape[0]:
            raise DimensionError(f"s is {s.shape} but mix has {mix.shape[1]} columns")
        s.setflags(write=False)
        mix.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "mix", mix)
        for name in ("A", "r", "a", "b"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def m(self) -> int:
        return self.mix.shape[1]

    @property
    def kappa(self) -> float:
        """Coefficient of ``[xi1, xi2]`` in the Wong-Zakai drift."""
        return float((self.mix @ self.s @ self.mix.T)[0, 1])


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    K: Optional[int] = None
    hurst: Optional[float] = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise model {self.kind!r}")
        if self.kind == "stratonovich_nla" and (self.K is None or self.K < 1):
            raise ConfigError("Levy-area model needs K >= 1")
        if self.kind == "fbm" and not (self.hurst is not None and 1 / 3 < self.hurst < 1):
            raise ConfigError("fBM model needs hurst in (1/3, 1)")


# -- scalar fields ----------------------------------------------------------

def greens(sep: float) -> float:
    if not sep > 0:
        raise NonPositiveSeparationError(f"separation must be positive, got {sep}")
    return float(-np.log(sep) / (2.0 * np.pi))


def _kernel(d, delta1):
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    denom = 2.0 * np.pi * np.where(r2 <= delta1 ** 2, r2 + delta1 ** 2, r2)
    out = np.empty(d.shape)
    np.divide(-d[..., 1], denom, out=out[..., 0])
    np.divide(d[..., 0], denom, out=out[..., 1])
    return out


def bs_kernel(d, delta1: float = DEFAULT_DELTA1) -> Vec2:
    """Regularised Biot-Savart kernel; vanishes at ``d = 0``."""
    k = _kernel(np.asarray(d, dtype=float), float(delta1))
    return Vec2(float(k[0]), float(k[1]))


def batch_velocities(pos, strengths, delta1=DEFAULT_DELTA1):
    """Biot-Savart velocities for positions of shape ``(..., n, 2)``."""
    pos = np.asarray(pos, dtype=float)
    g = np.asarray(strengths, dtype=float)
    d = pos[..., :, None, :] - pos[..., None, :, :]
    k = _kernel(d, delta1)
    # reduce over the source index, which sits at axis -2 of the pair array
    return (g[:, None] * k).sum(axis=-2)


def deterministic_velocity(state: VortexState, alpha: int) -> Vec2:
    if not 0 <= alpha < state.n:
        raise IndexError(f"vortex index {alpha} out of range for n={state.n}")
    u = batch_velocities(state.positions, state.strengths, state.reg_delta1)[alpha]
    return Vec2(float(u[0]), float(u[1]))


# -- noise fields (rel = x - x_c, broadcastable arrays (..., 2)) -------------

def _xi1(rel, p):
    e = p.A * p.r * np.exp(-0.5 * p.r * (rel[..., 0] ** 2 + rel[..., 1] ** 2))
    out = np.empty(rel.shape)
    np.multiply(e, rel[..., 1], out=out[..., 0])
    np.multiply(-e, rel[..., 0], out=out[..., 1])
    return out


def _xi2(rel, p):
    out = np.empty(rel.shape)
    out[..., 0] = -p.b
    out[..., 1] = p.a
    return out


def _ito(rel, p):
    e = 0.5 * (p.A * p.r) ** 2 * np.exp(-p.r * (rel[..., 0] ** 2 + rel[..., 1] ** 2))
    return -e[..., None] * rel


def _commutator(rel, p):
    x, y = rel[..., 0], rel[..., 1]
    r, a, b = p.r, p.a, p.b
    e = p.A * r * np.exp(-0.5 * r * (x * x + y * y))
    u = -r * b * x * y + a * (r * y * y - 1.0)
    v = -r * a * x * y + b * (r * x * x - 1.0)
    out = np.empty(rel.shape)
    np.multiply(e, u, out=out[..., 0])
    np.multiply(e, v, out=out[..., 1])
    return out


def _psi1(rel, p):
    return -p.A * np.exp(-0.5 * p.r * (rel[..., 0] ** 2 + rel[..., 1] ** 2))


def _psi_wz(rel, p):
    x, y = rel[..., 0], rel[..., 1]
    return p.A * p.r * (-p.a * y + p.b * x) * np.exp(-0.5 * p.r * (x * x + y * y))


def _rel(x, x_c):
    return np.asarray(x, dtype=float) - np.asarray(x_c, dtype=float)


def _vec(v) -> Vec2:
    return Vec2(float(v[0]), float(v[1]))


def xi1(x, x_c, p: StreamParams) -> Vec2:
    return _vec(_xi1(_rel(x, x_c), p))


def xi2(p: StreamParams) -> Vec2:
    return Vec2(-p.b, p.a)


def ito_strat_correction(x, x_c, p: StreamParams) -> Vec2:
    """Half the self-advection ``(xi1 . grad) xi1``; pulls vortices outward
    once subtracted, i.e. the drift an Ito reading adds relative to Stratonovich."""
    return _vec(_ito(_rel(x, x_c), p))


def ito_correction_divergence(x, x_c, p: StreamParams) -> float:
    rel = _rel(x, x_c)
    rho2 = rel[0] ** 2 + rel[1] ** 2
    return float(p.A ** 2 * p.r ** 2 * (p.r * rho2 - 1.0) * np.exp(-p.r * rho2))


def wz_commutator(x, x_c, p: StreamParams) -> Vec2:
    """Lie bracket ``(xi1 . grad) xi2 - (xi2 . grad) xi1``."""
    return _vec(_commutator(_rel(x, x_c), p))


def wz_drift(x, x_c, p: StreamParams) -> Vec2:
    """``1/2 sum_ij s^ij [g_i, g_j]``, which reduces to ``kappa [xi1, xi2]``."""
    return _vec(p.kappa * _commutator(_rel(x, x_c), p))


def psi1(x, x_c, p: StreamParams) -> float:
    return float(_psi1(_rel(x, x_c), p))


def psi2(x, p: StreamParams) -> float:
    x = np.asarray(x, dtype=float)
    return float(-p.b * x[1] - p.a * x[0])


def psi_wz(x, x_c, p: StreamParams) -> float:
    """Stream function of ``[xi1, xi2]`` (frozen center)."""
    return float(_psi_wz(_rel(x, x_c), p))


FIELD_FUNCS = {
    "xi1": _xi1,
    "xi2": _xi2,
    "ito_strat_correction": _ito,
    "wz_commutator": _commutator,
}


def evaluate_field(name: str, points, x_c, p: StreamParams) -> np.ndarray:
    """Vectorised evaluation of a named field at ``points`` of shape ``(..., 2)``."""
    if name == "wz_drift":
        return p.kappa * _commutator(_rel(points, x_c), p)
    try:
        fn = FIELD_FUNCS[name]
    except KeyError:
        raise ConfigError(f"unknown field {name!r}") from None
    return fn(_rel(points, x_c), p)


# -- state-space assembly -----------------------------------------------------

class VortexSystem:
    """Batched drift ``f(q)`` and diffusion ``G(q)`` for a model.

    ``q`` has shape ``(B, 2n)``; ``drift`` returns ``(B, 2n)`` and
    ``diffusion`` returns ``(B, 2n, m)``, or ``None`` when it vanishes.
    """

    def __init__(self, strengths, p: StreamParams, model: NoiseModel,
                 delta1: float = DEFAULT_DELTA1, extra_drift: bool = False):
        self.strengths = np.asarray(strengths, dtype=float)
        if self.strengths.sum() == 0.0 and model.kind != "deterministic":
            raise ConfigError("noise fields need a nonzero total strength")
        self.p = p
        self.model = model
        self.delta1 = float(delta1)
        self.add_wz = model.kind in ("stratonovich_wz", "pure_area") or extra_drift
        self.noisy = model.kind not in ("deterministic", "pure_area")

    @property
    def m(self) -> int:
        return self.p.m

    def _rel(self, pos):
        return pos - _batch_center(pos, self.strengths)[..., None, :]

    def velocities(self, pos):
        return batch_velocities(pos, self.strengths, self.delta1)

    def wz_velocities(self, pos):
        return self.p.kappa * _commutator(self._rel(pos), self.p)

    def drift(self, q):
        pos = q_to_positions(q)
        u = self.velocities(pos)
        if self.add_wz:
            u = u + self.wz_velocities(pos)
        return positions_to_q(u)

    def diffusion(self, q):
        if not self.noisy:
            return None
        pos = q_to_positions(q)
        rel = self._rel(pos)
        base = np.stack([_xi1(rel, self.p), _xi2(rel, self.p)], axis=-1)
        cols = base @ self.p.mix  # (..., n, 2, m)
        return np.concatenate([cols[..., 0, :], cols[..., 1, :]], axis=-2)


def assemble(state: VortexState, p: StreamParams, model: NoiseModel):
    """State-space drift vector ``f`` (length ``2n``) and diffusion matrix ``G``
    (``2n x m``) at ``state``."""
    if not isinstance(state, VortexState):
        raise DimensionError("assemble expects a VortexState")
    system = VortexSystem(state.strengths, p, model, state.reg_delta1)
    q = state.to_q()[None, :]
    f = system.drift(q)[0]
    G = system.diffusion(q)
    G = np.zeros((2 * state.n, p.m)) if G is None else G[0]
    return f, G


def hamiltonian_wzd(pos, strengths, p: StreamParams, delta=None):
    """``H + kappa sum_a Gamma_a psi_wz(x_a)`` for positions ``(..., n, 2)``.

    Conserved by the pure-area flow since the translation of the frozen center
    cancels between pairs.
    """
    pos = np.asarray(pos, dtype=float)
    g = np.asarray(strengths, dtype=float)
    rel = pos - _batch_center(pos, g)[..., None, :]
    return _batch_hamiltonian(pos, g) + p.kappa * (g * _psi_wz(rel, p)).sum(axis=-1)
