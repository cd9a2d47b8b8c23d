"""Vortex state and the shape / impulse diagnostics used to compare noise models.

Positions are stored as arrays of shape ``(n, 2)``.  The private ``_batch_*``
helpers accept any leading batch shape ``(..., n, 2)`` so that ensembles can be
diagnosed in one vectorised pass; the public functions wrap them for a single
configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (CoincidentVorticesError, DegenerateTriangleError,
                     DimensionError, ZeroCirculationError)

SEPARATION_TOL = 1e-12
DEFAULT_DELTA1 = np.sqrt(1e-10)


class Vec2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class VortexState:
    """Positions and (constant) strengths of ``n`` point vortices."""

    positions: np.ndarray
    strengths: np.ndarray
    reg_delta1: float = DEFAULT_DELTA1

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        gam = np.array(self.strengths, dtype=float).reshape(-1)
        if pos.shape[0] < 1:
            raise DimensionError("need at least one vortex")
        if pos.shape[0] != gam.shape[0]:
            raise DimensionError(
                f"{pos.shape[0]} positions but {gam.shape[0]} strengths")
        if not self.reg_delta1 > 0:
            raise ValueError("reg_delta1 must be positive")
        pos.setflags(write=False)
        gam.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "strengths", gam)
        object.__setattr__(self, "reg_delta1", float(self.reg_delta1))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def total_strength(self) -> float:
        return float(self.strengths.sum())

    def with_positions(self, positions) -> "VortexState":
        return VortexState(positions, self.strengths, self.reg_delta1)

    def to_q(self) -> np.ndarray:
        """Stacked state vector ``(x_1..x_n, y_1..y_n)``."""
        return positions_to_q(self.positions)

    @classmethod
    def from_q(cls, q, strengths, reg_delta1=DEFAULT_DELTA1) -> "VortexState":
        return cls(q_to_positions(q), strengths, reg_delta1)


def positions_to_q(positions: np.ndarray) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    return np.concatenate([positions[..., 0], positions[..., 1]], axis=-1)


def q_to_positions(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] % 2:
        raise DimensionError("state vector length must be even")
    n = q.shape[-1] // 2
    return q.reshape(q.shape[:-1] + (2, n)).swapaxes(-1, -2)


def equilateral_state(reg_delta1: float = DEFAULT_DELTA1) -> VortexState:
    """Three unit vortices on the roots of ``z**3 = -1``."""
    s = np.sqrt(3.0) / 2.0
    return VortexState([[-1.0, 0.0], [0.5, s], [0.5, -s]], np.ones(3), reg_delta1)


def ring_state(n: int, radius: float = 1.0, strength: float = 1.0,
               center=(0.0, 0.0), phase: float = 0.0,
               reg_delta1: float = DEFAULT_DELTA1) -> VortexState:
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    pos = np.stack([np.cos(theta), np.sin(theta)], axis=-1) * radius
    return VortexState(pos + np.asarray(center, float), np.full(n, float(strength)),
                       reg_delta1)


# -- triangle shape -----------------------------------------------------------

def _batch_side_lengths(p1, p2, p3):
    l12 = np.hypot(*np.moveaxis(p1 - p2, -1, 0))
    l23 = np.hypot(*np.moveaxis(p2 - p3, -1, 0))
    l31 = np.hypot(*np.moveaxis(p3 - p1, -1, 0))
    return l12, l23, l31


def _batch_heron(p1, p2, p3):
    l12, l23, l31 = _batch_side_lengths(p1, p2, p3)
    s = 0.5 * (l12 + l23 + l31)
    rad = s * (s - l12) * (s - l23) * (s - l31)
    return np.sqrt(np.maximum(rad, 0.0))


def _batch_vertex_angle(p1, p2, p3):
    # angle between (p2 - p1) and (p3 - p1) as atan2(|cross|, dot): the same
    # value as arccos of the clamped cosine, without its loss of accuracy near 0 and pi
    u, v = p2 - p1, p3 - p1
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]
    ang = np.arctan2(np.abs(cross), dot)
    l12 = np.hypot(u[..., 0], u[..., 1])
    l31 = np.hypot(v[..., 0], v[..., 1])
    return np.where((l12 < SEPARATION_TOL) | (l31 < SEPARATION_TOL), np.nan, ang)


def heron_area(p1, p2, p3) -> float:
    """Triangle area from the three side lengths (Heron's formula)."""
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    return float(_batch_heron(p1, p2, p3))


def vertex_angle(p1, p2, p3) -> float:
    """Interior angle at ``p1`` of the triangle ``(p1, p2, p3)``, in ``[0, pi]``."""
    p1, p2, p3 = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    if (np.hypot(*(p2 - p1)) < SEPARATION_TOL
            or np.hypot(*(p3 - p1)) < SEPARATION_TOL):
        raise DegenerateTriangleError("vertex coincides with a neighbour")
    return float(_batch_vertex_angle(p1, p2, p3))


# -- impulses and energy --------------------------------------------------------

def _batch_impulses(pos, strengths):
    g = np.asarray(strengths, dtype=float)
    tx = (g * pos[..., 0]).sum(axis=-1)
    ty = (g * pos[..., 1]).sum(axis=-1)
    r = 0.5 * (g * (pos[..., 0] ** 2 + pos[..., 1] ** 2)).sum(axis=-1)
    return tx, ty, r


def _batch_center(pos, strengths):
    g = np.asarray(strengths, dtype=float)
    return (g[:, None] * pos).sum(axis=-2) / g.sum()


def _batch_relative_impulse(pos, strengths):
    g = np.asarray(strengths, dtype=float)
    rel = pos - _batch_center(pos, g)[..., None, :]
    return 0.5 * (g * (rel[..., 0] ** 2 + rel[..., 1] ** 2)).sum(axis=-1)


def _batch_hamiltonian(pos, strengths):
    """Sum over unordered pairs of G_a G_b G(x_a - x_b); +inf on contact."""
    g = np.asarray(strengths, dtype=float)
    n = g.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    d = pos[..., iu, :] - pos[..., ju, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    with np.errstate(divide="ignore"):
        pair = -np.log(r2) / (4.0 * np.pi)
    return (g[iu] * g[ju] * pair).sum(axis=-1)


def center_of_vorticity(state: VortexState) -> Vec2:
    if state.total_strength == 0.0:
        raise ZeroCirculationError("total strength is zero")
    c = _batch_center(state.positions, state.strengths)
    return Vec2(float(c[0]), float(c[1]))


def impulses(state: VortexState) -> tuple[float, float, float]:
    """Linear impulses ``(T_x, T_y)`` and angular impulse ``R`` about the origin."""
    tx, ty, r = _batch_impulses(state.positions, state.strengths)
    return float(tx), float(ty), float(r)


def relative_angular_impulse(state: VortexState) -> float:
    """Angular impulse measured about the center of vorticity."""
    if state.total_strength == 0.0:
        raise ZeroCirculationError("total strength is zero")
    return float(_batch_relative_impulse(state.positions, state.strengths))


def kirchhoff_hamiltonian(state: VortexState) -> float:
    pos = state.positions
    d = pos[:, None, :] - pos[None, :, :]
    sep = np.hypot(d[..., 0], d[..., 1])[np.triu_indices(state.n, k=1)]
    if np.any(sep <= 0.0):
        raise CoincidentVorticesError("Hamiltonian is singular at coincident vortices")
    return float(_batch_hamiltonian(pos, state.strengths))


def moving_frame(state: VortexState, W2_t: float, a: float, b: float) -> VortexState:
    """Shift every vortex by ``(-b W2_t, +a W2_t)``.

    ``moving_frame(s, -W, a, b)`` undoes the translation produced by the
    constant field ``(-b, a)`` driven by ``W``.
    """
    shift = np.array([-b * W2_t, a * W2_t], dtype=float)
    return state.with_positions(state.positions + shift)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    area: float
    angle: float
    T_x: float
    T_y: float
    R: float
    R_hat: float
    H: float
    x_c: Vec2
    hat_x_c: Vec2


def diagnose(state: VortexState, t: float = 0.0, W2_t: float = 0.0,
             a: float = 0.0, b: float = 0.0) -> DiagnosticsRecord:
    """Snapshot diagnostics; ``hat_x_c`` is the center in the frame co-moving
    with the translation field ``(-b, a)``."""
    pos, g = state.positions, state.strengths
    if state.n >= 3:
        area = heron_area(*pos[:3])
        angle = vertex_angle(*pos[:3])
    else:
        area = angle = float("nan")
    tx, ty, r = impulses(state)
    xc = center_of_vorticity(state)
    hat = center_of_vorticity(moving_frame(state, -W2_t, a, b))
    return DiagnosticsRecord(t=float(t), area=area, angle=angle, T_x=tx, T_y=ty, R=r,
                             R_hat=relative_angular_impulse(state),
                             H=kirchhoff_hamiltonian(state), x_c=xc, hat_x_c=hat)


@dataclass
class DiagnosticsSeries:
    """Column-oriented diagnostics over ``(members, times)``."""

    t: np.ndarray
    area: np.ndarray
    angle: np.ndarray
    T_x: np.ndarray
    T_y: np.ndarray
    R: np.ndarray
    R_hat: np.ndarray
    H: np.ndarray
    x_c: np.ndarray
    hat_x_c: np.ndarray
    W2: np.ndarray = field(default=None)

    def member(self, k: int) -> list[DiagnosticsRecord]:
        out = []
        for i, t in enumerate(self.t):
            out.append(DiagnosticsRecord(
                t=float(t), area=float(self.area[k, i]), angle=float(self.angle[k, i]),
                T_x=float(self.T_x[k, i]), T_y=float(self.T_y[k, i]),
                R=float(self.R[k, i]), R_hat=float(self.R_hat[k, i]),
                H=float(self.H[k, i]), x_c=Vec2(*map(float, self.x_c[k, i])),
                hat_x_c=Vec2(*map(float, self.hat_x_c[k, i]))))
        return out


def batch_diagnostics(pos: np.ndarray, strengths, t, W2=None, a=0.0, b=0.0):
    """Diagnostics for positions of shape ``(members, times, n, 2)``."""
    pos = np.asarray(pos, dtype=float)
    g = np.asarray(strengths, dtype=float)
    if W2 is None:
        W2 = np.zeros(pos.shape[:2])
    if pos.shape[-2] >= 3:
        p1, p2, p3 = pos[..., 0, :], pos[..., 1, :], pos[..., 2, :]
        area = _batch_heron(p1, p2, p3)
        angle = _batch_vertex_angle(p1, p2, p3)
    else:
        area = angle = np.full(pos.shape[:2], np.nan)
    tx, ty, r = _batch_impulses(pos, g)
    xc = _batch_center(pos, g)
    hat = xc + np.stack([b * W2, -a * W2], axis=-1)
    return DiagnosticsSeries(t=np.asarray(t, float), area=area, angle=angle, T_x=tx,
                             T_y=ty, R=r, R_hat=_batch_relative_impulse(pos, g),
                             H=_batch_hamiltonian(pos, g), x_c=xc, hat_x_c=hat, W2=W2)
