import numpy as np
import pytest

from conftest import ANGLE0, AREA0, fd_gradient
from stochvortex.errors import BlowUpError, ConfigError, IncompatiblePathError
from stochvortex.fields import (NoiseModel, StreamParams, VortexSystem, psi1, wz_drift)
from stochvortex.geometry import (VortexState, center_of_vorticity, impulses,
                                  kirchhoff_hamiltonian, ring_state)
from stochvortex.integrators import (METHODS, TABLEAUX, ButcherTable, DoubleButcherTableau,
                                     ark_step, get_method, integrate, integrate_batch,
                                     nla_correction)
from stochvortex.noise import DrivingPath, brownian, fbm, pure_area

DT = 1.0 / 250.0


def test_tableaux_registered_exactly():
    rk4 = TABLEAUX["rk4"]
    assert np.array_equal(rk4.c, [0, 0.5, 0.5, 1])
    assert np.array_equal(rk4.b, [1 / 6, 1 / 3, 1 / 3, 1 / 6])
    assert np.array_equal(rk4.A, np.diag([0.5, 0.5, 1.0], -1))
    eu = TABLEAUX["euler"]
    assert np.array_equal(eu.c, [0, 1, 0, 0]) and np.array_equal(eu.b, [1, 0, 0, 0])
    assert eu.A[1, 0] == 1.0 and eu.A.sum() == 1.0
    assert TABLEAUX["zero"].is_zero


def test_tableau_validation():
    with pytest.raises(ConfigError):
        ButcherTable(c=[0, 1], b=[0.5, 0.5], A=[[0, 1], [1, 0]])
    with pytest.raises(ConfigError):
        ButcherTable(c=[0, 0.5], b=[0.5, 0.5], A=[[0, 0], [1, 0]])
    with pytest.raises(ConfigError):
        DoubleButcherTableau(TABLEAUX["zero"], TABLEAUX["zero"])


def test_method_registry():
    assert [METHODS[k].number for k in METHODS] == list(range(1, 8))
    assert get_method(3).name == "Ito"
    assert get_method("typei-wz").name == "TypeI-WZ"
    assert get_method("6", K=50).K == 50
    assert METHODS["Deterministic"].tableau.diffusion.is_zero
    assert METHODS["TypeII-AreaProcess"].tableau.diffusion.is_zero
    with pytest.raises(ConfigError):
        get_method("Milstein")
    with pytest.raises(ConfigError):
        get_method("FBM", hurst=0.2)


def test_rk4_linear_ode():
    lam, dt, q0 = -0.7, 0.1, np.array([1.3, -0.4])
    tab = DoubleButcherTableau.from_names("rk4", "zero")
    q1 = ark_step(q0, dt, np.zeros(2), tab, lambda q: lam * q, None)
    z = lam * dt
    assert np.allclose(q1, q0 * (1 + z + z ** 2 / 2 + z ** 3 / 6 + z ** 4 / 24), rtol=1e-15, atol=0)


@pytest.mark.parametrize("diff", ["rk4", "euler"])
def test_additive_noise_exact(diff):
    g = np.array([[0.3, -1.0], [2.0, 0.5], [0.0, 1.5]])
    tab = DoubleButcherTableau.from_names("rk4", diff)
    q, dW = np.array([1.0, 2.0, 3.0]), np.array([0.2, -0.1])
    out = ark_step(q, 0.01, dW, tab, lambda x: np.zeros_like(x), lambda x: g)
    assert np.allclose(out, q + g @ dW, rtol=0, atol=1e-15)


def test_zero_increments_reduce_to_deterministic(state0, params):
    steps = 500
    zero = DrivingPath(dt=DT, increments=np.zeros((steps, 2)))
    det = integrate(get_method(1), state0, params, zero)
    strat = integrate(get_method(2), state0, params, zero)
    assert np.array_equal(det.positions, strat.positions)


def test_nla_correction_examples(state0, params):
    assert np.array_equal(nla_correction(state0, np.zeros((2, 2)), params).positions,
                          state0.positions)
    # area s dt is one explicit Euler step of the Wong-Zakai drift
    stepped = nla_correction(state0, params.s * DT, params)
    xc = center_of_vorticity(state0)
    euler = state0.positions + DT * np.array([wz_drift(x, xc, params) for x in state0.positions])
    assert np.allclose(stepped.positions, euler, rtol=0, atol=1e-16)
    one = VortexState([[0.3, 0.7]], [1.0])
    moved = nla_correction(one, np.array([[0, 0.01], [-0.01, 0]]), params)
    Ar = params.A * params.r
    assert np.allclose(moved.positions - one.positions,
                       [[0.01 * -Ar * params.a, 0.01 * -Ar * params.b]], atol=1e-17)
    with pytest.raises(ConfigError):
        nla_correction(one, np.array([[0, 1.0], [0.5, 0]]), params)


def test_deterministic_short_run_conserves_shape(state0, params):
    traj = integrate(get_method(1), state0, params,
                     DrivingPath(dt=DT, increments=np.zeros((1000, 2))), record_every=50)
    assert np.max(np.abs(traj.series.area - AREA0)) <= 1e-12
    assert np.max(np.abs(traj.series.angle - ANGLE0)) <= 1e-12
    assert traj.t[-1] == pytest.approx(4.0)
    rec = traj.records[-1]
    assert rec.H == pytest.approx(kirchhoff_hamiltonian(state0), abs=1e-13)


def test_record_stride_includes_final_step(state0, params):
    traj = integrate(get_method(1), state0, params,
                     DrivingPath(dt=DT, increments=np.zeros((25, 2))), record_every=10)
    assert np.allclose(traj.t, [0, 10 * DT, 20 * DT, 25 * DT])


def test_wz_method_equals_strat_with_extra_drift(state0, params):
    path = brownian(3, 400, 2, DT)
    m4 = integrate(get_method(4), state0, params, path)
    sysm = VortexSystem(state0.strengths, params, NoiseModel("stratonovich"), extra_drift=True)
    wired = integrate(get_method(2), state0, params, path, system=sysm)
    assert np.max(np.abs(m4.positions - wired.positions)) <= 1e-14


def test_stage_velocities_are_hamiltonian(state0, params):
    sysm = VortexSystem(state0.strengths, params, NoiseModel("deterministic"))
    seen = []

    def f(q):
        seen.append(q.copy())
        return sysm.drift(q[None])[0]

    ark_step(state0.to_q(), 0.05, np.zeros(2), METHODS["Deterministic"].tableau, f, None)
    assert len(seen) == 4
    for q in seen:
        pos = np.stack([q[:3], q[3:]], axis=-1)
        grad = fd_gradient(lambda p: kirchhoff_hamiltonian(VortexState(p, state0.strengths)), pos)
        vel = sysm.drift(q[None])[0]
        ref = np.concatenate([grad[:, 1], -grad[:, 0]])
        assert np.allclose(vel, ref, rtol=1e-6, atol=1e-9)


def _coarsen(path, factor):
    inc = path.increments.reshape(-1, factor, path.m).sum(axis=1)
    return DrivingPath(dt=path.dt * factor, increments=inc)


def test_translation_noise_ito_equals_stratonovich():
    two = VortexState([[-0.5, 0.0], [0.5, 0.1]], [1.0, 1.0])
    p = StreamParams(mix=[[0.0, 0.0], [0.0, 1.0]])  # only the translation field
    dt, T = 1 / 32, 2.0
    fine = brownian(21, int(T / dt) * 64, 2, dt / 64)
    ref = integrate(get_method(2), two, p, fine).positions[-1]
    coarse = _coarsen(fine, 64)
    for name in ("Stratonovich", "Ito"):
        got = integrate(get_method(name), two, p, coarse).positions[-1]
        assert np.max(np.abs(got - ref)) <= 10 * dt ** 2


def _self_convergence_order(p, levels=(4, 5, 6, 7), finest=9, npaths=12):
    s0 = VortexState([[-1, 0], [0.5, 0.9], [0.6, -0.7]], [1, 1, 1])
    T = 1.0
    paths = [brownian(40, 2 ** finest, 2, T / 2 ** finest, member=k) for k in range(npaths)]
    method = get_method(2)

    def final(L):
        cp = [_coarsen(pa, 2 ** (finest - L)) for pa in paths]
        return integrate_batch(method, s0, p, cp, record_every=2 ** L).positions[:, -1]

    ref = final(finest)
    errs = [np.sqrt(np.mean(np.sum((final(L) - ref) ** 2, axis=(1, 2)))) for L in levels]
    hs = [T / 2 ** L for L in levels]
    return np.polyfit(np.log(hs), np.log(errs), 1)[0]


def test_stratonovich_strong_order():
    assert _self_convergence_order(StreamParams()) >= 0.5
    assert _self_convergence_order(StreamParams(mix=[[0.0, 0.0], [0.0, 1.0]])) >= 1.0


@pytest.mark.parametrize("n", range(1, 8))
def test_poisson_brackets_with_rotation_vanish(n):
    rng = np.random.default_rng(n)
    ring = ring_state(n, radius=rng.uniform(0.5, 1.5), phase=rng.uniform(0, 2 * np.pi))
    gam = ring.strengths
    p = StreamParams(A=0.5, r=1.0)

    def Psi1(pos):
        xc = pos.mean(axis=0)  # equal strengths; the center moves with every vortex
        return sum(g * psi1(x, xc, p) for g, x in zip(gam, pos))

    quantities = {
        "Tx": lambda pos: impulses(VortexState(pos, gam))[0],
        "Ty": lambda pos: impulses(VortexState(pos, gam))[1],
        "R": lambda pos: impulses(VortexState(pos, gam))[2],
        "H": (lambda pos: kirchhoff_hamiltonian(VortexState(pos, gam))) if n > 1
        else (lambda pos: 0.0),
    }
    gpsi = fd_gradient(Psi1, ring.positions)
    for name, F in quantities.items():
        gF = fd_gradient(F, ring.positions)
        bracket = np.sum((gF[:, 0] * gpsi[:, 1] - gF[:, 1] * gpsi[:, 0]) / gam)
        assert abs(bracket) <= 1e-8, name


def test_compatibility_checks(state0, params):
    bm = brownian(1, 10, 2, DT)
    with pytest.raises(IncompatiblePathError):
        integrate(get_method("FBM"), state0, params, bm)
    with pytest.raises(IncompatiblePathError):
        integrate(get_method("Ito"), state0, params, fbm(1, 10, 2, DT, 0.4))
    with pytest.raises(IncompatiblePathError):
        integrate(get_method(2), state0, params, brownian(1, 10, 3, DT))
    # pure-area and deterministic methods ignore the increments
    integrate(get_method(5), state0, params, pure_area(10, DT, params.s))


def test_nla_with_stored_areas_matches_sampled(state0, params):
    method = get_method(6, K=20)
    path = brownian(2, 200, 2, DT)
    a = integrate(method, state0, params, path)
    b = integrate(method, state0, params, a.path)
    assert a.path.areas is not None
    assert np.array_equal(a.positions, b.positions)


class _Exploding:
    def __init__(self, strengths, after):
        self.strengths = np.asarray(strengths, float)
        self.calls = 0
        self.after = after

    def drift(self, q):
        self.calls += 1
        return np.full_like(q, np.inf if self.calls > self.after else 0.0)

    def diffusion(self, q):
        return None


def test_blowup_raises_with_step(state0, params):
    path = DrivingPath(dt=DT, increments=np.zeros((20, 2)))
    with pytest.raises(BlowUpError) as info:
        integrate(get_method(1), state0, params, path, system=_Exploding(state0.strengths, 4 * 5))
    assert info.value.step == 6


def test_batch_reports_member_blowup(state0, params):
    good = brownian(1, 30, 2, DT)
    inc = good.increments.copy()
    inc[10, 0] = np.nan
    bad = DrivingPath(dt=DT, increments=inc)
    res = integrate_batch(get_method(2), state0, params, [good, bad, good])
    assert res.status == ["ok", "blowup@11", "ok"]
    assert np.array_equal(res.positions[0], res.positions[2])
    assert np.isfinite(res.positions[0]).all()
