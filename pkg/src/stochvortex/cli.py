"""Command-line entry point: ``stochvortex <experiment> [options]``.

Experiments: ``single``, ``ensemble``, ``pathwise-compare``, ``homogenize`` and
``fields-grid``.  Settings come from an optional JSON file (``--config``);
command-line flags override it.  Every command writes a ``manifest.json``
listing its outputs and any failures.

Exit status: 0 on success, 1 if a member blew up or a validation failed
(partial results are still written), 2 for an invalid configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import ensemble as ens
from . import homogenization as hom
from .errors import ConfigError, VortexError
from .fields import StreamParams, evaluate_field
from .geometry import DEFAULT_DELTA1, VortexState, equilateral_state
from .integrators import get_method, integrate_batch
from .noise import DrivingPath, brownian, dump_csv, fbm, pure_area, with_levy_areas

EXPERIMENTS = ("single", "ensemble", "pathwise-compare", "homogenize", "fields-grid")

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "out": "out",
    "methods": ["Deterministic", "Stratonovich", "Ito", "TypeI-WZ", "TypeII-AreaProcess"],
    "T": 40.0,
    "dt": 1.0 / 250.0,
    "members": 100,
    "record_every": 1,
    "common_path": True,
    "K": 10_000,
    "hurst": 0.4,
    "params": {"A": 0.5, "r": 1.0, "a": 1.0, "b": -1.0, "s": [[0.0, 1.0], [-1.0, 0.0]]},
    "initial": None,
    "histogram": {"nx": 1024, "ny": 1024, "bounds": None},
    "homogenize": {"A": [[1.0, 1.0], [-1.0, 1.0]], "D": [[1.0, 0.0], [0.0, 1.0]],
                   "eps": 1.0, "T": 1.0e4, "dt": 0.05, "lag_cutoff": None,
                   "blocks": 50, "replicates": 400, "nsigma": 3.0, "input": None},
    "fields_grid": {"field": "wz_commutator", "box": [-2.0, 2.0, -2.0, 2.0],
                    "nx": 41, "ny": 41, "center": [0.0, 0.0]},
}


def load_config(path: Optional[str]) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(user) - set(DEFAULTS) - {"experiment"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key, val in user.items():
            if isinstance(cfg.get(key), dict) and isinstance(val, dict):
                extra = set(val) - set(cfg[key])
                if extra:
                    raise ConfigError(f"unknown keys in {key!r}: {sorted(extra)}")
                cfg[key].update(val)
            else:
                cfg[key] = val
    return cfg


def _params(cfg) -> StreamParams:
    return StreamParams(**cfg["params"])


def _initial(cfg) -> VortexState:
    ini = cfg["initial"]
    if ini is None:
        return equilateral_state()
    return VortexState(ini["positions"], ini["strengths"],
                       ini.get("reg_delta1", DEFAULT_DELTA1))


def _methods(cfg):
    names = cfg["methods"]
    if isinstance(names, str):
        names = [s for s in names.split(",") if s.strip()]
    if not names:
        raise ConfigError("no methods given")
    return [get_method(n, K=cfg["K"], hurst=cfg["hurst"]) for n in names]


def _steps(cfg) -> int:
    T, dt = float(cfg["T"]), float(cfg["dt"])
    if not (T > 0 and dt > 0) or abs(T / dt - round(T / dt)) > 1e-9 * max(1.0, T / dt):
        raise ConfigError("T and dt must be positive with T / dt an integer")
    return int(round(T / dt))


def _slug(name: str) -> str:
    return name.lower().replace(" ", "_")


class Run:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = cfg["out"]
        os.makedirs(self.out, exist_ok=True)
        self.files: list[str] = []
        self.failures: list[str] = []

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.out, name)

    def finish(self) -> int:
        manifest = {"command": self.command, "seed": self.cfg["seed"], "files": self.files,
                    "failures": self.failures, "ok": not self.failures}
        ens.write_json(os.path.join(self.out, "manifest.json"), manifest)
        return 0 if not self.failures else 1


def _shared_path(method, cfg, base: DrivingPath) -> DrivingPath:
    steps, dt, m = base.steps, base.dt, base.m
    if method.kind == "pure_area":
        return pure_area(steps, dt, StreamParams(**cfg["params"]).s)
    if method.kind == "deterministic":
        return DrivingPath(dt=dt, increments=np.zeros((steps, m)))
    if method.kind == "fbm":
        return fbm(cfg["seed"], steps, m, dt, method.hurst)
    return base


def cmd_single(cfg) -> int:
    run = Run("single", cfg)
    p, s0, steps = _params(cfg), _initial(cfg), _steps(cfg)
    methods = _methods(cfg)
    base = brownian(cfg["seed"], steps, p.m, cfg["dt"])
    if any(mt.uses_levy_area for mt in methods):
        base = with_levy_areas(base, methods[[mt.uses_levy_area for mt in methods].index(True)].K)
    for mt in methods:
        path = _shared_path(mt, cfg, base)
        res = integrate_batch(mt, s0, p, [path], cfg["record_every"])
        ens.write_diagnostics_csv(run.path(f"diagnostics_{_slug(mt.name)}.csv"),
                                  res.diagnostics())
        if not res.ok.all():
            run.failures.append(f"{mt.name}: {res.status[0]}")
    dump_csv(base, run.path("path.csv"))
    return run.finish()


def cmd_ensemble(cfg) -> int:
    run = Run("ensemble", cfg)
    p, s0 = _params(cfg), _initial(cfg)
    _steps(cfg)
    summaries = {}
    for mt in _methods(cfg):
        ec = ens.EnsembleConfig(members=cfg["members"], seed=cfg["seed"], T=cfg["T"],
                                dt=cfg["dt"], method=mt, params=p, initial=s0,
                                common_path=cfg["common_path"],
                                record_every=cfg["record_every"], workers=cfg["workers"])
        res = ens.run_ensemble(ec)
        slug = _slug(mt.name)
        ens.write_diagnostics_csv(run.path(f"diagnostics_{slug}.csv"), res.series)
        for qty in ("area", "angle"):
            env = ens.envelope(getattr(res.series, qty))
            ens.write_envelope_csv(run.path(f"envelope_{qty}_{slug}.csv"), res.t, *env)
        hc = cfg["histogram"]
        grid = ens.HistogramGrid(nx=int(hc["nx"]), ny=int(hc["ny"]),
                                 bounds=tuple(hc["bounds"]) if hc["bounds"] else None)
        ens.write_histogram_csv(run.path(f"histogram_{slug}.csv"),
                                ens.histogram(res.positions, grid))
        summaries[mt.name] = ens.summary(res)
        for k, st in enumerate(res.status):
            if st != "ok":
                run.failures.append(f"{mt.name} member {k}: {st}")
    ens.write_json(run.path("summary.json"), summaries)
    return run.finish()


PATHWISE_TOL = {"Tx": 1e-8, "Ty": 1e-8, "H": 1e-6}


def cmd_pathwise_compare(cfg) -> int:
    """Residuals of the translation and energy laws for Stratonovich runs."""
    run = Run("pathwise-compare", cfg)
    p, s0, steps = _params(cfg), _initial(cfg), _steps(cfg)
    names = cfg["methods"] if cfg["methods"] != DEFAULTS["methods"] else ["Stratonovich"]
    methods = _methods({**cfg, "methods": names})
    base = brownian(cfg["seed"], steps, p.m, cfg["dt"])
    report = {}
    for mt in methods:
        if mt.kind not in ("stratonovich", "deterministic"):
            raise ConfigError(f"pathwise identities need a Stratonovich method, got {mt.name}")
        res = integrate_batch(mt, s0, p, [_shared_path(mt, cfg, base)], cfg["record_every"])
        resid = ens.pathwise_identities(res.diagnostics(), res.W2, p, s0.n)
        slug = _slug(mt.name)
        keys = ["Tx", "Ty", "H", "R", "Tx_literal", "Ty_literal"]
        with open(run.path(f"pathwise_{slug}.csv"), "w") as fh:
            fh.write("t," + ",".join(keys) + "\n")
            for i, t in enumerate(resid["t"]):
                fh.write(repr(float(t)) + "," + ",".join(repr(float(resid[k][0, i])) for k in keys)
                         + "\n")
        mx = {k: float(np.nanmax(np.abs(resid[k]))) for k in keys}
        passed = {k: mx[k] <= tol for k, tol in PATHWISE_TOL.items()}
        report[mt.name] = {"max_abs": mx, "tolerance": PATHWISE_TOL, "pass": passed}
        if not res.ok.all():
            run.failures.append(f"{mt.name}: {res.status[0]}")
        for k, ok in passed.items():
            if not ok:
                run.failures.append(f"{mt.name}: {k} residual {mx[k]:.3e} above {PATHWISE_TOL[k]}")
    dump_csv(base, run.path("path.csv"))
    ens.write_json(run.path("pathwise.json"), report)
    return run.finish()


def cmd_homogenize(cfg) -> int:
    run = Run("homogenize", cfg)
    hc = cfg["homogenize"]
    ou = hom.FastOU(np.array(hc["A"], float), np.array(hc["D"], float), float(hc["eps"]))
    nsig = float(hc["nsigma"])
    if hc["input"]:
        traj, dt = hom.load_trajectory_csv(hc["input"])
        cut = hc["lag_cutoff"] or ou.default_lag_cutoff()
        E = hom.green_kubo(traj, dt, cut)
        reps = hom.block_bootstrap(traj, dt, cut, hc["blocks"], hc["replicates"], cfg["seed"])
        est = hom.decompose(E, cut, traj.shape[0])
        est.stderr = {
            "E": reps.std(axis=0, ddof=1),
            "s_prime": (0.5 * (reps - np.swapaxes(reps, 1, 2))).std(axis=0, ddof=1),
            "M": (0.5 * (reps + np.swapaxes(reps, 1, 2))).std(axis=0, ddof=1),
        }
    else:
        est, _ = hom.estimate(ou, cfg["seed"], float(hc["T"]), float(hc["dt"]),
                              hc["lag_cutoff"], int(hc["blocks"]), int(hc["replicates"]))
    report = hom.oracle_report(ou, est, nsig)
    ens.write_json(run.path("homogenize.json"), report)
    if not report["pass"]["E_within_nsigma"]:
        run.failures.append("Green-Kubo estimate differs from the Lyapunov oracle")
    return run.finish()


def cmd_fields_grid(cfg) -> int:
    run = Run("fields-grid", cfg)
    fc = cfg["fields_grid"]
    p = _params(cfg)
    x0, x1, y0, y1 = map(float, fc["box"])
    nx, ny = int(fc["nx"]), int(fc["ny"])
    if nx < 1 or ny < 1 or not (x1 >= x0 and y1 >= y0):
        raise ConfigError("invalid grid box or size")
    xs, ys = np.linspace(x0, x1, nx), np.linspace(y0, y1, ny)
    # snap round-off so that grid lines through the origin hit it exactly
    xs[np.abs(xs) < 1e-12 * max(1.0, x1 - x0)] = 0.0
    ys[np.abs(ys) < 1e-12 * max(1.0, y1 - y0)] = 0.0
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    uv = evaluate_field(fc["field"], pts, np.asarray(fc["center"], float), p)
    with open(run.path(f"field_{fc['field']}.csv"), "w") as fh:
        fh.write("x,y,u,v\n")
        for (x, y), (u, v) in zip(pts, uv):
            fh.write(f"{float(x)!r},{float(y)!r},{float(u)!r},{float(v)!r}\n")
    return run.finish()


COMMANDS = {
    "single": cmd_single,
    "ensemble": cmd_ensemble,
    "pathwise-compare": cmd_pathwise_compare,
    "homogenize": cmd_homogenize,
    "fields-grid": cmd_fields_grid,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochvortex",
                                 description="Stochastic point-vortex experiments.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", metavar="PATH", help="JSON configuration file")
    ap.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    ap.add_argument("--workers", type=int, help="worker processes for ensembles")
    ap.add_argument("--out", metavar="DIR", help="output directory")
    ap.add_argument("--method", metavar="NAME[,NAME...]",
                    help="method names or numbers 1-7, comma separated")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.get("experiment", args.experiment) != args.experiment:
            raise ConfigError(f"config is for {cfg['experiment']!r}, not {args.experiment!r}")
        for key in ("seed", "workers", "out"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
        if args.method:
            cfg["methods"] = [s.strip() for s in args.method.split(",") if s.strip()]
        if not 0 <= int(cfg["seed"]) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if int(cfg["workers"]) < 1:
            raise ConfigError("workers must be >= 1")
        return COMMANDS[args.experiment](cfg)
    except (ConfigError, TypeError, KeyError) as exc:
        print(f"stochvortex: configuration error: {exc}", file=sys.stderr)
        return 2
    except VortexError as exc:
        print(f"stochvortex: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
