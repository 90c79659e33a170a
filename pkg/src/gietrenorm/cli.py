"""Command-line driver.

Every command reads a :class:`RunConfig` (``--config`` plus flag
overrides), writes its files into the output directory and prints a JSON
summary on standard output.  CSV files start with a ``#`` header line and
JSON files carry ``schema`` and ``config_hash`` fields.

Exit codes: 0 success, 2 configuration or I/O problem, 3 numerical
failure, 4 exhausted budget.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import intmat
from .analysis import LEVEL_COLUMNS, level_table, summarize_mesh, wandering_detect
from .cocycle import lyapunov_spectrum
from .combinatorics import PermutationPair, rauzy_class
from .config import OUT_ENV, RunConfig
from .errors import ConfigError, GietError
from .fixtures import build_fixture, fixture_loop, zorich_blocks, zorich_period
from .giet import Giet, path_matrix
from .renorm import RenormState, accelerate_on_good_returns, orbit_csv, orbit_for
from .shadow import ShadowThresholds, deviation_summary, periodic_deviation, run_shadow

VERSION = 1


def _schema(kind: str) -> str:
    return f"gietrenorm/{kind}/{VERSION}"


def _header(cfg: RunConfig, kind: str) -> str:
    return f"# gietrenorm schema={_schema(kind)} config_hash={cfg.hash()}\n"


def _json_default(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if hasattr(x, "to_dict"):
        return x.to_dict()
    return float(x)


def _dump(data: dict) -> str:
    return json.dumps(data, indent=1, default=_json_default, sort_keys=True) + "\n"


class Outputs:
    """Writes files into the run's output directory and remembers them."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.dir = cfg.out_dir()
        self.files: list[str] = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.dir}: {exc}") from exc

    def write(self, name: str, text: str) -> None:
        path = self.dir / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from exc
        self.files.append(str(path))

    def json(self, name: str, kind: str, data: dict) -> None:
        body = {"schema": _schema(kind), "config_hash": self.cfg.hash(), **data}
        self.write(name, _dump(body))

    def csv(self, name: str, kind: str, columns, rows) -> None:
        buf = io.StringIO()
        buf.write(_header(self.cfg, kind))
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        self.write(name, buf.getvalue())


def build_map(cfg: RunConfig) -> Giet:
    return build_fixture(cfg.map, cfg.seed, cfg.dps)


def _orbit(cfg: RunConfig, T: Giet, words: bool = False):
    budget = cfg.thresholds.floor_budget
    if T.moebius_u is None:
        return RenormState(T, cfg.precision, cfg.dps, height_budget=budget)
    kw = {"track_words": True, "word_budget": budget} if words else {}
    return orbit_for(T, cfg.precision, cfg.dps, **kw)


def _row(orbit, n, move, winner, run, norm_z) -> dict:
    return {"n": n, "move": move, "winner": winner, "run": run, "norm_Z": norm_z,
            "lambda": orbit.lambda_n.tolist(), "omega": orbit.omega_n().tolist(),
            "a_n": float(orbit.a_n), "log_a_n": float(orbit.log_a_n)}


def cmd_orbit(cfg: RunConfig) -> dict:
    T = build_map(cfg)
    orbit = _orbit(cfg, T)
    rows = []
    if cfg.acceleration == "elementary":
        for _ in range(cfg.steps):
            arrow = orbit.step_rauzy()
            rows.append(_row(orbit, orbit.n, arrow.move.value, arrow.winner, 1,
                             intmat.norm1(orbit.elementary[-1])))
    else:
        snaps = []
        for _ in range(cfg.steps):
            z = orbit.step_zorich()
            snaps.append(_row(orbit, orbit.zorich_count, orbit.zorich_moves[-1].value,
                              orbit.path.arrows[-1].winner,
                              orbit.zorich_ends[-1] - orbit.zorich_ends[-2], intmat.norm1(z)))
        if cfg.acceleration == "zorich":
            rows = snaps
        else:
            good = accelerate_on_good_returns(orbit.zorich_matrices)
            prev = 0
            for t in good.times + [orbit.zorich_count]:
                if t == 0 or t <= prev:
                    continue
                r = dict(snaps[t - 1])
                r["run"] = t - prev
                r["norm_Z"] = intmat.norm1(intmat.product(orbit.zorich_matrices[prev:t], T.d))
                rows.append(r)
                prev = t
    out = Outputs(cfg)
    out.write("orbit.csv", orbit_csv(rows, T.d, _header(cfg, "orbit")))
    state = orbit.to_dict()
    state.pop("schema", None)
    out.json("state.json", "state", {"state": state})
    winners = [r["winner"] for r in rows]
    return {"rows": len(rows), "winners": winners, "files": out.files}


def _oracle(T: Giet):
    loop = fixture_loop(T)
    if loop is None:
        return None
    p = zorich_period(loop)
    eig = np.linalg.eigvals(np.array(path_matrix(loop), dtype=float))
    return sorted((np.log(np.abs(eig)) / p).tolist(), reverse=True)


def cmd_lyapunov(cfg: RunConfig) -> dict:
    T = build_map(cfg)
    orbit = _orbit(cfg, T)
    orbit.run(cfg.steps)
    est = lyapunov_spectrum(orbit.zorich_matrices, min_steps=cfg.thresholds.lyapunov_min_steps)
    oracle = _oracle(T)
    data = {"thetas": est.thetas.tolist(), "n_steps": est.n_steps, "method": est.method,
            "oracle": oracle}
    if oracle is not None:
        rel = [abs(a - b) / abs(b) if b else abs(a) for a, b in zip(est.thetas, oracle)]
        data["relative_error"] = rel
    out = Outputs(cfg)
    out.json("lyapunov.json", "lyapunov", data)
    out.csv("lyapunov_trace.csv", "lyapunov-trace",
            ["n"] + [f"theta_{j}" for j in range(1, T.d + 1)],
            [[n] + list(t) for n, t in est.trace])
    return {**data, "files": out.files}


def cmd_shadow(cfg: RunConfig) -> dict:
    T = build_map(cfg)
    th = cfg.thresholds
    thresholds = ShadowThresholds(th.v_factor, th.escape, th.residual, th.min_growth)
    loop = fixture_loop(T)
    kw = {}
    if loop is not None:
        blocks = zorich_blocks(loop)
        p = len(blocks)
        kw = {"past": blocks * math.ceil(th.window / p), "continuation": blocks,
              "spacing": 2 * p}
        if "periods" in T.meta:
            kw["extend"] = max(0, T.meta["periods"] * p - cfg.steps)
    run = run_shadow(_orbit(cfg, T), cfg.steps, th.window, thresholds=thresholds, **kw)
    data = {"verdict": run.verdict.to_dict(), "summary": run.summary(),
            "shadow": None if run.shadow is None else run.shadow.to_dict()}
    if loop is not None and run.shadow is not None:
        dev = periodic_deviation(run.track, run.shadow.v, len(zorich_blocks(loop)), path_matrix(loop))
        floor = 1e-9 * max(1.0, float(np.abs(run.shadow.v).sum()))
        data["periodic_deviation"] = deviation_summary(dev, floor).to_dict()
    out = Outputs(cfg)
    out.json("shadow.json", "shadow", data)
    text = run.verdict.to_csv()
    out.write("shadow.csv", _header(cfg, "shadow-trace") + text)
    return {**run.summary(), "files": out.files}


def cmd_mesh(cfg: RunConfig) -> dict:
    T = build_map(cfg)
    rows = level_table(_orbit(cfg, T, words=True), cfg.steps, cfg.thresholds.floor_budget)
    ok = [r for r in rows[1:] if r["mesh"] == r["mesh"]]
    md = summarize_mesh([r["level"] for r in ok], [r["mesh"] for r in ok], cfg.thresholds.mesh_floor)
    data = {"verdict": md.verdict, "alpha": md.alpha, "r2": md.fit.r2, "monotone": md.monotone,
            "levels": md.levels, "mesh": md.mesh}
    out = Outputs(cfg)
    out.csv("levels.csv", "levels", LEVEL_COLUMNS, [[r[c] for c in LEVEL_COLUMNS] for r in rows])
    out.json("mesh.json", "mesh", data)
    return {"verdict": md.verdict, "alpha": md.alpha, "r2": md.fit.r2,
            "final_mesh": md.mesh[-1] if md.mesh else None, "files": out.files}


def cmd_wander(cfg: RunConfig) -> dict:
    T = build_map(cfg)
    th = cfg.thresholds
    rep = wandering_detect(_orbit(cfg, T, words=True), cfg.steps, th.floor_budget, th.C_max, th.persistence)
    data = {"verdict": rep.verdict, "distorted": rep.distorted, "C": rep.C, "mesh": rep.mesh,
            "gamma": rep.gamma, "c": rep.c, "C0": rep.C0, "fit_r2": rep.fit.r2,
            "mmy_holds": rep.mmy_holds}
    out = Outputs(cfg)
    out.json("wander.json", "wander", data)
    levels = [p.level for p in rep.profiles]
    out.csv("wander.csv", "wander-trace", ["rauzy_level", "C", "max_floor"],
            list(zip(levels, rep.C, rep.mesh)))
    return {k: data[k] for k in ("verdict", "gamma", "fit_r2")} | {"files": out.files}


def cmd_boundary(cfg: RunConfig) -> dict:
    T = build_map(cfg)
    b = T.boundary()
    data = {"values": b.values.tolist(), "sum": float(b.sum)}
    out = Outputs(cfg)
    out.json("boundary.json", "boundary", data)
    return {**data, "files": out.files}


def _permutation(cfg: RunConfig) -> PermutationPair:
    if "fixture" not in cfg.map and "lambda" not in cfg.map:
        if "pi" not in cfg.map:
            raise ConfigError("map needs a fixture, a serialized map or a permutation 'pi'")
        return PermutationPair.from_dict(cfg.map["pi"])
    return build_map(cfg).pi


def cmd_diagram(cfg: RunConfig) -> dict:
    rc = rauzy_class(_permutation(cfg))
    out = Outputs(cfg)
    dot = rc.to_dot()
    out.write("diagram.dot", f"// config_hash={cfg.hash()}\n" + dot)
    out.json("diagram.json", "diagram", rc.to_dict())
    return {"nodes": len(rc.members), "edges": len(rc.arrows), "files": out.files}


COMMANDS = {
    "orbit": cmd_orbit,
    "lyapunov": cmd_lyapunov,
    "shadow": cmd_shadow,
    "mesh": cmd_mesh,
    "wander": cmd_wander,
    "boundary": cmd_boundary,
    "diagram": cmd_diagram,
}


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.replace(steps=args.steps, seed=args.seed, precision=args.precision, out=args.out)


def run_command(name: str, cfg: RunConfig) -> dict:
    result = COMMANDS[name](cfg)
    return {"command": name, "config_hash": cfg.hash(), **result}


def _batch_one(job):
    name, path, out = job
    try:
        cfg = RunConfig.from_file(path)
        cfg = cfg.replace(out=str(Path(out) / cfg.hash()))
        return {"config": path, "exit_code": 0, **run_command(name, cfg)}
    except GietError as exc:
        return {"config": path, "exit_code": exc.exit_code, "error": str(exc)}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--steps", type=int, help="number of renormalization steps")
    common.add_argument("--seed", type=int, help="seed for random fixtures")
    common.add_argument("--precision", choices=("double", "extended"))
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./gietrenorm-out)")
    parser = argparse.ArgumentParser(prog="gietrenorm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__name__.replace("cmd_", "") + " run")
    batch = sub.add_parser("batch", help="run one command over several configs in parallel")
    batch.add_argument("target", choices=sorted(COMMANDS))
    batch.add_argument("configs", nargs="+")
    batch.add_argument("--jobs", type=int, default=2)
    batch.add_argument("--out", help="parent directory; each run writes to <out>/<config hash>")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "batch":
            out = args.out or str(RunConfig().out_dir())
            jobs = [(args.target, c, out) for c in args.configs]
            with ProcessPoolExecutor(max_workers=max(1, args.jobs)) as pool:
                results = list(pool.map(_batch_one, jobs))
            print(_dump({"command": "batch", "runs": results}), end="")
            return max(r["exit_code"] for r in results)
        cfg = load_config(args)
        print(_dump(run_command(args.command, cfg)), end="")
        return 0
    except GietError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, ValueError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
