"""Command-line front end.

Subcommands: ``reduce``, ``curve``, ``table``, ``analytic``, ``pulses``. Each
writes a UTF-8 CSV whose ``#`` header block echoes the configuration and unit
declarations, plus a JSON summary next to it. CSV files are byte-identical for
identical inputs; wall-clock timings only go into the JSON summary.

Exit codes: 0 success, 1 usage error, 2 computation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict, fields, replace
from functools import partial
from pathlib import Path

import numpy as np

from . import analytic
from .exceptions import GraphParseError, OptimizationFailure, ReductionError
from .grape import (
    DEFAULT_THRESHOLD,
    GrapeConfig,
    PulseSequence,
    fidelity_vs_time,
    minimal_time,
    optimize,
    propagate,
)
from .graph import parse_graph
from .qcore import cluster_problem
from .reduce import drift_control_overlap, reduce_problem

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2
UNIT = "1/(2J)"
TABLE_GRAPHS = ("K3", "L3", "K4", "C4", "K5", "K6", "G2x3", "K7")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    graph: str = "K3"
    control: str = "global"
    J: float = 1.0
    slices: int = 100
    restarts: int = 20
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    tmin_tol: float = 0.005
    tgrid: str | None = None
    T: float | None = None
    init: str = "random"
    max_iterations: int = 3000
    method: str = "lbfgs"
    jobs: int = 1
    out: str | None = None

    def validate(self):
        if self.control not in ("local", "global"):
            raise UsageError(f"--control must be 'local' or 'global', got {self.control!r}")
        for name in ("J", "slices", "restarts", "threshold", "tmin_tol", "max_iterations", "jobs"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if self.method not in ("lbfgs", "gradient"):
            raise UsageError(f"--method must be 'lbfgs' or 'gradient', got {self.method!r}")
        if self.init not in ("random", "zero"):
            raise UsageError(f"--init must be 'random' or 'zero', got {self.init!r}")

    def grape_config(self):
        return GrapeConfig(restarts=self.restarts, rng_seed=self.seed,
                           max_iterations=self.max_iterations, method=self.method)

    def echo(self):
        return {k: v for k, v in asdict(self).items() if k not in ("out", "jobs")}


@dataclass
class TableRow:
    graph: str
    d: int | None = None
    overlap: float | None = None
    t_min: float | None = None
    fidelity: float | None = None
    wall_time: float | None = None
    status: str = "ok"


def parse_tgrid(spec):
    """``a:b:step`` (inclusive of ``b`` up to rounding) or a comma list."""
    if spec is None or not spec.strip():
        raise UsageError("empty time grid")
    try:
        if ":" in spec:
            a, b, step = (float(x) for x in spec.split(":"))
            if step <= 0 or b < a:
                raise UsageError(f"bad time grid {spec!r}")
            count = int(math.floor((b - a) / step + 1e-9)) + 1
            grid = [round(a + k * step, 12) for k in range(count)]
        else:
            grid = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad time grid {spec!r}: {exc}") from exc
    if not grid:
        raise UsageError("empty time grid")
    return grid


def load_graph(spec):
    path = Path(spec)
    text = path.read_text() if path.is_file() else spec
    return parse_graph(text)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        # + 0.0 folds negative zero
        return repr(round(float(x), 12) + 0.0)
    return str(x)


def write_csv(path, header, columns, rows):
    """CSV with ``# key: value`` header lines; returns the text written."""
    buf = io.StringIO()
    for key, value in header.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_summary(path, summary):
    if path is None:
        return
    Path(path).with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")


def _reduced(cfg):
    graph = load_graph(cfg.graph)
    full = cluster_problem(graph, cfg.control, cfg.J)
    return graph, full, reduce_problem(full)


def cmd_reduce(cfg):
    t0 = time.perf_counter()
    graph, full, rp = _reduced(cfg)
    overlap = drift_control_overlap(rp) if len(rp.controls) == 1 else None
    rows = []
    mats = [("drift", rp.drift)] + [(f"control{j + 1}", c) for j, c in enumerate(rp.controls)]
    for name, m in mats:
        for (i, k), v in np.ndenumerate(m):
            rows.append((name, i, k, float(v.real), float(v.imag)))
    for name, vec in (("initial", rp.initial), ("target", rp.target)):
        for i, v in enumerate(vec):
            rows.append((name, i, "", float(v.real), float(v.imag)))
    header = {"command": "reduce", **cfg.echo(), "n_qubits": graph.n_qubits, "d": rp.d,
              "overlap": _fmt(overlap), "units": "energies in units of J (hbar = 1)"}
    write_csv(cfg.out, header, ["block", "row", "col", "re", "im"], rows)
    write_summary(cfg.out, {"command": "reduce", "config": cfg.echo(), "d": rp.d,
                            "overlap": overlap, "wall_time": time.perf_counter() - t0})
    print(f"{graph.label}: d={rp.d} overlap={_fmt(overlap)}", file=sys.stderr)
    return EXIT_OK


def _curve_point(rp, t, cfg):
    return optimize(rp, t / (2 * cfg.J), cfg.slices, cfg.grape_config()).best_fidelity


def cmd_curve(cfg):
    grid = parse_tgrid(cfg.tgrid)
    t0 = time.perf_counter()
    graph, _, rp = _reduced(cfg)
    if cfg.jobs > 1 and len(grid) > 1:
        fids = _map(partial(_curve_point, rp), grid, cfg)
        curve = list(zip(grid, fids))
    else:
        curve = fidelity_vs_time(rp, grid, cfg.slices, cfg.grape_config())
    header = {"command": "curve", **cfg.echo(), "d": rp.d, "time_unit": UNIT}
    write_csv(cfg.out, header, [f"T[{UNIT}]", "best_fidelity"], curve)
    write_summary(cfg.out, {"command": "curve", "config": cfg.echo(), "curve": curve,
                            "wall_time": time.perf_counter() - t0})
    return EXIT_OK


def table_row(name, cfg):
    """One row of the minimal-time table; failures are recorded, not raised."""
    t0 = time.perf_counter()
    row = TableRow(graph=name)
    try:
        graph = parse_graph(name)
        rp = reduce_problem(cluster_problem(graph, cfg.control, cfg.J))
        row.d = rp.d
        row.overlap = drift_control_overlap(rp) if len(rp.controls) == 1 else None
        t_min, res = minimal_time(rp, cfg.threshold, cfg.tmin_tol, cfg.slices, cfg.grape_config(),
                                  return_result=True)
        row.t_min = t_min
        row.fidelity = res.best_fidelity
    except (GraphParseError, ReductionError, OptimizationFailure, ValueError) as exc:
        row.status = f"failed: {exc}"
    row.wall_time = time.perf_counter() - t0
    return row


def _map(fn, items, cfg):
    if cfg.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(fn, items, [cfg] * len(items)))
    return [fn(item, cfg) for item in items]


def cmd_table(cfg, graphs):
    names = list(graphs) or list(TABLE_GRAPHS)
    rows = _map(table_row, names, cfg)
    header = {"command": "table", **cfg.echo(), "graphs": " ".join(names), "time_unit": UNIT}
    cols = ["graph", "d", "overlap", f"t_min[{UNIT}]", "fidelity", "status"]
    write_csv(cfg.out, header, cols,
              [(r.graph, r.d, r.overlap, r.t_min, r.fidelity, r.status) for r in rows])
    write_summary(cfg.out, {"command": "table", "config": cfg.echo(),
                            "rows": [asdict(r) for r in rows]})
    return EXIT_OK if all(r.status == "ok" for r in rows) else EXIT_FAILURE


def cmd_analytic(cfg):
    sol = analytic.optimal_solution()
    fid = analytic.verify_solution(sol)
    theta_star = analytic.optimal_angle(1001)
    thetas = np.linspace(analytic.THETA_MIN, analytic.THETA_MAX, 61)
    sweep = [(float(t), analytic.transfer_time(t), 2 * analytic.transfer_time(t)) for t in thetas]
    header = {
        "command": "analytic",
        "u[J]": _fmt(sol.u),
        "phi[rad]": _fmt(sol.phi),
        "T[1/J]": _fmt(sol.T),
        f"T[{UNIT}]": _fmt(2 * sol.T),
        "theta_star[rad]": _fmt(theta_star),
        "verify_fidelity": _fmt(fid),
    }
    write_csv(cfg.out, header, ["theta[rad]", "T[1/J]", f"T[{UNIT}]"], sweep)
    traj = analytic.optimal_trajectory(101)
    traj_path = None if cfg.out is None else str(Path(cfg.out).with_name(Path(cfg.out).stem + "_trajectory.csv"))
    if traj_path is not None:
        write_csv(traj_path, {"command": "analytic", "content": "Bloch trajectory of the optimal path; "
                              "last row is after the hard pulse", "time_unit": "1/J"},
                  ["t[1/J]", "x", "y", "z"], traj.tolist())
    write_summary(cfg.out, {"command": "analytic", "u": sol.u, "phi": sol.phi, "T": sol.T,
                            "T_min_units_1_over_2J": 2 * sol.T, "theta_star": theta_star,
                            "verify_fidelity": fid, "trajectory_file": traj_path})
    return EXIT_OK


def cmd_pulses(cfg, zero_pulse=False):
    if cfg.T is None:
        raise UsageError("pulses needs --T (duration in units of 1/(2J))")
    if not cfg.T > 0:
        raise UsageError("--T must be positive")
    t0 = time.perf_counter()
    graph, full, rp = _reduced(cfg)
    T = cfg.T / (2 * cfg.J)
    m = len(rp.controls)
    if zero_pulse:
        pulse = PulseSequence.zeros(T, cfg.slices, m)
        fid = propagate(pulse, rp)[1]
    elif cfg.init == "zero":
        config = replace(cfg.grape_config(), restarts=1)
        res = optimize(rp, T, cfg.slices, config, initial_amplitudes=np.zeros((cfg.slices, m)))
        pulse, fid = res.best_pulse, res.best_fidelity
    else:
        res = optimize(rp, T, cfg.slices, cfg.grape_config())
        pulse, fid = res.best_pulse, res.best_fidelity
    header = {"command": "pulses", **cfg.echo(), "zero_pulse": zero_pulse, "d": rp.d,
              "time_unit": "1/J", "amplitude_unit": "J (angular frequency)",
              "achieved_fidelity": _fmt(fid)}
    if fid < cfg.threshold:
        header["warning"] = f"fidelity {fid:.6f} below threshold {cfg.threshold}"
    cols = ["slice_start[1/J]", "duration[1/J]"] + [f"u{j + 1}" for j in range(m)]
    rows = [(float(s), pulse.dt, *map(float, a)) for s, a in zip(pulse.slice_starts(), pulse.amplitudes)]
    write_csv(cfg.out, header, cols, rows)
    write_summary(cfg.out, {"command": "pulses", "config": cfg.echo(), "fidelity": fid,
                            "wall_time": time.perf_counter() - t0})
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--graph", help="named graph (K3, C4, L3, G2x3) or edge-list file")
    common.add_argument("--control", choices=["local", "global"])
    common.add_argument("--J", type=float)
    common.add_argument("--slices", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--threshold", type=float)
    common.add_argument("--tmin-tol", dest="tmin_tol", type=float)
    common.add_argument("--tgrid", help="a:b:step or comma list, units of 1/(2J)")
    common.add_argument("--T", type=float, help="pulse duration, units of 1/(2J)")
    common.add_argument("--init", choices=["random", "zero"])
    common.add_argument("--max-iterations", dest="max_iterations", type=int)
    common.add_argument("--method", choices=["lbfgs", "gradient"],
                        help="ascent direction; plain gradient keeps exact symmetries to round-off")
    common.add_argument("--jobs", type=int, help="worker processes for table rows and curve points")
    common.add_argument("--out", help="output CSV path; a .json summary is written alongside")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="clustergrape",
                                     description="Time-optimal cluster-state preparation")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("reduce", parents=[common], help="invariant-subspace reduction")
    sub.add_parser("curve", parents=[common], help="best fidelity versus duration")
    p_table = sub.add_parser("table", parents=[common], help="minimal-time table")
    p_table.add_argument("graphs", nargs="*", help=f"graph names (default: {' '.join(TABLE_GRAPHS)})")
    sub.add_parser("analytic", parents=[common], help="closed-form three-qubit solution")
    p_pulses = sub.add_parser("pulses", parents=[common], help="optimized pulse at one duration")
    p_pulses.add_argument("--zero-pulse", action="store_true",
                          help="skip optimization and emit the all-zero pulse")
    return parser


def resolve_config(args):
    """Defaults, then the config file, then explicit flags."""
    values = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(RunConfig)}
        unknown = set(loaded) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "reduce":
            return cmd_reduce(cfg)
        if args.command == "curve":
            return cmd_curve(cfg)
        if args.command == "table":
            return cmd_table(cfg, args.graphs)
        if args.command == "analytic":
            return cmd_analytic(cfg)
        return cmd_pulses(cfg, zero_pulse=args.zero_pulse)
    except (UsageError, GraphParseError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReductionError, OptimizationFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
