"""Experiment orchestration: flat key-value configs, seeded sweeps, CSV output.

A config describes one experiment: a target subcommand plus a parameter
grid.  Grid points run in a fixed lexicographic order (optionally on a
thread pool; rows are buffered and written in grid order), so a spec maps
to byte-identical output files at any parallelism.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import det_channel, gaussian_sim, regime
from .lattice_geometry import ShapingShell, codebook_to_csv, find_shift
from .zp_codes import design_lattice, fundamental_volume, lattice_to_text

ENV_PREFIX = "ICALIGN_"

SUBCOMMANDS = ("regime", "simulate", "det", "lattice")

# Keys that may carry comma-separated lists, in grid (outer..inner) order.
SWEEP_KEYS = {
    "regime": ("K", "P", "a2"),
    "simulate": ("a2", "P", "n", "R_frac"),
    "det": ("K", "n_d", "n_c"),
    "lattice": (),
}

_COMMON_KEYS = ("name", "subcommand", "seed", "trials", "out")
ALLOWED_KEYS = {
    "regime": _COMMON_KEYS + ("K", "P", "a2"),
    "simulate": _COMMON_KEYS
    + ("K", "a2", "P", "Pprime", "n", "p", "R", "R_frac", "Rprime", "mode", "shift_trials"),
    "det": _COMMON_KEYS + ("K", "n_d", "n_c"),
    "lattice": _COMMON_KEYS + ("n", "p", "P", "Pprime", "R", "Rprime", "shift_trials"),
}

REQUIRED_KEYS = {
    "regime": ("K", "P", "a2"),
    "simulate": ("K", "a2", "P", "n"),
    "det": ("K", "n_d", "n_c"),
    "lattice": ("n", "P", "R"),
}

_INT_KEYS = {"seed", "trials", "K", "n", "p", "shift_trials", "n_d", "n_c"}
_FLOAT_KEYS = {"P", "a2", "Pprime", "R", "R_frac", "Rprime"}

CSV_COLUMNS = {
    "regime": ["K", "P", "a2", "two_user", "joint_decode", "alignment",
               "capacity", "theorem2_rate", "label", "rate"],
    "simulate": ["K", "a2", "P", "Pprime", "n", "p", "R", "Rprime", "mode",
                 "trials", "seed", "codebook_size", "message_count", "shortfall",
                 "intf_err_rate", "msg_err_rate",
                 "intf_ci_half_width", "msg_ci_half_width"],
    "det": ["K", "n_d", "n_c", "ratio", "zero_error"],
    "lattice": ["p", "n", "k", "gamma", "volume", "R", "Rprime",
                "codebook_size", "shortfall"],
}

SWEEP_CSV_COLUMNS = ["P", "two_user", "joint_decode_K", "alignment",
                     "capacity", "theorem2_rate"]

BLOCK_CSV_COLUMNS = ["grid_index", "trial_block", "user",
                     "intf_err_rate", "msg_err_rate", "ci_half_width"]

SIM_BLOCK_COUNT = 10


class ConfigError(ValueError):
    """Malformed or semantically invalid experiment config."""


class ExperimentError(RuntimeError):
    """A grid point failed; message carries the grid coordinates."""


@dataclass
class ExperimentSpec:
    name: str
    subcommand: str
    params: dict
    trials: int
    seed: int
    out_dir: str


def _convert(key: str, raw: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            if key == "Rprime" and raw == "auto":
                return "auto"
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {raw!r}") from None


def parse_config(text: str) -> ExperimentSpec:
    """Parse `key = value` lines (lists comma-separated, # comments allowed)."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = (value, lineno)

    if "subcommand" not in raw:
        raise ConfigError("missing required key 'subcommand'")
    sub = raw["subcommand"][0]
    if sub not in SUBCOMMANDS:
        raise ConfigError(
            f"line {raw['subcommand'][1]}: unknown subcommand {sub!r}"
        )
    allowed = ALLOWED_KEYS[sub]
    sweepable = SWEEP_KEYS[sub]

    params: dict = {}
    for key, (value, lineno) in raw.items():
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for subcommand {sub!r}")
        if "," in value:
            if key not in sweepable:
                raise ConfigError(f"line {lineno}: key {key!r} does not accept a list")
            items = [v.strip() for v in value.split(",")]
            if not all(items):
                raise ConfigError(f"line {lineno}: empty list element in {key!r}")
            params[key] = [_convert(key, v, lineno) for v in items]
        else:
            v = _convert(key, value, lineno)
            params[key] = [v] if key in sweepable else v

    for key in REQUIRED_KEYS[sub]:
        if key not in params:
            raise ConfigError(f"missing required key {key!r} for subcommand {sub!r}")
    if sub == "simulate":
        if ("R" in params) == ("R_frac" in params):
            raise ConfigError("simulate needs exactly one of 'R' or 'R_frac'")
        mode = params.get("mode", "two_stage")
        if mode not in gaussian_sim.MODES:
            raise ConfigError(f"unknown mode {mode!r}")
        if mode == "no_interference" and any(a2 != 0 for a2 in params["a2"]):
            raise ConfigError("no_interference mode requires a2 = 0")

    name = params.pop("name", "experiment")
    params.pop("subcommand")
    trials = params.pop("trials", 1000)
    seed = params.pop("seed", 0)
    out_dir = params.pop("out", ".")
    return ExperimentSpec(
        name=name, subcommand=sub, params=params,
        trials=trials, seed=seed, out_dir=out_dir,
    )


def grid_points(spec: ExperimentSpec) -> list[dict]:
    """Cartesian product over the sweep keys, lexicographic in grid order."""
    points = [dict(spec.params)]
    for key in SWEEP_KEYS[spec.subcommand]:
        if key not in spec.params:
            continue
        values = spec.params[key]
        points = [dict(pt, **{key: v}) for pt in points for v in values]
    return points


def _resolve_rates(params: dict, P: float) -> tuple[float, float]:
    c1 = regime.interference_free_capacity(P)
    R = params["R"] if "R" in params else params["R_frac"] * c1
    rp = params.get("Rprime", "auto")
    if rp == "auto":
        # midpoint of the rate chain; independent of a so paired sweeps
        # over a2 share one lattice
        rp = (R + c1) / 2.0
        if rp <= R:
            rp = R + 0.05
    return R, rp


def _simulate_codebook_key(params: dict, seed: int):
    P = params["P"]
    R, Rprime = _resolve_rates(params, P)
    return (params["n"], P, params.get("Pprime", P / 4.0), params.get("p", 5),
            R, Rprime, params.get("shift_trials", 64), seed)


def _build_codebook(key):
    n, P, Pprime, p, R, Rprime, shift_trials, seed = key
    shell = ShapingShell(n=n, P=P, P_prime=Pprime)
    lat = design_lattice(n, Rprime, shell.volume(), p=p, seed=seed)
    shift, cb = find_shift(lat, shell, R, trials=shift_trials, seed=seed)
    return cb


def _simulate_point(params: dict, spec: ExperimentSpec, cb) -> tuple[dict, gaussian_sim.SimulationReport]:
    P = params["P"]
    R, Rprime = _resolve_rates(params, P)
    a = math.sqrt(params["a2"])
    config = gaussian_sim.ChannelConfig(
        K=params["K"], a=a, P=P, n=params["n"], seed=spec.seed
    )
    mode = params.get("mode", "two_stage")
    report = gaussian_sim.run_monte_carlo(
        config, cb, spec.trials, mode=mode,
        block_count=min(SIM_BLOCK_COUNT, spec.trials),
    )
    row = {
        "K": params["K"], "a2": params["a2"], "P": P,
        "Pprime": params.get("Pprime", P / 4.0), "n": params["n"],
        "p": params.get("p", 5), "R": R, "Rprime": cb.R_prime,
        "mode": mode, "trials": spec.trials, "seed": spec.seed,
        "codebook_size": report.codebook_size,
        "message_count": report.message_count,
        "shortfall": cb.shortfall,
        "intf_err_rate": float(np.mean(report.intf_error_rate)),
        "msg_err_rate": float(np.mean(report.msg_error_rate)),
        "intf_ci_half_width": float(np.mean(report.intf_ci_half_width)),
        "msg_ci_half_width": float(np.mean(report.msg_ci_half_width)),
    }
    return row, report


def _regime_point(params: dict) -> dict:
    rep = regime.classify(params["K"], params["P"], math.sqrt(params["a2"]))
    return {
        "K": params["K"], "P": params["P"], "a2": params["a2"],
        "two_user": rep.thresholds["two_user"],
        "joint_decode": rep.thresholds["joint_decode"],
        "alignment": rep.thresholds["alignment"],
        "capacity": regime.interference_free_capacity(params["P"]),
        "theorem2_rate": regime.theorem2_rate(params["P"]),
        "label": rep.label, "rate": rep.rate,
    }


def _det_point(params: dict) -> dict:
    cfg = det_channel.DetChannelConfig(K=params["K"], n_d=params["n_d"], n_c=params["n_c"])
    return {
        "K": cfg.K, "n_d": cfg.n_d, "n_c": cfg.n_c,
        "ratio": cfg.gdof_ratio,
        "zero_error": det_channel.det_capacity_check(cfg),
    }


def _lattice_point(params: dict, spec: ExperimentSpec) -> tuple[dict, object]:
    P = params["P"]
    R, Rprime = _resolve_rates(params, P)
    shell = ShapingShell(n=params["n"], P=P, P_prime=params.get("Pprime", P / 4.0))
    lat = design_lattice(params["n"], Rprime, shell.volume(), p=params.get("p", 5),
                         seed=spec.seed)
    shift, cb = find_shift(lat, shell, R, trials=params.get("shift_trials", 64),
                           seed=spec.seed)
    row = {
        "p": lat.p, "n": lat.n, "k": lat.k, "gamma": lat.gamma,
        "volume": fundamental_volume(lat), "R": R, "Rprime": cb.R_prime,
        "codebook_size": len(cb), "shortfall": cb.shortfall,
    }
    return row, cb


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", text=True)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def run_experiment(spec: ExperimentSpec, threads: int = 1):
    """Execute the grid; write CSV (+ summary JSON) atomically in grid order.

    Returns (rows, written_paths).  Failures raise ExperimentError naming
    the grid point.
    """
    points = grid_points(spec)
    if not points:
        raise ConfigError("empty parameter grid")
    out = spec.out_dir
    base = os.path.join(out, f"{spec.name}_{spec.subcommand}")
    written: list[str] = []

    reports: list = [None] * len(points)
    extras: list = [None] * len(points)

    def run_point(idx: int):
        params = points[idx]
        try:
            if spec.subcommand == "regime":
                return _regime_point(params)
            if spec.subcommand == "det":
                return _det_point(params)
            if spec.subcommand == "simulate":
                row, report = _simulate_point(params, spec, codebooks[_simulate_codebook_key(params, spec.seed)])
                reports[idx] = report
                return row
            row, cb = _lattice_point(params, spec)
            extras[idx] = cb
            return row
        except Exception as exc:
            raise ExperimentError(f"grid point {idx} {params}: {exc}") from exc

    codebooks = {}
    if spec.subcommand == "simulate":
        # built serially so shift search is independent of thread schedule
        for params in points:
            key = _simulate_codebook_key(params, spec.seed)
            if key not in codebooks:
                codebooks[key] = _build_codebook(key)

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_point, range(len(points))))
    else:
        rows = [run_point(i) for i in range(len(points))]

    csv_path = base + ".csv"
    _atomic_write(csv_path, _csv_text(CSV_COLUMNS[spec.subcommand], rows))
    written.append(csv_path)

    summary = {
        "name": spec.name,
        "subcommand": spec.subcommand,
        "seed": spec.seed,
        "trials": spec.trials,
        "grid_size": len(points),
        "rows": [{k: row[k] for k in CSV_COLUMNS[spec.subcommand]} for row in rows],
    }
    if spec.subcommand == "simulate":
        summary["reports"] = [r.to_dict() for r in reports]
        block_rows = []
        for idx, report in enumerate(reports):
            for r in gaussian_sim.report_csv_rows(report):
                block_rows.append({"grid_index": idx, **r})
        blocks_path = base + "_blocks.csv"
        _atomic_write(blocks_path, _csv_text(BLOCK_CSV_COLUMNS, block_rows))
        written.append(blocks_path)
    json_path = base + ".json"
    _atomic_write(json_path, json.dumps(summary, sort_keys=True, indent=1) + "\n")
    written.append(json_path)

    if spec.subcommand == "lattice":
        for idx, cb in enumerate(extras):
            tag = f"_{idx}" if len(extras) > 1 else ""
            cb_path = os.path.join(out, f"{spec.name}_codebook{tag}.csv")
            os.makedirs(out, exist_ok=True)
            codebook_to_csv(cb, cb_path)
            lat_path = os.path.join(out, f"{spec.name}_lattice{tag}.txt")
            _atomic_write(lat_path, lattice_to_text(cb.lattice))
            written.extend([cb_path, lat_path])

    return rows, written


def emit_plot_data(rows: list[dict], x_column: str, y_columns, group_by: str | None = None) -> str:
    """Two-column plot blocks, one per y column (and per group value).

    Output is plain text: a caption comment, then `# group:` labelled
    blocks of `x y` pairs separated by blank lines.
    """
    if not rows:
        raise ValueError("no rows to plot")
    if isinstance(y_columns, str):
        y_columns = [y_columns]
    for col in [x_column, *y_columns] + ([group_by] if group_by else []):
        if col not in rows[0]:
            raise ValueError(f"missing column {col!r}")
    caption = f"{','.join(y_columns)} vs {x_column}"
    if group_by:
        caption += f" grouped by {group_by}"
    caption += f" ({len(rows)} rows)"
    out = [f"# caption: {caption}"]
    if group_by:
        groups = []
        for row in rows:
            if row[group_by] not in groups:
                groups.append(row[group_by])
        parts = [(f"{y}/{g}" if len(y_columns) > 1 else str(g),
                  [r for r in rows if r[group_by] == g], y)
                 for y in y_columns for g in groups]
    else:
        parts = [(y, rows, y) for y in y_columns]
    for label, part_rows, y in parts:
        out.append(f"# group: {label}")
        for row in part_rows:
            out.append(f"{_fmt(row[x_column])} {_fmt(row[y])}")
        out.append("")
    return "\n".join(out) + "\n"


def regime_sweep_rows(K: int, P_min: float, P_max: float, steps: int) -> list[dict]:
    """Threshold table on a linear P grid (columns fixed by SWEEP_CSV_COLUMNS)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    Ps = np.linspace(P_min, P_max, steps) if steps > 1 else np.array([P_min])
    rows = []
    for P in Ps:
        P = float(P)
        rows.append({
            "P": P,
            "two_user": regime.two_user_threshold(P),
            "joint_decode_K": regime.joint_decode_threshold(K, P),
            "alignment": regime.alignment_threshold(P),
            "capacity": regime.interference_free_capacity(P),
            "theorem2_rate": regime.theorem2_rate(P),
        })
    return rows


# ---------------------------------------------------------------------------
# command line


def _env_default(name: str, cast, fallback):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return fallback
    return cast(raw)


def _add_common_flags(sp):
    sp.add_argument("--config", help="experiment config file")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--trials", type=int, default=None)


def _load_spec(args) -> ExperimentSpec:
    with open(args.config) as fh:
        spec = parse_config(fh.read())
    if spec.subcommand != args.command:
        raise ConfigError(
            f"config subcommand {spec.subcommand!r} does not match {args.command!r}"
        )
    if args.seed is not None:
        spec.seed = args.seed
    else:
        spec.seed = _env_default("SEED", int, spec.seed)
    if args.trials is not None:
        spec.trials = args.trials
    else:
        spec.trials = _env_default("TRIALS", int, spec.trials)
    if args.out is not None:
        spec.out_dir = args.out
    else:
        spec.out_dir = _env_default("OUT", str, spec.out_dir)
    return spec


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    return _env_default("THREADS", int, 1)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="icalign",
        description="Lattice interference-alignment workbench",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("regime", help="threshold calculators")
    _add_common_flags(sp)
    sp.add_argument("--K", type=int, default=3)
    sp.add_argument("--P", type=float)
    sp.add_argument("--a2", type=float)
    sp.add_argument("--sweep", nargs=3, metavar=("P_MIN", "P_MAX", "STEPS"))

    sp = subs.add_parser("simulate", help="Monte Carlo channel simulation")
    _add_common_flags(sp)

    sp = subs.add_parser("det", help="deterministic bit-level channel")
    _add_common_flags(sp)
    sp.add_argument("--K", type=int)
    sp.add_argument("--nd", type=int)
    sp.add_argument("--nc", type=int)

    sp = subs.add_parser("lattice", help="design a lattice codebook, export CSV")
    _add_common_flags(sp)

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExperimentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "regime":
        if args.sweep:
            p_min, p_max = float(args.sweep[0]), float(args.sweep[1])
            rows = regime_sweep_rows(args.K, p_min, p_max, int(args.sweep[2]))
            text = _csv_text(SWEEP_CSV_COLUMNS, rows)
            out = args.out or _env_default("OUT", str, None)
            if out:
                path = os.path.join(out, "regime_sweep.csv")
                _atomic_write(path, text)
                print(path)
            else:
                print(text, end="")
            return 0
        if args.config:
            spec = _load_spec(args)
            _, written = run_experiment(spec, threads=_threads(args))
            for path in written:
                print(path)
            return 0
        if args.P is None or args.a2 is None:
            raise ConfigError("regime needs --sweep, --config, or both --P and --a2")
        print(regime.format_report(regime.classify(args.K, args.P, math.sqrt(args.a2))))
        return 0

    if args.command == "det" and not args.config:
        if args.K is None or args.nd is None or args.nc is None:
            raise ConfigError("det needs --config or all of --K --nd --nc")
        cfg = det_channel.DetChannelConfig(K=args.K, n_d=args.nd, n_c=args.nc)
        print(det_channel.level_diagram(cfg))
        print(f"zero-error at full rate: {det_channel.det_capacity_check(cfg)}")
        return 0

    if not args.config:
        raise ConfigError(f"{args.command} requires --config")
    spec = _load_spec(args)
    _, written = run_experiment(spec, threads=_threads(args))
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
