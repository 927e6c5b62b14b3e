"""Command-line front end.

    dualprobe forward      --config cfg.json --out run/
    dualprobe probe        --config cfg.json --out run/
    dualprobe reconstruct  --config cfg.json --out run/ [--data run/]
    dualprobe sweep        --config cfg.json --out run/
    dualprobe noise-study  --config cfg.json --out run/

Exit status: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .domain import InclusionLayout, evaluate_index
from .errors import ConfigError, DualProbeError, FitDomainError, InterpolationDomainError
from .experiments import (ReportRow, SweepSummary, compare_with_series, run_noise_study,
                          run_rate_sweep)
from .foldy_lax import ForwardModel, MeasurementBundle, _key
from .inversion import ProbePairRecord, reconstruct_index_map
from .io import ExperimentConfig, fmt, load_config, read_far_field, write_far_field
from .solver import LippmannSchwingerSolver

log = logging.getLogger("dualprobe")

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2
MANIFEST = "manifest.json"


# --------------------------------------------------------------------------
# report writing
# --------------------------------------------------------------------------

class Reporter:
    """Deterministic CSV/JSON writer; ``timestamp=False`` drops the
    time-dependent columns so report bodies are byte-identical across runs."""

    TIME_COLUMNS = ("wall_time", "timestamp")

    def __init__(self, out: Path, timestamp: bool = True):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.timestamp = timestamp
        self.stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

    def _cell(self, v) -> str:
        if v is None:
            return ""
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        if isinstance(v, (list, tuple)):
            return ";".join(self._cell(x) for x in v)
        return str(v)

    def table(self, name: str, header: Sequence[str], rows: Sequence[Sequence]) -> Path:
        keep = [k for k, col in enumerate(header)
                if self.timestamp or col not in self.TIME_COLUMNS]
        path = self.out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([header[k] for k in keep])
            for row in rows:
                w.writerow([self._cell(row[k]) for k in keep])
        return path

    def json(self, name: str, payload: dict, wall_time: Optional[float] = None) -> Path:
        payload = dict(payload)
        if self.timestamp:
            payload["timestamp"] = self.stamp
            if wall_time is not None:
                payload["wall_time"] = wall_time
        path = self.out / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
        return path


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    raise TypeError(type(v))


ROW_HEADER = ["experiment", "a", "h", "t", "q1", "q2", "seed", "pair", "n_hat_re", "n_hat_im",
              "n_error", "green_error", "imag_abs", "l_v", "regime", "error", "wall_time",
              "timestamp"]

SUMMARY_HEADER = ["experiment", "h", "t", "q1", "q2", "regime", "a_values", "median_n_error",
                  "median_green_error", "median_imag_abs", "n_slope", "expected_n_slope",
                  "n_slope_within_0.15", "green_slope", "expected_green_slope",
                  "n_error_decreasing", "imag_decreasing", "timestamp"]


def _row_cells(r: ReportRow, stamp: str) -> list:
    nh = r.n_hat
    return [r.experiment, r.a, r.h, r.t, r.q1, r.q2, r.seed, r.pair,
            None if nh is None else nh.real, None if nh is None else nh.imag,
            r.n_error, r.green_error, r.imag_abs, r.l_v, r.regime, r.error, r.wall_time, stamp]


def _summary_cells(s: SweepSummary, stamp: str) -> list:
    ok = None if s.n_slope is None else abs(s.n_slope - s.expected_n_slope) <= 0.15
    return [s.experiment, s.h, s.t, s.q1, s.q2, s.regime, s.a_values, s.median_n_error,
            s.median_green_error, s.median_imag, s.n_slope, s.expected_n_slope, ok,
            s.green_slope, s.expected_green_slope, s.decreasing, s.imag_decreasing, stamp]


RECORD_HEADER = ["pair", "z1_x", "z1_y", "z1_z", "z2_x", "z2_y", "z2_z", "green_re", "green_im",
                 "l_v", "n_hat_re", "n_hat_im", "imag_abs", "error"]
TRUTH_HEADER = ["true_n", "n_error", "true_green_re", "true_green_im", "green_error"]


def _record_cells(rec: ProbePairRecord, truth: bool) -> list:
    g = rec.green.value if rec.green else None
    n = rec.estimate.value if rec.estimate else None
    row = [rec.index, *rec.z1, *rec.z2,
           None if g is None else g.real, None if g is None else g.imag,
           rec.green.l_v if rec.green else None,
           None if n is None else n.real, None if n is None else n.imag,
           rec.estimate.imag_abs if rec.estimate else None, rec.error]
    if truth:
        tg = rec.true_green
        row += [rec.true_n, rec.n_error, None if tg is None else tg.real,
                None if tg is None else tg.imag, rec.green_error]
    return row


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def _model(cfg: ExperimentConfig) -> ForwardModel:
    medium = cfg.medium.build()
    waves = cfg.waves.build()
    solver = LippmannSchwingerSolver(medium, waves.kappa, **cfg.solver.solver_options())
    return ForwardModel(medium, waves, solver=solver, min_pair_cells=cfg.solver.min_pair_cells,
                        green_model=cfg.solver.green_model)


def _medium_description(cfg: ExperimentConfig) -> dict:
    return cfg.medium.model_dump(exclude_none=True)


def cmd_forward(cfg: ExperimentConfig, rep: Reporter, args) -> int:
    t0 = time.perf_counter()
    model = _model(cfg)
    V = model.background()
    write_far_field(V, rep.out / "background.csv", {"medium": _medium_description(cfg)})
    s = model.solver
    diag = {
        "experiment": cfg.id,
        "grid_shape": list(s.grid.shape),
        "cell_size": s.grid.h,
        "zero_contrast": bool(s.zero_contrast),
        "solves": [{"theta": sol.source.tolist(), "iterations": sol.iterations,
                    "residual": sol.residual} for sol in s._plane_cache.values()],
    }
    if cfg.validation.mie:
        if cfg.medium.type != "constant-ball":
            raise ConfigError("validation.mie requires a constant-ball medium")
        cmp = compare_with_series(s, cfg.medium.n0, cfg.medium.radius, cfg.medium.center,
                                  model.waves.directions[0], cfg.validation.observation_grid)
        rows = [[*x, a.real, a.imag, b.real, b.imag, abs(a - b)]
                for x, a, b in zip(cmp.directions, cmp.volume, cmp.series)]
        rep.table("mie_validation.csv",
                  ["xhat_x", "xhat_y", "xhat_z", "volume_re", "volume_im",
                   "series_re", "series_im", "abs_gap"], rows)
        diag["mie_incidence"] = cmp.incidence.tolist()
        diag["mie_max_relative_gap"] = cmp.max_relative_gap
        print(f"mie max relative gap: {cmp.max_relative_gap:.6e}")
    rep.json("forward_diagnostics.json", diag, time.perf_counter() - t0)
    print(f"wrote {rep.out / 'background.csv'}")
    return EXIT_OK


def _write_bundle(bundle: MeasurementBundle, layout: InclusionLayout, model: ForwardModel,
                  out: Path, cfg: ExperimentConfig) -> dict:
    common = {"a": layout.a, "h": layout.h, "t": layout.t}
    write_far_field(bundle.background, out / "background.csv",
                    {"medium": _medium_description(cfg)})
    manifest = {"kappa": bundle.kappa, **common, "background": "background.csv",
                "residual_c": cfg.residual_c, "seed": cfg.seed, "singles": [], "pairs": []}
    for k, z in enumerate(layout.centers()):
        name = f"single_{k:03d}.csv"
        write_far_field(bundle.single(z), out / name, common)
        manifest["singles"].append({"file": name, "center": np.asarray(z).tolist()})
    for m, (z1, z2) in enumerate(layout.pairs):
        name = f"pair_{m:03d}.csv"
        g = bundle.true_greens[m]
        truth = {"true_green": [g.real, g.imag], "surrogate_green": bundle.surrogate_flags[m],
                 "true_n": float(evaluate_index(model.medium, z1)) if cfg.truth else None}
        write_far_field(bundle.pairs[m], out / name, {**common, **truth})
        manifest["pairs"].append({"file": name, "z1": np.asarray(z1).tolist(),
                                  "z2": np.asarray(z2).tolist(), **truth})
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def cmd_probe(cfg: ExperimentConfig, rep: Reporter, args) -> int:
    model = _model(cfg)
    layout = cfg.layout.build()
    bundle = model.synthesize(layout, cfg.residual_c, cfg.seed)
    manifest = _write_bundle(bundle, layout, model, rep.out, cfg)
    print(f"wrote {len(manifest['singles'])} single-inclusion and "
          f"{len(manifest['pairs'])} pair matrices to {rep.out}")
    return EXIT_OK


def load_bundle(data_dir) -> tuple:
    """Rebuild ``(bundle, layout, true_n list)`` from a ``probe`` output dir."""
    data_dir = Path(data_dir)
    try:
        manifest = json.loads((data_dir / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{data_dir / MANIFEST}: {exc}") from None
    background = read_far_field(data_dir / manifest["background"])
    a, h, t = manifest["a"], manifest["h"], manifest["t"]
    pairs = [(np.asarray(p["z1"], float), np.asarray(p["z2"], float)) for p in manifest["pairs"]]
    layout = InclusionLayout(tuple(pairs), a, h, t, d_min=0.0, d_max=np.inf, strict=False)
    bundle = MeasurementBundle(manifest["kappa"], background.directions, a, h, t, background)
    for entry in manifest["singles"]:
        bundle.singles[_key(entry["center"])] = read_far_field(data_dir / entry["file"])
    for p in manifest["pairs"]:
        bundle.pairs.append(read_far_field(data_dir / p["file"]))
        if p.get("true_green") is not None:
            bundle.true_greens.append(complex(*p["true_green"]))
        bundle.surrogate_flags.append(bool(p.get("surrogate_green", False)))
    true_n = [p.get("true_n") for p in manifest["pairs"]]
    return bundle, layout, true_n


def cmd_reconstruct(cfg: ExperimentConfig, rep: Reporter, args) -> int:
    t0 = time.perf_counter()
    data_dir = args.data or cfg.data.dir
    if data_dir:
        if args.data is None and args.config:
            data_dir = Path(args.config).parent / data_dir
        bundle, layout, true_n = load_bundle(data_dir)
        records = reconstruct_index_map(bundle, layout)
        for rec, n in zip(records, true_n):
            rec.true_n = n
        if not cfg.truth:
            for rec in records:
                rec.true_n, rec.true_green = None, None
    else:
        model = _model(cfg)
        layout = cfg.layout.build()
        bundle = model.synthesize(layout, cfg.residual_c, cfg.seed)
        records = reconstruct_index_map(bundle, layout, model.medium if cfg.truth else None)
        if not cfg.truth:
            for rec in records:
                rec.true_green = None
    truth = cfg.truth and any(r.true_n is not None for r in records)
    header = RECORD_HEADER + (TRUTH_HEADER if truth else [])
    rep.table("reconstruction.csv", header, [_record_cells(r, truth) for r in records])
    failed = [r for r in records if not r.ok]
    rep.json("reconstruct_summary.json", {
        "experiment": cfg.id, "pairs": len(records), "failed": len(failed),
        "max_n_error": max((r.n_error for r in records if r.n_error is not None), default=None),
    }, time.perf_counter() - t0)
    for r in records:
        if r.ok:
            print(f"pair {r.index}: n_hat = {r.estimate.value:.6f}"
                  + (f"  |error| = {r.n_error:.3e}" if r.n_error is not None else ""))
        else:
            print(f"pair {r.index}: FAILED ({r.error})")
    return EXIT_NUMERICAL if failed and len(failed) == len(records) else EXIT_OK


def _write_sweep(rep: Reporter, prefix: str, rows, summaries) -> None:
    rep.table(f"{prefix}_rows.csv", ROW_HEADER, [_row_cells(r, rep.stamp) for r in rows])
    rep.table(f"{prefix}_summary.csv", SUMMARY_HEADER,
              [_summary_cells(s, rep.stamp) for s in summaries])
    for s in summaries:
        q = "" if s.q1 is None else f" q1={s.q1:g} q2={s.q2:g}"
        slope = "n/a" if s.n_slope is None else f"{s.n_slope:.3f}"
        print(f"h={s.h:g} t={s.t:g}{q} [{s.regime}] n-error slope {slope} "
              f"(expected {s.expected_n_slope:g}); decreasing={s.decreasing}")


def cmd_sweep(cfg: ExperimentConfig, rep: Reporter, args) -> int:
    model = _model(cfg)
    sw = cfg.sweep
    rows, summaries = run_rate_sweep(
        model, cfg.layout.anchors, sw.a_values, sw.ht, [cfg.seed + s for s in sw.seeds],
        sw.residual_c, cfg.layout.axis, cfg.layout.d_factor, cfg.id, args.threads)
    _write_sweep(rep, "sweep", rows, summaries)
    return EXIT_OK


def cmd_noise_study(cfg: ExperimentConfig, rep: Reporter, args) -> int:
    model = _model(cfg)
    regimes = cfg.noise.regimes or [(1.8, 0.9), (1.2, 0.9)]
    rows, summaries = run_noise_study(
        model, cfg.layout.anchors, cfg.layout.h, cfg.layout.t, regimes, cfg.sweep.a_values,
        [cfg.seed + s for s in cfg.sweep.seeds], cfg.noise.t_tilde, cfg.sweep.residual_c,
        cfg.layout.axis, cfg.layout.d_factor, cfg.id, args.threads)
    _write_sweep(rep, "noise", rows, summaries)
    return EXIT_OK


COMMANDS = {
    "forward": cmd_forward,
    "probe": cmd_probe,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
    "noise-study": cmd_noise_study,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--seed", type=int, default=None, help="base random seed (overrides config)")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit timestamp/wall-time columns (byte-stable reports)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    parser = argparse.ArgumentParser(prog="dualprobe",
                                     description="Dual-probe index reconstruction toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "reconstruct":
            p.add_argument("--data", default=None, help="directory written by `probe`")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = cfg.model_copy(update={"seed": args.seed})
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        rep = Reporter(Path(args.out), timestamp=not args.no_timestamp)
        return COMMANDS[args.command](cfg, rep, args)
    except (DualProbeError, FitDomainError, InterpolationDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
