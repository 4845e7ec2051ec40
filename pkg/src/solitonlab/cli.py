"""Command line entry point.

``solitonlab <command> --config file.json --out dir``. Exit status is 0 on
success, 2 when a stability run diverged and 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex
from .grid import Field, GridSpec, read_csv, write_csv
from .modulation import track_breather, track_solitons
from .profiles import (
    BreatherParams,
    SolitonParams,
    breather_profile,
    complex_soliton,
    soliton_profile,
)
from .solver import EvolveConfig, evolve

log = logging.getLogger("solitonlab")

COMMANDS = ("profile", "evolve", "spectrum", "modulate", "backlund", "collide", "stability")
EXIT_OK, EXIT_ERROR, EXIT_DIVERGED = 0, 1, 2


def grid_from(cfg: dict, default=(100.0, 2048)) -> GridSpec:
    g = cfg.get("grid", {})
    return GridSpec(
        float(g.get("domain_length", default[0])),
        int(g.get("num_points", default[1])),
        float(g.get("dealias_fraction", 2.0 / 3.0)),
    )


def build_profile(spec: dict, grid: GridSpec) -> Field:
    """Profile from a JSON block; ``sum`` adds a list of blocks."""
    kind = spec.get("kind", "soliton")
    if kind == "soliton":
        return soliton_profile(
            SolitonParams(int(spec["p"]), float(spec.get("c", 1.0)), float(spec.get("x0", 0.0))), grid
        )
    if kind == "breather":
        bp = BreatherParams(
            float(spec["alpha"]), float(spec["beta"]), float(spec.get("x1", 0.0)), float(spec.get("x2", 0.0))
        )
        return breather_profile(bp, float(spec.get("t", 0.0)), grid)
    if kind == "complex_soliton":
        bp = BreatherParams(
            float(spec["alpha"]), float(spec["beta"]), float(spec.get("x1", 0.0)), float(spec.get("x2", 0.0))
        )
        return complex_soliton(bp, grid)[1]
    if kind == "sum":
        parts = [build_profile(s, grid) for s in spec["parts"]]
        return Field(grid, sum(f.values for f in parts))
    raise ValueError(f"unknown profile kind {kind!r}")


# ------------------------------------------------------------- commands


def cmd_profile(cfg: dict, out: Path) -> int:
    grid = grid_from(cfg)
    write_csv(build_profile(cfg, grid), out / "profile.csv")
    return EXIT_OK


def cmd_evolve(cfg: dict, out: Path) -> int:
    p = int(cfg["p"])
    init = cfg["initial"]
    if "file" in init:
        u0 = read_csv(init["file"], time=float(init.get("t0", 0.0)))
    else:
        u0 = build_profile(init, grid_from(cfg))
    ec = EvolveConfig(
        p=p,
        dt=float(cfg.get("dt", 1e-3)),
        t_end=float(cfg["t_end"]),
        snapshot_stride=int(cfg.get("stride", 100)),
        frame_speed=float(cfg.get("frame_speed", 0.0)),
        guard=float(cfg.get("guard", 1e-6)),
    )
    traj = evolve(u0, ec)
    snaps = out / "snapshots"
    snaps.mkdir(parents=True, exist_ok=True)
    with (out / "index.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["file", "t"])
        for i, s in enumerate(traj.snapshots):
            name = f"snap_{i:05d}.csv"
            write_csv(s, snaps / name)
            w.writerow([f"snapshots/{name}", repr(float(s.time))])
    cols = ["t", "M", "E"] + (["F"] if p == 3 else [])
    with (out / "conserved.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for s, q in zip(traj.snapshots, traj.conserved_log):
            w.writerow([repr(float(s.time))] + [repr(float(v)) for v in q])
    (out / "config.json").write_text(
        json.dumps({**cfg, "frame_speed": ec.frame_speed}, indent=2, sort_keys=True) + "\n"
    )
    return EXIT_OK


def _read_trajectory(directory: Path) -> list:
    with (directory / "index.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [read_csv(directory / r["file"], time=float(r["t"])) for r in rows]


def cmd_modulate(cfg: dict, out: Path) -> int:
    directory = Path(cfg["trajectory"])
    snaps = _read_trajectory(directory)
    frame = float(cfg.get("frame_speed", 0.0))
    saved = directory / "config.json"
    if "frame_speed" not in cfg and saved.exists():
        frame = float(json.loads(saved.read_text()).get("frame_speed", 0.0))
    if "breather" in cfg:
        b = cfg["breather"]
        bp = BreatherParams(float(b["alpha"]), float(b["beta"]), float(b.get("x1", 0.0)), float(b.get("x2", 0.0)))
        track = track_breather(snaps, bp, frame_speed=frame)
    else:
        guesses = [SolitonParams(int(g["p"]), float(g["c"]), float(g.get("x0", 0.0))) for g in cfg["solitons"]]
        track = track_solitons(snaps, guesses, bool(cfg.get("fit_scaling", True)), frame_speed=frame)
    ex._write_rows(track.rows(), out / "track.csv")
    return EXIT_OK


def cmd_spectrum(cfg: dict, out: Path) -> int:
    scen = ex.Scenario(kind="spectral_report", parameters=cfg)
    rep = ex.run_scenario(scen)
    (out / "spectrum.json").write_text(json.dumps(rep.summary, indent=2, sort_keys=True) + "\n")
    ex._write_rows(rep.rows, out / "eigenvalues.csv")
    return EXIT_OK


def cmd_backlund(cfg: dict, out: Path) -> int:
    rep = ex.run_scenario(ex.Scenario(kind="backlund_report", parameters=cfg))
    report = {"identities": rep.rows, "backlund": rep.summary, "max": rep.sup_residual}
    (out / "backlund.json").write_text(json.dumps(ex._plain(report), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_collide(cfg: dict, out: Path) -> int:
    rep = ex.run_scenario(ex.Scenario(kind="collision", parameters=cfg))
    ex._write_rows(rep.rows, out / "defects.csv")
    summary = dict(rep.summary)
    summary["passed"] = rep.passed
    (out / "collision.json").write_text(json.dumps(ex._plain(summary), indent=2, sort_keys=True) + "\n")
    ex._plot(rep, out)
    return EXIT_OK


def cmd_stability(cfg, out: Path) -> int:
    """One scenario, or a list run on the job pool, one subdirectory each."""
    many = isinstance(cfg, list)
    scenarios = [ex.Scenario.from_dict(d) for d in (cfg if many else [cfg])]
    reports = ex.run_scenarios(scenarios)
    for i, rep in enumerate(reports):
        ex.emit_report(rep, out / f"{i:03d}_{rep.kind}" if many else out)
        log.info("%s: sup residual %s, passed %s", rep.kind, rep.sup_residual, rep.passed)
    return EXIT_DIVERGED if any(r.diverged for r in reports) else EXIT_OK


HANDLERS = {
    "profile": cmd_profile,
    "evolve": cmd_evolve,
    "spectrum": cmd_spectrum,
    "modulate": cmd_modulate,
    "backlund": cmd_backlund,
    "collide": cmd_collide,
    "stability": cmd_stability,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="solitonlab", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path, help="JSON configuration")
    parser.add_argument("--out", required=True, type=Path, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = json.loads(args.config.read_text())
        args.out.mkdir(parents=True, exist_ok=True)
        return HANDLERS[args.command](cfg, args.out)
    except Exception as exc:  # noqa: BLE001 - reported through the exit status
        log.error("solitonlab %s: %s: %s", args.command, type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
