"""Command line entry point: ``qholo <command> [options]``.

Exit codes: 0 success, 2 invalid input, 3 a tolerance check failed.
Artifacts are written to ``--out``, else ``$QHOLO_OUT``, else ``./qholo-out``.
Everything except the ``excluded`` section of ``manifest.json`` is a pure
function of the inputs, whatever ``--threads`` is.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import os
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .biphoton import biphoton_amplitude, coincidence_rate, marginal_hologram
from .checks import run_checks
from .config import ConfigError, ExperimentConfig, build, parse_config, preset, serialize_config, validate
from .formats import events_to_bytes, field_to_bytes, fmt, hologram_to_qhf, map_to_csv, pgm16
from .grid import ComplexField, GridSpec
from .holography import reconstruct_scene, record_hologram
from .montecarlo import bucket_histogram, convergence_report, sample_pairs
from .scene import effective_h1, hologram_decomposition

EXIT_OK, EXIT_INVALID, EXIT_TOLERANCE = 0, 2, 3
DECOMPOSITION_TOL = 1e-9


class Run:
    """Collects artifacts and manifest entries for one invocation."""

    def __init__(self, out: Path, command: str, cfg: ExperimentConfig | None, threads: int):
        self.out, self.command, self.cfg, self.threads = out, command, cfg, threads
        self.artifacts: dict[str, str] = {}
        self.results: dict = {}
        self.excluded: dict = {"started": _dt.datetime.now(_dt.timezone.utc).isoformat(), "threads": threads}
        self.t0 = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, data: bytes | str) -> None:
        if isinstance(data, str):
            data = data.encode("utf-8")
        (self.out / name).write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def finish(self, code: int, errors: list[str] = ()) -> int:
        self.excluded["elapsed_s"] = round(time.perf_counter() - self.t0, 3)
        text = serialize_config(self.cfg) if self.cfg is not None else ""
        manifest = {
            "command": self.command,
            "exit_code": code,
            "status": {EXIT_OK: "ok", EXIT_INVALID: "invalid_input", EXIT_TOLERANCE: "tolerance_failure"}[code],
            "errors": list(errors),
            "inputs": {
                "config_sha256": hashlib.sha256(text.encode()).hexdigest() if text else None,
                "preset": self.cfg.preset if self.cfg is not None else None,
                "config": text,
            },
            "seeds": {"mc_seed": self.cfg.mc_seed} if self.cfg is not None else {},
            "versions": {"qholo": __version__, "numpy": np.__version__, "scipy": scipy.__version__, "python": platform.python_version()},
            "artifacts": dict(sorted(self.artifacts.items())),
            "results": self.results,
            "excluded": self.excluded,
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return code


def load_config(args) -> ExperimentConfig:
    text = ""
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from e
    if args.preset is not None:
        preset(args.preset)  # unknown names fail here
        text += f"\npreset = {args.preset}\n"
    cfg = parse_config(text)
    updates = {}
    if args.seed is not None:
        updates["mc_seed"] = args.seed
    if args.n is not None:
        updates["mc_n"] = args.n
    if args.tolerance_scale is not None:
        updates["tolerance_scale"] = args.tolerance_scale
    if updates:
        cfg = replace(cfg, **updates)
        validate(cfg)
    return cfg


def _csv(grid: GridSpec, values) -> str:
    return map_to_csv(grid, values, header=True)


def cmd_simulate(run: Run, cfg: ExperimentConfig) -> int:
    scene, pump, h2 = build(cfg)
    h = record_hologram(scene, pump, h2, run.threads)
    run.write("hologram.csv", _csv(h.grid, h.values))
    run.write("hologram.qhf", hologram_to_qhf(h))
    run.results = {"total": fmt(h.total()), "scatterers": len(scene.paths)}
    return EXIT_OK


def cmd_decompose(run: Run, cfg: ExperimentConfig) -> int:
    scene, pump, h2 = build(cfg)
    d = hologram_decomposition(scene, pump, h2, run.threads)
    full = record_hologram(scene, pump, h2, run.threads)
    grid = full.grid
    run.write("direct.csv", _csv(grid, d.direct.values))
    run.write("scattered.csv", _csv(grid, d.scattered.values))
    run.write("interference.csv", _csv(grid, d.interference))
    run.write("hologram.csv", _csv(grid, full.values))
    rows = ["j,eta_re,eta_im,strength_re,strength_im,wall_weight,illumination_re,illumination_im"]
    for j, p in enumerate(scene.paths):
        run.write(f"q_{j}.qhf", field_to_bytes(d.q[j]))
        run.write(f"r_{j}.qhf", field_to_bytes(d.r[j]))
        a, w, il = d.strengths[j], d.wall_weights[j], d.illumination[j]
        rows.append(",".join([str(j)] + [fmt(v) for v in (p.eta.real, p.eta.imag, a.real, a.imag, w, il.real, il.imag)]))
    run.write("scatterers.csv", "\n".join(rows) + "\n")
    scale = max(float(np.abs(full.values).max()), 1e-300)
    residual = float(np.abs(d.total() - full.values).max() / scale)
    tol = DECOMPOSITION_TOL * cfg.tolerance_scale
    run.results = {"residual": fmt(residual), "tolerance": fmt(tol)}
    return EXIT_OK if residual <= tol else EXIT_TOLERANCE


def cmd_reconstruct(run: Run, cfg: ExperimentConfig) -> int:
    scene, pump, h2 = build(cfg)
    h = record_hologram(scene, pump, h2, run.threads)
    rec = reconstruct_scene(h, scene, pump, h2, cfg.depths, cfg.dc_mode, cfg.peaks, run.threads)
    run.write("hologram.csv", _csv(h.grid, h.values))
    intensity = rec.intensity
    if rec.grid.ndim == 1:
        image, lo, hi = pgm16(intensity)
        run.write("volume.pgm", image)
        run.write("volume.pgm.txt", f"rows = depths\nmin = {fmt(lo)}\nmax = {fmt(hi)}\nscale = linear\n")
    else:
        for k, z in enumerate(rec.depths):
            image, lo, hi = pgm16(intensity[k])
            run.write(f"slice_{k:03d}.pgm", image)
            run.write(f"slice_{k:03d}.pgm.txt", f"depth = {fmt(z)}\nmin = {fmt(lo)}\nmax = {fmt(hi)}\nscale = linear\n")
    for k in range(len(rec.depths)):
        run.write(f"slice_{k:03d}.qhf", field_to_bytes(ComplexField(rec.grid, rec.slices[k])))
    axes = ["x", "y"][: rec.grid.ndim]
    rows = [",".join(["rank", *axes, "depth", "magnitude"])]
    for p in rec.peaks:
        rows.append(",".join([str(p.rank), *map(fmt, p.position), fmt(p.depth), fmt(p.magnitude)]))
    run.write("peaks.csv", "\n".join(rows) + "\n")
    run.results = {
        "dc_mode": rec.dc_mode,
        "oracle_assisted": rec.oracle_assisted,
        "peak_to_background": fmt(rec.peak_to_background()),
        "truncated": rec.truncated,
    }
    return EXIT_OK


def cmd_montecarlo(run: Run, cfg: ExperimentConfig) -> int:
    scene, pump, h2 = build(cfg)
    p = coincidence_rate(biphoton_amplitude(pump, effective_h1(scene), h2, run.threads))
    truth = marginal_hologram(p, scene.wall)
    events = sample_pairs(p, scene.wall, cfg.mc_n, cfg.mc_seed, run.threads)
    est = bucket_histogram(events, truth.grid)
    rep = convergence_report(est, truth)
    run.write("events.qhe", events_to_bytes(events))
    coords = [c.ravel() for c in truth.grid.coords()]
    counts, dens, ref = est.counts.ravel(), est.estimate.ravel(), truth.normalized().ravel()
    rows = [",".join(["x2", "y2"][: truth.grid.ndim] + ["count", "estimate", "expected_fraction"])]
    for i in range(truth.grid.size):
        rows.append(",".join([fmt(c[i]) for c in coords] + [str(int(counts[i])), fmt(dens[i]), fmt(ref[i])]))
    run.write("histogram.csv", "\n".join(rows) + "\n")
    run.results = {"n": rep.n, "seed": cfg.mc_seed, "rng": events.rng_name, "l1": fmt(rep.l1), "ks": fmt(rep.ks), "max_abs": fmt(rep.max_abs)}
    return EXIT_OK


def cmd_oracle_check(run: Run, cfg: ExperimentConfig, seed: int) -> int:
    results = run_checks(seed, cfg.tolerance_scale)
    rows = ["name,residual,tolerance,passed"]
    for r in results:
        rows.append(f"{r.name},{fmt(r.residual)},{fmt(r.tolerance)},{int(r.passed)}")
        run.excluded.setdefault("check_seconds", {})[r.name] = round(r.seconds, 4)
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} residual={r.residual:.3e} tol={r.tolerance:.1e}")
    run.write("checks.csv", "\n".join(rows) + "\n")
    failed = [r.name for r in results if not r.passed]
    run.results = {"failed": failed, "checks": len(results)}
    return EXIT_TOLERANCE if failed else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "reconstruct": cmd_reconstruct,
    "montecarlo": cmd_montecarlo,
    "oracle-check": cmd_oracle_check,
}


def _count(text: str) -> int:
    """Nonnegative integer, also written as ``1e6``."""
    try:
        value = float(text) if any(c in text for c in ".eE") else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value != int(value) or not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text!r}")
    return int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qholo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config file (key = value lines)")
        p.add_argument("--preset", help="fig1, empty or recon2d")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=_count, help="Monte Carlo / check seed")
        p.add_argument("--n", type=_count, help="number of Monte Carlo events")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--tolerance-scale", type=float, dest="tolerance_scale")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    out = Path(args.out or os.environ.get("QHOLO_OUT") or "qholo-out")
    cfg = None
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.n is not None and args.n < 1:
            raise ConfigError("--n must be at least 1")
        cfg = load_config(args)
    except ConfigError as e:
        print(f"qholo: invalid input: {e}", file=sys.stderr)
        return Run(out, args.command, None, args.threads).finish(EXIT_INVALID, [str(e)])
    run = Run(out, args.command, cfg, args.threads)
    run.write("config.txt", serialize_config(cfg))
    try:
        if args.command == "oracle-check":
            code = cmd_oracle_check(run, cfg, 0 if args.seed is None else args.seed)
        else:
            code = COMMANDS[args.command](run, cfg)
    except (ValueError, IndexError) as e:
        print(f"qholo: invalid input: {e}", file=sys.stderr)
        return run.finish(EXIT_INVALID, [str(e)])
    if code == EXIT_TOLERANCE:
        print(f"qholo: tolerance check failed: {run.results}", file=sys.stderr)
    return run.finish(code)


if __name__ == "__main__":
    sys.exit(main())
