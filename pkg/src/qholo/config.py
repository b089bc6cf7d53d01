"""Experiment configuration: a ``key = value`` text format, presets and scene assembly.

Grammar, one setting per line, ``#`` starts a comment::

    preset            = fig1 | recon2d | empty
    wavelength        = <float>
    source_grid       = <ndim> <n1> [n2] <ext1> [ext2]
    wall_grid         = <ndim> <n1> [n2] <ext1> [ext2]   # chamber planes, wall and detector 2
    wall_mask         = full | box <lo...> <hi...>
    lens_focal        = <float> | none
    opening_distance  = <float>
    wall_depth        = <float>
    detector_distance = <float>                          # 0 means no free space before detector 2
    pump              = gaussian <width> [center...] | uniform | delta [center...]
    scatterer         = <x> [y] <depth> <eta_re> <eta_im>  # repeatable
    eta               = <re> <im>                        # overrides every scatterer strength
    depths            = <z1> <z2> ...
    dc_mode           = none | subtract_p0 | subtract_mean
    peaks             = <int>
    mc_n              = <int>
    mc_seed           = <int>
    rng               = philox4x64-splitmix64
    tolerance_scale   = <float>

``preset`` is applied first wherever it appears; every other line overrides it.
Defaults equal the ``fig1`` preset. Lengths are in metres.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import numpy as np

from .biphoton import PumpProfile
from .grid import ComplexField, DomainMask, GridSpec
from .montecarlo import RNG_NAME
from .optics import Embed, FresnelPropagation, OpticalSystem, cascade
from .scene import ChamberGeometry, PointScatterer, Scene, build_scene


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line, self.column, self.key = line, column, key


@dataclass(frozen=True)
class ScattererSpec:
    transverse: tuple[float, ...]
    depth: float
    eta: complex


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "fig1"
    wavelength: float = 5e-7
    source_grid: GridSpec = GridSpec((64,), (2.56e-4,))
    wall_grid: GridSpec = GridSpec((128,), (5.12e-4,))
    wall_mask: tuple = ("box", (-1.28e-4,), (1.28e-4,))
    lens_focal: float | None = 7.2e-3
    opening_distance: float = 4e-4
    wall_depth: float = 3.2e-3
    detector_distance: float = 4e-4
    pump: tuple = ("gaussian", 4e-5, (0.0,))
    scatterers: tuple[ScattererSpec, ...] = (ScattererSpec((4e-5,), 1.28e-3, 0.3 + 0j),)
    depths: tuple[float, ...] = tuple(3.2e-4 * k for k in range(1, 9))
    dc_mode: str = "subtract_p0"
    peaks: int = 5
    mc_n: int = 1_000_000
    mc_seed: int = 7
    rng: str = RNG_NAME
    tolerance_scale: float = 1.0


def _recon2d() -> ExperimentConfig:
    grid = GridSpec((64, 64), (2.56e-4, 2.56e-4))
    return ExperimentConfig(
        preset="recon2d",
        wavelength=5e-7,
        source_grid=grid,
        wall_grid=grid,
        wall_mask=("box", (-5e-6, -5e-6), (5e-6, 5e-6)),
        lens_focal=None,
        opening_distance=2e-4,
        wall_depth=1.6e-3,
        detector_distance=2e-4,
        pump=("gaussian", 6.4e-5, (0.0, 0.0)),
        scatterers=(ScattererSpec((2e-5, -1.2e-5), 6.4e-4, 0.1 + 0j),),
        depths=tuple(1.6e-4 * k for k in range(1, 9)),
        dc_mode="subtract_p0",
    )


PRESETS = {
    "fig1": ExperimentConfig,
    "empty": lambda: replace(ExperimentConfig(), preset="empty", scatterers=()),
    "recon2d": _recon2d,
}

KEYS = (
    "preset",
    "wavelength",
    "source_grid",
    "wall_grid",
    "wall_mask",
    "lens_focal",
    "opening_distance",
    "wall_depth",
    "detector_distance",
    "pump",
    "scatterer",
    "eta",
    "depths",
    "dc_mode",
    "peaks",
    "mc_n",
    "mc_seed",
    "rng",
    "tolerance_scale",
)


def preset(name: str) -> ExperimentConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset '{name}' (known: {', '.join(sorted(PRESETS))})", key="preset") from None


def _floats(words: list[str], key: str, line: int) -> list[float]:
    try:
        return [float(w) for w in words]
    except ValueError as e:
        raise ConfigError(f"expected numbers, got {' '.join(words)!r}", line=line, key=key) from e


def _grid(words: list[str], key: str, line: int) -> GridSpec:
    if not words:
        raise ConfigError("missing grid description", line=line, key=key)
    ndim = int(_floats(words[:1], key, line)[0])
    if ndim not in (1, 2) or len(words) != 1 + 2 * ndim:
        raise ConfigError("expected '<ndim> <n...> <extent...>'", line=line, key=key)
    nums = _floats(words[1:], key, line)
    try:
        return GridSpec(tuple(int(n) for n in nums[:ndim]), tuple(nums[ndim:]))
    except ValueError as e:
        raise ConfigError(str(e), line=line, key=key) from e


def _tokenize(text: str) -> list[tuple[int, str, list[str]]]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno, column=1)
        key, _, value = body.partition("=")
        key = key.strip()
        if not key.replace("_", "").isalnum():
            raise ConfigError(f"malformed key {key!r}", line=lineno, column=raw.index(key[:1]) + 1 if key else 1)
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}'", line=lineno, column=raw.index(key) + 1, key=key)
        entries.append((lineno, key, value.split()))
    return entries


def parse_config(text: str) -> ExperimentConfig:
    entries = _tokenize(text)
    base = "fig1"
    for lineno, key, words in entries:
        if key == "preset":
            if len(words) != 1:
                raise ConfigError("expected a single preset name", line=lineno, key=key)
            base = words[0]
    cfg = preset(base)
    updates: dict = {}
    scatterers: list[ScattererSpec] | None = None
    eta_override = None
    for lineno, key, words in entries:
        if key == "preset":
            continue
        if key in ("wavelength", "opening_distance", "wall_depth", "detector_distance", "tolerance_scale"):
            vals = _floats(words, key, lineno)
            if len(vals) != 1:
                raise ConfigError("expected one number", line=lineno, key=key)
            updates[key] = vals[0]
        elif key in ("source_grid", "wall_grid"):
            updates[key] = _grid(words, key, lineno)
        elif key == "wall_mask":
            if words == ["full"]:
                updates[key] = ("full",)
            elif words and words[0] == "box" and len(words) in (3, 5):
                nums = _floats(words[1:], key, lineno)
                half = len(nums) // 2
                updates[key] = ("box", tuple(nums[:half]), tuple(nums[half:]))
            else:
                raise ConfigError("expected 'full' or 'box <lo...> <hi...>'", line=lineno, key=key)
        elif key == "lens_focal":
            if words == ["none"]:
                updates[key] = None
            else:
                vals = _floats(words, key, lineno)
                if len(vals) != 1:
                    raise ConfigError("expected one number or 'none'", line=lineno, key=key)
                updates[key] = vals[0]
        elif key == "pump":
            if not words or words[0] not in ("gaussian", "uniform", "delta"):
                raise ConfigError("pump shape must be gaussian, uniform or delta", line=lineno, key=key)
            nums = _floats(words[1:], key, lineno)
            if words[0] == "gaussian":
                if not nums:
                    raise ConfigError("gaussian pump needs a width", line=lineno, key=key)
                updates[key] = ("gaussian", nums[0], tuple(nums[1:]))
            elif words[0] == "delta":
                updates[key] = ("delta", tuple(nums))
            else:
                if nums:
                    raise ConfigError("uniform pump takes no parameters", line=lineno, key=key)
                updates[key] = ("uniform",)
        elif key == "scatterer":
            nums = _floats(words, key, lineno)
            if len(nums) not in (4, 5):
                raise ConfigError("expected '<x> [y] <depth> <eta_re> <eta_im>'", line=lineno, key=key)
            scatterers = scatterers or []
            scatterers.append(ScattererSpec(tuple(nums[:-3]), nums[-3], complex(nums[-2], nums[-1])))
        elif key == "eta":
            nums = _floats(words, key, lineno)
            if len(nums) != 2:
                raise ConfigError("expected '<re> <im>'", line=lineno, key=key)
            eta_override = complex(nums[0], nums[1])
        elif key == "depths":
            nums = _floats(words, key, lineno)
            if not nums:
                raise ConfigError("at least one depth is required", line=lineno, key=key)
            updates[key] = tuple(nums)
        elif key == "dc_mode":
            if words not in (["none"], ["subtract_p0"], ["subtract_mean"]):
                raise ConfigError("dc_mode must be none, subtract_p0 or subtract_mean", line=lineno, key=key)
            updates[key] = words[0]
        elif key in ("peaks", "mc_n", "mc_seed"):
            if len(words) != 1 or not words[0].isdigit():
                raise ConfigError("expected a nonnegative integer", line=lineno, key=key)
            updates[key] = int(words[0])
        elif key == "rng":
            if words != [RNG_NAME]:
                raise ConfigError(f"only '{RNG_NAME}' is supported", line=lineno, key=key)
            updates[key] = RNG_NAME
    if scatterers is not None:
        updates["scatterers"] = tuple(scatterers)
    cfg = replace(cfg, **updates)
    if eta_override is not None:
        cfg = replace(cfg, scatterers=tuple(replace(s, eta=eta_override) for s in cfg.scatterers))
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if not cfg.wavelength > 0:
        raise ConfigError("must be positive", key="wavelength")
    if cfg.source_grid.ndim != cfg.wall_grid.ndim:
        raise ConfigError("source and wall grids must have the same dimensionality", key="wall_grid")
    if not np.allclose(cfg.source_grid.spacing, cfg.wall_grid.spacing, rtol=1e-12, atol=0):
        raise ConfigError("source and wall grids must share a cell size", key="wall_grid")
    if any(a > b for a, b in zip(cfg.source_grid.shape, cfg.wall_grid.shape)):
        raise ConfigError("source grid must fit inside the wall grid", key="source_grid")
    if not cfg.opening_distance > 0:
        raise ConfigError("must be positive", key="opening_distance")
    if not cfg.wall_depth > 0:
        raise ConfigError("must be positive", key="wall_depth")
    if cfg.detector_distance < 0:
        raise ConfigError("must be nonnegative", key="detector_distance")
    if cfg.lens_focal is not None and cfg.lens_focal == 0:
        raise ConfigError("must be nonzero or 'none'", key="lens_focal")
    nd = cfg.wall_grid.ndim
    for s in cfg.scatterers:
        if len(s.transverse) != nd:
            raise ConfigError(f"expected {nd} transverse coordinate(s)", key="scatterer")
        if not 0 <= s.depth < cfg.wall_depth:
            raise ConfigError(f"depth {s.depth} outside the chamber [0, {cfg.wall_depth})", key="scatterer")
        try:
            cfg.wall_grid.index_of(s.transverse)
        except IndexError as e:
            raise ConfigError(str(e), key="scatterer") from e
    if cfg.wall_mask[0] == "box" and (len(cfg.wall_mask[1]) != nd or len(cfg.wall_mask[2]) != nd):
        raise ConfigError(f"box needs {nd} lower and {nd} upper bounds", key="wall_mask")
    if cfg.pump[0] == "gaussian" and not cfg.pump[1] > 0:
        raise ConfigError("gaussian width must be positive", key="pump")
    if any(not 0 <= z < cfg.wall_depth for z in cfg.depths):
        raise ConfigError("depths must lie inside the chamber", key="depths")
    if cfg.mc_n < 1:
        raise ConfigError("must be at least 1", key="mc_n")
    if cfg.peaks < 1:
        raise ConfigError("must be at least 1", key="peaks")
    if not cfg.tolerance_scale > 0:
        raise ConfigError("must be positive", key="tolerance_scale")
    try:
        wall_mask(cfg)
    except ValueError as e:
        raise ConfigError(str(e), key="wall_mask") from e


def _num(x: float) -> str:
    return repr(float(x))


def _grid_text(g: GridSpec) -> str:
    return " ".join([str(g.ndim), *map(str, g.shape), *map(_num, g.extent)])


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text: every key, fixed order, floats in shortest round-trip form."""
    lines = [
        f"preset = {cfg.preset}",
        f"wavelength = {_num(cfg.wavelength)}",
        f"source_grid = {_grid_text(cfg.source_grid)}",
        f"wall_grid = {_grid_text(cfg.wall_grid)}",
    ]
    if cfg.wall_mask[0] == "full":
        lines.append("wall_mask = full")
    else:
        lines.append("wall_mask = box " + " ".join(map(_num, cfg.wall_mask[1] + cfg.wall_mask[2])))
    lines.append(f"lens_focal = {'none' if cfg.lens_focal is None else _num(cfg.lens_focal)}")
    lines.append(f"opening_distance = {_num(cfg.opening_distance)}")
    lines.append(f"wall_depth = {_num(cfg.wall_depth)}")
    lines.append(f"detector_distance = {_num(cfg.detector_distance)}")
    if cfg.pump[0] == "gaussian":
        lines.append("pump = gaussian " + " ".join(map(_num, (cfg.pump[1],) + tuple(cfg.pump[2]))))
    elif cfg.pump[0] == "delta":
        lines.append(("pump = delta " + " ".join(map(_num, cfg.pump[1]))).rstrip())
    else:
        lines.append("pump = uniform")
    for s in cfg.scatterers:
        nums = tuple(s.transverse) + (s.depth, s.eta.real, s.eta.imag)
        lines.append("scatterer = " + " ".join(map(_num, nums)))
    lines.append("depths = " + " ".join(map(_num, cfg.depths)))
    lines.append(f"dc_mode = {cfg.dc_mode}")
    lines.append(f"peaks = {cfg.peaks}")
    lines.append(f"mc_n = {cfg.mc_n}")
    lines.append(f"mc_seed = {cfg.mc_seed}")
    lines.append(f"rng = {cfg.rng}")
    lines.append(f"tolerance_scale = {_num(cfg.tolerance_scale)}")
    return "\n".join(lines) + "\n"


def wall_mask(cfg: ExperimentConfig) -> DomainMask:
    if cfg.wall_mask[0] == "full":
        return DomainMask.full(cfg.wall_grid)
    return DomainMask.box(cfg.wall_grid, cfg.wall_mask[1], cfg.wall_mask[2])


def pump_profile(cfg: ExperimentConfig) -> PumpProfile:
    g = cfg.source_grid
    kind = cfg.pump[0]
    if kind == "gaussian":
        center = cfg.pump[2] or (0.0,) * g.ndim
        f = ComplexField.gaussian(g, cfg.pump[1], center)
    elif kind == "uniform":
        f = ComplexField.ones(g)
    else:
        center = cfg.pump[1] or (0.0,) * g.ndim
        f = ComplexField.delta(g, g.index_of(center)[0])
    return PumpProfile.from_field(f)


def geometry(cfg: ExperimentConfig) -> ChamberGeometry:
    return ChamberGeometry(
        cfg.wavelength, cfg.source_grid, cfg.wall_grid, cfg.opening_distance, cfg.wall_depth, cfg.lens_focal
    )


def detector_optics(cfg: ExperimentConfig) -> OpticalSystem:
    embed = Embed(cfg.source_grid, cfg.wall_grid)
    if cfg.detector_distance == 0:
        return embed
    return cascade(embed, FresnelPropagation(cfg.wall_grid, cfg.wavelength, cfg.detector_distance))


def build(cfg: ExperimentConfig) -> tuple[Scene, PumpProfile, OpticalSystem]:
    """Scene, normalized pump and detector-2 optics described by the config."""
    scatterers = [PointScatterer(s.transverse, s.depth, s.eta) for s in cfg.scatterers]
    scene = build_scene(geometry(cfg), scatterers, wall_mask(cfg))
    return scene, pump_profile(cfg), detector_optics(cfg)
