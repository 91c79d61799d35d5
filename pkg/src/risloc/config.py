"""Scenario configuration: dataclasses, TOML round-trip and scenario construction.

Units are meters, radians, Hz and seconds throughout. Decibel quantities
(transmit power, noise PSD, antenna gains) are converted to linear scale here
and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
import math
import re
import sys
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .channel import (
    PathState,
    RisProfile,
    Scenario,
    Waveform,
    SPEED_OF_LIGHT,
    focusing_phases,
    ris_pathloss,
    temporal_codes,
)
from .geometry import ArrayLayout, Entity, EulerAngles, Pose, ura_layout

__all__ = [
    "ConfigError",
    "EntityConfig",
    "WaveformConfig",
    "LinkConfig",
    "PriorConfig",
    "SweepConfig",
    "ScenarioConfig",
    "paper_v",
    "parse_config",
    "emit_config",
    "load_config",
    "build_scenario",
    "composite_snr",
    "near_square",
    "random_config",
]

REGIMES = ("near", "far")
CASES = ("a", "b", "c", "d", "e", "full")
AXES = ("n_u", "n_r", "prior")
PHASES = ("focus", "zero")


class ConfigError(ValueError):
    """Invalid configuration, with the offending field and line when known."""

    def __init__(self, message: str, field_name: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_name:
            where.append(f"field '{field_name}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.field_name = field_name
        self.line = line


def _vec3(x, name):
    try:
        v = tuple(float(a) for a in x)
    except TypeError:
        raise ConfigError("expected a list of 3 numbers", name) from None
    if len(v) != 3 or not all(math.isfinite(a) for a in v):
        raise ConfigError("expected 3 finite numbers", name)
    return v


@dataclass(frozen=True)
class EntityConfig:
    """Pose and URA layout of one entity."""

    position: tuple = (0.0, 0.0, 0.0)
    misalignment: tuple = (0.0, 0.0, 0.0)
    orientation: tuple = (0.0, 0.0, 0.0)
    rows: int = 1
    cols: int = 1
    spacing: float = 0.015
    normal: tuple = (0.0, 0.0, 1.0)

    def entity(self) -> Entity:
        pose = Pose(np.array(self.position), np.array(self.misalignment),
                    EulerAngles.from_array(self.orientation))
        return Entity(pose, ura_layout(self.rows, self.cols, self.spacing, self.normal))

    def nominal_entity(self) -> Entity:
        """Entity at its nominal position with identity orientation."""
        pose = Pose(np.array(self.position))
        return Entity(pose, ura_layout(self.rows, self.cols, self.spacing, self.normal))

    @property
    def count(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class WaveformConfig:
    wavelength: float = 0.03
    subcarriers: int = 256
    subcarrier_spacing: float = 120e3
    symbols: int = 4
    narrowband: bool = True


@dataclass(frozen=True)
class LinkConfig:
    """Link budget. ``snr`` overrides the dB budget when given."""

    pathloss: str = "composite"
    snr: float | None = None
    power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -174.0
    gain_bs_db: float = 2.0
    gain_ue_db: float = 2.0
    q0: float = 0.285
    efficiency: float = 0.5


@dataclass(frozen=True)
class PriorConfig:
    """Prior information as fractions of the SNR."""

    ris_orientation: float = 0.0
    ris_position: float = 0.0
    gain: float = 0.0
    ue_position: float = 0.0
    ue_orientation: float = 0.0


@dataclass(frozen=True)
class SweepConfig:
    axis: str = "n_u"
    grid: tuple = (4, 9, 16, 25, 36, 49, 64)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to build a :class:`Scenario` and run a sweep."""

    name: str = "custom"
    seed: int = 0
    regime: str = "near"
    case: str = "a"
    phases: str = "focus"
    bs: EntityConfig = field(default_factory=EntityConfig)
    ris: tuple = ()
    ue: EntityConfig = field(default_factory=EntityConfig)
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def with_(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


def paper_v() -> ScenarioConfig:
    """The numerical-results setup: one rotated RIS, one ideal RIS, 16-antenna UE."""
    ris1 = EntityConfig(position=(10.0, 8.0, 4.0), orientation=(0.1, 0.2, 0.1),
                        rows=11, cols=11, normal=(0.0, 0.0, -1.0))
    ris2 = EntityConfig(position=(10.0, 8.5, 4.0), rows=11, cols=11, normal=(0.0, 0.0, -1.0))
    return ScenarioConfig(
        name="paper-v",
        bs=EntityConfig(),
        ris=(ris1, ris2),
        ue=EntityConfig(position=(12.0, 10.0, 3.0), rows=4, cols=4),
        waveform=WaveformConfig(),
        link=LinkConfig(),
    )


PRESETS = {"paper-v": paper_v}


# ---------------------------------------------------------------------------
# validation


def _check(cfg: ScenarioConfig) -> ScenarioConfig:
    if cfg.regime not in REGIMES:
        raise ConfigError(f"must be one of {REGIMES}", "regime")
    if cfg.case not in CASES:
        raise ConfigError(f"must be one of {CASES}", "case")
    if cfg.phases not in PHASES:
        raise ConfigError(f"must be one of {PHASES}", "phases")
    if cfg.link.pathloss not in ("composite", "physical"):
        raise ConfigError("must be 'composite' or 'physical'", "link.pathloss")
    if cfg.link.snr is not None and not cfg.link.snr > 0:
        raise ConfigError("must be positive", "link.snr")
    w = cfg.waveform
    if not w.wavelength > 0:
        raise ConfigError("must be positive", "waveform.wavelength")
    if w.subcarriers < 1:
        raise ConfigError("must be at least 1", "waveform.subcarriers")
    if w.symbols < len(cfg.ris) + 1:
        raise ConfigError(f"need at least {len(cfg.ris) + 1} symbols for {len(cfg.ris)} RIS", "waveform.symbols")
    for name, e in [("bs", cfg.bs), ("ue", cfg.ue)] + [(f"ris[{i}]", r) for i, r in enumerate(cfg.ris)]:
        if e.rows < 1 or e.cols < 1:
            raise ConfigError("rows and cols must be at least 1", f"{name}.rows")
        if not e.spacing > 0:
            raise ConfigError("must be positive", f"{name}.spacing")
    for k, v in vars(cfg.prior).items():
        if not (v >= 0 and math.isfinite(v)):
            raise ConfigError("must be finite and nonnegative", f"prior.{k}")
    if cfg.sweep.axis not in AXES:
        raise ConfigError(f"must be one of {AXES}", "sweep.axis")
    if len(cfg.sweep.grid) == 0:
        raise ConfigError("sweep grid is empty", "sweep.grid")
    if cfg.sweep.axis in ("n_u", "n_r") and any(int(g) != g or g < 1 for g in cfg.sweep.grid):
        raise ConfigError("antenna counts must be positive integers", "sweep.grid")
    if cfg.sweep.axis == "n_r" and not cfg.ris:
        raise ConfigError("n_r sweep needs at least one RIS", "sweep.axis")
    return cfg


# ---------------------------------------------------------------------------
# TOML


def _prune(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if v is None:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def _entity_dict(e: EntityConfig) -> dict:
    return _prune({f.name: getattr(e, f.name) for f in fields(e)})


def emit_config(cfg: ScenarioConfig) -> str:
    """Serialize to TOML."""
    doc = {
        "name": cfg.name,
        "seed": cfg.seed,
        "regime": cfg.regime,
        "case": cfg.case,
        "phases": cfg.phases,
        "waveform": _prune(vars(cfg.waveform)),
        "link": _prune(vars(cfg.link)),
        "prior": _prune(vars(cfg.prior)),
        "sweep": {"axis": cfg.sweep.axis, "grid": list(cfg.sweep.grid)},
        "bs": _entity_dict(cfg.bs),
        "ue": _entity_dict(cfg.ue),
        "ris": [_entity_dict(r) for r in cfg.ris],
    }
    return tomli_w.dumps(doc)


def _line_of(text: str, table: str | None, key: str) -> int | None:
    # first "key =" line after the matching table header
    lines = text.splitlines()
    inside = table is None
    header = re.compile(r"^\s*\[\[?\s*([^\]]+?)\s*\]\]?")
    for i, ln in enumerate(lines, start=1):
        m = header.match(ln)
        if m:
            inside = table is not None and m.group(1) == table
            continue
        if inside and re.match(rf"^\s*{re.escape(key)}\s*=", ln):
            return i
    return None


def _build(cls, data: dict, prefix: str, text: str, table: str | None):
    known = {f.name: f for f in fields(cls)}
    kw = {}
    for k, v in data.items():
        name = f"{prefix}{k}"
        if k not in known:
            raise ConfigError("unknown key", name, _line_of(text, table, k))
        default = getattr(cls(), k)
        try:
            if isinstance(default, tuple) and k in ("position", "misalignment", "orientation", "normal"):
                v = _vec3(v, name)
            elif k == "grid":
                v = tuple(float(a) if isinstance(a, float) else int(a) for a in v)
            elif isinstance(default, bool):
                if not isinstance(v, bool):
                    raise ConfigError("expected true or false", name)
            elif isinstance(default, int) and not isinstance(default, bool):
                if isinstance(v, bool) or int(v) != v:
                    raise ConfigError("expected an integer", name)
                v = int(v)
            elif isinstance(default, float) or (default is None and k == "snr"):
                if isinstance(v, bool):
                    raise ConfigError("expected a number", name)
                v = float(v)
            elif isinstance(default, str) and not isinstance(v, str):
                raise ConfigError("expected a string", name)
        except ConfigError as e:
            raise ConfigError(str(e).split(": ", 1)[-1], name, _line_of(text, table, k)) from None
        except (TypeError, ValueError):
            raise ConfigError("wrong type", name, _line_of(text, table, k)) from None
        kw[k] = v
    return cls(**kw)


def parse_config(text: str) -> ScenarioConfig:
    """Parse TOML text into a validated :class:`ScenarioConfig`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"TOML syntax error: {e}", None, int(m.group(1)) if m else None) from None
    preset = doc.pop("preset", None)
    base = PRESETS[preset]() if preset in PRESETS else ScenarioConfig()
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}'", "preset", _line_of(text, None, "preset"))
    kw: dict[str, Any] = {}
    tables = {"waveform": WaveformConfig, "link": LinkConfig, "prior": PriorConfig,
              "sweep": SweepConfig, "bs": EntityConfig, "ue": EntityConfig}
    for k, v in doc.items():
        if k in tables:
            if not isinstance(v, dict):
                raise ConfigError("expected a table", k, _line_of(text, None, k))
            cur = getattr(base, k)
            merged = {f.name: getattr(cur, f.name) for f in fields(cur)}
            built = _build(tables[k], v, f"{k}.", text, k)
            merged.update({key: getattr(built, key) for key in v})
            kw[k] = tables[k](**merged)
        elif k == "ris":
            if not isinstance(v, list):
                raise ConfigError("expected an array of tables [[ris]]", "ris")
            kw["ris"] = tuple(_build(EntityConfig, r, f"ris[{i}].", text, "ris") for i, r in enumerate(v))
        elif k in ("name", "regime", "case", "phases"):
            if not isinstance(v, str):
                raise ConfigError("expected a string", k, _line_of(text, None, k))
            kw[k] = v
        elif k == "seed":
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError("expected a nonnegative integer", k, _line_of(text, None, k))
            kw[k] = v
        else:
            raise ConfigError("unknown key", k, _line_of(text, None, k))
    return _check(replace(base, **kw))


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# scenario construction


def near_square(n: int) -> tuple[int, int]:
    """Factor ``n`` as rows x cols with rows the largest divisor <= sqrt(n)."""
    n = int(n)
    r = int(math.isqrt(n))
    while n % r:
        r -= 1
    return r, n // r


def _budget(link: LinkConfig, subcarrier_spacing: float) -> float:
    p = 10 ** ((link.power_dbm - 30) / 10)
    g = 10 ** ((link.gain_bs_db + link.gain_ue_db) / 10)
    n0 = 10 ** ((link.noise_psd_dbm_hz - 30) / 10)
    return p * g / (n0 * subcarrier_spacing)


def composite_snr(cfg: ScenarioConfig) -> float:
    """SNR of the scenario.

    Physical pathloss: the transmit budget ``P G_B G_U / (N0 df)``. Composite
    pathloss: the same budget times the squared pathloss of the first RIS
    between centroids (or the LOS amplitude squared without a RIS).
    """
    if cfg.link.snr is not None:
        return float(cfg.link.snr)
    budget = _budget(cfg.link, cfg.waveform.subcarrier_spacing)
    if cfg.link.pathloss == "physical":
        return budget
    bs, ue = cfg.bs.entity(), cfg.ue.entity()
    if cfg.ris:
        ris = cfg.ris[0].entity()
        # centroid element: a synthetic single-element copy of the RIS pose
        single = Entity(ris.pose, ArrayLayout(np.zeros((1, 3)), ris.layout.normal))
        amp = ris_pathloss(bs.position, single, 0, ue.position, cfg.link.q0, cfg.link.efficiency,
                           cfg.waveform.wavelength).amplitude
    else:
        d = float(np.linalg.norm(ue.position - bs.position))
        if d == 0.0:
            raise ConfigError("UE and BS coincide; the LOS pathloss is undefined", "ue.position")
        amp = cfg.waveform.wavelength / (4 * math.pi) / d
    return budget * amp ** 2


def build_scenario(cfg: ScenarioConfig, include_los: bool | None = None) -> Scenario:
    """Construct the :class:`Scenario` described by ``cfg``.

    RIS phases either focus the nominal (unrotated) RIS on the nominal UE
    position or are all zero. Temporal codes are non-DC DFT columns. All path
    gains are 1 and synchronization errors 0.
    """
    _check(cfg)
    w = cfg.waveform
    fc = SPEED_OF_LIGHT / w.wavelength
    bs, ue = cfg.bs.entity(), cfg.ue.entity()
    ris = tuple(r.entity() for r in cfg.ris)
    codes = temporal_codes(w.symbols, len(ris)) if ris else np.zeros((0, w.symbols))
    profiles = []
    for rc, r, g in zip(cfg.ris, ris, codes):
        if cfg.phases == "focus":
            ph = focusing_phases(bs, rc.nominal_entity(), np.array(cfg.ue.position), fc)
        else:
            ph = np.zeros(r.count)
        profiles.append(RisProfile(ph, g))
    wave = Waveform(fc, w.subcarriers, w.subcarrier_spacing, w.symbols, narrowband=w.narrowband)
    if include_los is None:
        include_los = cfg.case not in ("c", "d", "e")
    return Scenario(bs, ris, ue, wave, tuple(profiles), tuple(PathState() for _ in range(len(ris) + 1)),
                    q0=cfg.link.q0, efficiency=cfg.link.efficiency, snr=composite_snr(cfg),
                    pathloss=cfg.link.pathloss, include_los=include_los)


def random_config(rng: np.random.Generator, n_ris: int = 1, pathloss: str = "physical",
                  narrowband: bool = False) -> ScenarioConfig:
    """Small random scenario in general position (for property tests).

    The BS sits at the origin, each RIS a few meters away facing the UE side.
    """
    def angles(scale):
        return tuple(float(a) for a in rng.uniform(-scale, scale, 3))

    ue_pos = np.array([rng.uniform(6, 10), rng.uniform(4, 8), rng.uniform(0.5, 2.0)])
    ris = []
    for _ in range(n_ris):
        p = np.array([rng.uniform(3, 8), rng.uniform(2, 6), rng.uniform(3.5, 5.0)])
        ris.append(EntityConfig(position=tuple(p), misalignment=tuple(rng.normal(0, 0.01, 3)),
                                orientation=angles(0.3), rows=int(rng.integers(2, 4)),
                                cols=int(rng.integers(2, 4)), spacing=0.015, normal=(0.0, 0.0, -1.0)))
    return ScenarioConfig(
        name="random",
        seed=0,
        phases="focus" if rng.random() < 0.5 else "zero",
        bs=EntityConfig(position=(0.0, 0.0, 0.0), rows=int(rng.integers(1, 3)), cols=int(rng.integers(1, 3)),
                        orientation=angles(0.2)),
        ris=tuple(ris),
        ue=EntityConfig(position=tuple(ue_pos), orientation=angles(0.3), rows=int(rng.integers(1, 3)),
                        cols=int(rng.integers(1, 4)), misalignment=tuple(rng.normal(0, 0.01, 3))),
        waveform=WaveformConfig(wavelength=0.03, subcarriers=int(rng.integers(1, 4)),
                                subcarrier_spacing=float(rng.uniform(1e6, 5e7)),
                                symbols=n_ris + 1 + int(rng.integers(0, 2)), narrowband=narrowband),
        link=LinkConfig(pathloss=pathloss, snr=float(rng.uniform(1, 100))),
    )
