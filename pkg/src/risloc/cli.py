"""Command line front end: ``risloc describe | sweep | validate | emit``.

Scenarios come from a TOML file (``--config``) or a named preset
(``--preset``); ``--seed``, ``--regime`` and ``--case`` override the file.
Sweep grid points run on a thread pool of ``RIS_FIM_THREADS`` workers and
are written in grid order.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
import io
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from .bounds import (
    derivative_certificate,
    evaluate_case,
    lemma3_certificate,
    lemma4_certificate,
    schur_certificate,
    theorem2_certificate,
    with_ris_count,
    with_ue_count,
)
from .channel import true_channel_params
from .config import (
    AXES,
    CASES,
    PRESETS,
    REGIMES,
    ConfigError,
    ScenarioConfig,
    build_scenario,
    emit_config,
    load_config,
    paper_v,
)
from .geometry import DegenerateGeometryError, aperture_diameter, direction_angles, fraunhofer_distance, is_near_field

CSV_COLUMNS = ("axis", "peb_m", "oeb_rad", "lambda_min_norm", "verdict", "regime", "case")
CHECKS = ("derivatives", "lemma3", "lemma4", "theorem2", "schur")


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    axis: float
    peb: float
    oeb: float
    lambda_min_norm: float
    verdict: str
    regime: str
    case: str


@dataclass(frozen=True)
class SweepResult:
    axis_name: str
    rows: tuple

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            ax = _fmt_axis(self.axis_name, r.axis)
            vals = [ax, _fmt(r.peb), _fmt(r.oeb), _fmt(r.lambda_min_norm), r.verdict, r.regime, r.case]
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()


def _fmt(v: float) -> str:
    # fixed-width scientific notation; repr-stable across runs and platforms
    if v is None or not math.isfinite(v):
        return "nan" if v is None or math.isnan(v) else ("inf" if v > 0 else "-inf")
    return f"{v:.10e}"


def _fmt_axis(name: str, v) -> str:
    return str(int(v)) if name in ("n_u", "n_r") else repr(float(v))


def apply_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Configuration of one grid point.

    ``n_u`` resizes the UE array, ``n_r`` the first RIS (both as near-square
    URAs), ``prior`` sets the RIS orientation and position prior fractions.
    """
    if axis == "n_u":
        return with_ue_count(cfg, int(value))
    if axis == "n_r":
        return with_ris_count(cfg, int(value), 1)
    if axis == "prior":
        return cfg.with_(prior=replace(cfg.prior, ris_orientation=float(value), ris_position=float(value)))
    raise ConfigError(f"must be one of {AXES}", "sweep.axis")


def _point(cfg: ScenarioConfig, axis: str, value) -> SweepRow:
    rep = evaluate_case(apply_axis(cfg, axis, value)).report
    return SweepRow(value, rep.peb, rep.oeb, rep.lambda_min_norm, rep.verdict, cfg.regime, cfg.case)


def worker_count() -> int:
    raw = os.environ.get("RIS_FIM_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RIS_FIM_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def run_sweep(cfg: ScenarioConfig, workers: int | None = None) -> SweepResult:
    """Evaluate the bound pipeline at every grid point of ``cfg.sweep``."""
    axis, grid = cfg.sweep.axis, tuple(cfg.sweep.grid)
    if not grid:
        raise ConfigError("sweep grid is empty", "sweep.grid")
    n = worker_count() if workers is None else workers
    if n == 1:
        rows = [_point(cfg, axis, v) for v in grid]
    else:
        with ThreadPoolExecutor(max_workers=n) as ex:
            rows = list(ex.map(lambda v: _point(cfg, axis, v), grid))
    return SweepResult(axis, tuple(rows))


# ---------------------------------------------------------------------------
# validation


def validate(cfg: ScenarioConfig, check: str):
    """Run one certificate; returns a :class:`~risloc.bounds.Certificate`."""
    if check == "derivatives":
        return derivative_certificate(cfg, seed=cfg.seed)
    if check == "lemma3":
        return lemma3_certificate(cfg)
    if check == "lemma4":
        return lemma4_certificate(cfg)
    if check == "theorem2":
        return theorem2_certificate(cfg)
    if check == "schur":
        return schur_certificate(cfg, seed=cfg.seed)
    raise ValueError(f"unknown check {check!r}")


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else str(float(v))
    return str(v)


def certificate_json(cert) -> dict:
    return {
        "check": cert.name,
        "passed": bool(cert.passed),
        "rows": [{k: _jsonable(v) for k, v in r.items()} for r in cert.rows],
        "details": {k: _jsonable(v) for k, v in cert.details.items()},
    }


# ---------------------------------------------------------------------------
# describe


def _vec(v) -> str:
    return "(" + ", ".join(f"{x:.3f}" for x in v) + ")"


def describe(cfg: ScenarioConfig) -> str:
    """Entity table, link geometry, Fraunhofer classes and the parameter layout."""
    out = [f"scenario {cfg.name}: regime={cfg.regime}, case={cfg.case}, seed={cfg.seed}"]
    w = cfg.waveform
    out.append(f"wavelength={w.wavelength:g} m, subcarriers={w.subcarriers}{' (narrowband)' if w.narrowband else ''}, "
               f"spacing={w.subcarrier_spacing:g} Hz, symbols={w.symbols}")
    bs, ue = cfg.bs.entity(), cfg.ue.entity()
    ris = [r.entity() for r in cfg.ris]
    ents = [("BS", bs, cfg.bs)] + [(f"RIS{m}", r, rc) for m, (r, rc) in enumerate(zip(ris, cfg.ris), 1)]
    ents.append(("UE", ue, cfg.ue))
    out.append("")
    out.append(f"{'entity':<7}{'position [m]':<26}{'misalignment [m]':<26}{'yaw,pitch,roll [rad]':<26}"
               f"{'array':<9}{'elements':>8}")
    for name, e, ec in ents:
        o = e.pose.orientation
        out.append(f"{name:<7}{_vec(e.pose.nominal_position):<26}{_vec(e.pose.misalignment):<26}"
                   f"{_vec(o.as_array()):<26}{f'{ec.rows}x{ec.cols}':<9}{e.count:>8}")
    out.append("")
    out.append(f"{'link':<12}{'distance [m]':>14}{'theta [rad]':>13}{'phi [rad]':>11}")
    links = [("BS-UE", bs, ue)]
    for m, r in enumerate(ris, 1):
        links += [(f"BS-RIS{m}", bs, r), (f"RIS{m}-UE", r, ue)]
    for name, a, b in links:
        try:
            da = direction_angles(a.position, b.position)
        except DegenerateGeometryError:
            out.append(f"{name:<12}{'coincident':>14}")
            continue
        out.append(f"{name:<12}{da.distance:>14.3f}{da.theta:>13.4f}{da.phi:>11.4f}")
    lam = cfg.waveform.wavelength
    if ris:
        out.append("")
        out.append(f"{'RIS':<6}{'aperture [m]':>13}{'2D^2/lambda [m]':>17}{'BS link':>10}{'UE link':>10}")
        for m, r in enumerate(ris, 1):
            D = aperture_diameter(r.layout)
            dB = float(np.linalg.norm(r.position - bs.position))
            dU = float(np.linalg.norm(r.position - ue.position))
            cls = lambda d: "near" if is_near_field(d, D, lam) else "far"
            out.append(f"RIS{m:<3}{D:>13.4f}{fraunhofer_distance(D, lam):>17.3f}"
                       f"{cls(dB):>10}{cls(dU):>10}")
    out.append("")
    try:
        eta = true_channel_params(build_scenario(cfg, include_los=True))
    except (ValueError, DegenerateGeometryError) as e:
        out.append(f"parameter layout unavailable: {e}")
        return "\n".join(out)
    out.append(f"parameter layout ({len(eta.index)} entries)")
    for p in eta.index:
        out.append(f"  [{p.offset:>3}] path {p.path} {p.name:<10} = {eta[p.key]: .6e}")
    return "\n".join(out)


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="risloc", description="Fisher-information bounds for RIS-aided localization.")
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--config", help="scenario TOML file")
    src.add_argument("--preset", choices=sorted(PRESETS), help="named scenario (default paper-v)")
    common.add_argument("--seed", type=int, help="seed for randomized checks")
    common.add_argument("--regime", choices=REGIMES)
    common.add_argument("--case", choices=CASES)
    common.add_argument("--out", help="output path (CSV for sweep, JSON for validate, TOML for emit)")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("describe", parents=[common], help="print the scenario summary")
    sp = sub.add_parser("sweep", parents=[common], help="run the configured sweep and emit CSV")
    sp.add_argument("--axis", choices=AXES, help="override the sweep axis")
    sp.add_argument("--grid", help="comma separated grid values overriding the configured grid")
    vp = sub.add_parser("validate", parents=[common], help="run a numerical certificate")
    vp.add_argument("check", choices=CHECKS + ("all",))
    sub.add_parser("emit", parents=[common], help="print the resolved configuration as TOML")
    return ap


def _resolve(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = PRESETS.get(args.preset or "paper-v", paper_v)()
    kw = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "seed")
        kw["seed"] = args.seed
    if args.regime:
        kw["regime"] = args.regime
    if args.case:
        kw["case"] = args.case
    cfg = cfg.with_(**kw)
    if getattr(args, "axis", None) or getattr(args, "grid", None) is not None:
        axis = args.axis or cfg.sweep.axis
        grid = cfg.sweep.grid
        if args.grid is not None:
            try:
                grid = tuple(float(g) if axis == "prior" else int(g) for g in args.grid.split(",") if g.strip())
            except ValueError:
                raise ConfigError(f"cannot parse grid {args.grid!r}", "sweep.grid") from None
        cfg = cfg.with_(sweep=replace(cfg.sweep, axis=axis, grid=grid))
        if not grid:
            raise ConfigError("sweep grid is empty", "sweep.grid")
    return cfg


def _write(path: str | None, text: str, stdout) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        stdout.write(text)


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve(args)
        if args.command == "describe":
            _write(args.out, describe(cfg) + "\n", stdout)
            return 0
        if args.command == "emit":
            _write(args.out, emit_config(cfg), stdout)
            return 0
        if args.command == "sweep":
            _write(args.out, run_sweep(cfg).to_csv(), stdout)
            return 0
        checks = CHECKS if args.check == "all" else (args.check,)
        certs = [validate(cfg, c) for c in checks]
        for c in certs:
            stdout.write("\n".join(c.lines()) + "\n")
        if args.out:
            with open(args.out, "w", encoding="utf-8") as f:
                json.dump([certificate_json(c) for c in certs], f, indent=2)
                f.write("\n")
        return 0 if all(c.passed for c in certs) else 1
    except ConfigError as e:
        stderr.write(f"risloc: config error: {e}\n")
        return 2
    except (ValueError, DegenerateGeometryError) as e:
        stderr.write(f"risloc: error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
