"""Command-line front end: ``superchi sweep|transient|verify``.

Exit codes: 0 success, 1 validation error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Iterable

import numpy as np

from . import __version__
from .config import STANDARD_RATES, ConfigError, RunConfig, config_header, load_config
from .model import DampingRates, IndefiniteLimit, ModelError, SystemDrive
from .oracle import OracleError, UnstableFit, build_generator, extract_susceptibilities, steady_state
from .stationary import (
    chi1,
    chi3,
    chi3_approx,
    chi3_limit_gd0,
    consistency_identity_gap,
    enhancement_factor,
    stationary_expectations,
    verify_stationarity,
)
from .transient import IntegrationError, integrate, time_grid

logger = logging.getLogger("superchi")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

SWEEP_COLUMNS = (
    "detuning",
    "re_chi1", "im_chi1", "abs_chi1",
    "re_chi3", "im_chi3", "abs_chi3",
    "re_chi3_approx", "im_chi3_approx", "abs_chi3_approx",
    "re_chi3_gd0", "im_chi3_gd0", "abs_chi3_gd0",
    "enhancement",
)
TRANSIENT_COLUMNS = ("t", "abs_chi3", "re_chi3", "im_chi3")
VERIFY_COLUMNS = ("check", "passed", "measured", "threshold")
INDEFINITE = "indefinite"


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def detuning_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.detuning_spacing == "log":
        return np.geomspace(cfg.detuning_min, cfg.detuning_max, cfg.detuning_count)
    return np.linspace(cfg.detuning_min, cfg.detuning_max, cfg.detuning_count)


def _complex_cells(prefix: str, fn, *args) -> tuple[dict[str, Any], str | None]:
    try:
        z = fn(*args)
    except IndefiniteLimit as exc:
        return {f"{p}_{prefix}": INDEFINITE for p in ("re", "im", "abs")}, f"{prefix}: {exc}"
    return {f"re_{prefix}": z.real, f"im_{prefix}": z.imag, f"abs_{prefix}": abs(z)}, None


def sweep_row(n_atoms: int, rates: DampingRates, detuning: float) -> dict[str, Any]:
    drive = SystemDrive(n_atoms, float(detuning))
    row: dict[str, Any] = {"detuning": float(detuning)}
    errors = []
    for prefix, fn in (("chi1", chi1), ("chi3", chi3),
                       ("chi3_approx", chi3_approx), ("chi3_gd0", chi3_limit_gd0)):
        cells, err = _complex_cells(prefix, fn, drive, rates)
        row.update(cells)
        if err:
            errors.append(err)
    try:
        row["enhancement"] = enhancement_factor(n_atoms, rates)
    except IndefiniteLimit as exc:
        row["enhancement"] = INDEFINITE
        errors.append(f"enhancement: {exc}")
    if errors:
        row["errors"] = errors
    return row


def _sweep_task(args):
    return sweep_row(*args)


def run_sweep(cfg: RunConfig) -> list[dict[str, Any]]:
    rates = cfg.rates
    if cfg.n_atoms < 2:
        raise ConfigError("sweep needs n_atoms >= 2")
    tasks = [(cfg.n_atoms, rates, float(d)) for d in detuning_grid(cfg)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            # map preserves input order regardless of completion order
            return list(pool.map(_sweep_task, tasks, chunksize=64))
    return [sweep_row(*t) for t in tasks]


# ---------------------------------------------------------------------------
# transient
# ---------------------------------------------------------------------------

def run_transient(cfg: RunConfig) -> list[dict[str, Any]]:
    drive = SystemDrive(cfg.n_atoms, cfg.detuning, cfg.field_amplitude)
    times = time_grid(cfg.t_end, cfg.t_count, cfg.t_spacing,
                      cfg.t_min if cfg.t_spacing == "log" else None)
    traj = integrate(drive, cfg.rates, cfg.t_end, times, rtol=cfg.rtol, atol=cfg.atol)
    return [{"t": float(t), "abs_chi3": abs(z), "re_chi3": z.real, "im_chi3": z.imag}
            for t, z in zip(traj.times, traj.chi3_t)]


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

@dataclass
class Check:
    check: str
    passed: bool
    measured: float
    threshold: float

    def __post_init__(self) -> None:
        self.passed = bool(self.passed)
        self.measured = float(self.measured)
        self.threshold = float(self.threshold)


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b)


def _oracle_task(args) -> list[Check]:
    n, rates, det, amps, tol1, tol3 = args
    drive = SystemDrive(n, det)
    tag = f"[N={n},gd={rates.gamma_d:g},gn={rates.gamma_n:g},det={det:g}]"
    try:
        report = extract_susceptibilities(drive, rates, amps, tolerance=tol3 / 10)
    except UnstableFit as exc:
        logger.warning("%s %s", tag, exc)
        return [Check(f"oracle_fit_stability{tag}", False, exc.stability, tol3)]
    e1 = _rel(report.chi1, chi1(drive, rates))
    e3 = _rel(report.chi3, chi3(drive, rates))
    rho = steady_state(build_generator(drive.with_amplitude(max(amps)), rates))
    sanity = max(rho.trace_error, rho.hermiticity_error)
    return [
        Check(f"oracle_chi1{tag}", e1 < tol1, e1, tol1),
        Check(f"oracle_chi3{tag}", e3 < tol3, e3, tol3),
        Check(f"density_matrix{tag}", sanity < 1e-12 and rho.min_eigenvalue >= -1e-8,
              sanity, 1e-12),
    ]


def run_verify(cfg: RunConfig) -> list[Check]:
    n = cfg.n_atoms
    if n < 2:
        raise ConfigError("verify needs n_atoms >= 2 (closed forms are defined for N >= 2)")
    rng = np.random.default_rng(cfg.seed)
    worst_plug = 0.0
    worst_gap = 0.0
    for _ in range(cfg.plugback_samples):
        gd, gn = rng.uniform(0, 0.2, size=2)
        if gd + gn == 0:
            gn = 0.1
        rates = DampingRates(cfg.gamma_r, gd * cfg.gamma_r, gn * cfg.gamma_r)
        drive = SystemDrive(n, rng.uniform(-10 * n, 10 * n) * cfg.gamma_r, cfg.field_amplitude)
        worst_plug = max(worst_plug, verify_stationarity(
            drive, rates, stationary_expectations(drive, rates)))
        worst_gap = max(worst_gap, consistency_identity_gap(drive, rates))
    checks = [
        Check("plugback_residual", worst_plug < cfg.plugback_tol, worst_plug, cfg.plugback_tol),
        Check("consistency_identity", worst_gap < 1e-12, worst_gap, 1e-12),
    ]
    if cfg.verify_rates == "standard":
        rate_sets = [DampingRates(cfg.gamma_r, gd * cfg.gamma_r, gn * cfg.gamma_r)
                     for gd, gn in STANDARD_RATES]
    else:
        rate_sets = [cfg.rates]
    tasks = [(n, rates, float(det), tuple(cfg.oracle_amplitudes),
              cfg.oracle_chi1_tol, cfg.oracle_chi3_tol)
             for rates in rate_sets for det in cfg.verify_detunings]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_oracle_task, tasks))
    else:
        results = [_oracle_task(t) for t in tasks]
    for group in results:
        checks.extend(group)
    return checks


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_value(value: Any) -> Any:
    if value == INDEFINITE:
        return None
    if isinstance(value, np.floating):
        return float(value)
    return value


def render(cfg: RunConfig, rows: Iterable[dict[str, Any]], columns: tuple[str, ...]) -> str:
    rows = list(rows)
    if cfg.format == "json":
        doc: dict[str, Any] = {
            "mode": cfg.mode,
            "version": __version__,
            "config": cfg.to_dict(),
            "columns": list(columns),
            "rows": [{**{c: _json_value(r[c]) for c in columns},
                      **({"errors": r["errors"]} if "errors" in r else {})}
                     for r in rows],
        }
        if cfg.mode == "verify":
            doc["passed"] = all(r["passed"] for r in rows)
        return json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# superchi {__version__} {cfg.mode}\n")
    buf.write(f"# config: {config_header(cfg)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _write(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superchi",
        description="Susceptibility sweeps, transients and oracle verification "
                    "for damped superradiant atoms.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode, help_text in (
        ("sweep", "chi1/chi3 spectra over a detuning grid"),
        ("transient", "chi3(t) after switch-on at t = 0"),
        ("verify", "plug-back and Lindblad-oracle checks"),
    ):
        p = sub.add_parser(mode, help=help_text)
        p.add_argument("--config", help="TOML file with flat key = value pairs")
        p.add_argument("--out", help="output path ('-' for stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--jobs", type=int, help="worker processes")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override one config key")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    for key in ("out", "format", "jobs"):
        value = getattr(args, key)
        if value is not None:
            overrides.append(f"{'output' if key == 'out' else key}={json.dumps(value)}")
    try:
        cfg = load_config(args.config, overrides, mode=args.mode)
        if cfg.mode == "sweep":
            rows, columns = run_sweep(cfg), SWEEP_COLUMNS
        elif cfg.mode == "transient":
            rows, columns = run_transient(cfg), TRANSIENT_COLUMNS
        else:
            rows = [asdict(c) for c in run_verify(cfg)]
            columns = VERIFY_COLUMNS
    except (ConfigError, ModelError, FileNotFoundError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except (IntegrationError, OracleError, IndefiniteLimit, ArithmeticError,
            np.linalg.LinAlgError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    _write(render(cfg, rows, columns), cfg.output)
    if cfg.mode == "verify":
        failed = [r["check"] for r in rows if not r["passed"]]
        if failed:
            logger.error("%d check(s) failed: %s", len(failed), ", ".join(failed))
            return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
