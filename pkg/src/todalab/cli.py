"""Command-line front end: config handling, dispatch, and report files.

Each run resolves its options from defaults, an optional flat key=value
config file, and command-line flags (flags win), validates them against
the target module's preconditions before any compute starts, then
writes its data files plus a manifest.json with the resolved config in
the exact string forms the parser accepts, so a manifest can be fed
back as a config file.  Exit codes: 0 success, 2 bad input, 1 numerical
failure.  Timestamps and wall time live only in the manifest; the data
files depend on nothing but the resolved config and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import metadata
from typing import Callable, Optional, Sequence

import numpy as np

from .bubbles import QUANTITY_KEYS, asymptotic_slope_table, fit_slopes
from .cartan import CartanMatrix, cartan_su
from .grid import GridSpec
from .minimizer import (
    MinimizeConfig,
    NonFiniteEnergyError,
    minimize,
    sweep,
    write_region_csv,
)
from .pohozaev import radius_scan, write_balance_csv
from .radial import (
    BlowUpError,
    ball_pohozaev,
    check_mass_relation,
    flux_residuals,
    integrate_radial,
    masses_and_exponents,
    sweep_shooting,
    write_solution_csv,
)

__all__ = [
    "RunConfig",
    "IdentityRow",
    "parse_and_dispatch",
    "emit_identity_suite",
    "main",
]

COMMANDS = ("minimize", "sweep", "bubble", "radial", "pohozaev", "identities")

EIGHT_PI = 8.0 * math.pi

IDENTITY_CSV_HEADER = "identity,parameter,measured,expected,residual,bound,status"

# canonical identity-suite parameters: the shooting values are the
# subfamily of a2 in [-2, 0.5] whose tails settle by r = 1000
SUITE_A2_VALUES = (-1.5, -1.0, -0.5, 0.0, 0.5)
SUITE_SCALES = tuple(math.e**k for k in (2, 3, 4, 5))
SUITE_BALL_RADII = (1.0, 10.0, 100.0)


class CliError(ValueError):
    """Bad flags, bad config keys, or failed module preconditions."""


def parse_pi_value(text: str) -> float:
    """A float with an optional literal pi suffix: '4pi', '3.0pi', 'pi'."""
    t = text.strip().lower()
    try:
        if t.endswith("pi"):
            head = t[:-2].strip()
            return (float(head) if head else 1.0) * math.pi
        return float(t)
    except ValueError:
        raise CliError(f"cannot parse value '{text.strip()}'") from None


def parse_couplings(text: str) -> tuple[float, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise CliError("couplings must be a comma-separated list")
    return tuple(parse_pi_value(p) for p in parts)


def parse_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise CliError("range must look like '1pi:5pi'")
    lo, hi = (parse_pi_value(p) for p in parts)
    if not lo < hi:
        raise CliError("range must be increasing")
    return lo, hi


def parse_grid_shape(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise CliError("grid shape must look like '9x9'")
    try:
        k1, k2 = int(parts[0]), int(parts[1])
    except ValueError:
        raise CliError("grid shape must look like '9x9'") from None
    if k1 < 1 or k2 < 1:
        raise CliError("grid shape must be positive")
    return k1, k2


def parse_scale(text: str) -> float:
    """A scale value, either a plain float or 'eK' meaning exp(K)."""
    t = text.strip().lower()
    if t.startswith("e") and t[1:]:
        try:
            return math.e ** float(t[1:])
        except ValueError:
            pass
    try:
        return float(t)
    except ValueError:
        raise CliError(f"cannot parse scale '{text.strip()}'") from None


def parse_scales(text: str) -> tuple[float, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise CliError("scales must be a comma-separated list")
    return tuple(parse_scale(p) for p in parts)


def parse_floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise CliError("expected a comma-separated list of numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise CliError(f"cannot parse number list '{text.strip()}'") from None


def parse_pair(text: str) -> tuple[float, float]:
    vals = parse_floats(text)
    if len(vals) != 2:
        raise CliError("expected exactly two comma-separated numbers")
    return vals[0], vals[1]


def parse_int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise CliError(f"cannot parse integer '{text.strip()}'") from None


def parse_float(text: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise CliError(f"cannot parse number '{text.strip()}'") from None


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise CliError(f"cannot parse boolean '{text.strip()}'")


def parse_choice(allowed: Sequence[str]) -> Callable[[str], str]:
    def convert(text: str) -> str:
        t = text.strip()
        if t not in allowed:
            raise CliError(f"expected one of {', '.join(allowed)}; got '{t}'")
        return t

    return convert


@dataclass(frozen=True)
class Option:
    name: str
    convert: Callable[[str], object]
    default: str
    help: str


# option tables drive the argparse setup, the config-file merge, and the
# manifest, so the three views of a run's configuration cannot drift
OPTIONS: dict[str, tuple[Option, ...]] = {
    "minimize": (
        Option("m", parse_couplings, "3.0pi,3.0pi", "couplings, pi suffix allowed"),
        Option("n", parse_int, "64", "grid cells per side (power of two)"),
        Option("max-iters", parse_int, "2000", "descent iteration budget"),
        Option("grad-tol", parse_float, "1e-6", "stationarity tolerance"),
        Option("seed", parse_int, "0", "rng seed for the smooth start"),
        Option("summary-only", parse_bool, "false", "omit field arrays from report.json"),
    ),
    "sweep": (
        Option("m-grid", parse_grid_shape, "9x9", "coupling grid shape, e.g. 9x9"),
        Option("range", parse_range, "1pi:5pi", "coupling range lo:hi per axis"),
        Option("n", parse_int, "64", "grid cells per side (power of two)"),
        Option("seed", parse_int, "0", "rng seed shared by all cells"),
    ),
    "bubble": (
        Option("m", parse_couplings, "3.0pi,3.0pi", "couplings, pi suffix allowed"),
        Option("scales", parse_scales, "e2,e3,e4,e5", "profile scales, eK = exp(K)"),
        Option("flat-radius", parse_float, "0.25", "truncation radius of the profile"),
    ),
    "radial": (
        Option("a0", parse_floats, "0,0", "center values of the profile components"),
        Option("r-max", parse_float, "1000", "outer integration radius"),
        Option("tol", parse_float, "1e-10", "integrator error control"),
        Option("nodes", parse_int, "600", "radial output nodes"),
    ),
    "pohozaev": (
        Option("m", parse_couplings, "3.0pi,3.0pi", "couplings, pi suffix allowed"),
        Option("n", parse_int, "64", "grid cells per side (power of two)"),
        Option("seed", parse_int, "0", "rng seed for the smooth start"),
        Option("center", parse_pair, "0.5,0.5", "disk center in the unit torus"),
        Option("radii", parse_floats, "0.1,0.15,0.2", "disk radii to scan"),
    ),
    "identities": (
        Option("m", parse_couplings, "3.0pi,3.0pi", "couplings for the slope rows"),
        Option("only", parse_choice(("all", "bubble", "radial")), "all", "subset to run"),
        Option("corrupt-cartan", parse_bool, "false", "fault-injection hook for tests"),
    ),
}

COMMON_OPTIONS = (
    Option("out", str, "", "output directory (default runs/<command>)"),
)


def _dest(name: str) -> str:
    return name.replace("-", "_")


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run: raw string forms plus converted values."""

    command: str
    raw: dict[str, str]
    values: dict[str, object]

    @property
    def out(self) -> str:
        return self.values["out"] or os.path.join("runs", self.command)

    @property
    def seed(self) -> int:
        return int(self.values.get("seed", 0))

    @property
    def n(self) -> Optional[int]:
        v = self.values.get("n")
        return None if v is None else int(v)

    @property
    def couplings(self) -> Optional[tuple[float, ...]]:
        return self.values.get("m")

    @property
    def rank(self) -> int:
        m = self.couplings
        return len(m) if m is not None else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="todalab",
        description="torus energy minimization and radial identity checks",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subs.add_parser(command)
        sub.add_argument("--config", default=None, help="flat key=value config file")
        for opt in OPTIONS[command] + COMMON_OPTIONS:
            sub.add_argument(f"--{opt.name}", dest=_dest(opt.name), default=None,
                             help=f"{opt.help} (default {opt.default or 'runs/' + command})")
    return parser


def _load_config_file(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if "=" not in stripped:
                    raise CliError(f"{path}:{lineno}: expected key = value")
                key, _, value = stripped.partition("=")
                entries[key.strip()] = value.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from None
    return entries


def resolve_config(command: str, cli_raw: dict[str, Optional[str]],
                   config_path: Optional[str]) -> RunConfig:
    """Merge defaults, config file, and flags; convert and validate."""
    table = OPTIONS[command] + COMMON_OPTIONS
    known = {opt.name: opt for opt in table}
    file_raw = _load_config_file(config_path) if config_path else {}
    for key in file_raw:
        if key not in known:
            raise CliError(f"unknown config key: {key}")
    raw: dict[str, str] = {}
    values: dict[str, object] = {}
    for opt in table:
        given = cli_raw.get(_dest(opt.name))
        text = given if given is not None else file_raw.get(opt.name, opt.default)
        raw[opt.name] = text
        values[_dest(opt.name)] = opt.convert(text)
    return RunConfig(command=command, raw=raw, values=values)


def _precheck(config: RunConfig) -> None:
    """Fail fast on module preconditions before any compute starts."""
    if config.command in ("minimize", "sweep", "pohozaev"):
        GridSpec(config.n)
    if config.command in ("minimize", "pohozaev"):
        cartan_su(config.rank)
    if config.command == "pohozaev":
        h = 1.0 / config.n
        for r in config.values["radii"]:
            if not 4 * h <= r <= 0.4:
                raise ValueError("r must lie in [4h, 0.4]")
        cx, cy = config.values["center"]
        if not (0 <= cx < 1 and 0 <= cy < 1):
            raise ValueError("center must lie in the unit torus")
    if config.command == "radial":
        a0 = config.values["a0"]
        cartan_su(len(a0))
        if config.values["r_max"] < 10.0:
            raise ValueError("r_max must be at least 10")
        if not 1e-12 <= config.values["tol"] <= 1e-6:
            raise ValueError("tol must lie in [1e-12, 1e-6]")
        if config.values["nodes"] < 16:
            raise ValueError("nodes must be at least 16")
    if config.command == "bubble":
        scales = sorted(config.values["scales"])
        if len(scales) < 4:
            raise ValueError("need at least four scales")
        if scales[-1] / scales[0] < math.e**2:
            raise ValueError("scales must span at least a factor of e^2")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _version() -> str:
    try:
        return "v" + metadata.version("todalab")
    except metadata.PackageNotFoundError:
        return "v0+unknown"


def _write_manifest(config: RunConfig, wall_time: float) -> None:
    manifest = {
        "command": config.command,
        "config": dict(sorted(config.raw.items())),
        "version": _version(),
        "wall_time_s": round(wall_time, 3),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    _write_json(os.path.join(config.out, "manifest.json"), manifest)


def _run_minimize(config: RunConfig) -> int:
    spec = GridSpec(config.n)
    mc = MinimizeConfig(
        max_iters=config.values["max_iters"],
        grad_tol=config.values["grad_tol"],
        seed=config.seed,
    )
    report = minimize(config.couplings, spec, config=mc)
    payload = report.to_dict(include_fields=not config.values["summary_only"])
    payload["m"] = list(config.couplings)
    payload["n"] = config.n
    _write_json(os.path.join(config.out, "report.json"), payload)
    return 0


def _run_sweep(config: RunConfig) -> int:
    spec = GridSpec(config.n)
    k1, k2 = config.values["m_grid"]
    lo, hi = config.values["range"]
    axis1 = np.linspace(lo, hi, k1)
    axis2 = np.linspace(lo, hi, k2)
    couplings = [(float(m1), float(m2)) for m1 in axis1 for m2 in axis2]
    rows = sweep(couplings, spec, config=MinimizeConfig(seed=config.seed))
    write_region_csv(rows, os.path.join(config.out, "region.csv"))
    return 0


def _run_bubble(config: RunConfig) -> int:
    report = fit_slopes(
        config.values["scales"],
        config.couplings,
        flat_radius=config.values["flat_radius"],
    )
    expected = asymptotic_slope_table(config.couplings)
    path = os.path.join(config.out, "slopes.csv")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("quantity,fitted_slope,expected_slope,intercept,max_residual\n")
        for key in QUANTITY_KEYS:
            fit = report.fits[key]
            handle.write(
                f"{key},{fit.slope:.12g},{expected[key]:.12g},"
                f"{fit.intercept:.12g},{fit.max_residual:.12g}\n"
            )
    return 0


def _run_radial(config: RunConfig) -> int:
    sol = integrate_radial(
        config.values["a0"],
        r_max=config.values["r_max"],
        tol=config.values["tol"],
        nodes=config.values["nodes"],
    )
    write_solution_csv(sol, os.path.join(config.out, "radial.csv"))
    payload: dict = {
        "a0": list(config.values["a0"]),
        "r_max": config.values["r_max"],
        "flux_max": float(flux_residuals(sol).max()),
    }
    try:
        report = masses_and_exponents(sol)
    except ValueError as exc:
        payload["outcome"] = "tail"
        payload["note"] = str(exc)
    else:
        relation = check_mass_relation(*report.alpha) if len(report.alpha) == 2 else None
        payload["outcome"] = "converged"
        payload["alpha"] = list(report.alpha)
        payload["beta"] = list(report.beta)
        payload["alpha_above_4pi"] = list(report.alpha_above_4pi)
        payload["beta_above_4pi"] = list(report.beta_above_4pi)
        if relation is not None:
            payload["mass_relation_rel"] = relation.relative
    _write_json(os.path.join(config.out, "report.json"), payload)
    return 0


def _run_pohozaev(config: RunConfig) -> int:
    spec = GridSpec(config.n)
    report = minimize(
        config.couplings, spec, config=MinimizeConfig(seed=config.seed)
    )
    balances = radius_scan(
        report.final_u,
        config.couplings,
        config.values["center"],
        config.values["radii"],
    )
    write_balance_csv(balances, os.path.join(config.out, "balance.csv"))
    payload = {
        "m": list(config.couplings),
        "n": config.n,
        "minimize_status": report.status,
        "balances": [b.to_dict() for b in balances],
    }
    _write_json(os.path.join(config.out, "report.json"), payload)
    return 0


@dataclass(frozen=True)
class IdentityRow:
    identity: str
    parameter: str
    measured: float
    expected: float
    residual: float
    bound: float
    status: str


def _row(identity: str, parameter: str, measured: float, expected: float,
         residual: float, bound: float) -> IdentityRow:
    ok = math.isfinite(residual) and abs(residual) < bound
    return IdentityRow(identity, parameter, float(measured), float(expected),
                       float(residual), float(bound), "PASS" if ok else "FAIL")


def _fail_row(identity: str, message: str) -> IdentityRow:
    return IdentityRow(identity, f"error: {message}", math.nan, math.nan,
                       math.nan, 0.0, "FAIL")


def _radial_identity_rows(cartan: Optional[CartanMatrix]) -> list[IdentityRow]:
    rows: list[IdentityRow] = []
    try:
        sol = integrate_radial((0.0, 0.0), cartan=cartan)
        report = masses_and_exponents(sol)
        for j, alpha in enumerate(report.alpha):
            rel = (alpha - EIGHT_PI) / EIGHT_PI
            rows.append(_row("radial_mass", f"alpha{j + 1}", alpha, EIGHT_PI, rel, 1e-3))
        flux = float(flux_residuals(sol).max())
        rows.append(_row("flux", "max_over_nodes", flux, 0.0, flux, 1e-5))
        for radius in SUITE_BALL_RADII:
            balance = ball_pohozaev(sol, radius)
            rel = balance.residual / abs(balance.lhs)
            rows.append(
                _row("ball_pohozaev", f"R={radius:g}", balance.lhs, balance.rhs, rel, 1e-4)
            )
        relation = check_mass_relation(*report.alpha)
        rows.append(
            _row("mass_relation", "symmetric", relation.residual, 0.0,
                 relation.relative, 1e-2)
        )
    except (ValueError, BlowUpError) as exc:
        rows.append(_fail_row("radial_symmetric", str(exc)))
    try:
        for shot in sweep_shooting(SUITE_A2_VALUES, cartan=cartan):
            bounds_hold = all(a > 4 * math.pi for a in shot.alpha) and all(
                b > 4 * math.pi for b in shot.beta
            )
            residual = shot.relation_rel if shot.outcome == "converged" else math.nan
            if not bounds_hold:
                residual = math.nan
            rows.append(
                _row("mass_relation", f"a2={shot.a2:g}", shot.relation_rel, 0.0,
                     residual, 1e-2)
            )
    except (ValueError, BlowUpError) as exc:
        rows.append(_fail_row("mass_relation", str(exc)))
    return rows


def _bubble_identity_rows(m: Sequence[float]) -> list[IdentityRow]:
    rows: list[IdentityRow] = []
    try:
        report = fit_slopes(SUITE_SCALES, m)
        expected = asymptotic_slope_table(m)
        for key in QUANTITY_KEYS:
            fitted = report.fits[key].slope
            target = expected[key]
            if target == 0.0:
                rows.append(_row("bubble_slope", key, fitted, 0.0, fitted, 0.05))
            else:
                rel = (fitted - target) / target
                rows.append(_row("bubble_slope", key, fitted, target, rel, 0.02))
    except ValueError as exc:
        rows.append(_fail_row("bubble_slope", str(exc)))
    return rows


def emit_identity_suite(
    only: str = "all",
    corrupt_cartan: bool = False,
    m: Sequence[float] = (3.0 * math.pi, 3.0 * math.pi),
) -> tuple[IdentityRow, ...]:
    """Run the canonical identity checks and return one row per check.

    The corrupt_cartan hook weakens the off-diagonal coupling fed to the
    radial runs so the mass-relation rows must fail; it exists to prove
    the suite cannot pass vacuously.
    """
    cartan = None
    if corrupt_cartan:
        entries = np.array([[2.0, -0.9], [-0.9, 2.0]])
        cartan = CartanMatrix(2, entries, np.linalg.inv(entries))
    rows: list[IdentityRow] = []
    if only in ("all", "radial"):
        rows.extend(_radial_identity_rows(cartan))
    if only in ("all", "bubble"):
        rows.extend(_bubble_identity_rows(m))
    return tuple(rows)


def write_identity_csv(rows: Sequence[IdentityRow], destination) -> None:
    own = isinstance(destination, (str, bytes)) or hasattr(destination, "__fspath__")
    handle = open(destination, "w", encoding="utf-8") if own else destination
    try:
        handle.write(IDENTITY_CSV_HEADER + "\n")
        for row in rows:
            handle.write(
                f"{row.identity},{row.parameter},{row.measured:.12g},"
                f"{row.expected:.12g},{row.residual:.12g},{row.bound:.12g},"
                f"{row.status}\n"
            )
    finally:
        if own:
            handle.close()


def _run_identities(config: RunConfig) -> int:
    rows = emit_identity_suite(
        only=config.values["only"],
        corrupt_cartan=config.values["corrupt_cartan"],
        m=config.couplings,
    )
    write_identity_csv(rows, os.path.join(config.out, "identities.csv"))
    return 0 if all(row.status == "PASS" for row in rows) else 1


RUNNERS = {
    "minimize": _run_minimize,
    "sweep": _run_sweep,
    "bubble": _run_bubble,
    "radial": _run_radial,
    "pohozaev": _run_pohozaev,
    "identities": _run_identities,
}


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        namespace = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = resolve_config(
            namespace.command, vars(namespace), namespace.config
        )
        _precheck(config)
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(config.out, exist_ok=True)
    started = time.perf_counter()
    try:
        code = RUNNERS[config.command](config)
    except (BlowUpError, NonFiniteEnergyError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        _write_manifest(config, time.perf_counter() - started)
        return 1
    _write_manifest(config, time.perf_counter() - started)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    return parse_and_dispatch(argv)
