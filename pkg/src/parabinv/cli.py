"""Configuration-driven runs.

A run is described by a YAML file (see :class:`RunConfig`); flags override
``seed``, ``threads`` and ``out``.  Every run writes ``summary.txt`` (flat
``key = value`` lines under ``[section]`` headers, no timestamps) plus the
CSV tables of the command into the output directory.

Exit status: 0 success, 1 I/O or configuration error, 2 validation or
admissibility failure, 3 tolerance failure (only with
``--strict-tolerances``; otherwise the failures are listed as warnings).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .errors import (
    ConfigurationError,
    DomainError,
    InputError,
    NumericalError,
    ParabinvError,
    UnsupportedConfigurationError,
)
from .signal import CausalSignal, TimeGrid, builtin_signal, read_signal_csv, validate_gamma, write_signal_csv
from .solver import (
    FrequencySolution,
    SpaceGrid,
    fd_forward_oracle,
    regularity_ratio,
    residual_check,
    solve_shifted,
    solve_streaming,
    w_norm,
    write_field_csv,
)
from .spectral import FrequencyGrid, forward_transform, write_spectrum_csv
from .stochastic import PointMass, ProcessParams, duality_check, sample_first_passage, write_histogram_csv
from .symbolkit import CoefficientSet, Verdict, check_admissible, hardy_bounds, require_strict, write_roots_csv

__all__ = ["RunConfig", "Results", "run", "emit_report", "main", "COMMANDS"]

COMMANDS = ("validate", "solve", "shift-solve", "absorb-check", "duality", "norms")

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_TOLERANCE = 0, 1, 2, 3


@dataclass
class Coefficients:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    k0: float = 1.0
    k1: float = 0.0


@dataclass
class Grids:
    dt: float = 1e-3
    n: int = 16384
    dx: float = 1e-2
    nx: int | None = None  # None: long enough for exp(-b x/2) to reach 1e-12
    d_omega: float | None = None  # None (with m): FFT grid of the time grid
    m: int | None = None


@dataclass
class Tolerances:
    gamma: float = 1e-6
    pde: float = 1e-3  # relative to the W norm
    bc: float = 1e-3  # relative to ||g||
    ic: float = 1e-6
    absorb: float = 1e-2  # ||v(., 0)|| / ||v*||
    control_factor: float = 10.0
    z: float = 3.0
    quadrature: float = 1e-3  # relative to max(|rhs|, 1e-3)


_NESTED = {"coefficients": Coefficients, "grids": Grids, "tolerances": Tolerances}


@dataclass
class RunConfig:
    """Everything a run depends on.

    ``signal`` and the entries of ``signals`` are builtin names
    (``exp-sin``, ``ramp-decay``, ``bump``, ``zero``, ``exp-sin:k``) or paths
    to ``t,value`` CSV files.
    """

    command: str = "validate"
    coefficients: Coefficients = field(default_factory=Coefficients)
    grids: Grids = field(default_factory=Grids)
    signal: str = "exp-sin"
    signals: list[str] = field(default_factory=list)  # extra inputs for duality and norms
    control_signal: str = "ramp-decay"  # mismatched boundary data for absorb-check
    M: float | None = None
    T: float = 5.0
    a0: float = 1.0
    seed: int = 0
    n_paths: int = 100_000
    n_steps: int = 4096
    threads: int = 1
    write_field: bool = True
    tolerances: Tolerances = field(default_factory=Tolerances)
    out: str = "out"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigurationError("config must be a mapping")
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            if f.name in _NESTED:
                value = _build(_NESTED[f.name], value, f.name)
            elif f.name == "signals":
                if not isinstance(value, list) or not all(isinstance(s, str) for s in value):
                    raise ConfigurationError("signals must be a list of strings")
            else:
                value = _coerce(f.name, value, f.type)
            kwargs[f.name] = value
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**kwargs)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, allow_unicode=True)

    @classmethod
    def loads(cls, text: str) -> RunConfig:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
        return cls.from_dict(data or {})

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def _coerce(name: str, value, type_name: str):
    optional = "None" in type_name
    if value is None:
        if optional:
            return None
        raise ConfigurationError(f"{name} must not be null")
    base = type_name.split("|")[0].strip()
    try:
        if base == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if base == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if base == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if base == "str":
            if not isinstance(value, str):
                raise TypeError
            return value
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name}: expected {base}, got {value!r}") from None
    return value


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where} must be a mapping")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigurationError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")
    return cls(**{k: _coerce(f"{where}.{k}", v, names[k].type) for k, v in data.items()})


# --------------------------------------------------------------------------
# results and reporting


@dataclass
class Results:
    """Report sections, table writers keyed by file name, and tolerance warnings."""

    sections: list[tuple[str, dict[str, Any]]] = field(default_factory=list)
    tables: dict[str, Callable[[Path], None]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def add(self, name: str, values: dict[str, Any]) -> None:
        self.sections.append((name, values))

    def check(self, label: str, value: float, limit: float, *, at_least: bool = False) -> None:
        ok = value >= limit if at_least else value <= limit
        if not (ok and math.isfinite(value)):
            rel = ">=" if at_least else "<="
            self.warnings.append(f"{label} = {_fmt(value)} violates {rel} {_fmt(limit)}")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def emit_report(results: Results, out_dir: str | Path, *, status: str = "ok") -> list[Path]:
    """Write ``summary.txt`` and every table; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [f"status = {status}", f"results = {len(results.sections)}", f"warnings = {len(results.warnings)}"]
    for w in results.warnings:
        lines.append(f"warning = {w}")
    for name, values in results.sections:
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in values.items())
    summary = out / "summary.txt"
    summary.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written = [summary]
    for fname in sorted(results.tables):
        path = out / fname
        results.tables[fname](path)
        written.append(path)
    return written


# --------------------------------------------------------------------------
# commands


def _load_signal(source: str, cfg: RunConfig) -> CausalSignal:
    if source.endswith(".csv") or Path(source).is_file():
        try:
            return read_signal_csv(source)
        except OSError as exc:
            raise ConfigurationError(f"cannot read signal file {source}: {exc}") from exc
    return builtin_signal(source, TimeGrid(cfg.grids.dt, cfg.grids.n))


def _coeffs(cfg: RunConfig) -> CoefficientSet:
    c = cfg.coefficients
    return CoefficientSet(c.a, c.b, c.c, c.k0, c.k1)


def _fgrid(cfg: RunConfig, tgrid: TimeGrid) -> FrequencyGrid | None:
    g = cfg.grids
    if g.d_omega is None and g.m is None:
        return None
    if g.d_omega is None or g.m is None:
        raise ConfigurationError("grids.d_omega and grids.m must be given together")
    fgrid = FrequencyGrid(g.d_omega, g.m)
    # raises ConfigurationError for aliasing or mismatched grids
    forward_transform(CausalSignal.zeros(tgrid), fgrid)
    return fgrid


def _xgrid(cfg: RunConfig, coeffs: CoefficientSet) -> SpaceGrid:
    if cfg.grids.nx is not None:
        return SpaceGrid(cfg.grids.dx, cfg.grids.nx)
    return SpaceGrid.for_decay(coeffs.b, cfg.grids.dx)


def _table(header: list[str], columns: list[np.ndarray]) -> Callable[[Path], None]:
    def write(path: Path) -> None:
        table = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(header), comments="", encoding="utf-8")

    return write


def _field_writer(model: FrequencySolution, xgrid: SpaceGrid, block_rows: int = 32) -> Callable[[Path], None]:
    # same bytes as write_field_csv, one block of rows at a time
    def write(path: Path) -> None:
        times = model.tgrid.times
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,t,u,u_x,u_xx,u_t\n")
            xs = xgrid.xs
            for lo in range(0, xs.size, block_rows):
                rows = model.rows(xs[lo : lo + block_rows])
                X, T = np.meshgrid(xs[lo : lo + block_rows], times, indexing="ij")
                table = np.column_stack([a.ravel() for a in (X, T, *rows)])
                np.savetxt(fh, table, fmt="%.17g", delimiter=",")

    return write


def _cmd_validate(cfg: RunConfig, res: Results) -> int:
    g = _load_signal(cfg.signal, cfg)
    report = validate_gamma(g, cfg.tolerances.gamma)
    res.add("gamma", dataclasses.asdict(report))
    adm = check_admissible(_coeffs(cfg))
    res.add("admissibility", {"verdict": adm.verdict.value, "m_min": adm.m_min, "reason": adm.reason})
    res.tables["signal.csv"] = lambda p: write_signal_csv(g, p)
    if report.is_member:
        res.tables["spectrum.csv"] = lambda p: write_spectrum_csv(forward_transform(g, _fgrid(cfg, g.grid)), p)
    if not report.is_member:
        res.warnings.append(f"signal rejected: {report.rejection_reason}")
        return EXIT_VALIDATION
    if adm.verdict is Verdict.REJECTED:
        res.warnings.append(f"coefficients rejected: {adm.reason}")
        return EXIT_VALIDATION
    return EXIT_OK


def _check_solve(res: Results, report, g_norm: float, tol: Tolerances) -> None:
    res.check("pde_residual", report.pde_residual, tol.pde)
    res.check("bc_residual", report.bc_residual, tol.bc * g_norm)
    res.check("ic_residual", report.ic_residual, tol.ic)


def _cmd_solve(cfg: RunConfig, res: Results) -> int:
    coeffs = _coeffs(cfg)
    require_strict(coeffs)
    g = _load_signal(cfg.signal, cfg)
    fgrid = _fgrid(cfg, g.grid)
    xgrid = _xgrid(cfg, coeffs)
    model = FrequencySolution(g, coeffs, fgrid, tol=cfg.tolerances.gamma)
    stream = solve_streaming(g, coeffs, xgrid, model.fgrid, tol=cfg.tolerances.gamma)
    report = stream.report
    res.add("grid", {"dt": g.grid.dt, "n": g.grid.n, "dx": xgrid.dx, "nx": xgrid.nx, "m": model.fgrid.m})
    res.add("solve", dataclasses.asdict(report))
    res.tables["row_l2.csv"] = _table(["x", "l2"], [xgrid.xs, stream.row_l2])
    res.tables["roots.csv"] = lambda p: write_roots_csv(coeffs, model.omegas, p)
    if cfg.write_field:
        res.tables["field.csv"] = _field_writer(model, xgrid)
    _check_solve(res, report, model.gamma.l2_norm, cfg.tolerances)
    return EXIT_OK


def _cmd_shift_solve(cfg: RunConfig, res: Results) -> int:
    if cfg.M is None:
        raise ConfigurationError("shift-solve needs M")
    coeffs = _coeffs(cfg)
    g = _load_signal(cfg.signal, cfg)
    fgrid = _fgrid(cfg, g.grid)
    xgrid = _xgrid(cfg, coeffs)
    fld = solve_shifted(g, coeffs, cfg.M, xgrid, fgrid, tol=cfg.tolerances.gamma)
    pde, bc, ic = residual_check(fld, coeffs, g)
    W = w_norm(fld)
    res.add("shift", {"M": cfg.M, "mu": coeffs.mu})
    res.add("solve", {"w_norm": W, "pde_residual": pde, "bc_residual": bc, "ic_residual": ic})
    if cfg.write_field:
        res.tables["field.csv"] = lambda p: write_field_csv(fld, p)
    res.check("pde_residual", pde, cfg.tolerances.pde)
    res.check("bc_residual", bc, cfg.tolerances.bc * validate_gamma(g).l2_norm)
    return EXIT_OK


def _cmd_absorb_check(cfg: RunConfig, res: Results) -> int:
    coeffs = _coeffs(cfg)
    require_strict(coeffs)
    g = _load_signal(cfg.signal, cfg)
    control = _load_signal(cfg.control_signal, cfg)
    if control.grid != g.grid:
        raise ConfigurationError("control signal must share the time grid of the signal")
    fgrid = _fgrid(cfg, g.grid)
    xgrid = _xgrid(cfg, coeffs)
    T = g.grid.index_of(cfg.T) * g.grid.dt
    stream = solve_streaming(g, coeffs, xgrid, fgrid, tol=cfg.tolerances.gamma, snapshot_times=[cfg.T])
    v_star = stream.snapshots[float(cfg.T)]
    v0 = fd_forward_oracle(v_star, g, coeffs, cfg.T)
    vc = fd_forward_oracle(v_star, control, coeffs, cfg.T)
    n_star, n0, nc = v_star.l2_norm(), v0.l2_norm(), vc.l2_norm()
    initial = stream.initial
    n_init = initial.l2_norm()
    diff = math.sqrt(float(np.sum((v0.values - initial.values) ** 2)) * xgrid.dx)
    res.add(
        "absorb",
        {
            "T": T,
            "v_star_norm": n_star,
            "v0_norm": n0,
            "v0_ratio": n0 / n_star if n_star > 0 else math.nan,
            "control_norm": nc,
            "control_over_v0": nc / n0 if n0 > 0 else math.inf,
            "spectral_initial_norm": n_init,
            "v0_minus_spectral_initial": diff,
        },
    )
    res.tables["absorb.csv"] = _table(
        ["x", "v_star", "v0", "v0_control", "u_initial"], [xgrid.xs, v_star.values, v0.values, vc.values, initial.values]
    )
    res.check("v0_ratio", n0 / n_star if n_star > 0 else math.inf, cfg.tolerances.absorb)
    res.check("control_over_v0", nc / n0 if n0 > 0 else math.inf, cfg.tolerances.control_factor, at_least=True)
    return EXIT_OK


def _cmd_duality(cfg: RunConfig, res: Results) -> int:
    coeffs = _coeffs(cfg)
    require_strict(coeffs)
    rho = PointMass(cfg.a0)
    params = ProcessParams.from_coefficients(coeffs, cfg.T, rho)
    inputs = [cfg.signal, *cfg.signals]
    signals = [_load_signal(s, cfg) for s in inputs]
    samples = sample_first_passage(params, cfg.seed, cfg.n_paths, n_steps=cfg.n_steps, threads=cfg.threads)
    reports = []
    for name, g in zip(inputs, signals):
        rep = duality_check(g, coeffs, rho, cfg.T, cfg.seed, cfg.n_paths, dx=cfg.grids.dx, fgrid=_fgrid(cfg, g.grid), samples=samples)
        reports.append(rep)
        res.add(f"duality {name}", dataclasses.asdict(rep))
        res.check(f"z_score[{name}]", rep.z_score, cfg.tolerances.z)
        res.check(
            f"quadrature_gap[{name}]",
            abs(rep.lhs_quadrature - rep.rhs) / max(abs(rep.rhs), 1e-3),
            cfg.tolerances.quadrature,
        )

    def write(path: Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("signal," + reports[0].csv_header())
            for name, rep in zip(inputs, reports):
                fh.write(f"{name}," + rep.csv_row())

    res.tables["duality.csv"] = write
    res.tables["fpt_histogram.csv"] = lambda p: write_histogram_csv(
        samples.tau[samples.absorbed], np.linspace(0.0, cfg.T, 51), p
    )
    return EXIT_OK


def _cmd_norms(cfg: RunConfig, res: Results) -> int:
    coeffs = _coeffs(cfg)
    require_strict(coeffs)
    inputs = [cfg.signal, *cfg.signals]
    xgrid = _xgrid(cfg, coeffs)
    reports = []
    for name in inputs:
        g = _load_signal(name, cfg)
        rep = solve_streaming(g, coeffs, xgrid, _fgrid(cfg, g.grid), tol=cfg.tolerances.gamma).report
        reports.append(rep)
        res.add(f"norms {name}", {"w12_norm_g": rep.w12_norm_g, "w_norm": rep.w_norm, "ratio": rep.ratio})
    res.add("regularity", {"max_ratio": regularity_ratio(reports)})
    g0 = _load_signal(inputs[0], cfg)
    hb = hardy_bounds(coeffs, _fgrid(cfg, g0.grid) or FrequencyGrid.for_time_grid(g0.grid))
    res.add("multiplier_bounds", dataclasses.asdict(hb))

    def write(path: Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["signal", "w12_norm_g", "w_norm", "ratio"])
            for name, rep in zip(inputs, reports):
                w.writerow([name, _fmt(rep.w12_norm_g), _fmt(rep.w_norm), _fmt(rep.ratio)])

    res.tables["norms.csv"] = write
    return EXIT_OK


_DISPATCH = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "shift-solve": _cmd_shift_solve,
    "absorb-check": _cmd_absorb_check,
    "duality": _cmd_duality,
    "norms": _cmd_norms,
}


def run(cfg: RunConfig, *, strict_tolerances: bool = False, stderr=None) -> int:
    """Execute ``cfg`` and write its artifacts; returns the exit status."""
    stderr = sys.stderr if stderr is None else stderr
    res = Results()
    try:
        status = _DISPATCH[cfg.command](cfg, res)
    except (ConfigurationError, UnsupportedConfigurationError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return _emit_safely(res, cfg, "config-error", EXIT_IO, stderr)
    except NumericalError as exc:
        print(f"error: {exc}", file=stderr)
        res.warnings.append(str(exc))
        return _emit_safely(res, cfg, "numerical-failure", EXIT_TOLERANCE, stderr)
    except (DomainError, InputError, ParabinvError) as exc:
        print(f"error: {exc}", file=stderr)
        res.warnings.append(str(exc))
        return _emit_safely(res, cfg, "validation-failure", EXIT_VALIDATION, stderr)
    if status == EXIT_OK and res.warnings:
        for w in res.warnings:
            print(f"WARN {w}", file=stderr)
        if strict_tolerances:
            return _emit_safely(res, cfg, "tolerance-failure", EXIT_TOLERANCE, stderr)
    label = "ok" if status == EXIT_OK else "validation-failure"
    return _emit_safely(res, cfg, label, status, stderr)


def _emit_safely(res: Results, cfg: RunConfig, label: str, status: int, stderr) -> int:
    try:
        emit_report(res, cfg.out, status=label)
    except OSError as exc:
        print(f"error: cannot write output to {cfg.out}: {exc}", file=stderr)
        return EXIT_IO
    return status


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parabinv", description=__doc__.split("\n\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the command in the config")
    p.add_argument("--config", type=Path, help="YAML run configuration")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", type=str)
    p.add_argument("--strict-tolerances", action="store_true", help="exit 3 when a tolerance check fails")
    p.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        overrides = {k: getattr(args, k) for k in ("command", "seed", "threads", "out") if getattr(args, k) is not None}
        if overrides:
            cfg = RunConfig.from_dict({**cfg.to_dict(), **overrides})
        if cfg.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if cfg.seed < 0:
            raise ConfigurationError("seed must be >= 0")
    except (OSError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.dump_config:
        sys.stdout.write(cfg.dumps())
        return EXIT_OK
    status = run(cfg, strict_tolerances=args.strict_tolerances)
    print(f"status = {status}")
    return status


if __name__ == "__main__":
    sys.exit(main())
